#pragma once
// AUC (Mann-Whitney with half credit for ties, computed via midranks),
// overall accuracy at threshold 0.5, and per-subset report assembly.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"

namespace pfdet {

struct EvalRecord {
  std::string sample_id;
  int label = 0;       // 0 = real, 1 = fake
  double p_fake = 0.0; // score in [0, 1]
  std::string subset;
};

// Equals (concordant pairs + 0.5 * tied pairs) / (positives * negatives).
// Sort-based midrank computation, O(n log n).
inline double auc(std::span<const EvalRecord> records) {
  std::size_t positives = 0, negatives = 0;
  for (const EvalRecord& r : records) {
    if (r.label != 0 && r.label != 1)
      fail(ErrorKind::Contract, "labels must be 0 (real) or 1 (fake)");
    if (!(r.p_fake >= 0.0 && r.p_fake <= 1.0))
      fail(ErrorKind::Contract, "score out of [0, 1] for sample '" + r.sample_id + "'");
    (r.label == 1 ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0)
    fail(ErrorKind::Validation, "AUC is undefined without both classes present");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].p_fake < records[b].p_fake;
  });

  double rank_sum_positive = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && records[order[j]].p_fake == records[order[i]].p_fake) ++j;
    // 1-based midrank of the tie group [i, j)
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (records[order[k]].label == 1) rank_sum_positive += midrank;
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  const double u = rank_sum_positive - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

// Fraction of records where (p_fake >= 0.5) matches (label == 1). The
// boundary p_fake = 0.5 classifies as fake.
inline double overall_accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) fail(ErrorKind::Contract, "accuracy over an empty record list");
  std::size_t correct = 0;
  for (const EvalRecord& r : records) {
    const bool predicted_fake = r.p_fake >= 0.5;
    if (predicted_fake == (r.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

struct SubsetMetrics {
  std::string subset;
  std::size_t count = 0;
  std::size_t real_count = 0;
  std::size_t fake_count = 0;
  std::optional<double> auc;  // absent when the subset has a single class
  double oa = 0.0;
};

struct MetricsReport {
  std::vector<SubsetMetrics> subsets;   // sorted by subset tag
  std::optional<double> macro_auc;      // unweighted mean over defined subset AUCs
  double macro_oa = 0.0;
  std::vector<std::string> diagnostics;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

inline MetricsReport make_report(std::span<const EvalRecord> records,
                                 std::vector<std::pair<std::string, std::string>> config_echo = {}) {
  if (records.empty()) fail(ErrorKind::Validation, "cannot build a report from zero records");
  std::map<std::string, std::vector<EvalRecord>> by_subset;
  for (const EvalRecord& r : records) {
    if (r.subset.empty()) fail(ErrorKind::Contract, "record without a subset tag");
    by_subset[r.subset].push_back(r);
  }

  MetricsReport report;
  report.config_echo = std::move(config_echo);
  double auc_sum = 0.0, oa_sum = 0.0;
  std::size_t auc_defined = 0;
  for (auto& [tag, recs] : by_subset) {
    SubsetMetrics m;
    m.subset = tag;
    m.count = recs.size();
    for (const EvalRecord& r : recs) (r.label == 1 ? m.fake_count : m.real_count) += 1;
    m.oa = overall_accuracy(recs);
    if (m.real_count > 0 && m.fake_count > 0) {
      m.auc = auc(recs);
      auc_sum += *m.auc;
      ++auc_defined;
    } else {
      report.diagnostics.push_back("subset '" + tag +
                                   "' has a single class; AUC undefined and excluded from the macro average");
    }
    oa_sum += m.oa;
    report.subsets.push_back(std::move(m));
  }
  if (auc_defined > 0) report.macro_auc = auc_sum / static_cast<double>(auc_defined);
  report.macro_oa = oa_sum / static_cast<double>(report.subsets.size());
  return report;
}

// ---------------------------------------------------------------------------
// Report file: "key = value" lines with a stable key order; scores carry 17
// significant digits. Parse support exists so downstream tooling can audit
// runs without recomputing.
// ---------------------------------------------------------------------------

inline std::string serialize_report(const MetricsReport& report) {
  std::string out;
  out += "# metrics report\n";
  for (const auto& [key, value] : report.config_echo)
    out += "config." + key + " = " + value + "\n";
  std::string tags;
  for (const SubsetMetrics& m : report.subsets) {
    if (!tags.empty()) tags += ",";
    tags += m.subset;
  }
  out += "subsets = " + tags + "\n";
  for (const SubsetMetrics& m : report.subsets) {
    const std::string prefix = "subset." + m.subset + ".";
    out += prefix + "count = " + std::to_string(m.count) + "\n";
    out += prefix + "real = " + std::to_string(m.real_count) + "\n";
    out += prefix + "fake = " + std::to_string(m.fake_count) + "\n";
    out += prefix + "auc = " + (m.auc ? format_g17(*m.auc) : std::string("undefined")) + "\n";
    out += prefix + "oa = " + format_g17(m.oa) + "\n";
  }
  out += "macro.auc = " + (report.macro_auc ? format_g17(*report.macro_auc) : std::string("undefined")) + "\n";
  out += "macro.oa = " + format_g17(report.macro_oa) + "\n";
  for (const std::string& d : report.diagnostics) out += "diagnostic = " + d + "\n";
  return out;
}

inline void save_report(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open report for writing: " + path.string());
  out << serialize_report(report);
  if (!out) fail(ErrorKind::Io, "failed writing report: " + path.string());
}

// Minimal reader: returns the flat key -> value map of a serialized report.
inline std::map<std::string, std::string> load_report_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "report not found: " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    values[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return values;
}

}  // namespace pfdet
