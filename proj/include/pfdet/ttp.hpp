#pragma once
// Stage-2 test-time tuning: score the unlabeled test set with the stage-1
// context, select confidently-predicted samples per class (threshold filter,
// confidence-descending sort, TopK cap), then continue optimizing the context
// on those pseudo labels. Selection is one-shot by default; `rounds` exposes
// iterative re-selection.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pfdet/classifier.hpp"
#include "pfdet/kgp.hpp"
#include "pfdet/strings.hpp"
#include "pfdet/text_pipeline.hpp"

namespace pfdet {

struct SelectionConfig {
  double t_real = 0.999;
  double t_fake = 0.5;
  std::size_t top_k = 128;
};

struct TtpConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 128;
  std::size_t steps = 10;   // passes over the pseudo-labeled set
  std::size_t rounds = 1;   // re-selection rounds; 1 = one-shot
  std::uint64_t seed = 0;
};

struct ScoredSample {
  std::string sample_id;
  ProbabilityPair proba;
};

struct PseudoLabelSet {
  std::vector<std::string> real_ids;  // confidence-descending
  std::vector<std::string> fake_ids;  // confidence-descending
  std::map<std::string, double> confidences;

  bool empty() const { return real_ids.empty() && fake_ids.empty(); }
  std::size_t size() const { return real_ids.size() + fake_ids.size(); }
};

// t_real + t_fake >= 1 guarantees the two selected sets are disjoint because
// p_real + p_fake = 1.
inline void validate_selection(const SelectionConfig& cfg) {
  if (!(cfg.t_real > 0.0 && cfg.t_real < 1.0))
    fail(ErrorKind::Validation, "ttp.t_real must lie in (0, 1)");
  if (!(cfg.t_fake > 0.0 && cfg.t_fake < 1.0))
    fail(ErrorKind::Validation, "ttp.t_fake must lie in (0, 1)");
  if (cfg.t_real + cfg.t_fake < 1.0)
    fail(ErrorKind::Validation,
         "ttp.t_real + ttp.t_fake must be >= 1 (selected sets must stay disjoint)");
  if (cfg.top_k < 1) fail(ErrorKind::Validation, "ttp.top_k must be at least 1");
}

// Filter by class threshold (strict), sort by probability descending with
// ties broken by ascending sample id, cap at top_k.
inline PseudoLabelSet select_pseudo(std::span<const ScoredSample> scores,
                                    const SelectionConfig& cfg) {
  validate_selection(cfg);
  if (scores.empty()) fail(ErrorKind::Contract, "selection over an empty score list");

  struct Candidate {
    double p;
    const std::string* id;
  };
  PseudoLabelSet out;
  const auto select_side = [&](bool fake_side) {
    std::vector<Candidate> chosen;
    const double threshold = fake_side ? cfg.t_fake : cfg.t_real;
    for (const ScoredSample& s : scores) {
      const double p = fake_side ? s.proba.p_fake : s.proba.p_real;
      if (p > threshold) chosen.push_back({p, &s.sample_id});
    }
    std::sort(chosen.begin(), chosen.end(), [](const Candidate& a, const Candidate& b) {
      if (a.p != b.p) return a.p > b.p;
      return *a.id < *b.id;
    });
    if (chosen.size() > cfg.top_k) chosen.resize(cfg.top_k);
    auto& ids = fake_side ? out.fake_ids : out.real_ids;
    for (const Candidate& c : chosen) {
      ids.push_back(*c.id);
      out.confidences[*c.id] = c.p;
    }
  };
  select_side(false);
  select_side(true);
  return out;
}

inline std::vector<ScoredSample> score_samples(const EncoderPair& pair,
                                               const PromptContext& context,
                                               const PromptSet& prompts,
                                               std::span<const ImageEmbedding> embeddings,
                                               const ClassifierConfig& ccfg) {
  const Prototypes protos = compute_prototypes(pair, context, prompts);
  std::vector<ScoredSample> out;
  out.reserve(embeddings.size());
  for (const ImageEmbedding& x : embeddings)
    out.push_back({x.sample_id, predict_proba(similarities(x, protos), ccfg)});
  return out;
}

struct TtpOutcome {
  PromptContext context;
  TrainReport report;
  PseudoLabelSet pseudo;  // the selection persisted to the manifest
  bool skipped = false;
  std::string warning;
};

// Runs selection then tuning. With rounds > 1 the test set is re-scored with
// the tuned context between rounds; the persisted pseudo set is the last
// selection that actually trained. An empty first selection skips tuning and
// returns the context unchanged.
inline TtpOutcome ttp_tune(const PromptContext& start,
                           std::span<const ImageEmbedding> test_embeddings,
                           const EncoderPair& pair, const PromptSet& prompts,
                           const SelectionConfig& sel, const TtpConfig& tcfg,
                           const ClassifierConfig& ccfg, std::ostream* log = nullptr) {
  validate_selection(sel);
  if (test_embeddings.empty()) fail(ErrorKind::Validation, "test set is empty");

  std::unordered_map<std::string, const ImageEmbedding*> by_id;
  for (const ImageEmbedding& e : test_embeddings) by_id[e.sample_id] = &e;

  TtpOutcome out;
  out.context = start;
  out.report.fingerprint_before = fingerprint(pair);
  const auto t0 = std::chrono::steady_clock::now();

  TrainConfig step_cfg;
  step_cfg.learning_rate = tcfg.learning_rate;
  step_cfg.batch_size = tcfg.batch_size;
  step_cfg.seed = tcfg.seed;

  std::mt19937_64 rng(tcfg.seed);
  std::size_t global_step = 0;
  for (std::size_t round = 0; round < tcfg.rounds; ++round) {
    const auto scores = score_samples(pair, out.context, prompts, test_embeddings, ccfg);
    const PseudoLabelSet pseudo = select_pseudo(scores, sel);
    if (pseudo.empty()) {
      if (round == 0) {
        out.skipped = true;
        out.report.skipped = true;
        out.warning = "no test samples cleared the selection thresholds; context unchanged";
        out.pseudo = pseudo;
        return out;
      }
      break;  // later rounds may legitimately run dry
    }
    out.pseudo = pseudo;

    std::vector<LabeledEmbedding> pseudo_data;
    pseudo_data.reserve(pseudo.size());
    for (const std::string& id : pseudo.real_ids)
      pseudo_data.push_back({*by_id.at(id), 0});
    for (const std::string& id : pseudo.fake_ids)
      pseudo_data.push_back({*by_id.at(id), 1});

    AdamState adam;  // fresh state per round; the pseudo set changed
    std::vector<std::size_t> order(pseudo_data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LabeledEmbedding> batch;
    for (std::size_t pass = 0; pass < tcfg.steps; ++pass) {
      std::shuffle(order.begin(), order.end(), rng);
      double pass_loss = 0.0;
      for (std::size_t pos = 0; pos < order.size(); pos += tcfg.batch_size) {
        const std::size_t end = std::min(pos + tcfg.batch_size, order.size());
        batch.clear();
        for (std::size_t k = pos; k < end; ++k) batch.push_back(pseudo_data[order[k]]);
        const double loss = train_step(out.context, batch, pair, prompts, step_cfg, ccfg, adam);
        ++global_step;
        pass_loss += loss * static_cast<double>(batch.size());
        if (log != nullptr)
          (*log) << (pass + 1) << '\t' << global_step << '\t' << format_g17(loss) << '\n';
      }
      out.report.epoch_losses.push_back(pass_loss / static_cast<double>(pseudo_data.size()));
    }
  }
  out.report.steps = global_step;
  out.report.fingerprint_after = fingerprint(pair);
  out.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-label manifest: '#'-prefixed config echo, then one record per line,
// "sample_id<TAB>pseudo_label<TAB>confidence". Real selections first, then
// fake, each in confidence-descending order.
// ---------------------------------------------------------------------------

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline void save_pseudo_manifest(const PseudoLabelSet& pseudo, const ConfigEcho& echo,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open pseudo manifest for writing: " + path.string());
  for (const auto& [key, value] : echo) out << "# " << key << " = " << value << "\n";
  out << "# columns: sample_id\tpseudo_label\tconfidence\n";
  for (const std::string& id : pseudo.real_ids)
    out << id << '\t' << 0 << '\t' << format_g17(pseudo.confidences.at(id)) << '\n';
  for (const std::string& id : pseudo.fake_ids)
    out << id << '\t' << 1 << '\t' << format_g17(pseudo.confidences.at(id)) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing pseudo manifest: " + path.string());
}

struct PseudoRecord {
  std::string sample_id;
  int pseudo_label = 0;
  double confidence = 0.0;
};

inline std::vector<PseudoRecord> load_pseudo_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "pseudo manifest not found: " + path.string());
  std::vector<PseudoRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3)
      fail(ErrorKind::Validation, "malformed pseudo manifest line: '" + line + "'");
    PseudoRecord rec;
    rec.sample_id = cols[0];
    rec.pseudo_label = static_cast<int>(parse_int(cols[1], "pseudo_label"));
    rec.confidence = parse_double(cols[2], "confidence");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace pfdet
