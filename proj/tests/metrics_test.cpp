#include "pfdet/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

namespace pfdet {
namespace {

using testutil::TempDir;

std::vector<EvalRecord> records_of(std::initializer_list<int> labels,
                                   std::initializer_list<double> scores,
                                   const std::string& subset = "all") {
  std::vector<EvalRecord> out;
  auto s = scores.begin();
  std::size_t i = 0;
  for (int label : labels) {
    out.push_back({"s" + std::to_string(i++), label, *s++, subset});
  }
  return out;
}

TEST(Auc, PerfectSeparationAndWorkedExample) {
  EXPECT_DOUBLE_EQ(auc(records_of({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9})), 1.0);
  EXPECT_DOUBLE_EQ(auc(records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1})), 0.75);
  EXPECT_DOUBLE_EQ(auc(records_of({1, 1, 0, 0}, {0.1, 0.2, 0.8, 0.9})), 0.0);
}

TEST(Auc, AllTiesGiveHalf) {
  EXPECT_DOUBLE_EQ(auc(records_of({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5})), 0.5);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc(records_of({1, 1}, {0.2, 0.9})), Error);
  EXPECT_THROW(auc(records_of({0, 0}, {0.2, 0.9})), Error);
}

TEST(Auc, MatchesPairCountingOracleWithTies) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n_dist(2, 400);
  std::uniform_int_distribution<int> grid(1, 12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = n_dist(rng);
    const int levels = grid(rng);  // coarse score grid forces plenty of ties
    std::vector<EvalRecord> recs;
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      const int label = u(rng) < 0.5 ? 0 : 1;
      has_pos |= label == 1;
      has_neg |= label == 0;
      const double score = std::floor(u(rng) * levels) / levels;
      recs.push_back({"s" + std::to_string(i), label, score, "all"});
    }
    if (!has_pos || !has_neg) continue;
    EXPECT_NEAR(auc(recs), testutil::pair_count_auc(recs), 1e-12) << "trial " << trial;
  }
}

TEST(Auc, InvariantUnderStrictlyIncreasingTransform) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 50; ++i)
      recs.push_back({"s" + std::to_string(i), i % 2, u(rng), "all"});
    std::vector<EvalRecord> squashed = recs;
    for (EvalRecord& r : squashed) r.p_fake = 1.0 / (1.0 + std::exp(-(r.p_fake * 4.0 - 2.0)));
    EXPECT_NEAR(auc(recs), auc(squashed), 1e-12);
  }
}

TEST(OverallAccuracy, BasicCounting) {
  EXPECT_DOUBLE_EQ(overall_accuracy(records_of({1, 0}, {0.9, 0.1})), 1.0);
  EXPECT_DOUBLE_EQ(overall_accuracy(records_of({1, 1}, {0.6, 0.4})), 0.5);
}

TEST(OverallAccuracy, BoundaryCountsAsFake) {
  EXPECT_DOUBLE_EQ(overall_accuracy(records_of({1, 1, 1}, {0.5, 0.5, 0.5})), 1.0);
  EXPECT_DOUBLE_EQ(overall_accuracy(records_of({0, 0}, {0.5, 0.5})), 0.0);
}

TEST(OverallAccuracy, AgreesWithArgmaxAwayFromBoundary) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double p = u(rng);
    if (p == 0.5) continue;
    const int label = u(rng) < 0.5 ? 0 : 1;
    const std::vector<EvalRecord> one = {{"s", label, p, "all"}};
    const bool argmax_fake = p > 1.0 - p;
    EXPECT_DOUBLE_EQ(overall_accuracy(one), argmax_fake == (label == 1) ? 1.0 : 0.0);
  }
}

TEST(Report, MacroAverageIsArithmeticMean) {
  // subset a: AUC 0.8 (3 of 4 pairs minus...) use known instances
  std::vector<EvalRecord> recs = records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1}, "a");  // 0.75
  const auto perfect = records_of({0, 1}, {0.1, 0.9}, "b");                             // 1.0
  recs.insert(recs.end(), perfect.begin(), perfect.end());
  const MetricsReport report = make_report(recs);
  ASSERT_EQ(report.subsets.size(), 2u);
  ASSERT_TRUE(report.macro_auc.has_value());
  EXPECT_NEAR(*report.macro_auc, (0.75 + 1.0) / 2.0, 1e-12);
  const double expected_oa =
      (overall_accuracy(records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1})) + 1.0) / 2.0;
  EXPECT_NEAR(report.macro_oa, expected_oa, 1e-12);
}

TEST(Report, SingleSubsetMacroEqualsSubset) {
  const MetricsReport report = make_report(records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1}, "only"));
  ASSERT_EQ(report.subsets.size(), 1u);
  ASSERT_TRUE(report.macro_auc.has_value());
  EXPECT_DOUBLE_EQ(*report.macro_auc, *report.subsets[0].auc);
  EXPECT_DOUBLE_EQ(report.macro_oa, report.subsets[0].oa);
}

TEST(Report, SingleClassSubsetExcludedWithDiagnostic) {
  std::vector<EvalRecord> recs = records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1}, "ok");
  recs.push_back({"x0", 1, 0.8, "onlyfakes"});
  recs.push_back({"x1", 1, 0.3, "onlyfakes"});
  const MetricsReport report = make_report(recs);
  ASSERT_EQ(report.subsets.size(), 2u);
  EXPECT_FALSE(report.subsets[1].auc.has_value());
  ASSERT_TRUE(report.macro_auc.has_value());
  EXPECT_DOUBLE_EQ(*report.macro_auc, 0.75);  // only the defined subset
  ASSERT_EQ(report.diagnostics.size(), 1u);
  EXPECT_NE(report.diagnostics[0].find("onlyfakes"), std::string::npos);
}

TEST(Report, PerSubsetValuesMatchOracleOnRandomData) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> tags = {"alpha", "beta", "gamma"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 120; ++i)
      recs.push_back({"s" + std::to_string(i), static_cast<int>(rng() % 2),
                      std::floor(u(rng) * 8) / 8, tags[rng() % tags.size()]});
    MetricsReport report;
    try {
      report = make_report(recs);
    } catch (const Error&) {
      continue;
    }
    for (const SubsetMetrics& m : report.subsets) {
      if (!m.auc) continue;
      std::vector<EvalRecord> subset;
      for (const EvalRecord& r : recs)
        if (r.subset == m.subset) subset.push_back(r);
      EXPECT_NEAR(*m.auc, testutil::pair_count_auc(subset), 1e-12);
    }
  }
}

TEST(Report, SerializationIsDeterministicAndParseable) {
  TempDir dir("report");
  std::vector<EvalRecord> recs = records_of({1, 0, 1, 0}, {0.9, 0.8, 0.7, 0.1}, "b_tag");
  const auto more = records_of({0, 1}, {0.2, 0.9}, "a_tag");
  recs.insert(recs.end(), more.begin(), more.end());
  const MetricsReport report = make_report(recs, {{"classifier.tau", "0.01"}});

  const auto p1 = dir.path() / "r1.txt";
  const auto p2 = dir.path() / "r2.txt";
  save_report(report, p1);
  save_report(report, p2);
  EXPECT_TRUE(testutil::files_identical(p1, p2));

  const auto values = load_report_values(p1);
  EXPECT_EQ(values.at("subsets"), "a_tag,b_tag");  // sorted tag order
  EXPECT_EQ(values.at("config.classifier.tau"), "0.01");
  EXPECT_EQ(values.at("subset.b_tag.auc"), format_g17(0.75));
  EXPECT_EQ(values.at("subset.a_tag.count"), "2");
  const double parsed_macro = parse_double(values.at("macro.auc"), "macro.auc");
  EXPECT_NEAR(parsed_macro, *report.macro_auc, 0.0);
}

}  // namespace
}  // namespace pfdet
