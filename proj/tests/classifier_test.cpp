#include "pfdet/classifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pfdet/kgp.hpp"
#include "test_util.hpp"

namespace pfdet {
namespace {

ImageEmbedding embedding_of(Vec v, const std::string& id = "x") {
  return {std::move(v), id, true};
}

Prototypes protos_of(Vec real, Vec fake) {
  return {{std::move(real), true}, {std::move(fake), true}};
}

TEST(Similarities, IdenticalAndAntipodalVectors) {
  const Vec g = normalized(Vec{0.3, -0.4, 0.5, 0.7});
  Vec neg = g;
  for (double& x : neg) x = -x;
  const SimilarityPair s = similarities(embedding_of(g), protos_of(g, neg));
  EXPECT_NEAR(s.s_real, 1.0, 1e-12);
  EXPECT_NEAR(s.s_fake, -1.0, 1e-12);
}

TEST(Similarities, WorkedDotProductExample) {
  const Vec x{1.0, 0.0};
  const Vec g = normalized(Vec{1.0, 1.0});
  const SimilarityPair s = similarities(embedding_of(x), protos_of(g, g));
  EXPECT_NEAR(s.s_real, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.s_real, 0.70711, 5e-6);
}

TEST(Similarities, ZeroNormVectorIsContractError) {
  const Vec g = normalized(Vec{1.0, 1.0});
  EXPECT_THROW(similarities(embedding_of(Vec{0.0, 0.0}), protos_of(g, g)), Error);
}

TEST(PredictProba, EqualSimilaritiesGiveHalf) {
  const ProbabilityPair p = predict_proba({0.37, 0.37}, {0.01});
  EXPECT_DOUBLE_EQ(p.p_real, 0.5);
  EXPECT_DOUBLE_EQ(p.p_fake, 0.5);
}

TEST(PredictProba, LogThreeGapGivesThreeQuarters) {
  // tau = 1 and s_fake - s_real = ln 3 puts exp ratio at 3:1.
  const double gap = std::log(3.0);
  const ProbabilityPair p = predict_proba({0.0, gap}, {1.0});
  EXPECT_NEAR(p.p_fake, 0.75, 1e-12);
  EXPECT_NEAR(p.p_real, 0.25, 1e-12);
}

TEST(PredictProba, SharpTemperatureStaysFiniteAndMatchesClosedForm) {
  // tau = 0.01 with a 0.2 similarity gap: logit difference 20.
  const ProbabilityPair p = predict_proba({0.8, 0.6}, {0.01});
  EXPECT_TRUE(std::isfinite(p.p_real));
  EXPECT_TRUE(std::isfinite(p.p_fake));
  const double expected_real = 1.0 / (1.0 + std::exp(-20.0));
  EXPECT_NEAR(p.p_real, expected_real, 1e-15);
  EXPECT_NEAR(1.0 - p.p_real, 2.0612e-9, 1e-13);
}

TEST(PredictProba, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  std::uniform_real_distribution<double> tau_u(0.002, 2.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double sr = s(rng), sf = s(rng);
    const double tau = trial % 3 == 0 ? 0.01 : tau_u(rng);
    const ProbabilityPair p = predict_proba({sr, sf}, {tau});
    const auto oracle = testutil::softmax_oracle(sr, sf, tau);
    EXPECT_NEAR(p.p_real, static_cast<double>(oracle.p_real), 1e-12);
    EXPECT_NEAR(p.p_fake, static_cast<double>(oracle.p_fake), 1e-12);
    EXPECT_NEAR(p.p_real + p.p_fake, 1.0, 1e-12);
  }
}

TEST(PredictProba, MonotoneInGapAndGapOnlyDependence) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double sr1 = s(rng), sf1 = s(rng), sr2 = s(rng), sf2 = s(rng);
    const double tau = 0.05 + 0.5 * std::abs(s(rng));
    const ProbabilityPair p1 = predict_proba({sr1, sf1}, {tau});
    const ProbabilityPair p2 = predict_proba({sr2, sf2}, {tau});
    const double gap1 = sf1 - sr1, gap2 = sf2 - sr2;
    if (gap1 > gap2) {
      EXPECT_GT(p1.p_fake, p2.p_fake);
    } else if (gap1 < gap2) {
      EXPECT_LT(p1.p_fake, p2.p_fake);
    }
    // shifting both similarities never changes the probabilities
    const double shift = s(rng) * 0.3;
    const ProbabilityPair shifted = predict_proba({sr1 + shift, sf1 + shift}, {tau});
    EXPECT_NEAR(shifted.p_fake, p1.p_fake, 1e-9);
  }
}

TEST(PredictProba, ArgmaxInvariantToTemperature) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  std::uniform_real_distribution<double> tau_u(0.002, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double sr = s(rng), sf = s(rng);
    if (sr == sf) continue;
    const bool fake_wins = sf > sr;
    for (int k = 0; k < 3; ++k) {
      const ProbabilityPair p = predict_proba({sr, sf}, {tau_u(rng)});
      EXPECT_EQ(p.p_fake >= 0.5, fake_wins);
    }
  }
}

TEST(PredictProba, RejectsNonPositiveTau) {
  EXPECT_THROW(predict_proba({0.1, 0.2}, {0.0}), Error);
  EXPECT_THROW(predict_proba({0.1, 0.2}, {-1.0}), Error);
}

TEST(BceLoss, SymmetricStartIsLnTwo) {
  const std::vector<ProbabilityPair> p(4, ProbabilityPair{0.5, 0.5});
  const std::vector<int> y{0, 1, 0, 1};
  EXPECT_NEAR(bce_loss(p, y), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(p, y), 0.693147, 1e-6);
}

TEST(BceLoss, WorkedScalarExample) {
  const std::vector<ProbabilityPair> p{{0.25, 0.75}};
  const std::vector<int> y{1};
  EXPECT_NEAR(bce_loss(p, y), -std::log(0.75), 1e-15);
  EXPECT_NEAR(bce_loss(p, y), 0.287682, 1e-6);
}

TEST(BceLoss, ConfidentCorrectPredictionsHitTheClampFloor) {
  const std::vector<ProbabilityPair> p{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<int> y{0, 1};
  const double loss = bce_loss(p, y);
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, -std::log(1.0 - 1e-12) + 1e-18);
}

TEST(BceLoss, ContractErrors) {
  const std::vector<ProbabilityPair> p{{0.5, 0.5}};
  EXPECT_THROW(bce_loss(p, std::vector<int>{}), Error);
  EXPECT_THROW(bce_loss(p, std::vector<int>{0, 1}), Error);
  EXPECT_THROW(bce_loss(p, std::vector<int>{2}), Error);
}

TEST(FullChain, LossGradientMatchesFiniteDifferences) {
  // Loss -> softmax -> cosine -> prototypes -> toy text encoder -> context.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> tau_u(0.2, 1.5);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const EncoderPair pair = make_toy_pair(seed, 8, 64);
    const PromptSet prompts = build_prompts(*pair.text, default_bank(), 1);
    const PromptContext ctx = init_context(seed + 7, 1, 8);
    const ClassifierConfig ccfg{tau_u(rng)};

    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<LabeledEmbedding> batch;
    for (int i = 0; i < 6; ++i) {
      Vec x(pair.dim);
      for (double& v : x) v = g(rng);
      batch.push_back({embedding_of(normalized(x), "s" + std::to_string(i)), i % 2});
    }

    PromptContext grad = zero_like(ctx);
    const double loss = batch_loss_and_grad(ctx, batch, pair, prompts, ccfg, grad);
    EXPECT_TRUE(std::isfinite(loss));
    Vec analytic;
    for (const Vec& v : grad.vectors) analytic.insert(analytic.end(), v.begin(), v.end());

    const auto numeric = testutil::fd_context_gradient(
        [&](const PromptContext& c) {
          PromptContext unused = zero_like(c);
          return batch_loss_and_grad(c, batch, pair, prompts, ccfg, unused);
        },
        ctx);
    EXPECT_LT(testutil::l2_relative_error(analytic, numeric), 1e-4) << "seed " << seed;
  }
}

}  // namespace
}  // namespace pfdet
