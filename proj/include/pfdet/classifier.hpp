#pragma once
// Cosine similarities against the class prototypes, temperature-scaled
// two-way softmax, and the binary cross-entropy objective.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/text_pipeline.hpp"
#include "pfdet/vecmath.hpp"

namespace pfdet {

struct SimilarityPair {
  double s_real = 0.0;
  double s_fake = 0.0;
};

struct ProbabilityPair {
  double p_real = 0.0;
  double p_fake = 0.0;
};

struct ClassifierConfig {
  // Matches the logit scale of 100 used by pretrained vision-language
  // encoders; configurable via `classifier.tau`.
  double tau = 0.01;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorKind::Contract, "cosine of vectors with mismatched dimensions");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0))
    fail(ErrorKind::Contract, "cosine of a zero-norm vector");
  return dot(a, b) / (na * nb);
}

inline SimilarityPair similarities(const ImageEmbedding& x, const Prototypes& protos) {
  return {cosine(x.vector, protos.g_real.vector), cosine(x.vector, protos.g_fake.vector)};
}

// Stable two-way softmax: subtracts the max logit before exponentiation, so
// small temperatures (tau = 0.01 gives logits of magnitude 100) cannot
// overflow.
inline ProbabilityPair predict_proba(const SimilarityPair& s, const ClassifierConfig& cfg) {
  if (!(cfg.tau > 0.0)) fail(ErrorKind::Contract, "temperature must be positive");
  const double z_real = s.s_real / cfg.tau;
  const double z_fake = s.s_fake / cfg.tau;
  const double m = std::max(z_real, z_fake);
  const double e_real = std::exp(z_real - m);
  const double e_fake = std::exp(z_fake - m);
  const double denom = e_real + e_fake;
  return {e_real / denom, e_fake / denom};
}

inline constexpr double kProbEpsilon = 1e-12;

// Mean over the batch of -[y log p_fake + (1-y) log p_real], with
// probabilities clamped to [eps, 1-eps] before the log. Labels are 0 for
// real and 1 for fake.
inline double bce_loss(std::span<const ProbabilityPair> probas, std::span<const int> labels) {
  if (probas.size() != labels.size())
    fail(ErrorKind::Contract, "probability and label counts differ");
  if (probas.empty()) fail(ErrorKind::Contract, "loss over an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probas.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      fail(ErrorKind::Contract, "labels must be 0 (real) or 1 (fake)");
    const double p = labels[i] == 1 ? probas[i].p_fake : probas[i].p_real;
    total += -std::log(std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon));
  }
  return total / static_cast<double>(probas.size());
}

}  // namespace pfdet
