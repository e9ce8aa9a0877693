#pragma once
// Stage-1 training loop: optimizes only the prompt context on labeled image
// embeddings with Adam. Encoders stay frozen; the loop verifies that via the
// parameter fingerprint recorded before and after.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pfdet/classifier.hpp"
#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"
#include "pfdet/text_pipeline.hpp"

namespace pfdet {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 25;
  std::uint64_t seed = 0;
};

struct AdamState {
  Vec m;
  Vec v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_step(std::span<double> params, std::span<const double> grads, double lr,
                      AdamState& state) {
  if (params.size() != grads.size())
    fail(ErrorKind::Contract, "parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    fail(ErrorKind::Contract, "optimizer state does not match parameter count");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

struct LabeledEmbedding {
  ImageEmbedding embedding;
  int label = 0;  // 0 = real, 1 = fake
};

struct TrainReport {
  std::vector<double> epoch_losses;
  std::string checkpoint_path;
  std::string fingerprint_before;
  std::string fingerprint_after;
  double seconds = 0.0;
  std::size_t steps = 0;
  bool skipped = false;
};

namespace detail {

inline std::vector<std::size_t> sorted_by_id(std::span<const LabeledEmbedding> batch) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch[a].embedding.sample_id < batch[b].embedding.sample_id;
  });
  return order;
}

inline void flatten_grad(const PromptContext& grad, Vec& flat) {
  flat.clear();
  for (const Vec& v : grad.vectors) flat.insert(flat.end(), v.begin(), v.end());
}

inline void scatter_params(std::span<const double> flat, PromptContext& ctx) {
  std::size_t k = 0;
  for (Vec& v : ctx.vectors)
    for (double& x : v) x = flat[k++];
}

inline Vec flatten_params(const PromptContext& ctx) {
  Vec flat;
  for (const Vec& v : ctx.vectors) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

}  // namespace detail

// Analytic gradient of the mean batch loss with respect to the context:
// softmax/BCE gives d(loss)/d(similarity), cosine gives d(similarity)/d
// (prototype), and the prototype VJP finishes the chain. Returns the batch
// loss; `grad_ctx` must be zero-initialized by the caller.
inline double batch_loss_and_grad(const PromptContext& context,
                                  std::span<const LabeledEmbedding> batch,
                                  const EncoderPair& pair, const PromptSet& prompts,
                                  const ClassifierConfig& ccfg, PromptContext& grad_ctx) {
  if (batch.empty()) fail(ErrorKind::Contract, "empty batch");
  const Prototypes protos = compute_prototypes(pair, context, prompts);
  const Vec& g_real = protos.g_real.vector;
  const Vec& g_fake = protos.g_fake.vector;
  const double gr_norm = norm(g_real);
  const double gf_norm = norm(g_fake);

  // The batch reduction runs in sample-id order so evaluation order can never
  // change the result.
  const auto order = detail::sorted_by_id(batch);

  PrototypeGradients pg;
  pg.d_real.assign(g_real.size(), 0.0);
  pg.d_fake.assign(g_fake.size(), 0.0);
  double loss_total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : order) {
    const LabeledEmbedding& item = batch[idx];
    if (item.label != 0 && item.label != 1)
      fail(ErrorKind::Contract, "labels must be 0 (real) or 1 (fake)");
    const Vec& x = item.embedding.vector;
    const double x_norm = norm(x);
    if (!(x_norm > 0.0)) fail(ErrorKind::Contract, "zero-norm image embedding in batch");
    const SimilarityPair s{dot(x, g_real) / (x_norm * gr_norm),
                           dot(x, g_fake) / (x_norm * gf_norm)};
    const ProbabilityPair p = predict_proba(s, ccfg);
    const double y = static_cast<double>(item.label);
    const double p_corr = item.label == 1 ? p.p_fake : p.p_real;
    loss_total += -std::log(std::clamp(p_corr, kProbEpsilon, 1.0 - kProbEpsilon));

    // d(loss)/d(z_fake) = p_fake - y, d(loss)/d(z_real) = p_real - (1-y);
    // z = s / tau, and the mean over the batch scales everything by 1/B.
    const double d_s_fake = (p.p_fake - y) / ccfg.tau * inv_batch;
    const double d_s_real = (p.p_real - (1.0 - y)) / ccfg.tau * inv_batch;

    // d(cos)/d(g) = x / (|x||g|) - cos * g / |g|^2
    for (std::size_t i = 0; i < g_real.size(); ++i) {
      pg.d_real[i] += d_s_real * (x[i] / (x_norm * gr_norm) - s.s_real * g_real[i] / (gr_norm * gr_norm));
      pg.d_fake[i] += d_s_fake * (x[i] / (x_norm * gf_norm) - s.s_fake * g_fake[i] / (gf_norm * gf_norm));
    }
  }
  prototypes_vjp(pair, context, prompts, pg, grad_ctx);
  return loss_total * inv_batch;
}

// One optimizer step: recomputes prototypes from the current context,
// evaluates the batch loss, and updates only the context.
inline double train_step(PromptContext& context, std::span<const LabeledEmbedding> batch,
                         const EncoderPair& pair, const PromptSet& prompts,
                         const TrainConfig& tcfg, const ClassifierConfig& ccfg,
                         AdamState& adam) {
  PromptContext grad = zero_like(context);
  const double loss = batch_loss_and_grad(context, batch, pair, prompts, ccfg, grad);
  Vec params = detail::flatten_params(context);
  Vec grads;
  detail::flatten_grad(grad, grads);
  adam_step(params, grads, tcfg.learning_rate, adam);
  detail::scatter_params(params, context);
  return loss;
}

// Full stage-1 loop over cached embeddings. Shuffles with a generator seeded
// from the config, logs "epoch<TAB>step<TAB>loss" lines when a stream is
// given, and reports the encoder fingerprint before and after so freezing is
// auditable. Checkpoint persistence is the caller's concern.
inline TrainReport train(PromptContext& context, std::span<const LabeledEmbedding> data,
                         const EncoderPair& pair, const PromptSet& prompts,
                         const TrainConfig& tcfg, const ClassifierConfig& ccfg,
                         std::ostream* log = nullptr) {
  if (data.empty()) fail(ErrorKind::Validation, "training dataset is empty");
  if (tcfg.batch_size < 1) fail(ErrorKind::Contract, "batch size must be at least 1");
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  report.fingerprint_before = fingerprint(pair);

  std::mt19937_64 rng(tcfg.seed);
  AdamState adam;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledEmbedding> batch;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += tcfg.batch_size) {
      const std::size_t end = std::min(pos + tcfg.batch_size, order.size());
      batch.clear();
      for (std::size_t k = pos; k < end; ++k) batch.push_back(data[order[k]]);
      const double loss = train_step(context, batch, pair, prompts, tcfg, ccfg, adam);
      ++global_step;
      epoch_loss += loss * static_cast<double>(batch.size());
      if (log != nullptr)
        (*log) << (epoch + 1) << '\t' << global_step << '\t' << format_g17(loss) << '\n';
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  report.steps = global_step;
  report.fingerprint_after = fingerprint(pair);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace pfdet
