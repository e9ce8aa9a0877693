#pragma once
// Prompt assembly from a concept bank, learnable-context initialization and
// checkpointing, and the class prototype computation.
//
// Both classes share one context: the real prompt is [ctx..., real-word
// tokens] and each fake prompt is [ctx..., concept tokens]. The fake
// prototype is the mean of the fake-prompt embeddings; it is re-normalized
// after averaging, which cannot change any cosine similarity but keeps
// stored prototypes unit-length.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pfdet/concept_bank.hpp"
#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/vecmath.hpp"

namespace pfdet {

struct PromptSet {
  TokenSequence real_prompt;
  std::vector<TokenSequence> fake_prompts;  // one per concept, bank order
};

struct Prototypes {
  TextEmbedding g_real;
  TextEmbedding g_fake;
};

namespace detail {

inline TokenSequence make_sequence(const TextEncoder& enc, const std::string& class_text,
                                   std::size_t n) {
  TokenSequence seq;
  seq.context_slots = n;
  seq.ids.assign(n, kContextPlaceholder);
  const auto toks = enc.tokenize(class_text);
  if (toks.empty())
    fail(ErrorKind::Validation, "class text produced no tokens: '" + class_text + "'");
  seq.ids.insert(seq.ids.end(), toks.begin(), toks.end());
  return seq;
}

}  // namespace detail

inline PromptSet build_prompts(const TextEncoder& enc, const ConceptBank& bank, std::size_t n) {
  if (n < 1) fail(ErrorKind::Contract, "prompt context length must be at least 1");
  validate_bank(bank);
  PromptSet out;
  out.real_prompt = detail::make_sequence(enc, bank.real_word.text, n);
  out.fake_prompts.reserve(bank.fake_concepts.size());
  for (const Concept& c : bank.fake_concepts)
    out.fake_prompts.push_back(detail::make_sequence(enc, c.text, n));
  return out;
}

// Zero-mean Gaussian initialization, std 0.02 by default.
inline PromptContext init_context(std::uint64_t seed, std::size_t n, std::size_t width,
                                  double init_std = 0.02) {
  if (n < 1 || width < 1)
    fail(ErrorKind::Contract, "context needs n >= 1 and width >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, init_std);
  PromptContext ctx;
  ctx.vectors.assign(n, Vec(width));
  for (Vec& v : ctx.vectors)
    for (double& x : v) x = noise(rng);
  return ctx;
}

// Prototypes depend on the current context, so they are recomputed on every
// optimization step.
inline Prototypes compute_prototypes(const EncoderPair& pair, const PromptContext& context,
                                     const PromptSet& prompts) {
  if (prompts.fake_prompts.empty())
    fail(ErrorKind::Contract, "prompt set has no fake prompts");
  Prototypes out;
  out.g_real = encode_text(pair, context, prompts.real_prompt);
  std::vector<Vec> fakes;
  fakes.reserve(prompts.fake_prompts.size());
  for (const TokenSequence& seq : prompts.fake_prompts)
    fakes.push_back(encode_text(pair, context, seq).vector);
  out.g_fake = {normalized(mean_of(fakes)), true};
  return out;
}

struct PrototypeGradients {
  Vec d_real;  // d(scalar)/d(g_real)
  Vec d_fake;  // d(scalar)/d(g_fake)
};

// Pulls gradients at the prototypes back to the context. Recomputes the
// forward pass; prompt encodings are cheap at desk scale.
inline void prototypes_vjp(const EncoderPair& pair, const PromptContext& context,
                           const PromptSet& prompts, const PrototypeGradients& grads,
                           PromptContext& grad_ctx) {
  pair.text->encode_vjp(context, prompts.real_prompt, grads.d_real, grad_ctx);

  std::vector<Vec> fakes;
  fakes.reserve(prompts.fake_prompts.size());
  for (const TokenSequence& seq : prompts.fake_prompts)
    fakes.push_back(encode_text(pair, context, seq).vector);
  const Vec m = mean_of(fakes);
  const double m_norm = norm(m);
  const Vec g = normalized(m);
  // d(g)/d(m) = (I - g g^T) / |m|, then the mean splits evenly.
  const double g_dot = dot(g, grads.d_fake);
  Vec d_m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    d_m[i] = (grads.d_fake[i] - g[i] * g_dot) / m_norm;
  const double inv_count = 1.0 / static_cast<double>(prompts.fake_prompts.size());
  Vec d_e(d_m.size());
  for (std::size_t i = 0; i < d_m.size(); ++i) d_e[i] = d_m[i] * inv_count;
  for (const TokenSequence& seq : prompts.fake_prompts)
    pair.text->encode_vjp(context, seq, d_e, grad_ctx);
}

inline PromptContext zero_like(const PromptContext& context) {
  PromptContext grad;
  grad.vectors.assign(context.size(), Vec(context.width(), 0.0));
  return grad;
}

// ---------------------------------------------------------------------------
// Context checkpoint file: magic "PFCTX1", u32 n, u32 width (little-endian),
// then row-major IEEE-754 doubles. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline constexpr char kContextMagic[6] = {'P', 'F', 'C', 'T', 'X', '1'};

inline void save_context(const PromptContext& context, const std::filesystem::path& path) {
  if (context.size() == 0 || context.width() == 0)
    fail(ErrorKind::Contract, "cannot checkpoint an empty context");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open checkpoint for writing: " + path.string());
  out.write(kContextMagic, sizeof(kContextMagic));
  const std::uint32_t n = static_cast<std::uint32_t>(context.size());
  const std::uint32_t width = static_cast<std::uint32_t>(context.width());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&width), sizeof(width));
  for (const Vec& v : context.vectors)
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint: " + path.string());
}

inline PromptContext load_context(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "checkpoint not found: " + path.string());
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kContextMagic, sizeof(magic)) != 0)
    fail(ErrorKind::Integrity, "bad checkpoint magic: " + path.string());
  std::uint32_t n = 0, width = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&width), sizeof(width));
  if (!in || n == 0 || width == 0 || n > (1u << 20) || width > (1u << 20))
    fail(ErrorKind::Integrity, "bad checkpoint header: " + path.string());
  PromptContext ctx;
  ctx.vectors.assign(n, Vec(width));
  for (Vec& v : ctx.vectors) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) fail(ErrorKind::Integrity, "truncated checkpoint: " + path.string());
  }
  char extra;
  if (in.read(&extra, 1))
    fail(ErrorKind::Integrity, "trailing bytes in checkpoint: " + path.string());
  return ctx;
}

}  // namespace pfdet
