#pragma once
// Frozen text/image encoder contracts and deterministic toy implementations
// for desk-scale runs. Encoder parameters are fixed at construction and
// covered by a SHA-256 fingerprint so freezing is checkable; the only
// trainable quantity in the system is the prompt context, which is why the
// text contract exposes a vector-Jacobian product for it.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pfdet/digest.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"
#include "pfdet/vecmath.hpp"

namespace pfdet {

// Every image is resized to this spatial size before encoding.
inline constexpr int kInputSize = 224;
inline constexpr int kInputChannels = 3;
inline constexpr std::size_t kInputPixels =
    static_cast<std::size_t>(kInputSize) * kInputSize * kInputChannels;

// Decoded image: RGB interleaved, row-major, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * height * kInputChannels;
  }
};

// Token ids for one prompt. The first `context_slots` positions are reserved
// for the learnable context vectors and hold kContextPlaceholder; class-word
// tokens follow.
inline constexpr std::uint32_t kContextPlaceholder = 0;

struct TokenSequence {
  std::vector<std::uint32_t> ids;
  std::size_t context_slots = 0;
};

struct TextEmbedding {
  Vec vector;
  bool normalized = false;
};

struct ImageEmbedding {
  Vec vector;
  std::string sample_id;
  bool normalized = false;
};

// The learnable context: n vectors of the encoder's token-embedding width.
struct PromptContext {
  std::vector<Vec> vectors;

  std::size_t size() const { return vectors.size(); }
  std::size_t width() const { return vectors.empty() ? 0 : vectors.front().size(); }

  friend bool operator==(const PromptContext& a, const PromptContext& b) {
    return a.vectors == b.vectors;
  }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t embed_dim() const = 0;
  virtual std::size_t token_width() const = 0;
  virtual std::vector<std::uint32_t> tokenize(const std::string& text) const = 0;
  // Returns the unit-normalized embedding of the prompt.
  virtual Vec encode(const PromptContext& context, const TokenSequence& tokens) const = 0;
  // Accumulates d(scalar)/d(context) into `grad` given d(scalar)/d(embedding).
  // Adapters for real backbones implement this with their own autograd.
  virtual void encode_vjp(const PromptContext& context, const TokenSequence& tokens,
                          std::span<const double> grad_embedding,
                          PromptContext& grad) const = 0;
  virtual void add_fingerprint(Sha256& digest) const = 0;
};

class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual std::size_t embed_dim() const = 0;
  // Input must already be kInputSize x kInputSize; returns a unit vector.
  virtual Vec encode(const Image& input) const = 0;
  virtual void add_fingerprint(Sha256& digest) const = 0;
};

struct EncoderPair {
  std::shared_ptr<const TextEncoder> text;
  std::shared_ptr<const ImageEncoder> image;
  std::size_t dim = 0;
  std::string frozen_fingerprint;  // hex SHA-256 over all encoder parameters
};

inline std::string fingerprint(const EncoderPair& pair) {
  Sha256 digest;
  pair.text->add_fingerprint(digest);
  pair.image->add_fingerprint(digest);
  return to_hex(digest.finish());
}

// Bilinear resize with half-pixel-center alignment.
inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
  if (!src.valid()) fail(ErrorKind::Contract, "resize of an invalid image");
  Image dst;
  dst.width = out_w;
  dst.height = out_h;
  dst.pixels.resize(static_cast<std::size_t>(out_w) * out_h * kInputChannels);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    if (fy < 0) fy = 0;
    int y0 = static_cast<int>(fy);
    if (y0 > src.height - 1) y0 = src.height - 1;
    int y1 = y0 + 1 < src.height ? y0 + 1 : src.height - 1;
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      if (fx < 0) fx = 0;
      int x0 = static_cast<int>(fx);
      if (x0 > src.width - 1) x0 = src.width - 1;
      int x1 = x0 + 1 < src.width ? x0 + 1 : src.width - 1;
      const double wx = fx - x0;
      for (int c = 0; c < kInputChannels; ++c) {
        const auto at = [&](int yy, int xx) {
          return static_cast<double>(
              src.pixels[(static_cast<std::size_t>(yy) * src.width + xx) * kInputChannels + c]);
        };
        const double top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
        const double bot = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
        dst.pixels[(static_cast<std::size_t>(y) * out_w + x) * kInputChannels + c] =
            static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

inline TextEmbedding encode_text(const EncoderPair& pair, const PromptContext& context,
                                 const TokenSequence& tokens) {
  if (tokens.context_slots != context.size())
    fail(ErrorKind::Contract,
         "token sequence reserves " + std::to_string(tokens.context_slots) +
             " context slots but the context holds " + std::to_string(context.size()) +
             " vectors");
  if (tokens.ids.size() < tokens.context_slots + 1)
    fail(ErrorKind::Contract, "token sequence must keep at least one class token after the context");
  for (const Vec& v : context.vectors)
    if (v.size() != pair.text->token_width())
      fail(ErrorKind::Contract, "context vector width does not match the encoder token width");
  return {pair.text->encode(context, tokens), true};
}

inline ImageEmbedding encode_image(const EncoderPair& pair, const Image& image,
                                   const std::string& sample_id) {
  if (!image.valid())
    fail(ErrorKind::Data, "undecodable or malformed image for sample '" + sample_id + "'");
  Vec v;
  if (image.width == kInputSize && image.height == kInputSize) {
    v = pair.image->encode(image);
  } else {
    v = pair.image->encode(resize_bilinear(image, kInputSize, kInputSize));
  }
  return {std::move(v), sample_id, true};
}

// ---------------------------------------------------------------------------
// Toy encoders: all parameters derived from a seed, frozen at construction.
// ---------------------------------------------------------------------------

// Text: token-embedding table, mean pooling over context + token embeddings,
// a fixed square projection, then normalization. Linear in the context up to
// the final normalization. Token embeddings are unit-scale (per-component
// sigma 1/sqrt(dim)); the learnable context starts two orders of magnitude
// below that and acts as a small steering perturbation, with the temperature
// providing the logit amplification.
class ToyTextEncoder final : public TextEncoder {
 public:
  ToyTextEncoder(std::uint64_t seed, std::size_t dim, std::size_t vocab)
      : dim_(dim), vocab_(vocab), table_(vocab * dim), proj_(dim * dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> token_noise(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (double& x : table_) x = token_noise(rng);
    std::normal_distribution<double> proj_noise(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (double& x : proj_) x = proj_noise(rng);
  }

  std::size_t embed_dim() const override { return dim_; }
  std::size_t token_width() const override { return dim_; }

  // Whitespace split, then a stable hash folded into [1, vocab). Id 0 is
  // reserved for context placeholders; multi-word texts become multiple
  // tokens.
  std::vector<std::uint32_t> tokenize(const std::string& text) const override {
    std::vector<std::uint32_t> ids;
    for (const std::string& word : split(trim_copy(text), ' ')) {
      if (word.empty()) continue;
      ids.push_back(1 + static_cast<std::uint32_t>(fnv1a64(word) % (vocab_ - 1)));
    }
    return ids;
  }

  Vec encode(const PromptContext& context, const TokenSequence& tokens) const override {
    return normalized(project(pooled(context, tokens)));
  }

  void encode_vjp(const PromptContext& context, const TokenSequence& tokens,
                  std::span<const double> grad_embedding, PromptContext& grad) const override {
    if (grad.vectors.size() != context.size())
      fail(ErrorKind::Contract, "gradient accumulator shape does not match the context");
    const Vec h = pooled(context, tokens);
    const Vec u = project(h);
    const double u_norm = norm(u);
    const Vec e = normalized(u);
    // d(e)/d(u) = (I - e e^T) / |u|
    const double e_dot_g = dot(e, grad_embedding);
    Vec g_u(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      g_u[i] = (grad_embedding[i] - e[i] * e_dot_g) / u_norm;
    // g_h = proj^T g_u
    Vec g_h(dim_, 0.0);
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = 0; c < dim_; ++c) g_h[c] += proj_[r * dim_ + c] * g_u[r];
    const double scale = 1.0 / static_cast<double>(tokens.ids.size());
    for (std::size_t j = 0; j < context.size(); ++j) axpy(scale, g_h, grad.vectors[j]);
  }

  void add_fingerprint(Sha256& digest) const override {
    digest.update("toy-text");
    digest.update_u64(dim_);
    digest.update_u64(vocab_);
    digest.update_doubles(table_);
    digest.update_doubles(proj_);
  }

 private:
  Vec pooled(const PromptContext& context, const TokenSequence& tokens) const {
    Vec h(dim_, 0.0);
    for (std::size_t j = 0; j < tokens.context_slots; ++j) axpy(1.0, context.vectors[j], h);
    for (std::size_t j = tokens.context_slots; j < tokens.ids.size(); ++j) {
      const std::uint32_t id = tokens.ids[j];
      if (id >= vocab_) fail(ErrorKind::Contract, "token id out of vocabulary range");
      axpy(1.0, std::span<const double>(table_.data() + id * dim_, dim_), h);
    }
    const double inv_len = 1.0 / static_cast<double>(tokens.ids.size());
    for (double& x : h) x *= inv_len;
    return h;
  }

  Vec project(const Vec& h) const {
    Vec u(dim_, 0.0);
    for (std::size_t r = 0; r < dim_; ++r)
      u[r] = dot(std::span<const double>(proj_.data() + r * dim_, dim_), h);
    return u;
  }

  std::size_t dim_;
  std::size_t vocab_;
  std::vector<double> table_;  // vocab x dim
  std::vector<double> proj_;   // dim x dim
};

// Image: fixed linear map of the flattened pixels, plus bias, then
// normalization. No gradient path; images feed a frozen encoder.
class ToyImageEncoder final : public ImageEncoder {
 public:
  ToyImageEncoder(std::uint64_t seed, std::size_t dim)
      : dim_(dim), weights_(dim * kInputPixels), bias_(dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(static_cast<double>(kInputPixels)));
    for (double& x : weights_) x = w(rng);
    std::normal_distribution<double> b(0.0, 0.25);
    for (double& x : bias_) x = b(rng);
  }

  std::size_t embed_dim() const override { return dim_; }

  Vec encode(const Image& input) const override {
    if (input.width != kInputSize || input.height != kInputSize || !input.valid())
      fail(ErrorKind::Contract, "toy image encoder expects a 224x224 RGB input");
    Vec u = bias_;
    for (std::size_t r = 0; r < dim_; ++r) {
      const double* row = weights_.data() + r * kInputPixels;
      double acc = 0.0;
      for (std::size_t j = 0; j < kInputPixels; ++j) acc += row[j] * input.pixels[j];
      u[r] += acc;
    }
    return normalized(u);
  }

  void add_fingerprint(Sha256& digest) const override {
    digest.update("toy-image");
    digest.update_u64(dim_);
    digest.update_doubles(weights_);
    digest.update_doubles(bias_);
  }

 private:
  std::size_t dim_;
  std::vector<double> weights_;  // dim x kInputPixels
  std::vector<double> bias_;     // dim
};

inline EncoderPair make_toy_pair(std::uint64_t seed, std::size_t dim, std::size_t vocab) {
  if (dim < 2 || vocab < 2)
    fail(ErrorKind::Contract, "toy encoder needs dim >= 2 and vocab >= 2");
  EncoderPair pair;
  pair.text = std::make_shared<ToyTextEncoder>(seed, dim, vocab);
  // Distinct stream for the image side so the two encoders never share draws.
  pair.image = std::make_shared<ToyImageEncoder>(seed ^ 0x9e3779b97f4a7c15ULL, dim);
  pair.dim = dim;
  pair.frozen_fingerprint = fingerprint(pair);
  return pair;
}

}  // namespace pfdet
