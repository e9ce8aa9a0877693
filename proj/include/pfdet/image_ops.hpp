#pragma once
// Pixel-side plumbing for cache builds: decoding (OpenCV), the cache-build
// augmentation recipe (horizontal flip, JPEG re-encoding, gaussian blur, each
// with probability 0.5), and the build_cache driver. Augmentation draws come
// from a per-sample generator seeded with seed XOR hash(sample_id), so build
// order can never change the result.

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pfdet/data.hpp"
#include "pfdet/digest.hpp"
#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"

namespace pfdet {

struct AugmentRecipe {
  bool enabled = true;
  double flip_prob = 0.5;
  double jpeg_prob = 0.5;
  int jpeg_quality_min = 30;
  int jpeg_quality_max = 100;
  double blur_prob = 0.5;
  double blur_sigma_max = 3.0;

  static AugmentRecipe standard() { return AugmentRecipe{}; }
  static AugmentRecipe none() {
    AugmentRecipe r;
    r.enabled = false;
    return r;
  }

  // Stable one-line description; hashed into the cache binding digest.
  std::string canonical() const {
    if (!enabled) return "none";
    return "flip:p=" + format_g17(flip_prob) + ";jpeg:p=" + format_g17(jpeg_prob) + ",q=" +
           std::to_string(jpeg_quality_min) + ".." + std::to_string(jpeg_quality_max) +
           ";blur:p=" + format_g17(blur_prob) + ",sigma=0.." + format_g17(blur_sigma_max);
  }
};

namespace detail {

inline Image mat_to_image(const cv::Mat& bgr) {
  Image img;
  img.width = bgr.cols;
  img.height = bgr.rows;
  img.pixels.resize(static_cast<std::size_t>(bgr.cols) * bgr.rows * kInputChannels);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * bgr.cols + x) * kInputChannels;
      img.pixels[base + 0] = static_cast<float>(row[x][2]) / 255.0f;  // R
      img.pixels[base + 1] = static_cast<float>(row[x][1]) / 255.0f;  // G
      img.pixels[base + 2] = static_cast<float>(row[x][0]) / 255.0f;  // B
    }
  }
  return img;
}

}  // namespace detail

inline cv::Mat load_image_bgr(const std::filesystem::path& path, const std::string& sample_id) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty())
    fail(ErrorKind::Data, "undecodable image for sample '" + sample_id + "': " + path.string());
  return bgr;
}

// Fixed draw order: flip coin, jpeg coin (+ quality when applied), blur coin
// (+ sigma when applied). A sampled sigma of exactly 0 is the identity.
inline void apply_augment(cv::Mat& bgr, const AugmentRecipe& recipe, std::mt19937_64& rng) {
  if (!recipe.enabled) return;
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  if (coin(rng) < recipe.flip_prob) cv::flip(bgr, bgr, 1);

  if (coin(rng) < recipe.jpeg_prob) {
    std::uniform_int_distribution<int> quality(recipe.jpeg_quality_min, recipe.jpeg_quality_max);
    std::vector<unsigned char> buffer;
    const std::vector<int> params = {cv::IMWRITE_JPEG_QUALITY, quality(rng)};
    if (!cv::imencode(".jpg", bgr, buffer, params))
      fail(ErrorKind::Data, "JPEG re-encoding failed during augmentation");
    bgr = cv::imdecode(buffer, cv::IMREAD_COLOR);
    if (bgr.empty()) fail(ErrorKind::Data, "JPEG re-decoding failed during augmentation");
  }

  if (coin(rng) < recipe.blur_prob) {
    std::uniform_real_distribution<double> sigma_dist(0.0, recipe.blur_sigma_max);
    const double sigma = sigma_dist(rng);
    if (sigma > 1e-12) {
      const int ksize = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
      cv::GaussianBlur(bgr, bgr, cv::Size(ksize, ksize), sigma, sigma);
    }
  }
}

inline Image load_augmented(const std::filesystem::path& path, const std::string& sample_id,
                            const AugmentRecipe& recipe, std::uint64_t seed) {
  cv::Mat bgr = load_image_bgr(path, sample_id);
  std::mt19937_64 rng(seed ^ fnv1a64(sample_id));
  apply_augment(bgr, recipe, rng);
  return detail::mat_to_image(bgr);
}

struct CacheBuildResult {
  std::size_t count = 0;
  std::string digest_hex;
};

// Encodes every manifest entry (augment, resize, frozen image encoder) and
// writes the cache. Entries are processed in manifest order with per-sample
// seeds.
inline CacheBuildResult build_cache(const DatasetManifest& manifest,
                                    const std::filesystem::path& root, const EncoderPair& pair,
                                    const AugmentRecipe& recipe, std::uint64_t seed,
                                    const std::filesystem::path& out_path) {
  const Digest32 digest = cache_binding_digest(manifest, recipe.canonical(), pair.frozen_fingerprint);
  EmbeddingCacheWriter writer(pair.dim, digest);
  for (const ManifestEntry& entry : manifest.entries) {
    const Image img = load_augmented(root / entry.relative_path, entry.sample_id, recipe, seed);
    const ImageEmbedding emb = encode_image(pair, img, entry.sample_id);
    writer.add(entry.sample_id, emb.vector);
  }
  writer.write(out_path);
  return {writer.count(), to_hex(digest)};
}

}  // namespace pfdet
