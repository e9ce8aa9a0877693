#pragma once
// Seeded two-cluster synthetic dataset for benchmarks. Pixel-space clusters:
// real images scatter around one fixed random pattern, fake images around
// another. The test split moves the fake cluster mean toward the real one to
// emulate a train-to-test category shift, at two strengths ("mild" and
// "strong" subsets). Images are written as binary PPM (P6).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"

namespace pfdet {

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int image_size = 16;              // source resolution; the pipeline resizes to 224
  std::size_t train_per_class = 256;
  std::size_t test_per_class = 128;  // per subset, per class
  double amplitude = 0.2;            // cluster-pattern contrast around mid-gray
  double noise_sigma = 0.08;         // per-pixel gaussian noise
  double shift_strong = 0.6;         // fake-mean shift toward real, strong subset
  double shift_mild = 0.3;           // fake-mean shift toward real, mild subset
};

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open image for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    float v = img.pixels[i];
    if (v < 0.0f) v = 0.0f;
    if (v > 1.0f) v = 1.0f;
    bytes[i] = static_cast<unsigned char>(v * 255.0f + 0.5f);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing image: " + path.string());
}

namespace detail {

inline std::vector<double> cluster_pattern(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> sign(0, 1);
  std::vector<double> p(n);
  for (double& x : p) x = sign(rng) == 1 ? 1.0 : -1.0;
  return p;
}

inline Image sample_image(const std::vector<double>& mean, double noise_sigma, int size,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, noise_sigma);
  Image img;
  img.width = size;
  img.height = size;
  img.pixels.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    img.pixels[i] = static_cast<float>(mean[i] + noise(rng));
  return img;
}

}  // namespace detail

// Writes train/{real,fake}/ and test/{mild,strong}/{real,fake}/ under `out`.
inline void generate_synthetic_dataset(const SyntheticConfig& cfg,
                                       const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  if (cfg.image_size < 2) fail(ErrorKind::Contract, "synthetic image size must be at least 2");
  const std::size_t pixel_count =
      static_cast<std::size_t>(cfg.image_size) * cfg.image_size * kInputChannels;

  std::mt19937_64 pattern_rng(cfg.seed);
  const auto p_real = detail::cluster_pattern(pattern_rng, pixel_count);
  const auto p_fake = detail::cluster_pattern(pattern_rng, pixel_count);

  std::vector<double> mu_real(pixel_count), mu_fake(pixel_count);
  for (std::size_t i = 0; i < pixel_count; ++i) {
    mu_real[i] = 0.5 + cfg.amplitude * p_real[i];
    mu_fake[i] = 0.5 + cfg.amplitude * p_fake[i];
  }
  const auto shifted_fake = [&](double shift) {
    std::vector<double> mu(pixel_count);
    for (std::size_t i = 0; i < pixel_count; ++i)
      mu[i] = mu_fake[i] + shift * (mu_real[i] - mu_fake[i]);
    return mu;
  };

  struct Split {
    std::string dir;
    const std::vector<double>* mean;
    std::size_t count;
    std::uint64_t stream;
  };
  const std::vector<double> mu_fake_mild = shifted_fake(cfg.shift_mild);
  const std::vector<double> mu_fake_strong = shifted_fake(cfg.shift_strong);
  const std::vector<Split> splits = {
      {"train/real", &mu_real, cfg.train_per_class, 1},
      {"train/fake", &mu_fake, cfg.train_per_class, 2},
      {"test/mild/real", &mu_real, cfg.test_per_class, 3},
      {"test/mild/fake", &mu_fake_mild, cfg.test_per_class, 4},
      {"test/strong/real", &mu_real, cfg.test_per_class, 5},
      {"test/strong/fake", &mu_fake_strong, cfg.test_per_class, 6},
  };

  char name[32];
  for (const Split& s : splits) {
    const fs::path dir = out / s.dir;
    fs::create_directories(dir);
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + s.stream);
    for (std::size_t i = 0; i < s.count; ++i) {
      std::snprintf(name, sizeof(name), "%05zu.ppm", i);
      write_ppm(detail::sample_image(*s.mean, cfg.noise_sigma, cfg.image_size, rng), dir / name);
    }
  }
}

}  // namespace pfdet
