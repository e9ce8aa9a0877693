#pragma once
// Dataset scanning and the persistent embedding cache. Image encoders are
// frozen, so every sample is encoded exactly once; training and tuning then
// work from the cache. The cache digest binds manifest bytes, augmentation
// recipe and encoder fingerprint so a stale cache cannot be reused silently.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pfdet/digest.hpp"
#include "pfdet/encoders.hpp"
#include "pfdet/errors.hpp"
#include "pfdet/strings.hpp"

namespace pfdet {

struct ManifestEntry {
  std::string sample_id;      // relative path, '/'-separated
  std::string relative_path;
  int label = 0;              // 0 = real, 1 = fake
  std::string subset;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // sorted by sample_id
  std::string root;                    // not persisted; supplied when pixels are touched
};

// Labeling rule: a path component named `real_dir` or `fake_dir` carries the
// label. A component directly under the root labels the whole tree (subset
// "all"); one level deeper, the top-level directory names the subset.
inline DatasetManifest scan_dataset(const std::filesystem::path& root,
                                    std::vector<std::string>* diagnostics = nullptr,
                                    const std::string& real_dir = "real",
                                    const std::string& fake_dir = "fake") {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    fail(ErrorKind::NotFound, "dataset root is not a directory: " + root.string());

  static const std::set<std::string> kImageExtensions = {".ppm", ".pgm", ".png",
                                                         ".jpg", ".jpeg", ".bmp"};
  std::vector<std::string> rel_paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    const std::string ext = to_lower_copy(entry.path().extension().string());
    if (kImageExtensions.count(ext) == 0) {
      if (diagnostics != nullptr)
        diagnostics->push_back("skipped (not an image): " + rel);
      continue;
    }
    rel_paths.push_back(rel);
  }
  std::sort(rel_paths.begin(), rel_paths.end());

  DatasetManifest manifest;
  manifest.root = root.string();
  std::set<std::string> seen;
  for (const std::string& rel : rel_paths) {
    const auto parts = split(rel, '/');
    int label = -1;
    std::string subset;
    if (parts.size() >= 2 && (parts[0] == real_dir || parts[0] == fake_dir)) {
      label = parts[0] == fake_dir ? 1 : 0;
      subset = "all";
    } else if (parts.size() >= 3 && (parts[1] == real_dir || parts[1] == fake_dir)) {
      label = parts[1] == fake_dir ? 1 : 0;
      subset = parts[0];
    } else {
      fail(ErrorKind::Validation,
           "file does not match the <subset>/" + real_dir + "|" + fake_dir +
               "/ layout: " + rel);
    }
    if (!seen.insert(rel).second)
      fail(ErrorKind::Validation, "duplicate sample id: " + rel);
    manifest.entries.push_back({rel, rel, label, subset});
  }
  if (manifest.entries.empty())
    fail(ErrorKind::Validation, "no images found under " + root.string());
  return manifest;
}

// Manifest file: one record per line, "sample_id<TAB>relative_path<TAB>label<TAB>subset".
inline std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const ManifestEntry& e : manifest.entries) {
    out += e.sample_id;
    out += '\t';
    out += e.relative_path;
    out += '\t';
    out += std::to_string(e.label);
    out += '\t';
    out += e.subset;
    out += '\n';
  }
  return out;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open manifest for writing: " + path.string());
  out << serialize_manifest(manifest);
  if (!out) fail(ErrorKind::Io, "failed writing manifest: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "manifest not found: " + path.string());
  DatasetManifest manifest;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 4)
      fail(ErrorKind::Validation, "malformed manifest line: '" + line + "'");
    const long long label = parse_int(cols[2], "label");
    if (label != 0 && label != 1)
      fail(ErrorKind::Validation, "manifest label must be 0 or 1: '" + line + "'");
    if (!seen.insert(cols[0]).second)
      fail(ErrorKind::Validation, "duplicate sample id: " + cols[0]);
    manifest.entries.push_back({cols[0], cols[1], static_cast<int>(label), cols[3]});
  }
  if (manifest.entries.empty())
    fail(ErrorKind::Validation, "manifest is empty: " + path.string());
  return manifest;
}

// ---------------------------------------------------------------------------
// Embedding cache file layout, all little-endian:
//   magic "PFEMB1" | u32 dim | u64 count | 32-byte digest |
//   count x (u32 id-length | id bytes | u64 row) | count x dim f32 rows
// ---------------------------------------------------------------------------

inline constexpr char kCacheMagic[6] = {'P', 'F', 'E', 'M', 'B', '1'};

class EmbeddingCache {
 public:
  static EmbeddingCache open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::NotFound, "embedding cache not found: " + path.string());

    const auto read_exact = [&](void* dst, std::size_t size, const char* what) {
      in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(size));
      if (!in)
        fail(ErrorKind::Integrity,
             std::string("embedding cache truncated while reading ") + what + ": " + path.string());
    };

    char magic[6];
    read_exact(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
      fail(ErrorKind::Integrity, "bad embedding cache magic: " + path.string());

    EmbeddingCache cache;
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    read_exact(&dim, sizeof(dim), "dim");
    read_exact(&count, sizeof(count), "count");
    if (dim == 0 || count == 0 || dim > (1u << 20) || count > (1ull << 32))
      fail(ErrorKind::Integrity, "bad embedding cache header: " + path.string());
    Digest32 digest;
    read_exact(digest.data(), digest.size(), "digest");
    cache.dim_ = dim;
    cache.digest_hex_ = to_hex(digest);

    cache.ids_.resize(count);
    std::vector<std::uint64_t> rows(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t len = 0;
      read_exact(&len, sizeof(len), "index");
      if (len == 0 || len > (1u << 16))
        fail(ErrorKind::Integrity, "bad id length in cache index: " + path.string());
      std::string id(len, '\0');
      read_exact(id.data(), len, "index");
      read_exact(&rows[i], sizeof(rows[i]), "index");
      if (rows[i] >= count)
        fail(ErrorKind::Integrity, "index row out of range: " + path.string());
      if (!cache.index_.emplace(id, rows[i]).second)
        fail(ErrorKind::Integrity, "duplicate id in cache index: " + id);
      cache.ids_[rows[i]] = std::move(id);
    }

    cache.rows_.resize(static_cast<std::size_t>(count) * dim);
    read_exact(cache.rows_.data(), cache.rows_.size() * sizeof(float), "rows");
    char extra;
    if (in.read(&extra, 1))
      fail(ErrorKind::Integrity, "trailing bytes in embedding cache: " + path.string());
    return cache;
  }

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }
  const std::string& digest_hex() const { return digest_hex_; }
  const std::vector<std::string>& ids() const { return ids_; }

  bool contains(const std::string& sample_id) const { return index_.count(sample_id) != 0; }

  std::span<const float> row(const std::string& sample_id) const {
    const auto it = index_.find(sample_id);
    if (it == index_.end())
      fail(ErrorKind::NotFound, "sample id not in embedding cache: " + sample_id);
    return {rows_.data() + it->second * dim_, dim_};
  }

  ImageEmbedding get(const std::string& sample_id) const {
    const auto r = row(sample_id);
    ImageEmbedding out;
    out.sample_id = sample_id;
    out.normalized = true;
    out.vector.assign(r.begin(), r.end());
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::string digest_hex_;
  std::vector<float> rows_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> ids_;
};

// Collects rows in memory, then writes the file in one deterministic pass.
class EmbeddingCacheWriter {
 public:
  EmbeddingCacheWriter(std::size_t dim, Digest32 digest) : dim_(dim), digest_(digest) {
    if (dim_ == 0) fail(ErrorKind::Contract, "embedding cache dimension must be positive");
  }

  void add(const std::string& sample_id, std::span<const double> vector) {
    if (vector.size() != dim_)
      fail(ErrorKind::Contract, "embedding dimension drift for sample '" + sample_id + "'");
    const double n = norm(vector);
    if (std::abs(n - 1.0) > 1e-6)
      fail(ErrorKind::Contract, "embedding for '" + sample_id + "' is not unit-normalized");
    if (!index_.emplace(sample_id, ids_.size()).second)
      fail(ErrorKind::Contract, "duplicate sample id in cache build: " + sample_id);
    ids_.push_back(sample_id);
    for (double x : vector) rows_.push_back(static_cast<float>(x));
  }

  std::size_t count() const { return ids_.size(); }

  void write(const std::filesystem::path& path) const {
    if (ids_.empty()) fail(ErrorKind::Validation, "refusing to write an empty embedding cache");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open embedding cache for writing: " + path.string());
    out.write(kCacheMagic, sizeof(kCacheMagic));
    const std::uint32_t dim = static_cast<std::uint32_t>(dim_);
    const std::uint64_t count = ids_.size();
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(digest_.data()), digest_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const std::uint32_t len = static_cast<std::uint32_t>(ids_[i].size());
      const std::uint64_t row = i;
      out.write(reinterpret_cast<const char*>(&len), sizeof(len));
      out.write(ids_[i].data(), len);
      out.write(reinterpret_cast<const char*>(&row), sizeof(row));
    }
    out.write(reinterpret_cast<const char*>(rows_.data()),
              static_cast<std::streamsize>(rows_.size() * sizeof(float)));
    if (!out) fail(ErrorKind::Io, "failed writing embedding cache: " + path.string());
  }

 private:
  std::size_t dim_;
  Digest32 digest_;
  std::vector<float> rows_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

// The digest that binds a cache to its inputs.
inline Digest32 cache_binding_digest(const DatasetManifest& manifest,
                                     const std::string& recipe_canonical,
                                     const std::string& encoder_fingerprint) {
  Sha256 h;
  h.update(serialize_manifest(manifest));
  h.update(recipe_canonical);
  h.update(encoder_fingerprint);
  return h.finish();
}

}  // namespace pfdet
