#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mca/common.hpp"
#include "mca/matrix.hpp"

namespace mca {

// n x d row-major float table with one string id per row.
struct EmbeddingMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> data;       // n * d, row-major
  std::vector<std::string> ids;  // length n, unique

  std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * d, d}; }
};

struct DatasetBundle {
  EmbeddingMatrix images;
  std::optional<std::vector<int>> labels;  // length n, values in [0, c)
  int c = 0;
};

struct VocabularyBundle {
  std::vector<std::string> words;
  EmbeddingMatrix embeddings;  // m x d, row i belongs to words[i]
  std::vector<std::pair<std::string, std::string>> taxonomy_edges;  // (child, parent)
};

namespace detail {

constexpr char kEmbeddingMagic[4] = {'M', 'C', 'A', 'E'};
constexpr std::uint32_t kEmbeddingVersion = 1;

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool read_u32_le(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline void write_f32_le(std::ostream& os, float f) {
  write_u32_le(os, std::bit_cast<std::uint32_t>(f));
}

inline bool read_f32_le(std::istream& is, float& f) {
  std::uint32_t v;
  if (!read_u32_le(is, v)) return false;
  f = std::bit_cast<float>(v);
  return true;
}

inline std::filesystem::path meta_path(const std::filesystem::path& emb_path) {
  std::filesystem::path p = emb_path;
  p.replace_extension(".meta.json");
  return p;
}

}  // namespace detail

inline std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

// Reads a "MCAE" file. Rows come back exactly as stored, NOT normalized.
// Ids default to "0".."n-1"; a sidecar <stem>.meta.json may override them.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open embedding file: " + path.string());

  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, detail::kEmbeddingMagic, 4) != 0)
    throw DataError("bad magic in " + path.string() + " (expected MCAE)");

  std::uint32_t version = 0, n = 0, d = 0;
  if (!detail::read_u32_le(is, version) || !detail::read_u32_le(is, n) ||
      !detail::read_u32_le(is, d))
    throw DataError("truncated header in " + path.string());
  if (version != detail::kEmbeddingVersion)
    throw DataError("unsupported embedding file version " + std::to_string(version));
  if (d == 0) throw DataError("embedding dimension is 0 in " + path.string());
  if (d < 2) throw DataError("embedding dimension must be >= 2, got " + std::to_string(d));
  if (n == 0) throw DataError("embedding file has no rows: " + path.string());

  const std::uint64_t count = static_cast<std::uint64_t>(n) * d;
  if (count > (1ULL << 31))
    throw DataError("embedding payload too large (n*d overflow guard): " + path.string());

  EmbeddingMatrix m;
  m.n = n;
  m.d = d;
  m.data.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!detail::read_f32_le(is, m.data[i]))
      throw DataError("truncated payload in " + path.string() + " at element " +
                      std::to_string(i));
  }
  m.ids = default_ids(m.n);

  const auto meta = detail::meta_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream ms(meta);
    nlohmann::json j;
    ms >> j;
    if (j.contains("ids")) {
      auto ids = j["ids"].get<std::vector<std::string>>();
      if (ids.size() != m.n)
        throw DataError("sidecar ids length " + std::to_string(ids.size()) +
                        " does not match n=" + std::to_string(m.n));
      m.ids = std::move(ids);
    }
  }

  std::unordered_set<std::string> seen;
  for (const auto& id : m.ids)
    if (!seen.insert(id).second) throw DataError("duplicate row id: " + id);
  return m;
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write embedding file: " + path.string());
  os.write(detail::kEmbeddingMagic, 4);
  detail::write_u32_le(os, detail::kEmbeddingVersion);
  detail::write_u32_le(os, static_cast<std::uint32_t>(m.n));
  detail::write_u32_le(os, static_cast<std::uint32_t>(m.d));
  for (float f : m.data) detail::write_f32_le(os, f);
  if (!os) throw DataError("write failed: " + path.string());
}

inline void save_meta(const std::filesystem::path& emb_path,
                      const std::vector<std::string>& ids,
                      const std::optional<std::vector<int>>& labels, int c) {
  nlohmann::json j;
  j["ids"] = ids;
  if (labels) j["labels"] = *labels;
  if (c > 0) j["c"] = c;
  std::ofstream os(detail::meta_path(emb_path));
  os << j.dump(2) << "\n";
}

// Loads embeddings plus the optional label sidecar and validates label range.
inline DatasetBundle load_dataset(const std::filesystem::path& path) {
  DatasetBundle bundle;
  bundle.images = load_embeddings(path);

  const auto meta = detail::meta_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream ms(meta);
    nlohmann::json j;
    ms >> j;
    if (j.contains("c")) bundle.c = j["c"].get<int>();
    if (j.contains("labels")) {
      auto labels = j["labels"].get<std::vector<int>>();
      if (labels.size() != bundle.images.n)
        throw DataError("labels length does not match embedding rows");
      if (bundle.c <= 0) throw DataError("labels present but cluster count c missing");
      for (int v : labels)
        if (v < 0 || v >= bundle.c)
          throw DataError("label " + std::to_string(v) + " outside [0, " +
                          std::to_string(bundle.c) + ")");
      bundle.labels = std::move(labels);
    }
  }
  return bundle;
}

// Scales every row to unit L2 norm. Zero rows are an error, not a silent keep.
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.n; ++i) {
    auto r = out.row(i);
    const double norm = l2_norm(std::span<const float>(r.data(), r.size()));
    if (norm < 1e-12)
      throw DataError("cannot normalize zero row at index " + std::to_string(i));
    const float inv = static_cast<float>(1.0 / norm);
    for (float& v : r) v *= inv;
  }
  return out;
}

}  // namespace mca
