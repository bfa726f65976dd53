#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opsrag {

struct IndexEntry {
  std::string id;
  std::vector<float> vector;
};

struct ScoredId {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

enum class IndexMode : std::uint32_t { kExact = 0, kCoarse = 1 };

struct IndexOptions {
  IndexMode mode = IndexMode::kExact;
  std::uint32_t nlist = 16;   // coarse: number of k-means centroids
  std::uint32_t nprobe = 4;   // coarse: inverted lists scanned per query
  std::uint32_t kmeans_iterations = 25;
  std::uint64_t seed = 0;
};

// Cosine-similarity store over unit vectors. Readers search an immutable
// snapshot; build and insert publish a fresh snapshot, so searches running
// concurrently with an insert see either the old or the new contents.
class VectorIndex {
 public:
  struct Snapshot;

  explicit VectorIndex(std::size_t dim, IndexOptions options = {});
  VectorIndex(const VectorIndex& other);
  VectorIndex& operator=(const VectorIndex& other);
  VectorIndex(VectorIndex&& other) noexcept;
  VectorIndex& operator=(VectorIndex&& other) noexcept;
  ~VectorIndex();

  // Normalizes every vector. Coarse mode trains options.nlist centroids by
  // spherical k-means over the inputs (fewer when there are fewer inputs).
  // Throws kDimensionMismatch, kZeroVector, kDuplicateId.
  static VectorIndex build(std::vector<IndexEntry> entries, std::size_t dim, IndexOptions options = {});

  // Results sorted by score descending, ties by ascending id; length
  // min(k, size). Exact mode returns the true top-k.
  std::vector<ScoredId> search(std::span<const float> query, std::size_t k) const;
  std::vector<ScoredId> search(std::span<const float> query, std::size_t k, std::uint32_t nprobe) const;

  // Adds entries; coarse mode assigns them to the nearest existing centroid.
  void insert(std::vector<IndexEntry> entries);

  std::size_t size() const;
  std::size_t dim() const { return dim_; }
  IndexMode mode() const { return options_.mode; }
  const IndexOptions& options() const { return options_; }
  bool contains(std::string_view id) const;
  std::vector<float> vector_of(std::string_view id) const;
  std::vector<std::string> ids() const;

  // Coarse mode internals, exposed for verification.
  std::vector<std::vector<float>> centroids() const;
  std::vector<std::uint32_t> assignments() const;

  // Index file: "RGIX", version u32, dim u32, count u64, mode u32, nlist u32,
  // nprobe u32, rows (count x dim little-endian f32), ids (u32 length +
  // bytes), coarse only: centroids (nlist x dim f32) and per-row list ids
  // (u32); then the SHA-256 of everything before it.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);
  std::string serialize() const;
  static VectorIndex deserialize(std::string_view bytes);

 private:
  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(std::shared_ptr<const Snapshot> snap);

  std::size_t dim_;
  IndexOptions options_;
  mutable std::mutex mu_;        // guards snap_ (pointer swap only)
  mutable std::mutex write_mu_;  // serializes writers
  std::shared_ptr<const Snapshot> snap_;
};

}  // namespace opsrag
