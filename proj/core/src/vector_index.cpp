#include "opsrag/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opsrag/encoder.hpp"
#include "opsrag/error.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"
#include "opsrag/random.hpp"

namespace opsrag {

struct VectorIndex::Snapshot {
  std::vector<std::string> ids;
  std::vector<float> rows;  // ids.size() x dim
  std::unordered_map<std::string, std::uint32_t> position;
  std::vector<float> centroids;  // nlist x dim, coarse only
  std::vector<std::uint32_t> assignment;
  std::vector<std::vector<std::uint32_t>> lists;

  std::size_t nlist(std::size_t dim) const { return dim == 0 ? 0 : centroids.size() / dim; }
};

namespace {

constexpr std::string_view kIndexMagic = "RGIX";
constexpr std::uint32_t kIndexVersion = 1;

double dot(const float* a, const float* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

std::uint32_t nearest_centroid(const float* v, const std::vector<float>& centroids, std::size_t dim) {
  const std::size_t n = centroids.size() / dim;
  std::uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    double s = dot(v, centroids.data() + c * dim, dim);
    if (s > best_score) {
      best_score = s;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

// Spherical k-means; returns nlist x dim unit centroids.
std::vector<float> train_centroids(const std::vector<float>& rows, std::size_t n, std::size_t dim,
                                   std::size_t nlist, std::uint32_t iterations, std::uint64_t seed) {
  nlist = std::min(nlist, n);
  if (nlist == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<float> centroids(nlist * dim);
  for (std::size_t c = 0; c < nlist; ++c) {
    std::copy_n(rows.data() + order[c] * dim, dim, centroids.data() + c * dim);
  }

  std::vector<std::uint32_t> assign(n, 0);
  std::vector<double> best_score(n, 0.0);
  for (std::uint32_t iter = 0; iter < iterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = nearest_centroid(rows.data() + i * dim, centroids, dim);
      best_score[i] = dot(rows.data() + i * dim, centroids.data() + c * dim, dim);
      if (c != assign[i]) changed = true;
      assign[i] = c;
    }
    if (!changed) break;

    std::vector<double> sums(nlist * dim, 0.0);
    std::vector<std::size_t> counts(nlist, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      const float* v = rows.data() + i * dim;
      double* s = sums.data() + assign[i] * dim;
      for (std::size_t k = 0; k < dim; ++k) s[k] += v[k];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < nlist; ++c) {
      float* out = centroids.data() + c * dim;
      double norm = 0.0;
      for (std::size_t k = 0; k < dim; ++k) norm += sums[c * dim + k] * sums[c * dim + k];
      norm = std::sqrt(norm);
      if (counts[c] == 0 || !(norm > 0.0)) {
        // Re-seed an empty cluster with the worst-served point.
        std::size_t worst = 0;
        double worst_score = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          if (!taken[i] && best_score[i] < worst_score) {
            worst_score = best_score[i];
            worst = i;
          }
        }
        taken[worst] = true;
        std::copy_n(rows.data() + worst * dim, dim, out);
        continue;
      }
      for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<float>(sums[c * dim + k] / norm);
    }
  }
  return centroids;
}

void check_entry(const IndexEntry& e, std::size_t dim) {
  if (e.vector.size() != dim) {
    throw Error(Errc::kDimensionMismatch, "entry '" + e.id + "' has dim " + std::to_string(e.vector.size()) +
                                              ", index dim " + std::to_string(dim));
  }
}

// Top-k of the candidate rows by (score desc, id asc).
std::vector<ScoredId> select_top(const VectorIndex::Snapshot& s, std::span<const float> query,
                                 std::size_t dim, const std::vector<std::uint32_t>* candidates,
                                 std::size_t k) {
  struct Hit {
    double score;
    std::uint32_t row;
  };
  std::vector<Hit> hits;
  auto score_row = [&](std::uint32_t r) { hits.push_back({dot(query.data(), s.rows.data() + std::size_t{r} * dim, dim), r}); };
  if (candidates) {
    hits.reserve(candidates->size());
    for (auto r : *candidates) score_row(r);
  } else {
    hits.reserve(s.ids.size());
    for (std::uint32_t r = 0; r < s.ids.size(); ++r) score_row(r);
  }
  k = std::min(k, hits.size());
  auto better = [&](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return s.ids[a.row] < s.ids[b.row];
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
  std::vector<ScoredId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({s.ids[hits[i].row], hits[i].score});
  return out;
}

}  // namespace

VectorIndex::VectorIndex(std::size_t dim, IndexOptions options)
    : dim_(dim), options_(options), snap_(std::make_shared<Snapshot>()) {
  if (dim == 0) throw Error(Errc::kDimensionMismatch, "index dimension must be positive");
}

VectorIndex::VectorIndex(const VectorIndex& other)
    : dim_(other.dim_), options_(other.options_), snap_(other.snapshot()) {}

VectorIndex& VectorIndex::operator=(const VectorIndex& other) {
  if (this != &other) {
    auto snap = other.snapshot();
    dim_ = other.dim_;
    options_ = other.options_;
    publish(std::move(snap));
  }
  return *this;
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept
    : dim_(other.dim_), options_(other.options_), snap_(std::move(other.snap_)) {}

VectorIndex& VectorIndex::operator=(VectorIndex&& other) noexcept {
  if (this != &other) {
    dim_ = other.dim_;
    options_ = other.options_;
    std::lock_guard lock(mu_);
    snap_ = std::move(other.snap_);
  }
  return *this;
}

VectorIndex::~VectorIndex() = default;

std::shared_ptr<const VectorIndex::Snapshot> VectorIndex::snapshot() const {
  std::lock_guard lock(mu_);
  return snap_;
}

void VectorIndex::publish(std::shared_ptr<const Snapshot> snap) {
  std::lock_guard lock(mu_);
  snap_ = std::move(snap);
}

VectorIndex VectorIndex::build(std::vector<IndexEntry> entries, std::size_t dim, IndexOptions options) {
  VectorIndex index(dim, options);
  auto snap = std::make_shared<Snapshot>();
  snap->ids.reserve(entries.size());
  snap->rows.reserve(entries.size() * dim);
  for (auto& e : entries) {
    check_entry(e, dim);
    normalize(e.vector);
    if (!snap->position.emplace(e.id, static_cast<std::uint32_t>(snap->ids.size())).second) {
      throw Error(Errc::kDuplicateId, "duplicate id '" + e.id + "'");
    }
    snap->ids.push_back(std::move(e.id));
    snap->rows.insert(snap->rows.end(), e.vector.begin(), e.vector.end());
  }
  if (options.mode == IndexMode::kCoarse) {
    const std::size_t n = snap->ids.size();
    snap->centroids = train_centroids(snap->rows, n, dim, options.nlist, options.kmeans_iterations, options.seed);
    snap->lists.resize(snap->centroids.size() / dim);
    snap->assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = nearest_centroid(snap->rows.data() + i * dim, snap->centroids, dim);
      snap->assignment[i] = c;
      snap->lists[c].push_back(static_cast<std::uint32_t>(i));
    }
  }
  index.publish(std::move(snap));
  return index;
}

std::vector<ScoredId> VectorIndex::search(std::span<const float> query, std::size_t k) const {
  return search(query, k, options_.nprobe);
}

std::vector<ScoredId> VectorIndex::search(std::span<const float> query, std::size_t k,
                                          std::uint32_t nprobe) const {
  if (query.size() != dim_) {
    throw Error(Errc::kDimensionMismatch, "query dim " + std::to_string(query.size()) + ", index dim " +
                                              std::to_string(dim_));
  }
  auto snap = snapshot();
  if (k == 0 || snap->ids.empty()) return {};
  if (options_.mode == IndexMode::kExact || snap->centroids.empty()) {
    return select_top(*snap, query, dim_, nullptr, k);
  }
  const std::size_t nlist = snap->nlist(dim_);
  const std::size_t probes = std::clamp<std::size_t>(nprobe, 1, nlist);
  std::vector<std::pair<double, std::uint32_t>> cs(nlist);
  for (std::size_t c = 0; c < nlist; ++c) {
    cs[c] = {dot(query.data(), snap->centroids.data() + c * dim_, dim_), static_cast<std::uint32_t>(c)};
  }
  std::partial_sort(cs.begin(), cs.begin() + static_cast<std::ptrdiff_t>(probes), cs.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::uint32_t> candidates;
  for (std::size_t p = 0; p < probes; ++p) {
    const auto& list = snap->lists[cs[p].second];
    candidates.insert(candidates.end(), list.begin(), list.end());
  }
  return select_top(*snap, query, dim_, &candidates, k);
}

void VectorIndex::insert(std::vector<IndexEntry> entries) {
  std::lock_guard writer(write_mu_);
  auto next = std::make_shared<Snapshot>(*snapshot());
  for (auto& e : entries) {
    check_entry(e, dim_);
    normalize(e.vector);
    const auto row = static_cast<std::uint32_t>(next->ids.size());
    if (!next->position.emplace(e.id, row).second) {
      throw Error(Errc::kDuplicateId, "duplicate id '" + e.id + "'");
    }
    next->ids.push_back(std::move(e.id));
    next->rows.insert(next->rows.end(), e.vector.begin(), e.vector.end());
    if (options_.mode == IndexMode::kCoarse) {
      if (next->centroids.empty()) {
        next->centroids = e.vector;
        next->lists.resize(1);
      }
      auto c = nearest_centroid(e.vector.data(), next->centroids, dim_);
      next->assignment.push_back(c);
      next->lists[c].push_back(row);
    }
  }
  publish(std::move(next));
}

std::size_t VectorIndex::size() const { return snapshot()->ids.size(); }

bool VectorIndex::contains(std::string_view id) const {
  return snapshot()->position.count(std::string(id)) > 0;
}

std::vector<float> VectorIndex::vector_of(std::string_view id) const {
  auto snap = snapshot();
  auto it = snap->position.find(std::string(id));
  if (it == snap->position.end()) throw Error(Errc::kNotFound, "no entry '" + std::string(id) + "'");
  auto begin = snap->rows.begin() + static_cast<std::ptrdiff_t>(std::size_t{it->second} * dim_);
  return {begin, begin + static_cast<std::ptrdiff_t>(dim_)};
}

std::vector<std::string> VectorIndex::ids() const { return snapshot()->ids; }

std::vector<std::vector<float>> VectorIndex::centroids() const {
  auto snap = snapshot();
  std::vector<std::vector<float>> out;
  for (std::size_t c = 0; c < snap->nlist(dim_); ++c) {
    auto begin = snap->centroids.begin() + static_cast<std::ptrdiff_t>(c * dim_);
    out.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(dim_));
  }
  return out;
}

std::vector<std::uint32_t> VectorIndex::assignments() const { return snapshot()->assignment; }

std::string VectorIndex::serialize() const {
  auto snap = snapshot();
  BinaryWriter w;
  w.bytes(kIndexMagic);
  w.u32(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u64(snap->ids.size());
  w.u32(static_cast<std::uint32_t>(options_.mode));
  w.u32(static_cast<std::uint32_t>(snap->nlist(dim_)));
  w.u32(options_.nprobe);
  for (float x : snap->rows) w.f32(x);
  for (const auto& id : snap->ids) w.str(id);
  if (options_.mode == IndexMode::kCoarse) {
    for (float x : snap->centroids) w.f32(x);
    for (auto a : snap->assignment) w.u32(a);
  }
  auto digest = sha256(w.data());
  w.bytes(std::string_view(reinterpret_cast<const char*>(digest.data()), digest.size()));
  return w.take();
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
  if (bytes.size() < 4 + 32 || bytes.substr(0, 4) != kIndexMagic) {
    throw Error(Errc::kCorruptFile, "not an index file");
  }
  auto body = bytes.substr(0, bytes.size() - 32);
  auto digest = sha256(body);
  if (bytes.substr(bytes.size() - 32) != std::string_view(reinterpret_cast<const char*>(digest.data()), 32)) {
    throw Error(Errc::kCorruptFile, "index checksum mismatch");
  }
  BinaryReader r(body);
  r.bytes(4);
  if (auto v = r.u32(); v != kIndexVersion) throw Error(Errc::kCorruptFile, "unsupported index version");
  const std::size_t dim = r.u32();
  const std::uint64_t count = r.u64();
  IndexOptions options;
  auto mode = r.u32();
  if (mode > 1 || dim == 0) throw Error(Errc::kCorruptFile, "bad index header");
  options.mode = static_cast<IndexMode>(mode);
  options.nlist = r.u32();
  options.nprobe = r.u32();
  if (count * dim * 4 > r.remaining()) throw Error(Errc::kCorruptFile, "index rows truncated");

  VectorIndex index(dim, options);
  auto snap = std::make_shared<Snapshot>();
  snap->rows.resize(count * dim);
  for (auto& x : snap->rows) x = r.f32();
  snap->ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    snap->ids.push_back(r.str());
    if (!snap->position.emplace(snap->ids.back(), static_cast<std::uint32_t>(i)).second) {
      throw Error(Errc::kCorruptFile, "duplicate id in index file");
    }
  }
  if (options.mode == IndexMode::kCoarse) {
    snap->centroids.resize(std::size_t{options.nlist} * dim);
    for (auto& x : snap->centroids) x = r.f32();
    snap->lists.resize(options.nlist);
    snap->assignment.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      auto a = r.u32();
      if (a >= options.nlist) throw Error(Errc::kCorruptFile, "list id out of range");
      snap->assignment[i] = a;
      snap->lists[a].push_back(static_cast<std::uint32_t>(i));
    }
  }
  if (r.remaining() != 0) throw Error(Errc::kCorruptFile, "trailing bytes in index file");
  index.publish(std::move(snap));
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

VectorIndex VectorIndex::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace opsrag
