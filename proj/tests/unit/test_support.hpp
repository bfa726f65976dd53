#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "opsrag/chunker.hpp"
#include "opsrag/random.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag::test {

std::filesystem::path data_path(const std::string& relative);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::vector<float> random_unit(Rng& rng, std::size_t dim);

// Independent top-k by full scan in double precision: score descending,
// then id ascending.
std::vector<ScoredId> brute_force_top_k(const std::vector<IndexEntry>& entries, const std::vector<float>& query,
                                        std::size_t k);

// Hand-built chunk with a fixed id and body.
Chunk make_chunk(std::string id, std::string body, std::vector<std::string> title_path = {});

}  // namespace opsrag::test
