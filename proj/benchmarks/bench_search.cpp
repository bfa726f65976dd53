#include <benchmark/benchmark.h>

#include <cmath>

#include "opsrag/random.hpp"
#include "opsrag/vector_index.hpp"

namespace {

std::vector<float> gaussian(opsrag::Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

opsrag::VectorIndex make_index(std::size_t n, std::size_t dim, opsrag::IndexOptions opts = {}) {
  opsrag::Rng rng(1);
  std::vector<opsrag::IndexEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({"c" + std::to_string(i), gaussian(rng, dim)});
  return opsrag::VectorIndex::build(std::move(entries), dim, opts);
}

void BM_ExactSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  auto index = make_index(n, 256);
  opsrag::Rng rng(2);
  auto query = gaussian(rng, 256);
  for (auto _ : state) benchmark::DoNotOptimize(index.search(query, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ExactSearch)->Args({3824, 1})->Args({3824, 20})->Args({20000, 20});

void BM_CoarseSearch(benchmark::State& state) {
  opsrag::IndexOptions opts;
  opts.mode = opsrag::IndexMode::kCoarse;
  opts.nlist = 64;
  opts.nprobe = static_cast<std::uint32_t>(state.range(0));
  auto index = make_index(20000, 256, opts);
  opsrag::Rng rng(3);
  auto query = gaussian(rng, 256);
  for (auto _ : state) benchmark::DoNotOptimize(index.search(query, 20));
}
BENCHMARK(BM_CoarseSearch)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
