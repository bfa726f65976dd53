#include <benchmark/benchmark.h>

#include "opsrag/encoder.hpp"

namespace {

const std::string kChunk =
    "Title: Kafka > Consumer lag Content: When consumer lag keeps growing, check whether the group is stuck in a "
    "rebalance loop. Restart the slowest consumer first, then watch the partition assignment settle.";

void BM_ExtractFeatures(benchmark::State& state) {
  opsrag::EncoderConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(opsrag::extract_features(kChunk, cfg));
}
BENCHMARK(BM_ExtractFeatures);

void BM_Encode(benchmark::State& state) {
  opsrag::EncoderConfig cfg;
  cfg.embed_dim = static_cast<std::uint32_t>(state.range(0));
  auto model = opsrag::EncoderModel::random_init(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(kChunk));
}
BENCHMARK(BM_Encode)->Arg(64)->Arg(256);

}  // namespace
