#include <benchmark/benchmark.h>

#include "opsrag/chunker.hpp"
#include "opsrag/document.hpp"
#include "opsrag/tokenizer.hpp"

namespace {

std::string synthetic_markup(std::size_t sections) {
  std::string s;
  for (std::size_t i = 0; i < sections; ++i) {
    s += "# Section " + std::to_string(i) + "\n\n## Details\n\n";
    for (int p = 0; p < 6; ++p) {
      for (int w = 0; w < 60; ++w) s += "word" + std::to_string((i * 7 + w) % 300) + (w % 12 == 11 ? ". " : " ");
      s += "\n\n";
    }
  }
  return s;
}

void BM_ParseAndChunk(benchmark::State& state) {
  const auto text = synthetic_markup(static_cast<std::size_t>(state.range(0)));
  opsrag::RegexWordTokenizer tok;
  for (auto _ : state) {
    auto doc = opsrag::clean_text(opsrag::parse_document(text, "bench"));
    benchmark::DoNotOptimize(opsrag::chunk_targeted(doc, tok));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseAndChunk)->Arg(10)->Arg(100);

void BM_Tokenize(benchmark::State& state) {
  const auto text = synthetic_markup(20);
  opsrag::RegexWordTokenizer tok;
  for (auto _ : state) benchmark::DoNotOptimize(tok.count(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize);

}  // namespace
