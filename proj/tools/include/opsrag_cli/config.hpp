#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opsrag/chunker.hpp"
#include "opsrag/encoder.hpp"
#include "opsrag/eval.hpp"
#include "opsrag/synthetic.hpp"
#include "opsrag/training.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag::cli {

struct Paths {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path work_dir = "work";
  // Empty means "<work_dir>/<default file name>".
  std::filesystem::path qak_log, qat_log, eval_set;
  std::filesystem::path documents, chunks, qak_gpt, data_em, data_llm, model, index, raft;

  std::filesystem::path manifests() const { return work_dir / "manifests"; }
  std::filesystem::path reports() const { return work_dir / "reports"; }
};

struct BackendSettings {
  std::string url = "mock://";
  std::string model = "mock";
  std::string api_key;
  std::string escalation_url;  // empty: same as url
  std::string escalation_model;
  std::filesystem::path cassette;  // empty: no cassette
  std::string cassette_mode = "replay-or-record";
};

struct PipelineConfig {
  Paths paths;
  std::string tokenizer = "regex-word";
  ChunkerConfig chunking;
  SyntheticConfig synthetic;
  double distill_temperature = 0.7;
  std::size_t distill_parallelism = 1;
  bool rewrite_log_questions = false;
  EncoderConfig encoder;
  TrainConfig training;
  IndexOptions index;
  std::size_t raft_k = 5;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::size_t top_k = 5;
  BackendSettings backend;
  BackendSettings judge;
  JudgeOptions judge_options;
  std::vector<std::size_t> eval_ks = {1, 5, 20};
  std::size_t latency_repetitions = 3;
  std::vector<std::uint64_t> ablation_seeds = {0, 1, 2, 3, 4};
  std::uint64_t seed = 0;
};

// Parses a config document. Unknown keys and ill-typed values are
// Error(kConfigError). Relative paths resolve against base_dir.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Defaults with relative paths resolved against base_dir.
PipelineConfig default_config(const std::filesystem::path& base_dir);

// Fills empty derived paths from work_dir.
void resolve_paths(Paths& paths);

// OPSRAG_BACKEND_URL and OPSRAG_API_KEY override the generation backend.
void apply_environment(PipelineConfig& config);

// Copies the seed into every stochastic component.
void propagate_seed(PipelineConfig& config, std::uint64_t seed);

// Canonical JSON of everything but paths; the basis of config hashes.
std::string config_fingerprint(const PipelineConfig& config, std::string_view stage);

}  // namespace opsrag::cli
