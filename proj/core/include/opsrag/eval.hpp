#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opsrag/backend.hpp"
#include "opsrag/chunker.hpp"
#include "opsrag/distiller.hpp"
#include "opsrag/encoder.hpp"
#include "opsrag/prompts.hpp"
#include "opsrag/rag.hpp"
#include "opsrag/training.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag {

struct EvalQuestion {
  std::string question;
  QaMode task = QaMode::kKnowledgeAcquisition;
  std::vector<std::string> gold_chunk_ids;
  std::string reference_answer;

  friend bool operator==(const EvalQuestion&, const EvalQuestion&) = default;
};

// JSON-lines {question, task, gold_chunk_ids, reference_answer}; task is
// "ka" or "ts". Records without gold ids are a format error.
std::string eval_to_jsonl(const std::vector<EvalQuestion>& questions);
std::vector<EvalQuestion> eval_from_jsonl(std::string_view text);

// Throws Error(kNotFound) for a gold id that is not in the store.
void validate_eval_set(const std::vector<EvalQuestion>& questions, const ChunkStore& store);

// 1-based rank of the first gold chunk within the top max_k, 0 if absent.
std::vector<std::size_t> gold_ranks(const std::vector<EvalQuestion>& questions, const Retriever& retriever,
                                    std::size_t max_k);

// Fraction of questions whose top-k contains any gold chunk.
// Throws Error(kEmptyEvalSet).
double acc_at_k(const std::vector<EvalQuestion>& questions, const Retriever& retriever, std::size_t k);
// Also requires k <= index size (Error(kInvalidArgument)).
double acc_at_k(const std::vector<EvalQuestion>& questions, const TextEncoder& encoder,
                const VectorIndex& index, std::size_t k);

// acc_at_k for each k from a single retrieval at the largest k.
std::vector<double> acc_at_ks(const std::vector<EvalQuestion>& questions, const Retriever& retriever,
                              const std::vector<std::size_t>& ks);

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t samples = 0;
};

// Wall-clock time of embed + search per query on the calling thread, after
// one untimed warm-up pass. Percentiles use the nearest-rank method.
LatencyStats measure_latency(const VectorIndex& index, const TextEncoder& encoder,
                             const std::vector<std::string>& queries, std::size_t k,
                             std::size_t repetitions = 1);

enum class JudgeMode { kSingle, kPairwise };
enum class Verdict { kA, kB, kTie };

std::string_view to_string(Verdict v);  // "A", "B", "Tie"

struct JudgeVerdict {
  JudgeMode mode = JudgeMode::kSingle;
  int rating = 0;                 // single: 1..10
  Verdict verdict = Verdict::kTie;  // pairwise
  std::string explanation;
};

// Extracts the last JSON object (fenced or bare) that has a "rating" or
// "verdict" field. Ratings may be numbers or numeric strings and must be
// integers in 1..10; verdicts must be A, B or Tie. Throws
// Error(kJudgeUnparseable).
JudgeVerdict parse_judge_json(std::string_view text);

struct JudgeOptions {
  std::size_t runs = 3;        // single-score calls per answer
  std::size_t max_reasks = 2;  // extra attempts per call on unparseable output
  double temperature = 0.0;
  std::int64_t seed = 0;       // attempt j of run r carries seed + r * (max_reasks + 1) + j
  std::size_t concurrency = 1; // batch helpers: answers judged at once
};

struct SingleJudgement {
  double mean = 0.0;
  std::vector<int> scores;
  std::vector<std::string> explanations;
};

SingleJudgement judge_single(QaMode mode, std::string_view question, std::string_view reference,
                             std::string_view answer, GenerationBackend& judge,
                             const JudgeOptions& options = {});

// Asks twice with the answers in both orders. Agreement on a winner gives
// that winner; anything else is a tie.
JudgeVerdict judge_pairwise(QaMode mode, std::string_view question, std::string_view reference,
                            std::string_view answer_a, std::string_view answer_b,
                            GenerationBackend& judge, const JudgeOptions& options = {});

struct JudgeItem {
  EvalQuestion question;
  std::string answer;
  std::string answer_b;  // pairwise only
};

std::vector<SingleJudgement> judge_single_all(const std::vector<JudgeItem>& items, GenerationBackend& judge,
                                              const JudgeOptions& options = {});
std::vector<JudgeVerdict> judge_pairwise_all(const std::vector<JudgeItem>& items, GenerationBackend& judge,
                                             const JudgeOptions& options = {});

struct PairwiseTally {
  std::size_t wins = 0;    // answer A
  std::size_t losses = 0;  // answer B
  std::size_t ties = 0;
};
PairwiseTally tally(const std::vector<JudgeVerdict>& verdicts);

struct AblationConfig {
  bool his = false;
  bool ahns = false;
  std::string label() const;  // "-/-", "+/-", "-/+", "+/+"
};

// The four combinations in the order -/-, +/-, -/+, +/+.
std::vector<AblationConfig> default_ablation_configs();

struct AblationSettings {
  EncoderConfig encoder;  // seed is replaced by each run's seed
  TrainConfig train;      // his/ahns and seed are replaced per run
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::size_t> ks = {1, 5, 20};
  std::vector<AblationConfig> configs = default_ablation_configs();
  bool include_untrained = true;
};

struct AblationCell {
  QaMode task = QaMode::kKnowledgeAcquisition;
  std::size_t k = 0;
  double mean = 0.0;
  std::vector<double> per_seed;
};

struct AblationRow {
  std::string label;  // config label or "untrained"
  bool trained = true;
  bool his = false;
  bool ahns = false;
  std::vector<AblationCell> cells;  // task-major, then k

  double mean_at(QaMode task, std::size_t k) const;
  // Mean over tasks of the cell means at k.
  double overall_at(std::size_t k) const;
};

struct AblationReport {
  std::vector<std::size_t> ks;
  std::vector<std::uint64_t> seeds;
  std::vector<QaMode> tasks;
  std::vector<AblationRow> rows;

  const AblationRow& row(std::string_view label) const;
  std::string to_json() const;
  std::string to_text() const;
};

// Trains one encoder per (config, seed) from the same initial model for that
// seed and scores acc@k per task on the eval set. Rows follow the config
// order, preceded by the untrained baseline when requested.
AblationReport run_ablation_report(const std::vector<Chunk>& chunks, const std::vector<QAPair>& train_pairs,
                                   const std::vector<EvalQuestion>& eval_set,
                                   const AblationSettings& settings);

}  // namespace opsrag
