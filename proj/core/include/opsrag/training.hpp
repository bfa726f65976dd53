#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "opsrag/chunker.hpp"
#include "opsrag/distiller.hpp"
#include "opsrag/encoder.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag {

struct TrainingPair {
  std::string query;
  std::string positive_id;            // first gold chunk
  std::vector<std::string> gold_ids;  // never used as negatives for this pair
  QaTask task = QaTask::kQakGpt;
  std::size_t source = 0;             // position in the training set
};

struct TrainingBatch {
  std::optional<QaTask> task;  // set when every pair shares one task
  std::vector<TrainingPair> pairs;
  std::vector<std::vector<std::string>> hard_negatives;  // per pair, may be empty
};

// One batch list per task: pairs of each task are shuffled with the seed and
// cut into batch_size pieces (the last may be smaller); the batch order is
// then shuffled. Pairs without gold chunks are skipped.
std::vector<TrainingBatch> make_homogeneous_batches(const std::vector<QAPair>& dataset,
                                                    std::size_t batch_size, std::uint64_t seed);

// The same, without regard to task: one shuffled list cut into batches.
std::vector<TrainingBatch> make_mixed_batches(const std::vector<QAPair>& dataset,
                                              std::size_t batch_size, std::uint64_t seed);

// Merges up to `pool` consecutive batches sharing a task label into one
// optimizer step, so their positives serve as each other's negatives.
std::vector<TrainingBatch> pool_batches(std::vector<TrainingBatch> batches, std::size_t pool);

// Gradient rows keyed by feature index; row(f)[i] is dL/dW(i, f).
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t dim = 0) : dim_(dim) {}

  std::vector<double>& row(std::uint32_t feature);
  double at(std::uint32_t feature, std::size_t i) const;
  const std::map<std::uint32_t, std::vector<double>>& rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::map<std::uint32_t, std::vector<double>> rows_;
};

using ChunkTexts = std::unordered_map<std::string, std::string>;

struct LossResult {
  double loss = 0.0;
  SparseGradient gradient;
  std::size_t anchors = 0;
  std::size_t negatives = 0;  // summed over anchors
};

// Mean over anchors of
//   -log( exp(s(q,p)/tau) / (exp(s(q,p)/tau) + sum_n exp(s(q,n)/tau)) )
// where the negatives n are the other pairs' positives plus the pair's hard
// negatives, deduplicated, never including one of the pair's gold chunks.
// The positive appears once in the denominator. The gradient with respect
// to W is exact. Throws Error(kDegenerateBatch) when no anchor has a
// negative, Error(kInvalidArgument) for unknown chunk ids.
LossResult infonce_loss(const EncoderModel& model, const TrainingBatch& batch, const ChunkTexts& chunk_texts);

// For each pair: search the top k chunks for its question, drop the gold
// chunks, keep the first m that remain.
std::vector<std::vector<std::string>> mine_hard_negatives(const std::vector<QAPair>& pairs,
                                                          const VectorIndex& index,
                                                          const TextEncoder& encoder, std::size_t k,
                                                          std::size_t m);

// Exact index over the rendered text of every chunk.
VectorIndex build_chunk_index(const std::vector<Chunk>& chunks, const TextEncoder& encoder,
                              IndexOptions options = {});

struct TrainConfig {
  std::size_t epochs = 1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::optional<double> temperature;  // overrides the model's tau
  bool homogeneous_batches = true;    // HIS
  bool hard_negatives = true;         // AHNS
  std::size_t hard_negative_k = 10;
  std::size_t hard_negatives_per_pair = 5;
  // false: mine once with the initial model and reuse every epoch;
  // true: re-mine with the current model at the start of every epoch.
  bool refresh_negatives = false;
  std::size_t negative_pool = 1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainResult {
  EncoderModel model;
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
  std::size_t skipped_batches = 0;  // degenerate batches
};

// Contrastive fine-tuning of the projection with Adam. Single-threaded and
// bitwise reproducible for a fixed seed. Throws Error(kNonFiniteLoss) if the
// loss diverges and Error(kInvalidArgument) for gold ids missing from chunks.
TrainResult train(EncoderModel model, const std::vector<QAPair>& data_em,
                  const std::vector<Chunk>& chunks, const TrainConfig& config);

}  // namespace opsrag
