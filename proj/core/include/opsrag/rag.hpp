#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "opsrag/backend.hpp"
#include "opsrag/chunker.hpp"
#include "opsrag/distiller.hpp"
#include "opsrag/encoder.hpp"
#include "opsrag/prompts.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag {

// Id -> chunk lookup for segment texts and the chunk endpoint.
class ChunkStore {
 public:
  ChunkStore() = default;
  explicit ChunkStore(std::vector<Chunk> chunks);

  const Chunk* find(std::string_view id) const;
  const Chunk& at(std::string_view id) const;  // throws Error(kNotFound)
  const std::vector<Chunk>& chunks() const { return chunks_; }
  std::size_t size() const { return chunks_.size(); }

 private:
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Anything that maps a question to ranked chunk ids.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredId> retrieve(std::string_view question, std::size_t k) const = 0;
};

// Embeds the question with the encoder that built the index, then searches.
class DenseRetriever final : public Retriever {
 public:
  DenseRetriever(const TextEncoder& encoder, const VectorIndex& index) : encoder_(encoder), index_(index) {}

  std::vector<ScoredId> retrieve(std::string_view question, std::size_t k) const override;

 private:
  const TextEncoder& encoder_;
  const VectorIndex& index_;
};

struct RetrievedChunk {
  std::string id;
  double score = 0.0;
  std::string text;  // rendered chunk text
};

struct PromptSegment {
  std::size_t index = 0;
  std::string chunk_id;
  std::string text;
};

struct PromptInstance {
  QaMode task = QaMode::kKnowledgeAcquisition;
  std::string question;
  std::vector<PromptSegment> segments;
  std::string rendered;
};

struct PromptTemplates {
  std::map<QaMode, std::string> templates = {
      {QaMode::kKnowledgeAcquisition, std::string(prompts::kKnowledgeAcquisitionTemplate)},
      {QaMode::kTroubleshooting, std::string(prompts::kTroubleshootingTemplate)},
  };
  bool allow_zero_context = false;
};

// Fills the task's template with the question and "Segment i: <text>" lines
// numbered from 0 in the given (retrieval) order. Throws
// Error(kTemplateMissing) when the task has no template and
// Error(kInvalidArgument) for an empty context unless it is allowed.
PromptInstance assemble_prompt(std::string_view question, const std::vector<RetrievedChunk>& chunks,
                               QaMode task, const PromptTemplates& templates = {});

struct AnswerRecord {
  std::string answer;
  std::vector<RetrievedChunk> chunks;
  double retrieval_ms = 0.0;
  double generation_ms = 0.0;
  std::string session_id;
};

struct RagConfig {
  std::size_t top_k = 5;
  double temperature = 0.0;
  PromptTemplates templates;
};

// The online question-answering flow. Shares the encoder, index and store
// read-only, so one engine can serve concurrent requests.
class RagEngine {
 public:
  RagEngine(const TextEncoder& encoder, const VectorIndex& index, const ChunkStore& store,
            GenerationBackend& backend, RagConfig config = {});

  std::vector<RetrievedChunk> retrieve(std::string_view question, std::size_t k) const;

  // Throws Error(kEmptyIndex) on an empty index, Error(kInvalidArgument)
  // when nothing was retrieved and zero-context answers are disabled, and
  // backend errors unchanged.
  AnswerRecord answer(std::string_view question, QaMode task, std::size_t k,
                      std::string session_id = {}) const;
  AnswerRecord answer(std::string_view question, QaMode task) const {
    return answer(question, task, config_.top_k);
  }

  const RagConfig& config() const { return config_; }
  const ChunkStore& store() const { return store_; }

 private:
  const TextEncoder& encoder_;
  const VectorIndex& index_;
  const ChunkStore& store_;
  GenerationBackend& backend_;
  RagConfig config_;
};

struct RaftExample {
  std::string question;
  std::vector<std::string> chunk_ids;
  std::vector<std::string> chunk_texts;
  std::string answer;
  QaTask task = QaTask::kQakGpt;
};

// One example per pair with the top-k retrieved chunks as context.
// Throws Error(kEmptyIndex) when the retriever's index is empty.
std::vector<RaftExample> build_raft_dataset(const std::vector<QAPair>& pairs, const Retriever& retriever,
                                            const ChunkStore& store, std::size_t k);

// The model input of an example: assemble_prompt over its chunks.
std::string render_raft_input(const RaftExample& example, const PromptTemplates& templates = {});

// Negative mean of per-example target log-probabilities log P(y | I, x).
// Throws Error(kPositiveLogProb) for any input above zero and
// Error(kInvalidArgument) for an empty input.
double raft_loss(std::span<const double> log_probs);

// JSON-lines {question, chunk_ids, answer, task}.
std::string raft_to_jsonl(const std::vector<RaftExample>& examples);
std::vector<RaftExample> raft_from_jsonl(std::string_view text, const ChunkStore* store = nullptr);

}  // namespace opsrag
