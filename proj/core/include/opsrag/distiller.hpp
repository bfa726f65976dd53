#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "opsrag/backend.hpp"
#include "opsrag/chunker.hpp"
#include "opsrag/prompts.hpp"

namespace opsrag {

enum class QaTask { kQakLog, kQakGpt, kQatLog };

std::string_view to_string(QaTask task);  // "QAK-Log", "QAK-GPT", "QAT-Log"
QaTask parse_qa_task(std::string_view text);
QaMode mode_of(QaTask task);              // QAT-Log -> troubleshooting, else KA

struct QAPair {
  std::string question;
  std::string answer;
  QaTask task = QaTask::kQakGpt;
  std::vector<std::string> gold_chunk_ids;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

// Number of distillation requests for a chunk of n_chars characters:
// max(1, round(2 + (n_chars - 1000) / 500)), rounding half away from zero.
int call_count(std::size_t n_chars);

// Number of Unicode code points in UTF-8 text.
std::size_t utf8_length(std::string_view text);

// Response grammar: segments joined by "<sep>", each "Q: <question> A: <answer>".
// A bare "<unk>" is the empty list. Throws Error(kFormatError) when a
// segment lacks a non-empty question or answer. Pairs come back as QAK-GPT
// with no gold ids.
std::vector<QAPair> parse_qa_response(std::string_view text);
std::string render_qa_response(const std::vector<QAPair>& pairs);

struct DistillOptions {
  double temperature = 0.7;
  std::int64_t seed = 0;      // request i carries seed + i
  std::size_t parallelism = 1;
};

struct DistillOutcome {
  std::vector<QAPair> pairs;
  std::size_t standard_calls = 0;
  std::size_t escalations = 0;
};

// Sends call_count(body length) distillation requests to the standard tier.
// A response that fails to parse is re-sent once to the escalation tier;
// if that also fails the result is Error(kExhaustedEscalation).
DistillOutcome generate_qa(const Chunk& chunk, GenerationBackend& standard,
                           GenerationBackend& escalation, const DistillOptions& options = {});

// generate_qa over many chunks with up to options.parallelism chunks in
// flight. Output order follows input order.
DistillOutcome distill_corpus(const std::vector<Chunk>& chunks, GenerationBackend& standard,
                              GenerationBackend& escalation, const DistillOptions& options = {});

struct RewriteResult {
  QAPair pair;
  bool unchanged = false;  // backend echoed the question verbatim
};

// Rewrites a log-derived question, keeping answer and gold ids.
// Throws Error(kInvalidArgument) for QAK-GPT pairs.
RewriteResult rewrite_question(const QAPair& pair, GenerationBackend& backend,
                               double temperature = 0.0);
std::vector<RewriteResult> rewrite_questions(const std::vector<QAPair>& pairs,
                                             GenerationBackend& backend, double temperature = 0.0,
                                             std::size_t parallelism = 1);

struct CombinedDatasets {
  std::vector<QAPair> data_em;
  std::vector<QAPair> data_llm;
};

// Union of QAK-Log, QAK-GPT and QAT-Log (in that order), keeping the first
// occurrence of each (question, answer). Gold ids must name chunks in tc
// when tc is non-empty; QAT-Log pairs may have none.
CombinedDatasets combine_datasets(const std::vector<Chunk>& tc, const std::vector<QAPair>& qak_log,
                                  const std::vector<QAPair>& qak_gpt,
                                  const std::vector<QAPair>& qat_log);

// JSON-lines {question, answer, task, gold_chunk_ids}.
std::string qa_to_json(const QAPair& p);
QAPair qa_from_json(std::string_view line);
std::string qa_to_jsonl(const std::vector<QAPair>& pairs);
std::vector<QAPair> qa_from_jsonl(std::string_view text);

}  // namespace opsrag
