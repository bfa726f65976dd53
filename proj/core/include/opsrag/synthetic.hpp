#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "opsrag/chunker.hpp"
#include "opsrag/distiller.hpp"
#include "opsrag/eval.hpp"
#include "opsrag/tokenizer.hpp"

namespace opsrag {

// A generated operations corpus. Every document describes one service of a
// topic (a platform such as a message broker) in two top-level sections:
// configuration and incident handling. Configuration questions call the
// service by a nickname and incident questions name its runbook; neither
// name occurs in the documents, so retrieval has to learn the mapping from
// the training pairs.
struct SyntheticConfig {
  std::size_t documents = 200;
  std::size_t topics = 20;
  std::size_t train_phrasings = 3;  // per document and task
  std::size_t eval_phrasings = 1;   // per document and task, disjoint templates
  std::uint64_t seed = 0;
};

struct SyntheticDocument {
  std::string id;        // "svc-007"
  std::string markdown;
  std::size_t topic = 0;
  std::string service;   // name used in the text
  std::string nickname;  // configuration questions call the service this
  std::string runbook;   // incident questions call the runbook this
};

struct SyntheticCorpus {
  std::vector<SyntheticDocument> documents;
  std::vector<Chunk> chunks;     // chunk_targeted over every parsed document
  std::vector<QAPair> qak_log;   // configuration questions
  std::vector<QAPair> qat_log;   // incident questions
  std::vector<EvalQuestion> eval;
};

// Deterministic in the config. Gold ids are taken from the chunker's own
// output for each document under the given tokenizer and chunking config.
SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config, const Tokenizer& tok,
                                      const ChunkerConfig& chunking = {});

}  // namespace opsrag
