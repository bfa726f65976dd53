#include "opsrag/rag.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

ChunkStore::ChunkStore(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (!by_id_.emplace(chunks_[i].id, i).second) {
      throw Error(Errc::kDuplicateId, "duplicate chunk id '" + chunks_[i].id + "'");
    }
  }
}

const Chunk* ChunkStore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const Chunk& ChunkStore::at(std::string_view id) const {
  if (const Chunk* c = find(id)) return *c;
  throw Error(Errc::kNotFound, "no chunk '" + std::string(id) + "'");
}

std::vector<ScoredId> DenseRetriever::retrieve(std::string_view question, std::size_t k) const {
  return index_.search(encoder_.encode(question), k);
}

PromptInstance assemble_prompt(std::string_view question, const std::vector<RetrievedChunk>& chunks,
                               QaMode task, const PromptTemplates& templates) {
  auto it = templates.templates.find(task);
  if (it == templates.templates.end() || it->second.empty()) {
    throw Error(Errc::kTemplateMissing, "no template for task '" + std::string(to_string(task)) + "'");
  }
  if (chunks.empty() && !templates.allow_zero_context) {
    throw Error(Errc::kInvalidArgument, "no retrieved context for the question");
  }
  PromptInstance p;
  p.task = task;
  p.question = std::string(question);
  std::string segments;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    p.segments.push_back({i, chunks[i].id, chunks[i].text});
    if (i > 0) segments.push_back('\n');
    segments += "Segment " + std::to_string(i) + ": " + chunks[i].text;
  }
  // Substitute segments first so a question containing "{segments}" is
  // left untouched.
  auto with_segments = prompts::substitute(it->second, "segments", segments);
  auto qpos = with_segments.find("{question}");
  if (qpos == std::string::npos) {
    throw Error(Errc::kTemplateMissing, "template lacks {question}");
  }
  p.rendered = with_segments.replace(qpos, std::string_view("{question}").size(), question);
  return p;
}

RagEngine::RagEngine(const TextEncoder& encoder, const VectorIndex& index, const ChunkStore& store,
                     GenerationBackend& backend, RagConfig config)
    : encoder_(encoder), index_(index), store_(store), backend_(backend), config_(std::move(config)) {
  if (encoder_.dim() != index_.dim()) {
    throw Error(Errc::kDimensionMismatch, "encoder dim " + std::to_string(encoder_.dim()) + " vs index dim " +
                                              std::to_string(index_.dim()));
  }
}

std::vector<RetrievedChunk> RagEngine::retrieve(std::string_view question, std::size_t k) const {
  if (index_.size() == 0) throw Error(Errc::kEmptyIndex, "index is empty");
  auto hits = DenseRetriever(encoder_, index_).retrieve(question, k);
  std::vector<RetrievedChunk> out;
  out.reserve(hits.size());
  for (auto& h : hits) {
    const Chunk* c = store_.find(h.id);
    out.push_back({h.id, h.score, c ? c->rendered() : std::string()});
  }
  return out;
}

AnswerRecord RagEngine::answer(std::string_view question, QaMode task, std::size_t k,
                               std::string session_id) const {
  AnswerRecord rec;
  rec.session_id = std::move(session_id);
  auto t0 = Clock::now();
  rec.chunks = retrieve(question, k);
  rec.retrieval_ms = ms_since(t0);

  auto prompt = assemble_prompt(question, rec.chunks, task, config_.templates);
  auto t1 = Clock::now();
  rec.answer = backend_.complete(ChatRequest::user(backend_.model(), prompt.rendered, config_.temperature));
  rec.generation_ms = ms_since(t1);
  return rec;
}

std::vector<RaftExample> build_raft_dataset(const std::vector<QAPair>& pairs, const Retriever& retriever,
                                            const ChunkStore& store, std::size_t k) {
  if (store.size() == 0) throw Error(Errc::kEmptyIndex, "no chunks to retrieve from");
  std::vector<RaftExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    RaftExample ex;
    ex.question = p.question;
    ex.answer = p.answer;
    ex.task = p.task;
    auto hits = retriever.retrieve(p.question, k);
    if (hits.empty()) throw Error(Errc::kEmptyIndex, "retriever returned nothing");
    for (const auto& h : hits) {
      ex.chunk_ids.push_back(h.id);
      ex.chunk_texts.push_back(store.at(h.id).rendered());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::string render_raft_input(const RaftExample& example, const PromptTemplates& templates) {
  std::vector<RetrievedChunk> chunks;
  for (std::size_t i = 0; i < example.chunk_ids.size(); ++i) {
    chunks.push_back({example.chunk_ids[i], 0.0, i < example.chunk_texts.size() ? example.chunk_texts[i] : ""});
  }
  return assemble_prompt(example.question, chunks, mode_of(example.task), templates).rendered;
}

double raft_loss(std::span<const double> log_probs) {
  if (log_probs.empty()) throw Error(Errc::kInvalidArgument, "no examples");
  double sum = 0.0;
  for (double lp : log_probs) {
    if (lp > 0.0) throw Error(Errc::kPositiveLogProb, "log-probability " + std::to_string(lp) + " > 0");
    sum += lp;
  }
  return -sum / static_cast<double>(log_probs.size());
}

std::string raft_to_jsonl(const std::vector<RaftExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    ojson j;
    j["question"] = ex.question;
    j["chunk_ids"] = ex.chunk_ids;
    j["answer"] = ex.answer;
    j["task"] = std::string(to_string(ex.task));
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<RaftExample> raft_from_jsonl(std::string_view text, const ChunkStore* store) {
  std::vector<RaftExample> out;
  for (const auto& line : split_lines(text)) {
    try {
      auto j = ojson::parse(line);
      RaftExample ex;
      ex.question = j.at("question").get<std::string>();
      ex.chunk_ids = j.at("chunk_ids").get<std::vector<std::string>>();
      ex.answer = j.at("answer").get<std::string>();
      ex.task = parse_qa_task(j.at("task").get<std::string>());
      if (store) {
        for (const auto& id : ex.chunk_ids) ex.chunk_texts.push_back(store->at(id).rendered());
      }
      out.push_back(std::move(ex));
    } catch (const ojson::exception& e) {
      throw Error(Errc::kFormatError, std::string("RAFT record: ") + e.what());
    }
  }
  return out;
}

}  // namespace opsrag
