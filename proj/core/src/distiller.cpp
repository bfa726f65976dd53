#include "opsrag/distiller.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"
#include "parallel.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kSep = "<sep>";
constexpr std::string_view kUnk = "<unk>";

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

QAPair parse_segment(std::string_view seg) {
  auto q = seg.find("Q:");
  if (q == std::string_view::npos) {
    throw Error(Errc::kFormatError, "segment has no 'Q:' marker: " + std::string(seg.substr(0, 80)));
  }
  auto a = seg.find("A:", q + 2);
  if (a == std::string_view::npos) {
    throw Error(Errc::kFormatError, "segment has no 'A:' marker: " + std::string(seg.substr(0, 80)));
  }
  QAPair p;
  p.question = std::string(trim(seg.substr(q + 2, a - q - 2)));
  p.answer = std::string(trim(seg.substr(a + 2)));
  p.task = QaTask::kQakGpt;
  if (p.question.empty() || p.answer.empty()) {
    throw Error(Errc::kFormatError, "segment with empty question or answer");
  }
  return p;
}

}  // namespace

std::string_view to_string(QaTask task) {
  switch (task) {
    case QaTask::kQakLog: return "QAK-Log";
    case QaTask::kQakGpt: return "QAK-GPT";
    case QaTask::kQatLog: return "QAT-Log";
  }
  return "?";
}

QaTask parse_qa_task(std::string_view text) {
  if (text == "QAK-Log") return QaTask::kQakLog;
  if (text == "QAK-GPT") return QaTask::kQakGpt;
  if (text == "QAT-Log") return QaTask::kQatLog;
  throw Error(Errc::kFormatError, "unknown QA task '" + std::string(text) + "'");
}

QaMode mode_of(QaTask task) {
  return task == QaTask::kQatLog ? QaMode::kTroubleshooting : QaMode::kKnowledgeAcquisition;
}

int call_count(std::size_t n_chars) {
  const double raw = 2.0 + (static_cast<double>(n_chars) - 1000.0) / 500.0;
  return std::max(1, static_cast<int>(std::round(raw)));
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::vector<QAPair> parse_qa_response(std::string_view text) {
  auto body = trim(text);
  if (body == kUnk) return {};
  if (body.empty()) throw Error(Errc::kFormatError, "empty response");

  std::vector<QAPair> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto end = body.find(kSep, pos);
    if (end == std::string_view::npos) end = body.size();
    auto seg = trim(body.substr(pos, end - pos));
    if (!seg.empty() && seg != kUnk) out.push_back(parse_segment(seg));
    pos = end + kSep.size();
  }
  if (out.empty()) throw Error(Errc::kFormatError, "response holds no QA segment");
  return out;
}

std::string render_qa_response(const std::vector<QAPair>& pairs) {
  if (pairs.empty()) return std::string(kUnk);
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out += kSep;
    out += "Q: " + pairs[i].question + " A: " + pairs[i].answer;
  }
  return out;
}

DistillOutcome generate_qa(const Chunk& chunk, GenerationBackend& standard,
                           GenerationBackend& escalation, const DistillOptions& options) {
  if (trim(chunk.body).empty()) throw Error(Errc::kEmptyInput, "chunk '" + chunk.id + "' has no body");

  const int calls = call_count(utf8_length(chunk.body));
  const auto prompt = prompts::distillation(chunk.rendered());

  DistillOutcome out;
  for (int i = 0; i < calls; ++i) {
    const std::int64_t seed = options.seed + i;
    auto req = ChatRequest::user(standard.model(), prompt, options.temperature, seed);
    ++out.standard_calls;
    std::vector<QAPair> pairs;
    try {
      pairs = parse_qa_response(standard.complete(req));
    } catch (const Error& e) {
      if (e.code() != Errc::kFormatError) throw;
      ++out.escalations;
      auto retry = ChatRequest::user(escalation.model(), prompt, options.temperature, seed);
      try {
        pairs = parse_qa_response(escalation.complete(retry));
      } catch (const Error& e2) {
        if (e2.code() != Errc::kFormatError) throw;
        throw Error(Errc::kExhaustedEscalation,
                    "chunk '" + chunk.id + "' request " + std::to_string(i) + ": " + e2.what());
      }
    }
    for (auto& p : pairs) {
      p.task = QaTask::kQakGpt;
      p.gold_chunk_ids = {chunk.id};
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

DistillOutcome distill_corpus(const std::vector<Chunk>& chunks, GenerationBackend& standard,
                              GenerationBackend& escalation, const DistillOptions& options) {
  std::vector<DistillOutcome> per_chunk(chunks.size());
  detail::parallel_for(chunks.size(), options.parallelism, [&](std::size_t i) {
    per_chunk[i] = generate_qa(chunks[i], standard, escalation, options);
  });
  DistillOutcome out;
  for (auto& o : per_chunk) {
    out.standard_calls += o.standard_calls;
    out.escalations += o.escalations;
    for (auto& p : o.pairs) out.pairs.push_back(std::move(p));
  }
  return out;
}

RewriteResult rewrite_question(const QAPair& pair, GenerationBackend& backend, double temperature) {
  if (pair.task == QaTask::kQakGpt) {
    throw Error(Errc::kInvalidArgument, "only log-derived questions are rewritten");
  }
  auto req = ChatRequest::user(backend.model(), prompts::rewrite(pair.question), temperature);
  auto text = std::string(trim(backend.complete(req)));
  RewriteResult out;
  out.pair = pair;
  if (text.empty() || text == pair.question) {
    out.unchanged = true;
  } else {
    out.pair.question = std::move(text);
  }
  return out;
}

std::vector<RewriteResult> rewrite_questions(const std::vector<QAPair>& pairs,
                                             GenerationBackend& backend, double temperature,
                                             std::size_t parallelism) {
  std::vector<RewriteResult> out(pairs.size());
  detail::parallel_for(pairs.size(), parallelism,
               [&](std::size_t i) { out[i] = rewrite_question(pairs[i], backend, temperature); });
  return out;
}

CombinedDatasets combine_datasets(const std::vector<Chunk>& tc, const std::vector<QAPair>& qak_log,
                                  const std::vector<QAPair>& qak_gpt,
                                  const std::vector<QAPair>& qat_log) {
  std::unordered_set<std::string> known;
  for (const auto& c : tc) known.insert(c.id);

  std::set<std::pair<std::string, std::string>> seen;
  CombinedDatasets out;
  for (const auto* source : {&qak_log, &qak_gpt, &qat_log}) {
    for (const auto& p : *source) {
      if (p.question.empty() || p.answer.empty()) {
        throw Error(Errc::kInvalidArgument, "QA pair with empty question or answer");
      }
      if (p.gold_chunk_ids.empty() && p.task != QaTask::kQatLog) {
        throw Error(Errc::kInvalidArgument, "QA pair without gold chunk: " + p.question);
      }
      if (!known.empty()) {
        for (const auto& id : p.gold_chunk_ids) {
          if (!known.count(id)) throw Error(Errc::kInvalidArgument, "unknown gold chunk id '" + id + "'");
        }
      }
      if (!seen.emplace(p.question, p.answer).second) continue;
      out.data_em.push_back(p);
    }
  }
  out.data_llm = out.data_em;
  return out;
}

std::string qa_to_json(const QAPair& p) {
  ojson j;
  j["question"] = p.question;
  j["answer"] = p.answer;
  j["task"] = std::string(to_string(p.task));
  j["gold_chunk_ids"] = p.gold_chunk_ids;
  return j.dump();
}

QAPair qa_from_json(std::string_view line) {
  try {
    auto j = ojson::parse(line);
    QAPair p;
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.task = parse_qa_task(j.at("task").get<std::string>());
    if (j.contains("gold_chunk_ids")) p.gold_chunk_ids = j.at("gold_chunk_ids").get<std::vector<std::string>>();
    return p;
  } catch (const ojson::exception& e) {
    throw Error(Errc::kFormatError, std::string("QA record: ") + e.what());
  }
}

std::string qa_to_jsonl(const std::vector<QAPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += qa_to_json(p);
    out.push_back('\n');
  }
  return out;
}

std::vector<QAPair> qa_from_jsonl(std::string_view text) {
  std::vector<QAPair> out;
  for (const auto& line : split_lines(text)) out.push_back(qa_from_json(line));
  return out;
}

}  // namespace opsrag
