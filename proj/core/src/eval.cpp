#include "opsrag/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"
#include "parallel.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

void require_nonempty(const std::vector<EvalQuestion>& questions) {
  if (questions.empty()) throw Error(Errc::kEmptyEvalSet, "no evaluation questions");
}

bool any_gold(const std::vector<ScoredId>& hits, std::size_t k, const std::vector<std::string>& gold) {
  const std::size_t n = std::min(k, hits.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::find(gold.begin(), gold.end(), hits[i].id) != gold.end()) return true;
  }
  return false;
}

// Balanced-brace end of the object starting at `open`, honoring strings.
std::size_t object_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

int parse_rating(const json& v) {
  double r = 0.0;
  if (v.is_number()) {
    r = v.get<double>();
  } else if (v.is_string()) {
    auto s = v.get<std::string>();
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(Errc::kJudgeUnparseable, "empty rating");
    s = s.substr(b, e - b + 1);
    std::size_t used = 0;
    try {
      r = std::stod(s, &used);
    } catch (const std::exception&) {
      throw Error(Errc::kJudgeUnparseable, "rating '" + s + "' is not a number");
    }
    if (used != s.size()) throw Error(Errc::kJudgeUnparseable, "rating '" + s + "' is not a number");
  } else {
    throw Error(Errc::kJudgeUnparseable, "rating has the wrong type");
  }
  if (!std::isfinite(r) || r != std::floor(r) || r < 1.0 || r > 10.0) {
    throw Error(Errc::kJudgeUnparseable, "rating " + v.dump() + " outside 1..10");
  }
  return static_cast<int>(r);
}

Verdict parse_verdict(const json& v) {
  if (!v.is_string()) throw Error(Errc::kJudgeUnparseable, "verdict has the wrong type");
  auto s = v.get<std::string>();
  std::string t;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '[' && c != ']') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (t == "a") return Verdict::kA;
  if (t == "b") return Verdict::kB;
  if (t == "tie") return Verdict::kTie;
  throw Error(Errc::kJudgeUnparseable, "verdict '" + s + "' is not A, B or Tie");
}

Verdict swap(Verdict v) {
  switch (v) {
    case Verdict::kA: return Verdict::kB;
    case Verdict::kB: return Verdict::kA;
    case Verdict::kTie: return Verdict::kTie;
  }
  return Verdict::kTie;
}

// Calls the judge until the reply parses in the wanted mode, with up to
// max_reasks extra attempts.
JudgeVerdict ask_judge(GenerationBackend& judge, const std::string& prompt, JudgeMode want,
                       const JudgeOptions& options, std::int64_t seed_base) {
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= options.max_reasks; ++attempt) {
    auto req = ChatRequest::user(judge.model(), prompt, options.temperature,
                                 seed_base + static_cast<std::int64_t>(attempt));
    auto reply = judge.complete(req);
    try {
      auto v = parse_judge_json(reply);
      if (v.mode != want) throw Error(Errc::kJudgeUnparseable, "reply is in the other judge mode");
      return v;
    } catch (const Error& e) {
      if (e.code() != Errc::kJudgeUnparseable) throw;
      last_error = e.what();
    }
  }
  throw Error(Errc::kJudgeUnparseable,
              "no parseable verdict after " + std::to_string(options.max_reasks + 1) + " attempts: " + last_error);
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v;
  return os.str();
}

}  // namespace

std::string eval_to_jsonl(const std::vector<EvalQuestion>& questions) {
  std::string out;
  for (const auto& q : questions) {
    ojson j;
    j["question"] = q.question;
    j["task"] = std::string(to_string(q.task));
    j["gold_chunk_ids"] = q.gold_chunk_ids;
    j["reference_answer"] = q.reference_answer;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<EvalQuestion> eval_from_jsonl(std::string_view text) {
  std::vector<EvalQuestion> out;
  for (const auto& line : split_lines(text)) {
    EvalQuestion q;
    try {
      auto j = json::parse(line);
      q.question = j.at("question").get<std::string>();
      q.task = parse_qa_mode(j.at("task").get<std::string>());
      q.gold_chunk_ids = j.at("gold_chunk_ids").get<std::vector<std::string>>();
      q.reference_answer = j.value("reference_answer", std::string());
    } catch (const json::exception& e) {
      throw Error(Errc::kFormatError, std::string("eval record: ") + e.what());
    } catch (const Error& e) {
      throw Error(Errc::kFormatError, std::string("eval record: ") + e.what());
    }
    if (q.gold_chunk_ids.empty()) throw Error(Errc::kFormatError, "eval record without gold ids: " + q.question);
    out.push_back(std::move(q));
  }
  return out;
}

void validate_eval_set(const std::vector<EvalQuestion>& questions, const ChunkStore& store) {
  for (const auto& q : questions) {
    for (const auto& id : q.gold_chunk_ids) {
      if (!store.find(id)) throw Error(Errc::kNotFound, "gold chunk '" + id + "' of \"" + q.question + "\"");
    }
  }
}

std::vector<std::size_t> gold_ranks(const std::vector<EvalQuestion>& questions, const Retriever& retriever,
                                    std::size_t max_k) {
  std::vector<std::size_t> ranks;
  ranks.reserve(questions.size());
  for (const auto& q : questions) {
    auto hits = retriever.retrieve(q.question, max_k);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < hits.size() && rank == 0; ++i) {
      if (std::find(q.gold_chunk_ids.begin(), q.gold_chunk_ids.end(), hits[i].id) != q.gold_chunk_ids.end()) {
        rank = i + 1;
      }
    }
    ranks.push_back(rank);
  }
  return ranks;
}

double acc_at_k(const std::vector<EvalQuestion>& questions, const Retriever& retriever, std::size_t k) {
  return acc_at_ks(questions, retriever, {k}).front();
}

double acc_at_k(const std::vector<EvalQuestion>& questions, const TextEncoder& encoder,
                const VectorIndex& index, std::size_t k) {
  require_nonempty(questions);
  if (k == 0 || k > index.size()) {
    throw Error(Errc::kInvalidArgument,
                "k = " + std::to_string(k) + " with an index of " + std::to_string(index.size()));
  }
  return acc_at_k(questions, DenseRetriever(encoder, index), k);
}

std::vector<double> acc_at_ks(const std::vector<EvalQuestion>& questions, const Retriever& retriever,
                              const std::vector<std::size_t>& ks) {
  require_nonempty(questions);
  if (ks.empty()) return {};
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  std::vector<std::size_t> hits(ks.size(), 0);
  for (const auto& q : questions) {
    auto found = retriever.retrieve(q.question, max_k);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (any_gold(found, ks[i], q.gold_chunk_ids)) ++hits[i];
    }
  }
  std::vector<double> out;
  for (auto h : hits) out.push_back(static_cast<double>(h) / static_cast<double>(questions.size()));
  return out;
}

LatencyStats measure_latency(const VectorIndex& index, const TextEncoder& encoder,
                             const std::vector<std::string>& queries, std::size_t k,
                             std::size_t repetitions) {
  LatencyStats stats;
  if (queries.empty() || repetitions == 0) return stats;
  std::size_t sink = 0;
  for (const auto& q : queries) sink += index.search(encoder.encode(q), k).size();

  std::vector<double> samples;
  samples.reserve(queries.size() * repetitions);
  using Clock = std::chrono::steady_clock;
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& q : queries) {
      auto t0 = Clock::now();
      auto hits = index.search(encoder.encode(q), k);
      auto t1 = Clock::now();
      sink += hits.size();
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  (void)sink;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.samples = samples.size();
  stats.mean_ms = sum / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  auto nearest_rank = [&](double p) {
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
  };
  stats.p50_ms = nearest_rank(0.50);
  stats.p95_ms = nearest_rank(0.95);
  return stats;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kA: return "A";
    case Verdict::kB: return "B";
    case Verdict::kTie: return "Tie";
  }
  return "Tie";
}

JudgeVerdict parse_judge_json(std::string_view text) {
  std::optional<json> last;
  std::string last_error = "no JSON object with a rating or verdict";
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    auto close = object_end(text, open);
    if (close == std::string_view::npos) continue;
    auto obj = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    if (obj.contains("rating") || obj.contains("verdict")) last = std::move(obj);
  }
  if (!last) throw Error(Errc::kJudgeUnparseable, last_error);

  JudgeVerdict v;
  if (last->contains("explanation") && (*last)["explanation"].is_string()) {
    v.explanation = (*last)["explanation"].get<std::string>();
  }
  if (last->contains("verdict")) {
    v.mode = JudgeMode::kPairwise;
    v.verdict = parse_verdict((*last)["verdict"]);
  } else {
    v.mode = JudgeMode::kSingle;
    v.rating = parse_rating((*last)["rating"]);
  }
  return v;
}

SingleJudgement judge_single(QaMode mode, std::string_view question, std::string_view reference,
                             std::string_view answer, GenerationBackend& judge, const JudgeOptions& options) {
  if (options.runs == 0) throw Error(Errc::kInvalidArgument, "judge runs must be positive");
  const auto prompt = prompts::judge_single(mode, question, reference, answer);
  SingleJudgement out;
  double sum = 0.0;
  for (std::size_t r = 0; r < options.runs; ++r) {
    auto seed = options.seed + static_cast<std::int64_t>(r * (options.max_reasks + 1));
    auto v = ask_judge(judge, prompt, JudgeMode::kSingle, options, seed);
    out.scores.push_back(v.rating);
    out.explanations.push_back(std::move(v.explanation));
    sum += v.rating;
  }
  out.mean = sum / static_cast<double>(out.scores.size());
  return out;
}

JudgeVerdict judge_pairwise(QaMode mode, std::string_view question, std::string_view reference,
                            std::string_view answer_a, std::string_view answer_b, GenerationBackend& judge,
                            const JudgeOptions& options) {
  auto forward = ask_judge(judge, prompts::judge_pairwise(mode, question, reference, answer_a, answer_b),
                           JudgeMode::kPairwise, options, options.seed);
  auto swapped = ask_judge(judge, prompts::judge_pairwise(mode, question, reference, answer_b, answer_a),
                           JudgeMode::kPairwise, options,
                           options.seed + static_cast<std::int64_t>(options.max_reasks + 1));
  JudgeVerdict out;
  out.mode = JudgeMode::kPairwise;
  const Verdict second = swap(swapped.verdict);
  out.verdict = forward.verdict == second ? forward.verdict : Verdict::kTie;
  out.explanation = forward.explanation;
  if (!swapped.explanation.empty()) {
    out.explanation += (out.explanation.empty() ? "" : "\n") + swapped.explanation;
  }
  return out;
}

std::vector<SingleJudgement> judge_single_all(const std::vector<JudgeItem>& items, GenerationBackend& judge,
                                              const JudgeOptions& options) {
  std::vector<SingleJudgement> out(items.size());
  detail::parallel_for(items.size(), options.concurrency, [&](std::size_t i) {
    const auto& it = items[i];
    out[i] = judge_single(it.question.task, it.question.question, it.question.reference_answer, it.answer, judge,
                          options);
  });
  return out;
}

std::vector<JudgeVerdict> judge_pairwise_all(const std::vector<JudgeItem>& items, GenerationBackend& judge,
                                             const JudgeOptions& options) {
  std::vector<JudgeVerdict> out(items.size());
  detail::parallel_for(items.size(), options.concurrency, [&](std::size_t i) {
    const auto& it = items[i];
    out[i] = judge_pairwise(it.question.task, it.question.question, it.question.reference_answer, it.answer,
                            it.answer_b, judge, options);
  });
  return out;
}

PairwiseTally tally(const std::vector<JudgeVerdict>& verdicts) {
  PairwiseTally t;
  for (const auto& v : verdicts) {
    switch (v.verdict) {
      case Verdict::kA: ++t.wins; break;
      case Verdict::kB: ++t.losses; break;
      case Verdict::kTie: ++t.ties; break;
    }
  }
  return t;
}

std::string AblationConfig::label() const {
  return std::string(his ? "+" : "-") + "/" + (ahns ? "+" : "-");
}

std::vector<AblationConfig> default_ablation_configs() {
  return {{false, false}, {true, false}, {false, true}, {true, true}};
}

double AblationRow::mean_at(QaMode task, std::size_t k) const {
  for (const auto& c : cells) {
    if (c.task == task && c.k == k) return c.mean;
  }
  throw Error(Errc::kNotFound, "no cell " + std::string(to_string(task)) + "@" + std::to_string(k));
}

double AblationRow::overall_at(std::size_t k) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.k == k) {
      sum += c.mean;
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::kNotFound, "no cells at k = " + std::to_string(k));
  return sum / static_cast<double>(n);
}

const AblationRow& AblationReport::row(std::string_view label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw Error(Errc::kNotFound, "no ablation row '" + std::string(label) + "'");
}

std::string AblationReport::to_json() const {
  ojson j;
  j["ks"] = ks;
  j["seeds"] = seeds;
  ojson task_names = ojson::array();
  for (auto t : tasks) task_names.push_back(std::string(to_string(t)));
  j["tasks"] = task_names;
  ojson jrows = ojson::array();
  for (const auto& r : rows) {
    ojson jr;
    jr["config"] = r.label;
    jr["trained"] = r.trained;
    jr["his"] = r.his;
    jr["ahns"] = r.ahns;
    ojson cells = ojson::array();
    for (const auto& c : r.cells) {
      ojson jc;
      jc["task"] = std::string(to_string(c.task));
      jc["k"] = c.k;
      jc["acc"] = c.mean;
      jc["per_seed"] = c.per_seed;
      cells.push_back(std::move(jc));
    }
    jr["cells"] = std::move(cells);
    jrows.push_back(std::move(jr));
  }
  j["rows"] = std::move(jrows);
  return j.dump(2) + "\n";
}

std::string AblationReport::to_text() const {
  std::vector<std::string> header = {"HIS/AHNS"};
  for (auto t : tasks) {
    for (auto k : ks) header.push_back(std::string(to_string(t)) + "@" + std::to_string(k));
  }
  std::vector<std::vector<std::string>> table = {header};
  for (const auto& r : rows) {
    std::vector<std::string> line = {r.label};
    for (auto t : tasks) {
      for (auto k : ks) line.push_back(pct(r.mean_at(t, k)));
    }
    table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) {
        os << std::left << std::setw(static_cast<int>(width[i])) << line[i];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << line[i];
      }
    }
    os << "\n";
  }
  return os.str();
}

AblationReport run_ablation_report(const std::vector<Chunk>& chunks, const std::vector<QAPair>& train_pairs,
                                   const std::vector<EvalQuestion>& eval_set,
                                   const AblationSettings& settings) {
  require_nonempty(eval_set);
  if (settings.seeds.empty()) throw Error(Errc::kInvalidArgument, "ablation needs at least one seed");

  AblationReport report;
  report.ks = settings.ks;
  report.seeds = settings.seeds;
  std::set<QaMode> present;
  for (const auto& q : eval_set) present.insert(q.task);
  report.tasks.assign(present.begin(), present.end());

  std::vector<std::vector<EvalQuestion>> by_task(report.tasks.size());
  for (const auto& q : eval_set) {
    auto pos = std::find(report.tasks.begin(), report.tasks.end(), q.task) - report.tasks.begin();
    by_task[static_cast<std::size_t>(pos)].push_back(q);
  }

  struct Spec {
    std::string label;
    bool trained;
    AblationConfig config;
  };
  std::vector<Spec> specs;
  if (settings.include_untrained) specs.push_back({"untrained", false, {}});
  for (const auto& c : settings.configs) specs.push_back({c.label(), true, c});

  for (const auto& spec : specs) {
    AblationRow row;
    row.label = spec.label;
    row.trained = spec.trained;
    row.his = spec.config.his;
    row.ahns = spec.config.ahns;
    for (auto t : report.tasks) {
      for (auto k : report.ks) row.cells.push_back({t, k, 0.0, {}});
    }
    for (auto seed : settings.seeds) {
      EncoderConfig ec = settings.encoder;
      ec.seed = seed;
      EncoderModel model = EncoderModel::random_init(ec);
      if (spec.trained) {
        TrainConfig tc = settings.train;
        tc.seed = seed;
        tc.homogeneous_batches = spec.config.his;
        tc.hard_negatives = spec.config.ahns;
        model = train(std::move(model), train_pairs, chunks, tc).model;
      }
      auto index = build_chunk_index(chunks, model);
      DenseRetriever retriever(model, index);
      std::size_t cell = 0;
      for (const auto& questions : by_task) {
        for (double acc : acc_at_ks(questions, retriever, report.ks)) row.cells[cell++].per_seed.push_back(acc);
      }
    }
    for (auto& c : row.cells) {
      double sum = 0.0;
      for (double v : c.per_seed) sum += v;
      c.mean = sum / static_cast<double>(c.per_seed.size());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace opsrag
