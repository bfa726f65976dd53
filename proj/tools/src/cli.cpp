#include "opsrag_cli/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "opsrag/backend.hpp"
#include "opsrag/chunker.hpp"
#include "opsrag/distiller.hpp"
#include "opsrag/document.hpp"
#include "opsrag/error.hpp"
#include "opsrag/eval.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"
#include "opsrag/mock_backend.hpp"
#include "opsrag/rag.hpp"
#include "opsrag/server.hpp"
#include "opsrag/synthetic.hpp"
#include "opsrag/training.hpp"
#include "opsrag_cli/config.hpp"

namespace opsrag::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using Artifacts = std::vector<std::pair<std::string, fs::path>>;

struct Flags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string k_list;
  std::string task = "both";
  std::string backend;
  int port = -1;
  std::string judge_mode = "single";
  std::string against;
  bool with_synth = false;
};

struct Context {
  PipelineConfig cfg;
  Flags flags;
  std::vector<std::size_t> ks;
  std::ostream& out;
  std::ostream& err;
};

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::kConfigError, msg); }

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      config_error("--k expects a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (ks.empty()) config_error("--k list is empty");
  return ks;
}

void require_inputs(const Artifacts& inputs) {
  std::string missing;
  for (const auto& [name, path] : inputs) {
    if (!fs::exists(path)) missing += "\n  " + name + ": " + path.string();
  }
  if (!missing.empty()) config_error("missing input" + missing);
}

std::vector<ArtifactDigest> digests(const Artifacts& artifacts) {
  std::vector<ArtifactDigest> out;
  for (const auto& [name, path] : artifacts) out.push_back(digest_artifact(name, path));
  return out;
}

void finish_stage(Context& ctx, std::string_view stage, const Artifacts& inputs, const Artifacts& outputs) {
  auto manifest = render_manifest(stage, digests(inputs), config_fingerprint(ctx.cfg, stage), digests(outputs));
  auto path = ctx.cfg.paths.manifests() / (std::string(stage) + ".json");
  write_file(path, manifest);
  ctx.out << stage << ": wrote";
  for (const auto& [name, p] : outputs) ctx.out << " " << name;
  ctx.out << "\n";
}

std::unique_ptr<Tokenizer> tokenizer(const Context& ctx) { return make_tokenizer(ctx.cfg.tokenizer); }

std::vector<fs::path> corpus_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) config_error("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext == ".md" || ext == ".markdown" || ext == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

CassetteMode cassette_mode(const std::string& text) {
  if (text == "replay") return CassetteMode::kReplay;
  if (text == "record") return CassetteMode::kRecord;
  return CassetteMode::kReplayOrRecord;
}

std::shared_ptr<GenerationBackend> generation_backend(const BackendSettings& b, bool escalation) {
  const auto& url = escalation && !b.escalation_url.empty() ? b.escalation_url : b.url;
  const auto& model = escalation && !b.escalation_model.empty() ? b.escalation_model : b.model;
  auto backend = make_backend(url, model, b.api_key);
  if (!b.cassette.empty()) {
    auto path = b.cassette;
    if (escalation) path += ".escalation";
    backend = std::make_shared<CassetteBackend>(path, cassette_mode(b.cassette_mode), backend, model);
  }
  return backend;
}

std::vector<QAPair> read_pairs(const fs::path& path) { return qa_from_jsonl(read_file(path)); }

std::vector<Chunk> read_chunks(const fs::path& path) { return chunks_from_jsonl(read_file(path)); }

std::vector<EvalQuestion> read_eval(const Context& ctx) {
  auto all = eval_from_jsonl(read_file(ctx.cfg.paths.eval_set));
  if (ctx.flags.task == "both") return all;
  auto mode = parse_qa_mode(ctx.flags.task);
  std::vector<EvalQuestion> kept;
  for (auto& q : all) {
    if (q.task == mode) kept.push_back(std::move(q));
  }
  return kept;
}

std::size_t first_k(const Context& ctx, std::size_t fallback) {
  return ctx.flags.k_list.empty() ? fallback : ctx.ks.front();
}

// ---------------------------------------------------------------- stages

void stage_synth(Context& ctx) {
  auto& p = ctx.cfg.paths;
  auto tok = tokenizer(ctx);
  auto corpus = make_synthetic_corpus(ctx.cfg.synthetic, *tok, ctx.cfg.chunking);
  fs::create_directories(p.corpus_dir);
  for (const auto& d : corpus.documents) write_file(p.corpus_dir / (d.id + ".md"), d.markdown);
  write_file(p.qak_log, qa_to_jsonl(corpus.qak_log));
  write_file(p.qat_log, qa_to_jsonl(corpus.qat_log));
  write_file(p.eval_set, eval_to_jsonl(corpus.eval));
  finish_stage(ctx, "synth", {},
               {{"corpus", p.corpus_dir}, {"qak_log", p.qak_log}, {"qat_log", p.qat_log}, {"eval_set", p.eval_set}});
}

void stage_ingest(Context& ctx) {
  auto& p = ctx.cfg.paths;
  auto files = corpus_files(p.corpus_dir);
  if (files.empty()) config_error("no markup files in " + p.corpus_dir.string());
  std::string out;
  for (const auto& f : files) {
    Document doc;
    try {
      doc = clean_text(parse_document(read_file(f), f.stem().string()));
    } catch (const Error& e) {
      throw Error(e.code(), f.filename().string() + ": " + e.what());
    }
    out += document_to_json(doc);
    out.push_back('\n');
  }
  write_file(p.documents, out);
  finish_stage(ctx, "ingest", {{"corpus", p.corpus_dir}}, {{"documents", p.documents}});
}

void stage_chunk(Context& ctx) {
  auto& p = ctx.cfg.paths;
  require_inputs({{"documents", p.documents}});
  auto tok = tokenizer(ctx);
  std::vector<Chunk> chunks;
  std::size_t skipped = 0;
  for (const auto& line : read_lines(p.documents)) {
    auto doc = document_from_json(line);
    try {
      for (auto& c : chunk_targeted(doc, *tok, ctx.cfg.chunking)) chunks.push_back(std::move(c));
    } catch (const Error& e) {
      if (e.code() != Errc::kEmptyDocument) throw;
      ctx.err << "chunk: skipping " << doc.id << " (no body text after cleaning)\n";
      ++skipped;
    }
  }
  write_file(p.chunks, chunks_to_jsonl(chunks));
  ctx.out << "chunk: " << chunks.size() << " chunks";
  if (skipped) ctx.out << ", " << skipped << " empty documents skipped";
  ctx.out << "\n";
  finish_stage(ctx, "chunk", {{"documents", p.documents}}, {{"chunks", p.chunks}});
}

fs::path rewritten(const fs::path& path) {
  auto out = path;
  out.replace_extension(".rewritten.jsonl");
  return out;
}

void stage_distill(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"chunks", p.chunks}};
  if (ctx.cfg.rewrite_log_questions) {
    inputs.push_back({"qak_log", p.qak_log});
    inputs.push_back({"qat_log", p.qat_log});
  }
  require_inputs(inputs);
  auto standard = generation_backend(ctx.cfg.backend, false);
  auto escalation = generation_backend(ctx.cfg.backend, true);
  DistillOptions opts;
  opts.temperature = ctx.cfg.distill_temperature;
  opts.seed = static_cast<std::int64_t>(ctx.cfg.seed);
  opts.parallelism = ctx.cfg.distill_parallelism;
  auto outcome = distill_corpus(read_chunks(p.chunks), *standard, *escalation, opts);
  write_file(p.qak_gpt, qa_to_jsonl(outcome.pairs));
  ctx.out << "distill: " << outcome.pairs.size() << " pairs from " << outcome.standard_calls << " calls, "
          << outcome.escalations << " escalations\n";
  Artifacts outputs = {{"qak_gpt", p.qak_gpt}};
  if (ctx.cfg.rewrite_log_questions) {
    for (const auto& [name, path] : {std::pair{"qak_log", p.qak_log}, std::pair{"qat_log", p.qat_log}}) {
      std::vector<QAPair> pairs;
      for (auto& r : rewrite_questions(read_pairs(path), *standard, 0.0, ctx.cfg.distill_parallelism)) {
        pairs.push_back(std::move(r.pair));
      }
      write_file(rewritten(path), qa_to_jsonl(pairs));
      outputs.push_back({std::string(name) + "_rewritten", rewritten(path)});
    }
  }
  finish_stage(ctx, "distill", inputs, outputs);
}

void stage_combine(Context& ctx) {
  auto& p = ctx.cfg.paths;
  auto qak_log = ctx.cfg.rewrite_log_questions ? rewritten(p.qak_log) : p.qak_log;
  auto qat_log = ctx.cfg.rewrite_log_questions ? rewritten(p.qat_log) : p.qat_log;
  Artifacts inputs = {{"chunks", p.chunks}, {"qak_log", qak_log}, {"qak_gpt", p.qak_gpt}, {"qat_log", qat_log}};
  require_inputs(inputs);
  auto combined = combine_datasets(read_chunks(p.chunks), read_pairs(qak_log), read_pairs(p.qak_gpt),
                                   read_pairs(qat_log));
  write_file(p.data_em, qa_to_jsonl(combined.data_em));
  write_file(p.data_llm, qa_to_jsonl(combined.data_llm));
  ctx.out << "combine: " << combined.data_em.size() << " pairs\n";
  finish_stage(ctx, "combine", inputs, {{"data_em", p.data_em}, {"data_llm", p.data_llm}});
}

void stage_train(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"data_em", p.data_em}, {"chunks", p.chunks}};
  require_inputs(inputs);
  auto initial = EncoderModel::random_init(ctx.cfg.encoder);
  auto result = train(std::move(initial), read_pairs(p.data_em), read_chunks(p.chunks), ctx.cfg.training);
  result.model.save(p.model);

  ojson report;
  report["epoch_mean_loss"] = result.epoch_mean_loss;
  report["steps"] = result.steps;
  report["skipped_batches"] = result.skipped_batches;
  auto report_path = ctx.cfg.paths.reports() / "train.json";
  write_file(report_path, report.dump(2) + "\n");
  ctx.out << "train-embed: " << result.steps << " steps, epoch losses";
  for (double l : result.epoch_mean_loss) ctx.out << " " << l;
  ctx.out << "\n";
  finish_stage(ctx, "train-embed", inputs, {{"model", p.model}, {"train_report", report_path}});
}

void stage_index(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"model", p.model}, {"chunks", p.chunks}};
  require_inputs(inputs);
  auto model = EncoderModel::load(p.model);
  auto chunks = read_chunks(p.chunks);
  auto index = build_chunk_index(chunks, model, ctx.cfg.index);
  index.save(p.index);

  // Sidecar mapping index ids to chunk metadata.
  std::string sidecar;
  for (const auto& c : chunks) {
    ojson j;
    j["id"] = c.id;
    j["doc_id"] = c.doc_id;
    j["title_path"] = c.title_path;
    j["token_count"] = c.token_count;
    j["method"] = std::string(to_string(c.method));
    sidecar += j.dump() + "\n";
  }
  auto sidecar_path = fs::path(p.index.string() + ".meta.jsonl");
  write_file(sidecar_path, sidecar);
  ctx.out << "index: " << index.size() << " vectors of dim " << index.dim() << "\n";
  finish_stage(ctx, "index", inputs, {{"index", p.index}, {"index_metadata", sidecar_path}});
}

void stage_raft(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"data_llm", p.data_llm}, {"model", p.model}, {"index", p.index}, {"chunks", p.chunks}};
  require_inputs(inputs);
  auto model = EncoderModel::load(p.model);
  auto index = VectorIndex::load(p.index);
  ChunkStore store(read_chunks(p.chunks));
  DenseRetriever retriever(model, index);
  auto examples = build_raft_dataset(read_pairs(p.data_llm), retriever, store, first_k(ctx, ctx.cfg.raft_k));
  write_file(p.raft, raft_to_jsonl(examples));
  ctx.out << "raft-build: " << examples.size() << " examples\n";
  finish_stage(ctx, "raft-build", inputs, {{"raft", p.raft}});
}

std::atomic<bool> g_stop{false};

void stage_serve(Context& ctx) {
  auto& p = ctx.cfg.paths;
  auto artifacts = load_serve_artifacts(p.model, p.index, p.chunks);
  auto backend = generation_backend(ctx.cfg.backend, false);
  RagConfig rc;
  rc.top_k = first_k(ctx, ctx.cfg.top_k);
  RagEngine engine(artifacts.encoder, artifacts.index, artifacts.store, *backend, rc);
  ServerConfig sc;
  sc.host = ctx.cfg.serve_host;
  sc.port = ctx.flags.port >= 0 ? ctx.flags.port : ctx.cfg.serve_port;
  sc.default_top_k = rc.top_k;
  RagServer server(engine, sc);
  int port = server.start();
  ctx.out << "serving on http://" << sc.host << ":" << port << std::endl;
  g_stop = false;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
}

void stage_eval_acc(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"eval_set", p.eval_set}, {"model", p.model}, {"index", p.index}, {"chunks", p.chunks}};
  require_inputs(inputs);
  auto model = EncoderModel::load(p.model);
  auto index = VectorIndex::load(p.index);
  ChunkStore store(read_chunks(p.chunks));
  auto questions = read_eval(ctx);
  validate_eval_set(questions, store);
  const auto ks = ctx.flags.k_list.empty() ? ctx.cfg.eval_ks : ctx.ks;
  DenseRetriever retriever(model, index);

  ojson report;
  report["ks"] = ks;
  report["rows"] = ojson::array();
  std::vector<std::vector<std::string>> table = {{"task", "questions"}};
  for (auto k : ks) table.front().push_back("acc@" + std::to_string(k));
  for (auto mode : {QaMode::kKnowledgeAcquisition, QaMode::kTroubleshooting}) {
    std::vector<EvalQuestion> subset;
    for (const auto& q : questions) {
      if (q.task == mode) subset.push_back(q);
    }
    if (subset.empty()) continue;
    auto accs = acc_at_ks(subset, retriever, ks);
    for (std::size_t i = 0; i < accs.size(); ++i) {
      for (std::size_t j = 0; j < accs.size(); ++j) {
        if (ks[i] < ks[j] && accs[i] > accs[j]) throw Error(Errc::kInvalidArgument, "acc@k is not monotone in k");
      }
    }
    ojson row;
    row["task"] = std::string(to_string(mode));
    row["questions"] = subset.size();
    row["acc"] = accs;
    report["rows"].push_back(row);
    std::vector<std::string> line = {std::string(to_string(mode)), std::to_string(subset.size())};
    for (double a : accs) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", a);
      line.push_back(buf);
    }
    table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream text;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) text << "  ";
      text << (i == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[i])) << line[i];
    }
    text << "\n";
  }
  if (report["rows"].empty()) throw Error(Errc::kEmptyEvalSet, "no questions for task " + ctx.flags.task);
  auto json_path = p.reports() / "acc.json";
  auto text_path = p.reports() / "acc.txt";
  write_file(json_path, report.dump(2) + "\n");
  write_file(text_path, text.str());
  ctx.out << text.str();
  finish_stage(ctx, "eval-acc", inputs, {{"acc_report", json_path}, {"acc_table", text_path}});
}

void stage_eval_latency(Context& ctx) {
  auto& p = ctx.cfg.paths;
  require_inputs({{"eval_set", p.eval_set}, {"model", p.model}, {"index", p.index}});
  auto model = EncoderModel::load(p.model);
  auto index = VectorIndex::load(p.index);
  std::vector<std::string> queries;
  for (const auto& q : read_eval(ctx)) queries.push_back(q.question);
  const auto ks = ctx.flags.k_list.empty() ? ctx.cfg.eval_ks : ctx.ks;
  ojson report = ojson::array();
  for (auto k : ks) {
    auto s = measure_latency(index, model, queries, k, ctx.cfg.latency_repetitions);
    ojson row;
    row["k"] = k;
    row["mean_ms"] = s.mean_ms;
    row["p50_ms"] = s.p50_ms;
    row["p95_ms"] = s.p95_ms;
    row["samples"] = s.samples;
    report.push_back(row);
    ctx.out << "latency k=" << k << ": mean " << s.mean_ms << " ms, p50 " << s.p50_ms << " ms, p95 " << s.p95_ms
            << " ms\n";
  }
  write_file(p.reports() / "latency.json", report.dump(2) + "\n");
}

void stage_eval_judge(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"eval_set", p.eval_set}, {"model", p.model}, {"index", p.index}, {"chunks", p.chunks}};
  if (!ctx.flags.against.empty()) inputs.push_back({"against", ctx.flags.against});
  require_inputs(inputs);
  const bool pairwise = ctx.flags.judge_mode == "pairwise";
  if (!pairwise && ctx.flags.judge_mode != "single") config_error("--mode must be single or pairwise");

  auto model = EncoderModel::load(p.model);
  auto index = VectorIndex::load(p.index);
  ChunkStore store(read_chunks(p.chunks));
  auto generator = generation_backend(ctx.cfg.backend, false);
  auto judge = generation_backend(ctx.cfg.judge, false);
  RagConfig rc;
  rc.top_k = first_k(ctx, ctx.cfg.top_k);
  RagEngine engine(model, index, store, *generator, rc);

  std::map<std::string, std::string> against;
  if (!ctx.flags.against.empty()) {
    for (const auto& line : read_lines(ctx.flags.against)) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("question") || !j.contains("answer")) {
        config_error("--against lines must be {question, answer}");
      }
      against[j["question"].get<std::string>()] = j["answer"].get<std::string>();
    }
  }

  std::vector<JudgeItem> items;
  for (const auto& q : read_eval(ctx)) {
    JudgeItem it;
    it.question = q;
    it.answer = engine.answer(q.question, q.task, rc.top_k).answer;
    if (pairwise) {
      auto found = against.find(q.question);
      it.answer_b = found != against.end() ? found->second : engine.answer(q.question, q.task, 1).answer;
    }
    items.push_back(std::move(it));
  }

  ojson report;
  report["mode"] = ctx.flags.judge_mode;
  report["items"] = ojson::array();
  if (pairwise) {
    auto verdicts = judge_pairwise_all(items, *judge, ctx.cfg.judge_options);
    for (std::size_t i = 0; i < items.size(); ++i) {
      report["items"].push_back({{"question", items[i].question.question},
                                 {"task", std::string(to_string(items[i].question.task))},
                                 {"verdict", std::string(to_string(verdicts[i].verdict))}});
    }
    auto t = tally(verdicts);
    report["tally"] = {{"wins", t.wins}, {"losses", t.losses}, {"ties", t.ties}};
    ctx.out << "judge pairwise: " << t.wins << " wins, " << t.losses << " losses, " << t.ties << " ties\n";
  } else {
    auto judged = judge_single_all(items, *judge, ctx.cfg.judge_options);
    std::map<std::string, std::pair<double, std::size_t>> by_task;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto task = std::string(to_string(items[i].question.task));
      report["items"].push_back({{"question", items[i].question.question},
                                 {"task", task},
                                 {"scores", judged[i].scores},
                                 {"mean", judged[i].mean}});
      by_task[task].first += judged[i].mean;
      by_task[task].second += 1;
    }
    report["summary"] = ojson::object();
    for (const auto& [task, acc] : by_task) {
      double mean = acc.first / static_cast<double>(acc.second);
      report["summary"][task] = mean;
      ctx.out << "judge single " << task << ": mean " << mean << " over " << acc.second << " answers\n";
    }
  }
  auto path = p.reports() / "judge.json";
  write_file(path, report.dump(2) + "\n");
  finish_stage(ctx, "eval-judge", inputs, {{"judge_report", path}});
}

void stage_eval_ablation(Context& ctx) {
  auto& p = ctx.cfg.paths;
  Artifacts inputs = {{"chunks", p.chunks}, {"data_em", p.data_em}, {"eval_set", p.eval_set}};
  require_inputs(inputs);
  AblationSettings s;
  s.encoder = ctx.cfg.encoder;
  s.train = ctx.cfg.training;
  s.seeds = ctx.cfg.ablation_seeds;
  s.ks = ctx.flags.k_list.empty() ? ctx.cfg.eval_ks : ctx.ks;
  auto report = run_ablation_report(read_chunks(p.chunks), read_pairs(p.data_em), read_eval(ctx), s);
  auto json_path = p.reports() / "ablation.json";
  auto text_path = p.reports() / "ablation.txt";
  write_file(json_path, report.to_json());
  write_file(text_path, report.to_text());
  ctx.out << report.to_text();
  finish_stage(ctx, "eval-ablation", inputs, {{"ablation_report", json_path}, {"ablation_table", text_path}});
}

void stage_pipeline(Context& ctx) {
  if (ctx.flags.with_synth) stage_synth(ctx);
  stage_ingest(ctx);
  stage_chunk(ctx);
  stage_distill(ctx);
  stage_combine(ctx);
  stage_train(ctx);
  stage_index(ctx);
  stage_raft(ctx);
  stage_eval_acc(ctx);
}

}  // namespace

ArtifactDigest digest_artifact(std::string name, const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      files.push_back({fs::relative(entry.path(), path).generic_string(), sha256_hex(read_file(entry.path()))});
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& [rel, digest] : files) listing += rel + "\t" + digest + "\n";
    return {std::move(name), sha256_hex(listing)};
  }
  return {std::move(name), sha256_hex(read_file(path))};
}

std::string render_manifest(std::string_view stage, const std::vector<ArtifactDigest>& inputs,
                            std::string_view config_fingerprint, const std::vector<ArtifactDigest>& outputs) {
  auto combined = [](const std::vector<ArtifactDigest>& list) {
    std::string s;
    for (const auto& d : list) s += d.name + "\t" + d.sha256 + "\n";
    return sha256_hex(s);
  };
  auto listing = [](const std::vector<ArtifactDigest>& list) {
    ojson arr = ojson::array();
    for (const auto& d : list) arr.push_back({{"name", d.name}, {"sha256", d.sha256}});
    return arr;
  };
  ojson j;
  j["stage"] = stage;
  j["inputs_hash"] = combined(inputs);
  j["config_hash"] = sha256_hex(config_fingerprint);
  j["outputs_hash"] = combined(outputs);
  j["inputs"] = listing(inputs);
  j["outputs"] = listing(outputs);
  return j.dump(2) + "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented question answering over IT-operations corpora.", "opsrag"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config_path, "Pipeline config file (JSON)");
  auto* seed_opt = app.add_option("--seed", flags.seed, "Seed for every stochastic component");
  app.add_option("--k", flags.k_list, "Comma-separated k values, e.g. 1,5,20");
  app.add_option("--task", flags.task, "Task filter for evaluation")->check(CLI::IsMember({"ka", "ts", "both"}));
  app.add_option("--backend", flags.backend, "Generation backend URL (mock:// or http://...)");

  using Stage = void (*)(Context&);
  std::vector<std::pair<CLI::App*, Stage>> stages;
  auto add = [&](CLI::App& parent, const char* name, const char* help, Stage fn) {
    auto* sub = parent.add_subcommand(name, help);
    sub->fallthrough();
    stages.push_back({sub, fn});
    return sub;
  };
  add(app, "synth", "Generate the synthetic topic-cluster corpus", stage_synth);
  add(app, "ingest", "Parse and clean the corpus", stage_ingest);
  add(app, "chunk", "Split cleaned documents into chunks", stage_chunk);
  add(app, "distill", "Generate QA pairs from chunks", stage_distill);
  add(app, "combine", "Merge QA sources into training datasets", stage_combine);
  add(app, "train-embed", "Fine-tune the embedding model", stage_train);
  add(app, "index", "Embed chunks and build the vector index", stage_index);
  add(app, "raft-build", "Build the retrieval-augmented fine-tuning dataset", stage_raft);
  auto* serve = add(app, "serve", "Serve the question-answering HTTP API", stage_serve);
  serve->add_option("--port", flags.port, "Port (0 picks a free one)");
  auto* pipeline = add(app, "pipeline", "Run ingest through eval acc", stage_pipeline);
  pipeline->add_flag("--with-synth", flags.with_synth, "Generate the synthetic corpus first");
  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->fallthrough();
  eval->require_subcommand(1);
  add(*eval, "acc", "Top-k retrieval accuracy", stage_eval_acc);
  add(*eval, "latency", "Retrieval latency", stage_eval_latency);
  auto* judge = add(*eval, "judge", "LLM-as-judge scoring", stage_eval_judge);
  judge->add_option("--mode", flags.judge_mode, "single or pairwise");
  judge->add_option("--against", flags.against, "JSON-lines {question, answer} to compare against");
  add(*eval, "ablation", "HIS/AHNS ablation report", stage_eval_ablation);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigFailure;
  }
  flags.seed_set = seed_opt->count() > 0;

  try {
    PipelineConfig cfg = flags.config_path.empty() ? default_config(fs::current_path())
                                                   : load_config(flags.config_path);
    apply_environment(cfg);
    if (!flags.backend.empty()) cfg.backend.url = flags.backend;
    if (flags.seed_set) propagate_seed(cfg, flags.seed);
    Context ctx{std::move(cfg), flags, {}, out, err};
    if (!flags.k_list.empty()) ctx.ks = parse_k_list(flags.k_list);
    for (const auto& [sub, fn] : stages) {
      if (sub->parsed()) {
        fn(ctx);
        return kSuccess;
      }
    }
    err << "error: no subcommand\n";
    return kConfigFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::kConfigError ? kConfigFailure : kStageFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kStageFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("opsrag");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace opsrag::cli
