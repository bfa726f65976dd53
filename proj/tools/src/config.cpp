#include "opsrag_cli/config.hpp"

#include <cstdlib>
#include <map>
#include <set>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"

namespace opsrag::cli {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::kConfigError, msg); }

// Typed access to one JSON object that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) config_error(name_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) config_error("unknown key '" + qualified(key) + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!j_[key].is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!j_[key].is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (j_[key].get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!j_[key].is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j_[key].is_string()) throw std::invalid_argument("expected a string");
      }
      out = j_[key].get<T>();
    } catch (const std::exception& e) {
      config_error("'" + qualified(key) + "': " + e.what());
    }
  }

  void path(const char* key, fs::path& out, const fs::path& base) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = s.empty() ? fs::path() : resolve(base, s);
  }

  bool has(const char* key) const { return j_.contains(key); }
  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_[key] : empty, qualified(key));
  }

  static fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : (base / p).lexically_normal();
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_backend(Section s, BackendSettings& b, const fs::path& base) {
  s.get("url", b.url);
  s.get("model", b.model);
  s.get("api_key", b.api_key);
  s.get("escalation_url", b.escalation_url);
  s.get("escalation_model", b.escalation_model);
  s.path("cassette", b.cassette, base);
  s.get("cassette_mode", b.cassette_mode);
  if (b.cassette_mode != "replay" && b.cassette_mode != "record" && b.cassette_mode != "replay-or-record") {
    config_error("cassette_mode must be replay, record or replay-or-record");
  }
}

ojson backend_json(const BackendSettings& b) {
  ojson j;
  j["url"] = b.url;
  j["model"] = b.model;
  j["escalation_url"] = b.escalation_url;
  j["escalation_model"] = b.escalation_model;
  j["cassette"] = !b.cassette.empty();
  j["cassette_mode"] = b.cassette_mode;
  return j;
}

}  // namespace

void resolve_paths(Paths& p) {
  auto fill = [&p](fs::path& target, const char* name) {
    if (target.empty()) target = p.work_dir / name;
  };
  fill(p.qak_log, "qak_log.jsonl");
  fill(p.qat_log, "qat_log.jsonl");
  fill(p.eval_set, "eval.jsonl");
  fill(p.documents, "documents.jsonl");
  fill(p.chunks, "chunks.jsonl");
  fill(p.qak_gpt, "qak_gpt.jsonl");
  fill(p.data_em, "data_em.jsonl");
  fill(p.data_llm, "data_llm.jsonl");
  fill(p.model, "model.rgem");
  fill(p.index, "index.rgix");
  fill(p.raft, "raft.jsonl");
}

PipelineConfig default_config(const fs::path& base_dir) {
  PipelineConfig c;
  c.paths.corpus_dir = Section::resolve(base_dir, c.paths.corpus_dir);
  c.paths.work_dir = Section::resolve(base_dir, c.paths.work_dir);
  resolve_paths(c.paths);
  return c;
}

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) config_error("config is not valid JSON");

  PipelineConfig c;
  {
    Section root(j, "");
    {
      auto p = root.sub("paths");
      c.paths.corpus_dir = Section::resolve(base_dir, c.paths.corpus_dir);
      c.paths.work_dir = Section::resolve(base_dir, c.paths.work_dir);
      p.path("corpus_dir", c.paths.corpus_dir, base_dir);
      p.path("work_dir", c.paths.work_dir, base_dir);
      p.path("qak_log", c.paths.qak_log, base_dir);
      p.path("qat_log", c.paths.qat_log, base_dir);
      p.path("eval_set", c.paths.eval_set, base_dir);
      p.path("documents", c.paths.documents, base_dir);
      p.path("chunks", c.paths.chunks, base_dir);
      p.path("qak_gpt", c.paths.qak_gpt, base_dir);
      p.path("data_em", c.paths.data_em, base_dir);
      p.path("data_llm", c.paths.data_llm, base_dir);
      p.path("model", c.paths.model, base_dir);
      p.path("index", c.paths.index, base_dir);
      p.path("raft", c.paths.raft, base_dir);
    }
    root.get("tokenizer", c.tokenizer);
    {
      auto s = root.sub("chunking");
      s.get("max_tokens", c.chunking.max_tokens);
      s.get("min_tokens", c.chunking.min_tokens);
      s.get("overlap_tokens", c.chunking.overlap_tokens);
    }
    {
      auto s = root.sub("synthetic");
      s.get("documents", c.synthetic.documents);
      s.get("topics", c.synthetic.topics);
      s.get("train_phrasings", c.synthetic.train_phrasings);
      s.get("eval_phrasings", c.synthetic.eval_phrasings);
    }
    {
      auto s = root.sub("distill");
      s.get("temperature", c.distill_temperature);
      s.get("parallelism", c.distill_parallelism);
      s.get("rewrite_log_questions", c.rewrite_log_questions);
    }
    {
      auto s = root.sub("encoder");
      s.get("hash_dims", c.encoder.hash_dims);
      s.get("ngram_min", c.encoder.ngram_min);
      s.get("ngram_max", c.encoder.ngram_max);
      s.get("embed_dim", c.encoder.embed_dim);
      s.get("temperature", c.encoder.temperature);
    }
    {
      auto s = root.sub("training");
      s.get("epochs", c.training.epochs);
      s.get("learning_rate", c.training.learning_rate);
      s.get("batch_size", c.training.batch_size);
      s.get("his", c.training.homogeneous_batches);
      s.get("ahns", c.training.hard_negatives);
      s.get("hard_negative_k", c.training.hard_negative_k);
      s.get("hard_negatives_per_pair", c.training.hard_negatives_per_pair);
      s.get("refresh_negatives", c.training.refresh_negatives);
      s.get("negative_pool", c.training.negative_pool);
      s.get("beta1", c.training.beta1);
      s.get("beta2", c.training.beta2);
      s.get("epsilon", c.training.epsilon);
    }
    {
      auto s = root.sub("index");
      std::string mode = "exact";
      s.get("mode", mode);
      if (mode == "exact") {
        c.index.mode = IndexMode::kExact;
      } else if (mode == "coarse") {
        c.index.mode = IndexMode::kCoarse;
      } else {
        config_error("index.mode must be exact or coarse");
      }
      s.get("nlist", c.index.nlist);
      s.get("nprobe", c.index.nprobe);
      s.get("kmeans_iterations", c.index.kmeans_iterations);
    }
    {
      auto s = root.sub("raft");
      s.get("k", c.raft_k);
    }
    {
      auto s = root.sub("serve");
      s.get("host", c.serve_host);
      s.get("port", c.serve_port);
      s.get("top_k", c.top_k);
    }
    read_backend(root.sub("backend"), c.backend, base_dir);
    {
      auto s = root.sub("judge");
      c.judge = c.backend;
      s.get("url", c.judge.url);
      s.get("model", c.judge.model);
      s.get("api_key", c.judge.api_key);
      s.get("runs", c.judge_options.runs);
      s.get("max_reasks", c.judge_options.max_reasks);
      s.get("temperature", c.judge_options.temperature);
      s.get("concurrency", c.judge_options.concurrency);
    }
    {
      auto s = root.sub("eval");
      s.get("ks", c.eval_ks);
      s.get("latency_repetitions", c.latency_repetitions);
      s.get("ablation_seeds", c.ablation_seeds);
    }
    root.get("seed", c.seed);
  }

  if (c.tokenizer != "regex-word" && c.tokenizer != "whitespace") {
    config_error("tokenizer must be regex-word or whitespace");
  }
  if (c.eval_ks.empty()) config_error("eval.ks must not be empty");
  for (auto k : c.eval_ks) {
    if (k == 0) config_error("eval.ks entries must be positive");
  }
  if (c.encoder.embed_dim == 0 || c.encoder.hash_dims == 0) config_error("encoder dimensions must be positive");
  if (c.encoder.ngram_min == 0 || c.encoder.ngram_min > c.encoder.ngram_max) config_error("bad encoder n-gram range");
  if (!(c.encoder.temperature > 0.0)) config_error("encoder.temperature must be positive");
  if (c.chunking.min_tokens > c.chunking.max_tokens) config_error("chunking.min_tokens exceeds max_tokens");
  resolve_paths(c.paths);
  propagate_seed(c, c.seed);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    config_error("cannot read config " + path.string());
  }
  auto base = fs::absolute(path).parent_path();
  return parse_config(text, base);
}

void apply_environment(PipelineConfig& config) {
  if (const char* url = std::getenv("OPSRAG_BACKEND_URL"); url && *url) config.backend.url = url;
  if (const char* key = std::getenv("OPSRAG_API_KEY"); key && *key) config.backend.api_key = key;
}

void propagate_seed(PipelineConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.synthetic.seed = seed;
  config.encoder.seed = seed;
  config.training.seed = seed;
  config.index.seed = seed;
  config.judge_options.seed = static_cast<std::int64_t>(seed);
}

std::string config_fingerprint(const PipelineConfig& c, std::string_view stage) {
  ojson all;
  all["seed"] = c.seed;
  all["tokenizer"] = c.tokenizer;
  all["chunking"] = {{"max_tokens", c.chunking.max_tokens},
                     {"min_tokens", c.chunking.min_tokens},
                     {"overlap_tokens", c.chunking.overlap_tokens}};
  all["synthetic"] = {{"documents", c.synthetic.documents},
                      {"topics", c.synthetic.topics},
                      {"train_phrasings", c.synthetic.train_phrasings},
                      {"eval_phrasings", c.synthetic.eval_phrasings}};
  all["distill"] = {{"temperature", c.distill_temperature},
                    {"rewrite_log_questions", c.rewrite_log_questions},
                    {"backend", backend_json(c.backend)}};
  all["encoder"] = {{"hash_dims", c.encoder.hash_dims},
                    {"ngram_min", c.encoder.ngram_min},
                    {"ngram_max", c.encoder.ngram_max},
                    {"embed_dim", c.encoder.embed_dim},
                    {"temperature", c.encoder.temperature}};
  const auto& t = c.training;
  all["training"] = {{"epochs", t.epochs},
                     {"learning_rate", t.learning_rate},
                     {"batch_size", t.batch_size},
                     {"his", t.homogeneous_batches},
                     {"ahns", t.hard_negatives},
                     {"hard_negative_k", t.hard_negative_k},
                     {"hard_negatives_per_pair", t.hard_negatives_per_pair},
                     {"refresh_negatives", t.refresh_negatives},
                     {"negative_pool", t.negative_pool},
                     {"beta1", t.beta1},
                     {"beta2", t.beta2},
                     {"epsilon", t.epsilon}};
  all["index"] = {{"mode", c.index.mode == IndexMode::kExact ? "exact" : "coarse"},
                  {"nlist", c.index.nlist},
                  {"nprobe", c.index.nprobe},
                  {"kmeans_iterations", c.index.kmeans_iterations}};
  all["raft"] = {{"k", c.raft_k}};
  all["serve"] = {{"top_k", c.top_k}};
  all["judge"] = {{"backend", backend_json(c.judge)},
                  {"runs", c.judge_options.runs},
                  {"max_reasks", c.judge_options.max_reasks},
                  {"temperature", c.judge_options.temperature}};
  all["eval"] = {{"ks", c.eval_ks}, {"ablation_seeds", c.ablation_seeds}};

  static const std::map<std::string_view, std::vector<const char*>> kSections = {
      {"synth", {"seed", "tokenizer", "chunking", "synthetic"}},
      {"ingest", {}},
      {"chunk", {"tokenizer", "chunking"}},
      {"distill", {"seed", "distill"}},
      {"combine", {}},
      {"train-embed", {"seed", "encoder", "training"}},
      {"index", {"seed", "index"}},
      {"raft-build", {"raft"}},
      {"eval-acc", {"eval"}},
      {"eval-judge", {"seed", "serve", "judge", "distill"}},
      {"eval-ablation", {"seed", "encoder", "training", "eval"}},
  };
  ojson out = ojson::object();
  auto it = kSections.find(stage);
  if (it == kSections.end()) return all.dump();
  for (const char* key : it->second) out[key] = all[key];
  return out.dump();
}

}  // namespace opsrag::cli
