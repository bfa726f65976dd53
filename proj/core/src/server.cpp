#include "opsrag/server.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;

ojson chunks_json(const std::vector<RetrievedChunk>& chunks) {
  ojson arr = ojson::array();
  for (const auto& c : chunks) {
    ojson j;
    j["id"] = c.id;
    j["score"] = c.score;
    j["text"] = c.text;
    arr.push_back(std::move(j));
  }
  return arr;
}

int status_for(Errc code) {
  switch (code) {
    case Errc::kNotFound: return 404;
    case Errc::kBackendUnavailable: return 502;
    case Errc::kEmptyIndex: return 503;
    case Errc::kInvalidArgument:
    case Errc::kFormatError:
    case Errc::kEmptyInput:
    case Errc::kConfigError: return 400;
    default: return 500;
  }
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view detail) {
  ojson j;
  j["error"] = code;
  j["detail"] = detail;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

std::size_t read_top_k(const ojson& body, std::size_t fallback) {
  if (!body.contains("top_k") || body["top_k"].is_null()) return fallback;
  const auto& v = body["top_k"];
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw Error(Errc::kInvalidArgument, "top_k must be a positive integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

std::string read_question(const ojson& body) {
  if (!body.contains("question") || !body["question"].is_string()) {
    throw Error(Errc::kInvalidArgument, "question must be a string");
  }
  auto q = body["question"].get<std::string>();
  if (q.empty()) throw Error(Errc::kInvalidArgument, "question is empty");
  return q;
}

ojson parse_body(const httplib::Request& req) {
  auto body = ojson::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error(Errc::kInvalidArgument, "request body must be a JSON object");
  }
  return body;
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "InternalError", e.what());
  }
}

}  // namespace

ServeArtifacts load_serve_artifacts(const std::filesystem::path& model_path,
                                    const std::filesystem::path& index_path,
                                    const std::filesystem::path& chunks_path) {
  std::string missing;
  for (const auto& p : {model_path, index_path, chunks_path}) {
    if (!std::filesystem::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
  }
  if (!missing.empty()) throw Error(Errc::kMissingArtifacts, missing);
  return ServeArtifacts{EncoderModel::load(model_path), VectorIndex::load(index_path),
                        ChunkStore(chunks_from_jsonl(read_file(chunks_path)))};
}

struct RagServer::Impl {
  const RagEngine& engine;
  ServerConfig config;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(const RagEngine& e, ServerConfig c) : engine(e), config(std::move(c)) {
    const std::size_t workers = config.worker_threads == 0 ? 1 : config.worker_threads;
    server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
    // httplib's default options add SO_REUSEPORT, which lets a second server share a busy port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    routes();
  }

  void routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });

    server.Post("/v1/query", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto start = std::chrono::steady_clock::now();
        auto body = parse_body(req);
        auto question = read_question(body);
        if (!body.contains("task") || !body["task"].is_string()) {
          throw Error(Errc::kInvalidArgument, "task must be \"ka\" or \"ts\"");
        }
        QaMode task;
        try {
          task = parse_qa_mode(body["task"].get<std::string>());
        } catch (const Error& e) {
          throw Error(Errc::kInvalidArgument, e.what());
        }
        auto k = read_top_k(body, config.default_top_k);
        std::string session;
        if (body.contains("session_id") && body["session_id"].is_string()) {
          session = body["session_id"].get<std::string>();
        }
        auto rec = engine.answer(question, task, k, session);
        ojson out;
        out["answer"] = rec.answer;
        out["chunks"] = chunks_json(rec.chunks);
        out["retrieval_ms"] = rec.retrieval_ms;
        out["generation_ms"] = rec.generation_ms;
        out["latency_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out["session_id"] = rec.session_id;
        res.set_content(out.dump(), "application/json");
      });
    });

    server.Post("/v1/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        auto question = read_question(body);
        auto k = read_top_k(body, config.default_top_k);
        ojson out;
        out["chunks"] = chunks_json(engine.retrieve(question, k));
        res.set_content(out.dump(), "application/json");
      });
    });

    server.Get(R"(/v1/chunks/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto& id = req.matches[1].str();
        const Chunk* c = engine.store().find(id);
        if (!c) throw Error(Errc::kNotFound, "no chunk '" + id + "'");
        res.set_content(chunk_to_json(*c), "application/json");
      });
    });
  }

  int bind() {
    if (config.port == 0) {
      port = server.bind_to_any_port(config.host);
    } else {
      port = server.bind_to_port(config.host, config.port) ? config.port : -1;
    }
    if (port < 0) {
      throw Error(Errc::kBindError, "cannot bind " + config.host + ":" + std::to_string(config.port));
    }
    return port;
  }
};

RagServer::RagServer(const RagEngine& engine, ServerConfig config)
    : impl_(std::make_unique<Impl>(engine, std::move(config))) {}

RagServer::~RagServer() { stop(); }

int RagServer::start() {
  int p = impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return p;
}

void RagServer::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void RagServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int RagServer::port() const { return impl_->port; }

}  // namespace opsrag
