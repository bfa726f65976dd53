#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "opsrag/encoder.hpp"
#include "opsrag/rag.hpp"
#include "opsrag/vector_index.hpp"

namespace opsrag {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::size_t default_top_k = 5;
  std::size_t worker_threads = 8;
};

// Everything a serving process loads from disk.
struct ServeArtifacts {
  EncoderModel encoder;
  VectorIndex index;
  ChunkStore store;
};

// Throws Error(kMissingArtifacts) naming every missing path.
ServeArtifacts load_serve_artifacts(const std::filesystem::path& model_path,
                                    const std::filesystem::path& index_path,
                                    const std::filesystem::path& chunks_path);

// HTTP front end for a RagEngine:
//   POST /v1/query     {question, task, top_k?, session_id?}
//                      -> {answer, chunks:[{id, score, text}], retrieval_ms,
//                          generation_ms, latency_ms, session_id}
//   POST /v1/retrieve  {question, top_k?} -> {chunks:[{id, score, text}]}
//   GET  /v1/chunks/ID -> {id, doc_id, title_path, body, token_count, method}
//   GET  /healthz      -> "ok"
// Errors are {"error": <code name>, "detail": <message>} with status 400
// (bad request), 404 (unknown chunk), 502 (backend) or 500.
class RagServer {
 public:
  RagServer(const RagEngine& engine, ServerConfig config = {});
  ~RagServer();
  RagServer(const RagServer&) = delete;
  RagServer& operator=(const RagServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  // Throws Error(kBindError).
  int start();
  // Binds and serves on the calling thread until stop() is called.
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace opsrag
