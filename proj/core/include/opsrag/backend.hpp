#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opsrag {

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// Chat-completion request. The wire form is
// {"model", "messages":[{"role","content"}], "temperature"[, "seed"]}.
struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;

  static ChatRequest user(std::string model, std::string prompt, double temperature = 0.0,
                          std::optional<std::int64_t> seed = std::nullopt);

  // Content of the last user message.
  const std::string& prompt() const;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

// Canonical serialization; identical requests always produce identical bytes.
std::string serialize_request(const ChatRequest& req);
std::string request_hash(const ChatRequest& req);

enum class BackendTier { kStandard, kEscalation };

// A text generation service. Implementations must be safe to call from
// several threads at once.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  // Throws Error(kBackendUnavailable) when no response can be obtained.
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual std::string model() const = 0;
};

struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model = "default";
  std::string api_key;
  int timeout_seconds = 60;
  int max_retries = 2;   // extra attempts on connection errors, 429 and 5xx
  int backoff_ms = 200;  // doubled per retry
};

// OpenAI-compatible chat-completion client; reads choices[0].message.content.
class HttpChatBackend final : public GenerationBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  std::string complete(const ChatRequest& req) override;
  std::string model() const override { return config_.model; }

 private:
  HttpBackendConfig config_;
};

enum class CassetteMode {
  kReplay,          // misses are errors
  kRecord,          // always forward, append every response
  kReplayOrRecord,  // replay hits, forward and append misses
};

// Record/replay wrapper around another backend. The cassette file is
// JSON-lines of {"request_hash", "response_text"}; the first entry for a
// hash wins on load. Appends are serialized.
class CassetteBackend final : public GenerationBackend {
 public:
  CassetteBackend(std::filesystem::path path, CassetteMode mode,
                  std::shared_ptr<GenerationBackend> inner = nullptr, std::string model = "cassette");

  std::string complete(const ChatRequest& req) override;
  std::string model() const override;

  std::size_t size() const;

 private:
  std::filesystem::path path_;
  CassetteMode mode_;
  std::shared_ptr<GenerationBackend> inner_;
  std::string model_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

}  // namespace opsrag
