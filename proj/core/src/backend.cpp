#include "opsrag/backend.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "opsrag/encoder.hpp"
#include "opsrag/error.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::kConfigError, "endpoint '" + url + "' lacks a scheme");
  }
  if (url.compare(0, scheme_end, "http") != 0) {
    throw Error(Errc::kConfigError, "endpoint '" + url + "': only plain http is supported by this build");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

// POSTs a JSON body with bounded retries and returns the response body.
std::string post_json(const std::string& endpoint, const std::string& api_key,
                      const std::string& body, int timeout_seconds, int max_retries,
                      int backoff_ms) {
  auto url = split_url(endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  client.set_write_timeout(timeout_seconds);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (attempt - 1)));
    }
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (!retryable_status(res->status)) break;
  }
  throw Error(Errc::kBackendUnavailable, endpoint + " -> " + last_error);
}

}  // namespace

ChatRequest ChatRequest::user(std::string model, std::string prompt, double temperature,
                              std::optional<std::int64_t> seed) {
  ChatRequest r;
  r.model = std::move(model);
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.seed = seed;
  return r;
}

const std::string& ChatRequest::prompt() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  static const std::string kEmpty;
  return kEmpty;
}

std::string serialize_request(const ChatRequest& req) {
  ojson j;
  j["model"] = req.model;
  j["messages"] = ojson::array();
  for (const auto& m : req.messages) {
    ojson jm;
    jm["role"] = m.role;
    jm["content"] = m.content;
    j["messages"].push_back(std::move(jm));
  }
  j["temperature"] = req.temperature;
  if (req.seed) j["seed"] = *req.seed;
  return j.dump();
}

std::string request_hash(const ChatRequest& req) { return sha256_hex(serialize_request(req)); }

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
}

std::string HttpChatBackend::complete(const ChatRequest& req) {
  auto body = post_json(config_.endpoint, config_.api_key, serialize_request(req),
                        config_.timeout_seconds, config_.max_retries, config_.backoff_ms);
  try {
    auto j = ojson::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const ojson::exception& e) {
    throw Error(Errc::kBackendUnavailable,
                std::string("malformed chat-completion response: ") + e.what());
  }
}

CassetteBackend::CassetteBackend(std::filesystem::path path, CassetteMode mode,
                                 std::shared_ptr<GenerationBackend> inner, std::string model)
    : path_(std::move(path)), mode_(mode), inner_(std::move(inner)), model_(std::move(model)) {
  if (mode_ != CassetteMode::kReplay && !inner_) {
    throw Error(Errc::kConfigError, "recording cassette needs an inner backend");
  }
  if (!std::filesystem::exists(path_)) return;
  for (const auto& line : read_lines(path_)) {
    try {
      auto j = ojson::parse(line);
      entries_.emplace(j.at("request_hash").get<std::string>(),
                       j.at("response_text").get<std::string>());
    } catch (const ojson::exception& e) {
      throw Error(Errc::kCorruptFile, path_.string() + ": " + e.what());
    }
  }
}

std::string CassetteBackend::model() const { return inner_ ? inner_->model() : model_; }

std::size_t CassetteBackend::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string CassetteBackend::complete(const ChatRequest& req) {
  const auto key = request_hash(req);
  if (mode_ != CassetteMode::kRecord) {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    if (mode_ == CassetteMode::kReplay) {
      throw Error(Errc::kBackendUnavailable, "cassette miss for request " + key);
    }
  }
  auto response = inner_->complete(req);

  std::lock_guard lock(mu_);
  entries_.emplace(key, response);
  ojson j;
  j["request_hash"] = key;
  j["response_text"] = response;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::kIoError, "cannot append to cassette " + path_.string());
  out << j.dump() << '\n';
  return response;
}

HttpEmbeddingEncoder::HttpEmbeddingEncoder(HttpEmbeddingConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
}

std::vector<Embedding> HttpEmbeddingEncoder::encode_batch(const std::vector<std::string>& texts) const {
  ojson req;
  req["model"] = config_.model;
  req["input"] = texts;
  auto body = post_json(config_.endpoint, config_.api_key, req.dump(), config_.timeout_seconds, 2, 200);
  std::vector<Embedding> out;
  try {
    auto j = ojson::parse(body);
    for (const auto& item : j.at("data")) {
      out.push_back(item.at("embedding").get<Embedding>());
    }
  } catch (const ojson::exception& e) {
    throw Error(Errc::kBackendUnavailable, std::string("malformed embeddings response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(Errc::kBackendUnavailable, "embeddings response has " + std::to_string(out.size()) +
                                               " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  for (auto& v : out) {
    if (config_.dim != 0 && v.size() != config_.dim) {
      throw Error(Errc::kDimensionMismatch, "expected dim " + std::to_string(config_.dim) + ", got " +
                                                std::to_string(v.size()));
    }
    normalize(v);
  }
  return out;
}

Embedding HttpEmbeddingEncoder::encode(std::string_view text) const {
  if (text.empty()) throw Error(Errc::kEmptyInput, "empty text");
  return encode_batch({std::string(text)}).front();
}

}  // namespace opsrag
