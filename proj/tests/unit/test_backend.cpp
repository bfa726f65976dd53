#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "opsrag/backend.hpp"
#include "opsrag/encoder.hpp"
#include "opsrag/error.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"
#include "opsrag/mock_backend.hpp"
#include "opsrag/prompts.hpp"
#include "test_support.hpp"

namespace opsrag {
namespace {

using json = nlohmann::json;

// A local HTTP server on a free port for the lifetime of the object.
class LocalServer {
 public:
  LocalServer() = default;
  ~LocalServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }

  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

Errc error_code(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::kNotFound;
}

TEST(ChatRequest, CanonicalWireForm) {
  auto req = ChatRequest::user("m1", "hi \"there\"", 0.5, 7);
  EXPECT_EQ(serialize_request(req),
            R"({"model":"m1","messages":[{"role":"user","content":"hi \"there\""}],"temperature":0.5,"seed":7})");
  req.seed.reset();
  EXPECT_EQ(serialize_request(req),
            R"({"model":"m1","messages":[{"role":"user","content":"hi \"there\""}],"temperature":0.5})");
}

TEST(ChatRequest, HashIsSha256OfWireForm) {
  auto a = ChatRequest::user("m", "p", 0.0, 1);
  EXPECT_EQ(request_hash(a), sha256_hex(serialize_request(a)));
  EXPECT_EQ(request_hash(a), request_hash(ChatRequest::user("m", "p", 0.0, 1)));
  EXPECT_NE(request_hash(a), request_hash(ChatRequest::user("m", "p", 0.0, 2)));
  EXPECT_NE(request_hash(a), request_hash(ChatRequest::user("m", "p", 0.1, 1)));
}

TEST(ChatRequest, PromptIsLastUserMessage) {
  ChatRequest r;
  r.messages = {{"system", "s"}, {"user", "first"}, {"assistant", "a"}, {"user", "second"}};
  EXPECT_EQ(r.prompt(), "second");
}

TEST(HttpChatBackend, PostsWireFormAndReadsFirstChoice) {
  LocalServer srv;
  std::string seen_body, seen_auth;
  srv.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(completion("pong"), "application/json");
  });
  srv.start();
  HttpBackendConfig cfg;
  cfg.endpoint = srv.url("/v1/chat/completions");
  cfg.model = "m";
  cfg.api_key = "secret";
  HttpChatBackend backend(cfg);
  auto req = ChatRequest::user("m", "ping");
  EXPECT_EQ(backend.complete(req), "pong");
  EXPECT_EQ(seen_body, serialize_request(req));
  EXPECT_EQ(seen_auth, "Bearer secret");
}

TEST(HttpChatBackend, RetriesServerErrorsThenSucceeds) {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = calls == 1 ? 503 : 429;
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  srv.start();
  HttpBackendConfig cfg;
  cfg.endpoint = srv.url("/c");
  cfg.max_retries = 2;
  cfg.backoff_ms = 1;
  HttpChatBackend backend(cfg);
  EXPECT_EQ(backend.complete(ChatRequest::user("m", "x")), "ok");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpChatBackend, ClientErrorIsNotRetried) {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  srv.start();
  HttpBackendConfig cfg;
  cfg.endpoint = srv.url("/c");
  cfg.backoff_ms = 1;
  HttpChatBackend backend(cfg);
  EXPECT_EQ(error_code([&] { backend.complete(ChatRequest::user("m", "x")); }), Errc::kBackendUnavailable);
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpChatBackend, MalformedResponseIsBackendUnavailable) {
  LocalServer srv;
  srv.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  srv.start();
  HttpBackendConfig cfg;
  cfg.endpoint = srv.url("/c");
  HttpChatBackend backend(cfg);
  EXPECT_EQ(error_code([&] { backend.complete(ChatRequest::user("m", "x")); }), Errc::kBackendUnavailable);
}

TEST(HttpChatBackend, UnreachableEndpointIsBackendUnavailable) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/c";
  cfg.max_retries = 1;
  cfg.backoff_ms = 1;
  cfg.timeout_seconds = 2;
  HttpChatBackend backend(cfg);
  EXPECT_EQ(error_code([&] { backend.complete(ChatRequest::user("m", "x")); }), Errc::kBackendUnavailable);
}

TEST(HttpChatBackend, RejectsUnsupportedEndpoints) {
  HttpBackendConfig cfg;
  cfg.endpoint = "localhost:8000/c";
  EXPECT_EQ(error_code([&] { HttpChatBackend b(cfg); }), Errc::kConfigError);
  cfg.endpoint = "https://api.example.com/v1/chat/completions";
  EXPECT_EQ(error_code([&] { HttpChatBackend b(cfg); }), Errc::kConfigError);
}

TEST(MakeBackend, SelectsByScheme) {
  EXPECT_EQ(make_backend("mock://", "mm")->model(), "mm");
  EXPECT_EQ(make_backend("http://127.0.0.1:9/v1/chat/completions", "hm")->model(), "hm");
  EXPECT_EQ(error_code([] { make_backend("ftp://x", "m"); }), Errc::kConfigError);
}

TEST(Cassette, RecordThenReplayOffline) {
  test::TempDir dir;
  auto path = dir / "tape.jsonl";
  auto inner = std::make_shared<FunctionBackend>([](const ChatRequest& r) { return "echo:" + r.prompt(); });
  {
    CassetteBackend rec(path, CassetteMode::kRecord, inner);
    EXPECT_EQ(rec.complete(ChatRequest::user("m", "a")), "echo:a");
    EXPECT_EQ(rec.complete(ChatRequest::user("m", "b")), "echo:b");
  }
  auto lines = read_lines(path);
  ASSERT_EQ(lines.size(), 2u);
  auto first = json::parse(lines[0]);
  EXPECT_EQ(first["request_hash"], request_hash(ChatRequest::user("m", "a")));
  EXPECT_EQ(first["response_text"], "echo:a");

  CassetteBackend replay(path, CassetteMode::kReplay);
  EXPECT_EQ(replay.size(), 2u);
  EXPECT_EQ(replay.complete(ChatRequest::user("m", "b")), "echo:b");
  EXPECT_EQ(error_code([&] { replay.complete(ChatRequest::user("m", "c")); }), Errc::kBackendUnavailable);
  EXPECT_EQ(inner->call_count(), 2u);
}

TEST(Cassette, FirstEntryForAHashWins) {
  test::TempDir dir;
  auto path = dir / "tape.jsonl";
  auto h = request_hash(ChatRequest::user("m", "q"));
  write_file(path, json{{"request_hash", h}, {"response_text", "one"}}.dump() + "\n" +
                       json{{"request_hash", h}, {"response_text", "two"}}.dump() + "\n");
  CassetteBackend replay(path, CassetteMode::kReplay);
  EXPECT_EQ(replay.complete(ChatRequest::user("m", "q")), "one");
}

TEST(Cassette, ReplayOrRecordForwardsOnlyMisses) {
  test::TempDir dir;
  auto inner = std::make_shared<FunctionBackend>([](const ChatRequest& r) { return r.prompt() + "!"; });
  CassetteBackend tape(dir / "t.jsonl", CassetteMode::kReplayOrRecord, inner);
  EXPECT_EQ(tape.complete(ChatRequest::user("m", "x")), "x!");
  EXPECT_EQ(tape.complete(ChatRequest::user("m", "x")), "x!");
  EXPECT_EQ(inner->call_count(), 1u);
}

TEST(Cassette, ConcurrentAppendsAreSerialized) {
  test::TempDir dir;
  auto inner = std::make_shared<FunctionBackend>([](const ChatRequest& r) { return std::string(500, 'x') + r.prompt(); });
  CassetteBackend tape(dir / "t.jsonl", CassetteMode::kRecord, inner);
  std::vector<std::thread> threads;
  for (int t = 0; t < 16; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) tape.complete(ChatRequest::user("m", std::to_string(t * 100 + i)));
    });
  }
  for (auto& th : threads) th.join();
  auto lines = read_lines(dir / "t.jsonl");
  ASSERT_EQ(lines.size(), 160u);
  for (const auto& l : lines) EXPECT_NO_THROW(json::parse(l));
}

TEST(Cassette, RecordingNeedsInnerBackend) {
  test::TempDir dir;
  EXPECT_EQ(error_code([&] { CassetteBackend c(dir / "t", CassetteMode::kRecord); }), Errc::kConfigError);
}

TEST(Cassette, CorruptLineIsCorruptFile) {
  test::TempDir dir;
  write_file(dir / "t", "{not json\n");
  EXPECT_EQ(error_code([&] { CassetteBackend c(dir / "t", CassetteMode::kReplay); }), Errc::kCorruptFile);
}

TEST(ScriptedBackend, ReturnsInOrderThenFails) {
  ScriptedBackend b({"one", "two"});
  EXPECT_EQ(b.complete(ChatRequest::user("m", "a")), "one");
  EXPECT_EQ(b.complete(ChatRequest::user("m", "b")), "two");
  EXPECT_EQ(error_code([&] { b.complete(ChatRequest::user("m", "c")); }), Errc::kBackendUnavailable);
  ASSERT_EQ(b.requests().size(), 3u);
  EXPECT_EQ(b.requests()[1].prompt(), "b");
}

TEST(HeuristicMock, AnswerIsSegmentZero) {
  HeuristicMockBackend mock;
  auto prompt = prompts::substitute(prompts::kKnowledgeAcquisitionTemplate, "segments",
                                    "Segment 0: Title: A Content: first text\nSegment 1: second text");
  EXPECT_EQ(mock.complete(ChatRequest::user("m", prompt)), "Title: A Content: first text");
}

TEST(HeuristicMock, DistillationOutputParsesAsPairs) {
  HeuristicMockBackend mock;
  auto reply = mock.complete(ChatRequest::user(
      "m", prompts::distillation("The broker keeps messages for seven days. Consumers ack each message after work.")));
  EXPECT_NE(reply.find("Q: "), std::string::npos);
  EXPECT_NE(reply.find("<sep>"), std::string::npos);
  EXPECT_EQ(mock.complete(ChatRequest::user("m", prompts::distillation("ok"))), "<unk>");
}

TEST(HttpEmbeddingEncoder, NormalizesServiceVectors) {
  LocalServer srv;
  srv.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    auto in = json::parse(req.body);
    json data = json::array();
    for (std::size_t i = 0; i < in["input"].size(); ++i) data.push_back({{"embedding", {3.0, 4.0 + i}}});
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  srv.start();
  HttpEmbeddingConfig cfg;
  cfg.endpoint = srv.url("/v1/embeddings");
  cfg.dim = 2;
  HttpEmbeddingEncoder enc(cfg);
  auto v = enc.encode("text");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[1], 0.8f);
  EXPECT_EQ(enc.encode_batch({"a", "b"}).size(), 2u);
  EXPECT_EQ(error_code([&] { enc.encode(""); }), Errc::kEmptyInput);

  cfg.dim = 3;
  HttpEmbeddingEncoder wrong(cfg);
  EXPECT_EQ(error_code([&] { wrong.encode("x"); }), Errc::kDimensionMismatch);
}

}  // namespace
}  // namespace opsrag
