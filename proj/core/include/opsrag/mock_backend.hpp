#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "opsrag/backend.hpp"

namespace opsrag {

// Answers requests through a caller-supplied function and keeps a log of
// every request it saw.
class FunctionBackend : public GenerationBackend {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;

  explicit FunctionBackend(Handler handler, std::string model = "function");

  std::string complete(const ChatRequest& req) override;
  std::string model() const override { return model_; }

  std::vector<ChatRequest> requests() const;
  std::size_t call_count() const;

 private:
  Handler handler_;
  std::string model_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> log_;
};

// Returns the scripted responses in order; running out is BackendUnavailable.
class ScriptedBackend final : public FunctionBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses, std::string model = "scripted");

 private:
  struct State {
    std::mutex mu;
    std::vector<std::string> responses;
    std::size_t next = 0;
  };
  static Handler make_handler(std::shared_ptr<State> state);
};

// Deterministic offline stand-in for a chat model, keyed on which of the
// built-in prompts it receives:
//   distillation -> extractive "Q: .. A: .."<sep> pairs from the content
//   rewrite      -> a fixed paraphrase of the sentence
//   judge        -> ratings/verdicts from token overlap with the reference
//   RAG answer   -> the text of Segment 0
class HeuristicMockBackend final : public GenerationBackend {
 public:
  explicit HeuristicMockBackend(std::string model = "mock") : model_(std::move(model)) {}

  std::string complete(const ChatRequest& req) override;
  std::string model() const override { return model_; }

 private:
  std::string model_;
};

// "mock://..." -> HeuristicMockBackend, "http://..." -> HttpChatBackend.
std::shared_ptr<GenerationBackend> make_backend(const std::string& url, const std::string& model,
                                                const std::string& api_key = {});

}  // namespace opsrag
