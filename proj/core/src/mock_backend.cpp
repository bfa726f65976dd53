#include "opsrag/mock_backend.hpp"

#include <cmath>
#include <set>

#include "opsrag/error.hpp"
#include "opsrag/prompts.hpp"

namespace opsrag {
namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string_view after(std::string_view text, std::string_view marker) {
  auto pos = text.find(marker);
  if (pos == std::string_view::npos) return {};
  return text.substr(pos + marker.size());
}

std::string_view section(std::string_view text, std::string_view header) {
  auto body = after(text, header);
  auto end = body.find("\n\n[");
  return trim(body.substr(0, end));
}

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

double recall_overlap(std::string_view answer, std::string_view reference) {
  auto ref = word_set(reference);
  if (ref.empty()) return 0.0;
  auto ans = word_set(answer);
  std::size_t hit = 0;
  for (const auto& w : ref) hit += ans.count(w);
  return static_cast<double>(hit) / static_cast<double>(ref.size());
}

std::vector<std::string> sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto t = trim(cur);
    std::size_t words = 0;
    bool in_word = false;
    for (char c : t) {
      bool w = c != ' ';
      if (w && !in_word) ++words;
      in_word = w;
    }
    if (words >= 4) out.emplace_back(t);
    cur.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '\n') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string first_words(std::string_view s, std::size_t n) {
  std::string out;
  std::size_t words = 0;
  bool in_word = false;
  for (char c : s) {
    bool w = c != ' ';
    if (w && !in_word && ++words > n) break;
    in_word = w;
    out.push_back(c);
  }
  return std::string(trim(out));
}

std::string distill_response(const ChatRequest& req) {
  auto content = after(req.prompt(), "\nContent: ");
  if (auto body = after(content, " Content: "); !body.empty()) content = body;
  auto sents = sentences(content);
  if (sents.empty()) return "<unk>";
  const std::size_t offset = static_cast<std::size_t>(req.seed.value_or(0)) % sents.size();
  std::string out;
  for (std::size_t i = 0; i < std::min<std::size_t>(2, sents.size()); ++i) {
    const auto& s = sents[(offset + i) % sents.size()];
    if (!out.empty()) out += "<sep>";
    out += "Q: What does the documentation say about " + first_words(s, 5) + "? A: " + s + ".";
  }
  return out;
}

std::string judge_response(const ChatRequest& req) {
  const auto& p = req.prompt();
  auto reference = section(p, "[Reference Answer]\n");
  if (p.find("[Assistant A's Answer]") != std::string::npos) {
    double a = recall_overlap(section(p, "[Assistant A's Answer]\n"), reference);
    double b = recall_overlap(section(p, "[Assistant B's Answer]\n"), reference);
    std::string verdict = std::abs(a - b) <= 0.05 ? "Tie" : (a > b ? "A" : "B");
    return "Both answers were compared with the reference.\n```json\n{\n  \"verdict\": \"" + verdict +
           "\",\n  \"explanation\": \"token overlap with the reference decides\"\n}\n```";
  }
  double overlap = recall_overlap(section(p, "[Assistant's Answer]\n"), reference);
  int rating = std::clamp(1 + static_cast<int>(std::lround(9.0 * overlap)), 1, 10);
  return "The answer was compared with the reference.\n```json\n{\n  \"rating\": \"" +
         std::to_string(rating) + "\",\n  \"explanation\": \"token overlap with the reference\"\n}\n```";
}

std::string answer_response(const ChatRequest& req) {
  auto seg = after(req.prompt(), "Segment 0: ");
  if (seg.empty()) return "No relevant information was provided.";
  auto end = seg.find("\nSegment 1: ");
  return std::string(trim(seg.substr(0, end)));
}

}  // namespace

FunctionBackend::FunctionBackend(Handler handler, std::string model)
    : handler_(std::move(handler)), model_(std::move(model)) {}

std::string FunctionBackend::complete(const ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    log_.push_back(req);
  }
  return handler_(req);
}

std::vector<ChatRequest> FunctionBackend::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t FunctionBackend::call_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, std::string model)
    : FunctionBackend(make_handler([&responses] {
                        auto state = std::make_shared<State>();
                        state->responses = std::move(responses);
                        return state;
                      }()),
                      std::move(model)) {}

FunctionBackend::Handler ScriptedBackend::make_handler(std::shared_ptr<State> state) {
  return [state](const ChatRequest&) {
    std::lock_guard lock(state->mu);
    if (state->next >= state->responses.size()) {
      throw Error(Errc::kBackendUnavailable, "scripted backend exhausted");
    }
    return state->responses[state->next++];
  };
}

std::string HeuristicMockBackend::complete(const ChatRequest& req) {
  const auto& p = req.prompt();
  if (p.find(prompts::kDistillationMarker) != std::string::npos) return distill_response(req);
  if (p.find(prompts::kRewriteMarker) != std::string::npos) {
    return "In other words, " + std::string(trim(after(p, "\nContent: ")));
  }
  if (p.find(prompts::kJudgeMarker) != std::string::npos) return judge_response(req);
  return answer_response(req);
}

std::shared_ptr<GenerationBackend> make_backend(const std::string& url, const std::string& model,
                                                const std::string& api_key) {
  if (url.starts_with("mock://")) return std::make_shared<HeuristicMockBackend>(model);
  if (url.starts_with("http://")) {
    HttpBackendConfig cfg;
    cfg.endpoint = url;
    cfg.model = model;
    cfg.api_key = api_key;
    return std::make_shared<HttpChatBackend>(std::move(cfg));
  }
  throw Error(Errc::kConfigError, "unsupported backend url '" + url + "'");
}

}  // namespace opsrag
