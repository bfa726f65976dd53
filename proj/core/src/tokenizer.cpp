#include "opsrag/tokenizer.hpp"

#include "opsrag/error.hpp"

namespace opsrag {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

template <typename Fn>
void scan_words(std::string_view text, Fn&& emit) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_word(c)) {
      std::size_t j = i + 1;
      while (j < n && is_word(static_cast<unsigned char>(text[j]))) ++j;
      emit(i, j);
      i = j;
    } else {
      emit(i, i + 1);
      ++i;
    }
  }
}

}  // namespace

std::vector<TokenSpan> RegexWordTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> out;
  scan_words(text, [&](std::size_t b, std::size_t e) { out.push_back({b, e}); });
  return out;
}

std::size_t RegexWordTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  scan_words(text, [&](std::size_t, std::size_t) { ++n; });
  return n;
}

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tok) { return tok.count(text); }

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind) {
  if (kind == "regex-word") return std::make_unique<RegexWordTokenizer>();
  if (kind == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  throw Error(Errc::kConfigError, "unknown tokenizer kind '" + std::string(kind) + "'");
}

}  // namespace opsrag
