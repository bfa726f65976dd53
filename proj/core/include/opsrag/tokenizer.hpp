#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace opsrag {

// Half-open byte range [begin, end) of one token in the source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Deterministic text tokenizer. Implementations must return the same spans
// for the same input, in source order and non-overlapping.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
  virtual std::string name() const = 0;

  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// Word runs ([A-Za-z0-9_] plus any non-ASCII byte) and single punctuation
// characters; whitespace separates and is never a token. Matches the regex
// `[A-Za-z0-9_\x80-\xff]+|[^\sA-Za-z0-9_\x80-\xff]`.
class RegexWordTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
  std::string name() const override { return "regex-word"; }
};

// Maximal runs of non-whitespace.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::string name() const override { return "whitespace"; }
};

std::size_t count_tokens(std::string_view text, const Tokenizer& tok);

// Builds a tokenizer by kind ("regex-word" or "whitespace").
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind);

}  // namespace opsrag
