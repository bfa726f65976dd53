#include "opsrag/chunker.hpp"

#include <cstdio>
#include <memory>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"

namespace opsrag {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kTitleSeparator = " > ";

struct Section {
  std::string heading;
  int level = 0;
  std::vector<const Block*> content;
  std::vector<std::unique_ptr<Section>> children;
};

std::unique_ptr<Section> build_tree(const Document& doc) {
  auto root = std::make_unique<Section>();
  std::vector<Section*> stack{root.get()};
  for (const auto& b : doc.blocks) {
    if (b.is_heading()) {
      while (stack.size() > 1 && stack.back()->level >= b.level) stack.pop_back();
      auto s = std::make_unique<Section>();
      s->heading = b.text;
      s->level = b.level;
      Section* raw = s.get();
      stack.back()->children.push_back(std::move(s));
      stack.push_back(raw);
    } else {
      stack.back()->content.push_back(&b);
    }
  }
  return root;
}

void append_text(std::string& out, std::string_view text) {
  if (text.empty()) return;
  if (!out.empty()) out.push_back('\n');
  out += text;
}

std::string own_text(const Section& s) {
  std::string out;
  for (const Block* b : s.content) append_text(out, b->text);
  return out;
}

void subtree_text(const Section& s, std::string& out) {
  for (const Block* b : s.content) append_text(out, b->text);
  for (const auto& c : s.children) subtree_text(*c, out);
}

struct Unit {
  std::vector<std::string> path;
  std::string body;
  ChunkMethod method = ChunkMethod::kTargeted;
};

class TargetedSplitter {
 public:
  TargetedSplitter(const Tokenizer& tok, const ChunkerConfig& cfg) : tok_(tok), cfg_(cfg) {}

  std::vector<Unit> split(const Section& root) {
    // The document itself is always split at its top-level headings.
    emit_leaf({}, own_text(root));
    for (const auto& c : root.children) visit(*c, {});
    return std::move(units_);
  }

 private:
  std::size_t rendered_tokens(const std::vector<std::string>& path, std::string_view body) const {
    return tok_.count(render_chunk_text(path, body));
  }

  void visit(const Section& s, std::vector<std::string> path) {
    path.push_back(s.heading);
    std::string whole;
    subtree_text(s, whole);
    if (whole.empty()) return;
    if (rendered_tokens(path, whole) < cfg_.max_tokens) {
      units_.push_back({path, std::move(whole), ChunkMethod::kTargeted});
      return;
    }
    emit_leaf(path, own_text(s));
    for (const auto& c : s.children) visit(*c, path);
  }

  void emit_leaf(const std::vector<std::string>& path, std::string body) {
    if (body.empty()) return;
    if (rendered_tokens(path, body) < cfg_.max_tokens) {
      units_.push_back({path, std::move(body), ChunkMethod::kTargeted});
      return;
    }
    for (auto& c : chunk_general(body, tok_, cfg_.max_tokens, cfg_.overlap_tokens, path)) {
      units_.push_back({path, std::move(c.body), ChunkMethod::kGeneral});
    }
  }

  const Tokenizer& tok_;
  const ChunkerConfig& cfg_;
  std::vector<Unit> units_;
};

std::string format_id(std::string_view doc_id, std::size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", ordinal);
  return std::string(doc_id) + "#" + buf;
}

bool is_stop_token(std::string_view text, const std::vector<TokenSpan>& spans, std::size_t j) {
  auto tok = text.substr(spans[j].begin, spans[j].end - spans[j].begin);
  if (tok == "." || tok == ",") return true;
  auto gap_end = j + 1 < spans.size() ? spans[j + 1].begin : text.size();
  return text.substr(spans[j].end, gap_end - spans[j].end).find('\n') != std::string_view::npos;
}

}  // namespace

std::string_view to_string(ChunkMethod m) {
  return m == ChunkMethod::kTargeted ? "targeted" : "general";
}

std::string render_chunk_text(const std::vector<std::string>& title_path, std::string_view body) {
  if (title_path.empty()) return std::string(body);
  std::string out = "Title: ";
  for (std::size_t i = 0; i < title_path.size(); ++i) {
    if (i > 0) out += kTitleSeparator;
    out += title_path[i];
  }
  out += " Content: ";
  out += body;
  return out;
}

std::string Chunk::rendered() const { return render_chunk_text(title_path, body); }

std::vector<Chunk> chunk_general(std::string_view text, const Tokenizer& tok,
                                 std::size_t max_tokens, std::size_t overlap_tokens,
                                 const std::vector<std::string>& title_path,
                                 std::string_view doc_id) {
  if (overlap_tokens >= max_tokens) {
    throw Error(Errc::kInvalidArgument, "overlap_tokens must be smaller than max_tokens");
  }
  const auto spans = tok.tokenize(text);
  if (spans.empty()) return {};

  const std::size_t overhead = title_path.empty() ? 0 : tok.count(render_chunk_text(title_path, ""));
  if (overhead >= max_tokens) {
    throw Error(Errc::kInvalidArgument, "title path alone exceeds max_tokens");
  }
  const std::size_t budget = max_tokens - overhead;
  const std::size_t overlap = std::min(overlap_tokens, budget - 1);
  const std::size_t n = spans.size();

  std::vector<Chunk> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t limit = std::min(n, start + budget);
    std::size_t end = limit;
    if (limit < n) {
      // Last token index j must satisfy j >= start + overlap so the next
      // window still advances.
      for (std::size_t j = limit; j-- > start + overlap;) {
        if (is_stop_token(text, spans, j)) {
          end = j + 1;
          break;
        }
      }
    }
    Chunk c;
    c.doc_id = std::string(doc_id);
    c.title_path = title_path;
    c.body = std::string(text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin));
    c.token_count = overhead + (end - start);
    c.method = ChunkMethod::kGeneral;
    c.id = format_id(doc_id, out.size());
    out.push_back(std::move(c));
    if (end == n) break;
    start = end - overlap;
  }
  return out;
}

std::vector<Chunk> chunk_targeted(const Document& doc, const Tokenizer& tok,
                                  const ChunkerConfig& config) {
  if (config.max_tokens <= config.min_tokens) {
    throw Error(Errc::kInvalidArgument, "max_tokens must exceed min_tokens");
  }
  auto root = build_tree(doc);
  auto units = TargetedSplitter(tok, config).split(*root);
  if (units.empty()) throw Error(Errc::kEmptyDocument, "document '" + doc.id + "' has no body text");

  auto fits = [&](const Unit& host, std::string_view extra) {
    std::string merged = host.body;
    append_text(merged, extra);
    return tok.count(render_chunk_text(host.path, merged)) <= config.max_tokens;
  };
  auto small = [&](const Unit& u) { return tok.count(u.body) < config.min_tokens; };

  std::vector<Unit> merged;
  std::optional<Unit> carry;
  for (auto& u : units) {
    if (carry) {
      if (fits(u, carry->body)) {
        std::string body = std::move(carry->body);
        append_text(body, u.body);
        u.body = std::move(body);
      } else {
        merged.push_back(std::move(*carry));
      }
      carry.reset();
    }
    if (small(u)) {
      if (!merged.empty() && fits(merged.back(), u.body)) {
        append_text(merged.back().body, u.body);
        continue;
      }
      carry = std::move(u);
      continue;
    }
    merged.push_back(std::move(u));
  }
  if (carry) {
    if (!merged.empty() && fits(merged.back(), carry->body)) {
      append_text(merged.back().body, carry->body);
    } else {
      merged.push_back(std::move(*carry));
    }
  }

  std::vector<Chunk> out;
  out.reserve(merged.size());
  for (auto& u : merged) {
    Chunk c;
    c.id = format_id(doc.id, out.size());
    c.doc_id = doc.id;
    c.token_count = tok.count(render_chunk_text(u.path, u.body));
    c.title_path = std::move(u.path);
    c.body = std::move(u.body);
    c.method = u.method;
    out.push_back(std::move(c));
  }
  return out;
}

std::string chunk_to_json(const Chunk& c) {
  ojson j;
  j["id"] = c.id;
  j["doc_id"] = c.doc_id;
  j["title_path"] = c.title_path;
  j["body"] = c.body;
  j["token_count"] = c.token_count;
  j["method"] = std::string(to_string(c.method));
  return j.dump();
}

Chunk chunk_from_json(std::string_view line) {
  try {
    auto j = ojson::parse(line);
    Chunk c;
    c.id = j.at("id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.title_path = j.at("title_path").get<std::vector<std::string>>();
    c.body = j.at("body").get<std::string>();
    c.token_count = j.at("token_count").get<std::size_t>();
    auto m = j.at("method").get<std::string>();
    if (m == "targeted") {
      c.method = ChunkMethod::kTargeted;
    } else if (m == "general") {
      c.method = ChunkMethod::kGeneral;
    } else {
      throw Error(Errc::kFormatError, "unknown chunk method '" + m + "'");
    }
    return c;
  } catch (const ojson::exception& e) {
    throw Error(Errc::kFormatError, std::string("chunk record: ") + e.what());
  }
}

std::string chunks_to_jsonl(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    out += chunk_to_json(c);
    out.push_back('\n');
  }
  return out;
}

std::vector<Chunk> chunks_from_jsonl(std::string_view text) {
  std::vector<Chunk> out;
  for (const auto& line : split_lines(text)) out.push_back(chunk_from_json(line));
  return out;
}

}  // namespace opsrag
