#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "opsrag/document.hpp"
#include "opsrag/tokenizer.hpp"

namespace opsrag {

enum class ChunkMethod { kTargeted, kGeneral };

std::string_view to_string(ChunkMethod m);

// A retrieval unit. token_count is measured on render_chunk_text(), not on
// the bare body.
struct Chunk {
  std::string id;
  std::string doc_id;
  std::vector<std::string> title_path;
  std::string body;
  std::size_t token_count = 0;
  ChunkMethod method = ChunkMethod::kTargeted;

  std::string rendered() const;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// "Title: <a > b> Content: <body>", or just the body when there is no title.
std::string render_chunk_text(const std::vector<std::string>& title_path, std::string_view body);

struct ChunkerConfig {
  std::size_t max_tokens = 800;
  std::size_t min_tokens = 20;
  std::size_t overlap_tokens = 100;  // general method only
};

// Sliding-window split. Each window holds at most max_tokens of rendered
// text, ends after a stop token ('.', ',' or a token followed by a line
// break) when one exists past the overlap region, and the next window starts
// overlap_tokens before the previous end.
std::vector<Chunk> chunk_general(std::string_view text, const Tokenizer& tok,
                                 std::size_t max_tokens = 800, std::size_t overlap_tokens = 100,
                                 const std::vector<std::string>& title_path = {},
                                 std::string_view doc_id = {});

// Heading-recursive split: a section whose rendered text is under
// max_tokens is kept whole, otherwise its own content and each subsection
// are handled separately one heading level down; oversize leaves fall back to
// chunk_general. Units whose body is under min_tokens are merged into the
// preceding unit, else the following one, provided the result still fits.
// Throws Error(kEmptyDocument) when the document has no body text.
std::vector<Chunk> chunk_targeted(const Document& doc, const Tokenizer& tok,
                                  const ChunkerConfig& config = {});

// One JSON object per line with fields in the fixed order
// id, doc_id, title_path, body, token_count, method.
std::string chunk_to_json(const Chunk& c);
Chunk chunk_from_json(std::string_view line);
std::string chunks_to_jsonl(const std::vector<Chunk>& chunks);
std::vector<Chunk> chunks_from_jsonl(std::string_view text);

}  // namespace opsrag
