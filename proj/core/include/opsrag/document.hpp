#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace opsrag {

using TableRows = std::vector<std::vector<std::string>>;

struct Block {
  enum class Kind { kHeading, kParagraph, kTable };

  Kind kind = Kind::kParagraph;
  int level = 0;       // 1..6 for headings, 0 otherwise
  std::string text;    // heading/paragraph text; flattened text for tables
  TableRows rows;      // tables only

  static Block heading(int level, std::string text);
  static Block paragraph(std::string text);
  static Block table(TableRows rows);

  bool is_heading() const { return kind == Kind::kHeading; }

  friend bool operator==(const Block&, const Block&) = default;
};

struct Document {
  std::string id;
  std::vector<Block> blocks;

  friend bool operator==(const Document&, const Document&) = default;
};

// Parses the portable markup format:
//   - ATX headings `# Title` .. `###### Title`
//   - fenced tables opened by "```table" whose rows are `| a | b |` lines
//     (markdown separator rows such as `|---|---|` are skipped, `\|` escapes)
//   - any other fenced block is kept verbatim as one paragraph
//   - paragraphs are runs of non-blank lines
// Throws Error(kMalformedMarkup) on invalid UTF-8, heading level > 6,
// unterminated fences, empty tables or table rows not delimited by '|'.
Document parse_document(std::string_view source, std::string id = {});

// Noise heuristics applied by clean_text. Patterns are ECMAScript regexes
// matched case-insensitively.
struct NoiseConfig {
  // A heading whose whole text matches one of these opens a menu span that
  // runs up to (not including) the next level-1 heading.
  std::vector<std::string> menu_headings = {R"(\s*(table of )?contents\s*)", R"(\s*目录\s*)"};
  // Paragraphs and tables containing a match are dropped.
  std::vector<std::string> noise_keywords = {R"(script\s+maintainer)", R"(version\s+number)"};
};

// Removes menu spans and noise blocks. Surviving blocks are returned
// unmodified and in their original order.
Document clean_text(const Document& doc, const NoiseConfig& noise = {});

// Cells joined by '|', rows joined by '\n'.
std::string table_to_text(const TableRows& rows);

// Every heading level lies in 1..6, so the stack construction always yields
// a forest where children are strictly deeper than their parent.
bool has_valid_heading_forest(const Document& doc);

std::string document_to_json(const Document& doc);
Document document_from_json(std::string_view line);

}  // namespace opsrag
