#include "opsrag/document.hpp"

#include <regex>

#include <json.hpp>

#include "opsrag/error.hpp"

namespace opsrag {
namespace {

using json = nlohmann::json;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string_view rtrim(std::string_view s) {
  auto e = s.find_last_not_of(" \t\r\f\v");
  if (e == std::string_view::npos) return {};
  return s.substr(0, e + 1);
}

bool is_separator_row(std::string_view row) {
  bool saw_dash = false;
  for (char c : row) {
    if (c == '-') {
      saw_dash = true;
    } else if (c != '|' && c != ':' && c != ' ' && c != '\t') {
      return false;
    }
  }
  return saw_dash;
}

std::vector<std::string> split_row(std::string_view row, std::size_t line_no) {
  if (row.size() < 2 || row.front() != '|' || row.back() != '|') {
    throw Error(Errc::kMalformedMarkup,
                "line " + std::to_string(line_no) + ": table row must be delimited by '|'");
  }
  auto inner = row.substr(1, row.size() - 2);
  std::vector<std::string> cells;
  std::string cell;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] == '\\' && i + 1 < inner.size() && inner[i + 1] == '|') {
      cell.push_back('|');
      ++i;
    } else if (inner[i] == '|') {
      cells.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(inner[i]);
    }
  }
  cells.emplace_back(trim(cell));
  return cells;
}

int heading_level(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && line[n] == '#') ++n;
  if (n == 0) return 0;
  if (n < line.size() && line[n] != ' ' && line[n] != '\t') return 0;
  return static_cast<int>(n);
}

std::regex compile(const std::string& pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw Error(Errc::kConfigError, "bad noise pattern '" + pattern + "': " + e.what());
  }
}

}  // namespace

Block Block::heading(int level, std::string text) {
  Block b;
  b.kind = Kind::kHeading;
  b.level = level;
  b.text = std::move(text);
  return b;
}

Block Block::paragraph(std::string text) {
  Block b;
  b.kind = Kind::kParagraph;
  b.text = std::move(text);
  return b;
}

Block Block::table(TableRows rows) {
  Block b;
  b.kind = Kind::kTable;
  b.text = table_to_text(rows);
  b.rows = std::move(rows);
  return b;
}

std::string table_to_text(const TableRows& rows) {
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r > 0) out.push_back('\n');
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) out.push_back('|');
      out += rows[r][c];
    }
  }
  return out;
}

Document parse_document(std::string_view source, std::string id) {
  if (!valid_utf8(source)) throw Error(Errc::kMalformedMarkup, "source is not valid UTF-8");

  Document doc;
  doc.id = std::move(id);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= source.size();) {
    auto end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    lines.push_back(source.substr(start, end - start));
    start = end + 1;
  }

  std::string para;
  auto flush_para = [&] {
    if (!para.empty()) doc.blocks.push_back(Block::paragraph(std::move(para)));
    para.clear();
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = rtrim(lines[i]);
    auto stripped = trim(line);
    if (stripped.empty()) {
      flush_para();
      continue;
    }
    if (stripped.starts_with("```")) {
      flush_para();
      auto info = trim(stripped.substr(3));
      const std::size_t open_line = i + 1;
      std::vector<std::string_view> body;
      bool closed = false;
      for (++i; i < lines.size(); ++i) {
        if (trim(lines[i]) == "```") {
          closed = true;
          break;
        }
        body.push_back(rtrim(lines[i]));
      }
      if (!closed) {
        throw Error(Errc::kMalformedMarkup,
                    "line " + std::to_string(open_line) + ": unterminated fence");
      }
      if (info == "table") {
        TableRows rows;
        for (std::size_t k = 0; k < body.size(); ++k) {
          auto row = trim(body[k]);
          if (row.empty() || is_separator_row(row)) continue;
          rows.push_back(split_row(row, open_line + k + 1));
        }
        if (rows.empty()) {
          throw Error(Errc::kMalformedMarkup,
                      "line " + std::to_string(open_line) + ": table has no rows");
        }
        doc.blocks.push_back(Block::table(std::move(rows)));
      } else {
        std::string text;
        for (std::size_t k = 0; k < body.size(); ++k) {
          if (k > 0) text.push_back('\n');
          text += body[k];
        }
        if (!trim(text).empty()) doc.blocks.push_back(Block::paragraph(std::move(text)));
      }
      continue;
    }
    if (int level = heading_level(stripped); level > 0) {
      flush_para();
      if (level > 6) {
        throw Error(Errc::kMalformedMarkup, "line " + std::to_string(i + 1) +
                                                ": heading level " + std::to_string(level) +
                                                " exceeds 6");
      }
      doc.blocks.push_back(Block::heading(level, std::string(trim(stripped.substr(level)))));
      continue;
    }
    if (!para.empty()) para.push_back('\n');
    para += stripped;
  }
  flush_para();
  return doc;
}

Document clean_text(const Document& doc, const NoiseConfig& noise) {
  std::vector<std::regex> menus;
  std::vector<std::regex> keywords;
  for (const auto& p : noise.menu_headings) menus.push_back(compile(p));
  for (const auto& p : noise.noise_keywords) keywords.push_back(compile(p));

  Document out;
  out.id = doc.id;
  const auto& blocks = doc.blocks;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    if (b.is_heading()) {
      bool is_menu = false;
      for (const auto& re : menus) {
        if (std::regex_match(b.text, re)) {
          is_menu = true;
          break;
        }
      }
      if (is_menu) {
        // Skip through the first H1 after the menu heading, or failing that
        // the next heading at the menu's own level or above.
        std::size_t j = i + 1;
        std::size_t stop = blocks.size();
        for (; j < blocks.size(); ++j) {
          if (blocks[j].is_heading() && blocks[j].level == 1) {
            stop = j;
            break;
          }
        }
        if (stop == blocks.size()) {
          for (j = i + 1; j < blocks.size(); ++j) {
            if (blocks[j].is_heading() && blocks[j].level <= b.level) {
              stop = j;
              break;
            }
          }
        }
        i = stop - 1;
        continue;
      }
      out.blocks.push_back(b);
      continue;
    }
    bool noisy = false;
    for (const auto& re : keywords) {
      if (std::regex_search(b.text, re)) {
        noisy = true;
        break;
      }
    }
    if (!noisy) out.blocks.push_back(b);
  }
  return out;
}

bool has_valid_heading_forest(const Document& doc) {
  for (const auto& b : doc.blocks) {
    if (b.is_heading() && (b.level < 1 || b.level > 6)) return false;
    if (b.kind == Block::Kind::kTable && b.rows.empty()) return false;
  }
  return true;
}

std::string document_to_json(const Document& doc) {
  json blocks = json::array();
  for (const auto& b : doc.blocks) {
    json j;
    switch (b.kind) {
      case Block::Kind::kHeading:
        j["kind"] = "heading";
        j["level"] = b.level;
        j["text"] = b.text;
        break;
      case Block::Kind::kParagraph:
        j["kind"] = "paragraph";
        j["text"] = b.text;
        break;
      case Block::Kind::kTable:
        j["kind"] = "table";
        j["rows"] = b.rows;
        break;
    }
    blocks.push_back(std::move(j));
  }
  json out;
  out["id"] = doc.id;
  out["blocks"] = std::move(blocks);
  return out.dump();
}

Document document_from_json(std::string_view line) {
  Document doc;
  try {
    auto j = json::parse(line);
    doc.id = j.at("id").get<std::string>();
    for (const auto& jb : j.at("blocks")) {
      auto kind = jb.at("kind").get<std::string>();
      if (kind == "heading") {
        doc.blocks.push_back(Block::heading(jb.at("level").get<int>(), jb.at("text").get<std::string>()));
      } else if (kind == "paragraph") {
        doc.blocks.push_back(Block::paragraph(jb.at("text").get<std::string>()));
      } else if (kind == "table") {
        doc.blocks.push_back(Block::table(jb.at("rows").get<TableRows>()));
      } else {
        throw Error(Errc::kFormatError, "unknown block kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kFormatError, std::string("document record: ") + e.what());
  }
  return doc;
}

}  // namespace opsrag
