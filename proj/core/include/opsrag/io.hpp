#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace opsrag {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits JSON-lines text into non-empty lines (trailing '\r' stripped).
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace opsrag

#include <cstdint>

namespace opsrag {

// Little-endian binary encoding used by the model and index files.
class BinaryWriter {
 public:
  void bytes(std::string_view b) { buf_.append(b); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);  // u32 length prefix

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Throws Error(kCorruptFile) on reads past the end.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace opsrag
