#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace opsrag {

using Embedding = std::vector<float>;

// Maps text to a unit-norm vector. Queries and chunks must be encoded by the
// same instance.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;

  virtual Embedding encode(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
};

struct EncoderConfig {
  std::uint32_t hash_dims = 1u << 18;
  std::uint32_t ngram_min = 3;
  std::uint32_t ngram_max = 5;
  std::uint32_t embed_dim = 256;
  double temperature = 0.05;
  std::uint64_t seed = 0;  // initial projection
};

// Sorted, merged (feature index, weight) pairs.
using SparseFeatures = std::vector<std::pair<std::uint32_t, float>>;

// Lower-cases ASCII, collapses whitespace, pads with one space on each side
// and hashes every byte n-gram with FNV-1a into [0, hash_dims). Weights are
// 1 + ln(count). Throws Error(kEmptyInput) when nothing remains.
SparseFeatures extract_features(std::string_view text, const EncoderConfig& config);

// Hashed character n-grams followed by a trainable linear projection and L2
// normalization. The projection W (embed_dim x hash_dims) is stored
// feature-major: weights()[f * embed_dim + i] is W(i, f).
class EncoderModel final : public TextEncoder {
 public:
  EncoderModel() = default;

  // Gaussian N(0, 1/embed_dim) entries from a portable seeded generator.
  static EncoderModel random_init(const EncoderConfig& config);

  Embedding encode(std::string_view text) const override;
  std::size_t dim() const override { return config_.embed_dim; }
  std::string name() const override { return "hashed-ngram"; }

  // Un-normalized projection W x, accumulated in double.
  std::vector<double> project(const SparseFeatures& features) const;

  const EncoderConfig& config() const { return config_; }
  double temperature() const { return config_.temperature; }
  void set_temperature(double tau);

  std::span<const float> weights() const { return weights_; }
  std::span<float> mutable_weights() { return weights_; }

  // Model file: "RGEM", version u32, F u32, ngram_min u32, ngram_max u32,
  // d u32, tau f64, then W as little-endian f32 in row-major d x F order.
  void save(const std::filesystem::path& path) const;
  static EncoderModel load(const std::filesystem::path& path);
  std::string serialize() const;
  static EncoderModel deserialize(std::string_view bytes);

  friend bool operator==(const EncoderModel& a, const EncoderModel& b);

 private:
  EncoderConfig config_;
  std::vector<float> weights_;
};

// Inner product of two unit vectors, clamped to [-1, 1].
double similarity(std::span<const float> u, std::span<const float> v);

// Scales v to unit length in place. Throws Error(kZeroVector) for a zero vector.
void normalize(std::span<float> v);

struct HttpEmbeddingConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/embeddings
  std::string model = "default";
  std::string api_key;
  std::size_t dim = 0;
  int timeout_seconds = 60;
};

// Adapter for external embedding services speaking
// {"model", "input":[...]} -> {"data":[{"embedding":[...]}]}.
class HttpEmbeddingEncoder final : public TextEncoder {
 public:
  explicit HttpEmbeddingEncoder(HttpEmbeddingConfig config);

  Embedding encode(std::string_view text) const override;
  std::vector<Embedding> encode_batch(const std::vector<std::string>& texts) const;
  std::size_t dim() const override { return config_.dim; }
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpEmbeddingConfig config_;
};

}  // namespace opsrag
