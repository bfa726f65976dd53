#include "opsrag/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "opsrag/error.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"
#include "opsrag/random.hpp"

namespace opsrag {
namespace {

constexpr std::string_view kModelMagic = "RGEM";
constexpr std::uint32_t kModelVersion = 1;

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 2);
  out.push_back(' ');
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = out.size() > 1;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  out.push_back(' ');
  return out;
}

void validate(const EncoderConfig& c) {
  if (c.hash_dims == 0 || c.embed_dim == 0) throw Error(Errc::kConfigError, "encoder dims must be positive");
  if (c.ngram_min == 0 || c.ngram_min > c.ngram_max) throw Error(Errc::kConfigError, "bad n-gram range");
  if (!(c.temperature > 0.0)) throw Error(Errc::kConfigError, "temperature must be positive");
}

}  // namespace

SparseFeatures extract_features(std::string_view text, const EncoderConfig& config) {
  const auto padded = normalize_text(text);
  if (padded.size() <= 2) throw Error(Errc::kEmptyInput, "text is empty after normalization");

  std::unordered_map<std::uint32_t, std::uint32_t> counts;
  const std::string_view view(padded);
  for (std::uint32_t n = config.ngram_min; n <= config.ngram_max; ++n) {
    if (n > view.size()) break;
    for (std::size_t i = 0; i + n <= view.size(); ++i) {
      auto idx = static_cast<std::uint32_t>(fnv1a64(view.substr(i, n)) % config.hash_dims);
      ++counts[idx];
    }
  }
  SparseFeatures out;
  out.reserve(counts.size());
  for (auto [idx, c] : counts) {
    out.emplace_back(idx, static_cast<float>(1.0 + std::log(static_cast<double>(c))));
  }
  std::sort(out.begin(), out.end());
  return out;
}

EncoderModel EncoderModel::random_init(const EncoderConfig& config) {
  validate(config);
  EncoderModel m;
  m.config_ = config;
  m.weights_.resize(static_cast<std::size_t>(config.hash_dims) * config.embed_dim);
  Rng rng(config.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  for (auto& w : m.weights_) w = static_cast<float>(rng.normal() * scale);
  return m;
}

void EncoderModel::set_temperature(double tau) {
  if (!(tau > 0.0)) throw Error(Errc::kConfigError, "temperature must be positive");
  config_.temperature = tau;
}

std::vector<double> EncoderModel::project(const SparseFeatures& features) const {
  const std::size_t d = config_.embed_dim;
  std::vector<double> z(d, 0.0);
  for (auto [f, x] : features) {
    const float* row = weights_.data() + static_cast<std::size_t>(f) * d;
    for (std::size_t i = 0; i < d; ++i) z[i] += static_cast<double>(x) * row[i];
  }
  return z;
}

Embedding EncoderModel::encode(std::string_view text) const {
  auto z = project(extract_features(text, config_));
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw Error(Errc::kZeroVector, "projection is zero");
  Embedding out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<float>(z[i] / norm);
  return out;
}

std::string EncoderModel::serialize() const {
  BinaryWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  w.u32(config_.hash_dims);
  w.u32(config_.ngram_min);
  w.u32(config_.ngram_max);
  w.u32(config_.embed_dim);
  w.f64(config_.temperature);
  const std::size_t d = config_.embed_dim;
  const std::size_t f_dims = config_.hash_dims;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t f = 0; f < f_dims; ++f) w.f32(weights_[f * d + i]);
  }
  return w.take();
}

EncoderModel EncoderModel::deserialize(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != kModelMagic) throw Error(Errc::kCorruptFile, "not an encoder model file");
  if (auto v = r.u32(); v != kModelVersion) {
    throw Error(Errc::kCorruptFile, "unsupported model version " + std::to_string(v));
  }
  EncoderModel m;
  m.config_.hash_dims = r.u32();
  m.config_.ngram_min = r.u32();
  m.config_.ngram_max = r.u32();
  m.config_.embed_dim = r.u32();
  m.config_.temperature = r.f64();
  try {
    validate(m.config_);
  } catch (const Error& e) {
    throw Error(Errc::kCorruptFile, e.what());
  }
  const std::size_t d = m.config_.embed_dim;
  const std::size_t f_dims = m.config_.hash_dims;
  if (r.remaining() != d * f_dims * 4) throw Error(Errc::kCorruptFile, "model weight block has wrong size");
  m.weights_.resize(d * f_dims);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t f = 0; f < f_dims; ++f) m.weights_[f * d + i] = r.f32();
  }
  return m;
}

void EncoderModel::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

EncoderModel EncoderModel::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

bool operator==(const EncoderModel& a, const EncoderModel& b) {
  const auto& x = a.config_;
  const auto& y = b.config_;
  if (x.hash_dims != y.hash_dims || x.ngram_min != y.ngram_min || x.ngram_max != y.ngram_max ||
      x.embed_dim != y.embed_dim || x.temperature != y.temperature) {
    return false;
  }
  // Bitwise comparison so that -0.0 / NaN payloads count as differences.
  return a.weights_.size() == b.weights_.size() &&
         std::equal(a.weights_.begin(), a.weights_.end(), b.weights_.begin(),
                    [](float p, float q) { return std::bit_cast<std::uint32_t>(p) == std::bit_cast<std::uint32_t>(q); });
}

double similarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) throw Error(Errc::kDimensionMismatch, "vectors differ in length");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += static_cast<double>(u[i]) * v[i];
  return std::clamp(dot, -1.0, 1.0);
}

void normalize(std::span<float> v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw Error(Errc::kZeroVector, "cannot normalize a zero vector");
  for (auto& x : v) x = static_cast<float>(x / norm);
}

}  // namespace opsrag
