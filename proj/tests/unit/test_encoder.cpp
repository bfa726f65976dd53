#include <gtest/gtest.h>

#include <cmath>
#include <cctype>
#include <map>
#include <set>

#include "opsrag/encoder.hpp"
#include "opsrag/error.hpp"
#include "opsrag/hash.hpp"
#include "opsrag/io.hpp"
#include "opsrag/random.hpp"
#include "test_support.hpp"

namespace opsrag {
namespace {

EncoderConfig small_config(std::uint64_t seed = 0) {
  EncoderConfig c;
  c.hash_dims = 1024;
  c.embed_dim = 16;
  c.seed = seed;
  return c;
}

// Independent feature extraction: lower-case, squeeze whitespace, pad,
// count hashed byte n-grams.
std::map<std::uint32_t, float> oracle_features(const std::string& text, const EncoderConfig& c) {
  std::string s = " ";
  bool gap = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      gap = s.size() > 1;
      continue;
    }
    if (gap) s += ' ';
    gap = false;
    s += ch < 0x80 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch);
  }
  s += ' ';
  std::map<std::uint32_t, int> counts;
  for (std::size_t n = c.ngram_min; n <= c.ngram_max; ++n) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[static_cast<std::uint32_t>(fnv1a64(s.substr(i, n)) % c.hash_dims)];
  }
  std::map<std::uint32_t, float> out;
  for (auto [f, k] : counts) out[f] = static_cast<float>(1.0 + std::log(k));
  return out;
}

double norm(const Embedding& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

TEST(Features, MatchOracle) {
  auto cfg = small_config();
  for (std::string text : {"Disk  full on\tnode-7", "ab", "CPU cpu CPU", "日志 error"}) {
    auto got = extract_features(text, cfg);
    auto expected = oracle_features(text, cfg);
    ASSERT_EQ(got.size(), expected.size()) << text;
    std::size_t i = 0;
    for (auto [f, w] : expected) {
      EXPECT_EQ(got[i].first, f);
      EXPECT_FLOAT_EQ(got[i].second, w);
      ++i;
    }
  }
}

TEST(Features, CaseAndWhitespaceInsensitive) {
  auto cfg = small_config();
  EXPECT_EQ(extract_features("Queue   Depth", cfg), extract_features("queue depth", cfg));
  EXPECT_EQ(extract_features("  queue depth\n", cfg), extract_features("queue depth", cfg));
}

TEST(Features, EmptyInputRejected) {
  try {
    extract_features(" \n\t ", small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptyInput);
  }
}

TEST(Encode, DeterministicAndUnitNorm) {
  auto m = EncoderModel::random_init(small_config());
  auto a = m.encode("restart the relay");
  EXPECT_EQ(a, m.encode("restart the relay"));
  EXPECT_NEAR(norm(a), 1.0, 1e-6);
  EXPECT_EQ(a.size(), 16u);
}

TEST(Encode, EqualsNormalizedProjectionOracle) {
  auto cfg = small_config(3);
  auto m = EncoderModel::random_init(cfg);
  auto w = m.weights();
  std::string text = "kafka consumer lag alert";
  std::vector<double> z(cfg.embed_dim, 0.0);
  for (auto [f, x] : oracle_features(text, cfg)) {
    for (std::size_t i = 0; i < cfg.embed_dim; ++i) z[i] += x * static_cast<double>(w[f * cfg.embed_dim + i]);
  }
  double n = 0;
  for (double v : z) n += v * v;
  n = std::sqrt(n);
  auto e = m.encode(text);
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) EXPECT_NEAR(e[i], z[i] / n, 1e-6);
}

TEST(Encode, RandomTextsAreUnitNorm) {
  auto m = EncoderModel::random_init(small_config(9));
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::string s;
    for (std::uint64_t i = 0, n = 1 + rng.below(60); i < n; ++i) s.push_back(static_cast<char>('!' + rng.below(90)));
    EXPECT_NEAR(norm(m.encode(s)), 1.0, 1e-6);
  }
}

TEST(Encode, DisjointBucketsGiveOrthogonalEmbeddingsUnderIdentityProjection) {
  EncoderConfig cfg;
  cfg.hash_dims = 512;
  cfg.embed_dim = 512;
  auto m = EncoderModel::random_init(cfg);
  auto w = m.mutable_weights();
  std::fill(w.begin(), w.end(), 0.0f);
  for (std::size_t f = 0; f < cfg.hash_dims; ++f) w[f * cfg.embed_dim + f] = 1.0f;

  // Search letter-disjoint word pairs until their hashed buckets are disjoint.
  const std::vector<std::string> left = {"abc", "bad", "cab", "dab", "ace", "bead", "cede", "face"};
  const std::vector<std::string> right = {"xyz", "zyx", "woz", "tux", "yurt", "rust", "wry", "sty"};
  int found = 0;
  for (const auto& a : left) {
    for (const auto& b : right) {
      auto fa = oracle_features(a, cfg);
      auto fb = oracle_features(b, cfg);
      bool disjoint = true;
      for (auto [f, x] : fa) disjoint = disjoint && !fb.count(f);
      if (!disjoint) continue;
      ++found;
      EXPECT_NEAR(similarity(m.encode(a), m.encode(b)), 0.0, 1e-7) << a << " " << b;
    }
  }
  EXPECT_GT(found, 10);
}

TEST(Encode, RankingInvariantUnderPositiveScaling) {
  auto m = EncoderModel::random_init(small_config(5));
  auto scaled = m;
  for (auto& x : scaled.mutable_weights()) x *= 8.0f;  // exact in binary floating point
  for (std::string t : {"disk", "broker offline", "tls handshake failed"}) EXPECT_EQ(m.encode(t), scaled.encode(t));
}

TEST(Similarity, Bounds) {
  Rng rng(2);
  auto u = test::random_unit(rng, 32);
  auto neg = u;
  for (auto& x : neg) x = -x;
  EXPECT_NEAR(similarity(u, u), 1.0, 1e-6);
  EXPECT_NEAR(similarity(u, neg), -1.0, 1e-6);
  for (int i = 0; i < 1000; ++i) {
    auto a = test::random_unit(rng, 32), b = test::random_unit(rng, 32);
    double s = similarity(a, b);
    EXPECT_LE(std::abs(s), 1.0 + 1e-9);
    EXPECT_DOUBLE_EQ(s, similarity(b, a));
  }
  EXPECT_THROW(similarity(std::vector<float>{1.0f}, std::vector<float>{1.0f, 0.0f}), Error);
}

TEST(Normalize, UnitLengthAndZeroRejected) {
  std::vector<float> v{3.0f, 4.0f};
  normalize(v);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  std::vector<float> z(3, 0.0f);
  try {
    normalize(z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kZeroVector);
  }
}

TEST(RandomInit, SeededAndScaled) {
  auto a = EncoderModel::random_init(small_config(1));
  EXPECT_TRUE(a == EncoderModel::random_init(small_config(1)));
  EXPECT_FALSE(a == EncoderModel::random_init(small_config(2)));
  double sum = 0, sq = 0;
  for (float w : a.weights()) {
    sum += w;
    sq += static_cast<double>(w) * w;
  }
  const double n = static_cast<double>(a.weights().size());
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0 / 16.0, 0.005);
}

TEST(RandomInit, RejectsBadConfig) {
  auto c = small_config();
  c.temperature = 0.0;
  EXPECT_THROW(EncoderModel::random_init(c), Error);
  c = small_config();
  c.ngram_min = 6;
  EXPECT_THROW(EncoderModel::random_init(c), Error);
}

TEST(ModelFile, BitExactRoundTrip) {
  test::TempDir dir;
  auto m = EncoderModel::random_init(small_config(4));
  m.set_temperature(0.07);
  m.save(dir / "m.rgem");
  auto loaded = EncoderModel::load(dir / "m.rgem");
  EXPECT_TRUE(loaded == m);
  EXPECT_EQ(loaded.temperature(), 0.07);
  EXPECT_EQ(loaded.encode("same text"), m.encode("same text"));
}

TEST(ModelFile, HeaderAndRowMajorLayout) {
  EncoderConfig cfg;
  cfg.hash_dims = 3;
  cfg.embed_dim = 2;
  cfg.ngram_min = 2;
  cfg.ngram_max = 4;
  cfg.temperature = 0.5;
  auto m = EncoderModel::random_init(cfg);
  auto w = m.mutable_weights();
  for (std::size_t f = 0; f < 3; ++f) {
    for (std::size_t i = 0; i < 2; ++i) w[f * 2 + i] = static_cast<float>(10 * i + f);  // W(i, f)
  }
  auto bytes = m.serialize();
  BinaryReader r(bytes);
  EXPECT_EQ(r.bytes(4), "RGEM");
  EXPECT_EQ(r.u32(), 1u);
  EXPECT_EQ(r.u32(), 3u);
  EXPECT_EQ(r.u32(), 2u);
  EXPECT_EQ(r.u32(), 4u);
  EXPECT_EQ(r.u32(), 2u);
  EXPECT_EQ(r.f64(), 0.5);
  std::vector<float> rows;
  while (r.remaining()) rows.push_back(r.f32());
  EXPECT_EQ(rows, (std::vector<float>{0, 1, 2, 10, 11, 12}));
}

TEST(ModelFile, CorruptFilesRejected) {
  auto bytes = EncoderModel::random_init(small_config()).serialize();
  auto code = [](std::string_view b) {
    try {
      EncoderModel::deserialize(b);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::kNotFound;
  };
  EXPECT_EQ(code(bytes.substr(0, bytes.size() - 1)), Errc::kCorruptFile);
  EXPECT_EQ(code("XXXX" + bytes.substr(4)), Errc::kCorruptFile);
  EXPECT_EQ(code(bytes.substr(0, 10)), Errc::kCorruptFile);
  try {
    EncoderModel::load("/nonexistent/model.rgem");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIoError);
  }
}

}  // namespace
}  // namespace opsrag
