#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "opsrag/error.hpp"
#include "opsrag/io.hpp"
#include "opsrag_cli/cli.hpp"
#include "opsrag_cli/config.hpp"
#include "test_support.hpp"

namespace opsrag {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string small_config(const fs::path& corpus, const fs::path& work) {
  nlohmann::json j = {
      {"paths", {{"corpus_dir", corpus.string()}, {"work_dir", work.string()}}},
      {"synthetic", {{"documents", 16}, {"topics", 4}, {"train_phrasings", 2}}},
      {"encoder", {{"hash_dims", 4096}, {"embed_dim", 16}}},
      {"training", {{"epochs", 1}, {"batch_size", 8}, {"learning_rate", 0.005}}},
      {"eval", {{"ks", {1, 5}}, {"ablation_seeds", {0}}, {"latency_repetitions", 1}}},
  };
  return j.dump(2);
}

TEST(Cli, ChunkMatchesGolden) {
  test::TempDir dir;
  write_file(dir / "cfg.json", small_config(test::data_path("corpus"), dir / "work"));
  auto cfg = (dir / "cfg.json").string();
  auto ingest = cli({"--config", cfg, "ingest"});
  ASSERT_EQ(ingest.code, 0) << ingest.err;
  auto chunk = cli({"--config", cfg, "chunk"});
  ASSERT_EQ(chunk.code, 0) << chunk.err;
  EXPECT_EQ(read_file(dir / "work/chunks.jsonl"), read_file(test::data_path("runbook.chunks.jsonl")));
  EXPECT_TRUE(fs::exists(dir / "work/manifests/chunk.json"));
}

class PipelineRun : public ::testing::Test {
 protected:
  static void run_pipeline(const test::TempDir& dir) {
    write_file(dir / "cfg.json", small_config(dir / "corpus", dir / "work"));
    auto r = cli({"--config", (dir / "cfg.json").string(), "pipeline", "--with-synth"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

TEST_F(PipelineRun, ManifestsIdenticalAcrossDirectories) {
  test::TempDir a, b;
  run_pipeline(a);
  run_pipeline(b);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a / "work/manifests")) {
    auto name = entry.path().filename();
    ASSERT_TRUE(fs::exists(b / "work/manifests" / name)) << name;
    EXPECT_EQ(read_file(entry.path()), read_file(b / "work/manifests" / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 9u);
}

TEST_F(PipelineRun, EvalAccPrintsOneColumnPerK) {
  test::TempDir dir;
  run_pipeline(dir);
  auto r = cli({"--config", (dir / "cfg.json").string(), "--k", "1,5,20", "eval", "acc"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = nlohmann::json::parse(read_file(dir / "work/reports/acc.json"));
  EXPECT_EQ(report["ks"], nlohmann::json({1, 5, 20}));
  ASSERT_EQ(report["rows"].size(), 2u);
  for (const auto& row : report["rows"]) {
    ASSERT_EQ(row["acc"].size(), 3u);
    EXPECT_LE(row["acc"][0].get<double>(), row["acc"][1].get<double>());
    EXPECT_LE(row["acc"][1].get<double>(), row["acc"][2].get<double>());
  }
  std::istringstream table(r.out);
  std::string header;
  std::getline(table, header);
  EXPECT_NE(header.find("acc@1"), std::string::npos);
  EXPECT_NE(header.find("acc@5"), std::string::npos);
  EXPECT_NE(header.find("acc@20"), std::string::npos);

  auto ka = cli({"--config", (dir / "cfg.json").string(), "--task", "ka", "eval", "acc"});
  ASSERT_EQ(ka.code, 0) << ka.err;
  EXPECT_EQ(nlohmann::json::parse(read_file(dir / "work/reports/acc.json"))["rows"].size(), 1u);
}

TEST_F(PipelineRun, JudgeAndLatencyRunOffline) {
  test::TempDir dir;
  run_pipeline(dir);
  auto cfg = (dir / "cfg.json").string();
  auto latency = cli({"--config", cfg, "--k", "1,5", "eval", "latency"});
  EXPECT_EQ(latency.code, 0) << latency.err;
  auto judge = cli({"--config", cfg, "eval", "judge"});
  EXPECT_EQ(judge.code, 0) << judge.err;
  EXPECT_NE(judge.out.find("judge single"), std::string::npos);
}

TEST(Cli, ConfigFailuresExitWithTwo) {
  test::TempDir dir;
  write_file(dir / "cfg.json", small_config(dir / "missing-corpus", dir / "work"));
  auto cfg = (dir / "cfg.json").string();
  EXPECT_EQ(cli({"--config", cfg, "ingest"}).code, 2);
  EXPECT_EQ(cli({"--config", cfg, "chunk"}).code, 2);  // documents not built yet
  EXPECT_EQ(cli({"--config", cfg, "--k", "1,x", "eval", "acc"}).code, 2);
  EXPECT_EQ(cli({"--config", cfg, "no-such-stage"}).code, 2);
  EXPECT_EQ(cli({"--config", (dir / "absent.json").string(), "ingest"}).code, 2);
  write_file(dir / "bad.json", R"({"unknown_key": 1})");
  EXPECT_EQ(cli({"--config", (dir / "bad.json").string(), "ingest"}).code, 2);
}

TEST(Cli, MalformedCorpusIsStageFailure) {
  test::TempDir dir;
  fs::create_directories(dir / "corpus");
  write_file(dir / "corpus/bad.md", "# ok\n\n```\nnever closed\n");
  write_file(dir / "cfg.json", small_config(dir / "corpus", dir / "work"));
  auto r = cli({"--config", (dir / "cfg.json").string(), "ingest"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.md"), std::string::npos);
}

TEST(CliConfig, ParseAndFingerprint) {
  auto c = cli::parse_config(R"({"seed": 7, "training": {"epochs": 3}})", "/base");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.training.epochs, 3u);
  EXPECT_EQ(c.paths.corpus_dir, fs::path("/base/corpus"));
  auto d = cli::parse_config(R"({"seed": 7, "training": {"epochs": 3}})", "/elsewhere");
  EXPECT_EQ(cli::config_fingerprint(c, "train-embed"), cli::config_fingerprint(d, "train-embed"));
  EXPECT_THROW(cli::parse_config(R"({"training": {"epochs": "three"}})", "/"), Error);
}

TEST(CliManifest, DigestsNamesNotPaths) {
  test::TempDir a, b;
  write_file(a / "x.txt", "same");
  write_file(b / "y.txt", "same");
  auto da = cli::digest_artifact("artifact", a / "x.txt");
  auto db = cli::digest_artifact("artifact", b / "y.txt");
  EXPECT_EQ(da.sha256, db.sha256);
  EXPECT_EQ(cli::render_manifest("s", {da}, "{}", {}), cli::render_manifest("s", {db}, "{}", {}));
  EXPECT_EQ(da.sha256, "0967115f2813a3541eaef77de9d9d5773f1c0c04314b0bbfe4ff3b3b1c55b5d5");
}

}  // namespace
}  // namespace opsrag
