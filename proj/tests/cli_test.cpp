#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace ultradense {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(ULTRADENSE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_file(out), testing::read_file(err)};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::temp_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    testing::PlantedOptions o;
    o.words = 200;
    o.dim = 6;
    o.seed = 21;
    config_ = testing::write_planted_fixture(dir_, o);
  }
  fs::path dir_;
  fs::path config_;
};

TEST_F(Cli, TrainWritesArtifactsAndIsReproducible) {
  const CliRun r = run_cli(dir_, "train --config " + config_.string() + " --deterministic");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"transform.txt", "train_log.tsv", "config_echo.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / name)) << name;
  }
  const std::string first = testing::read_file(dir_ / "out" / "transform.txt");
  ASSERT_EQ(run_cli(dir_, "train --config " + config_.string() + " --deterministic").code, 0);
  EXPECT_EQ(testing::read_file(dir_ / "out" / "transform.txt"), first);

  ASSERT_EQ(run_cli(dir_, "train --config " + config_.string() + " --seed 99 --out-dir " + (dir_ / "other").string())
                .code,
            0);
  EXPECT_NE(testing::read_file(dir_ / "other" / "transform.txt"), first);
}

TEST_F(Cli, OverridesReachTheRun) {
  const CliRun r = run_cli(dir_, "train --config " + config_.string() + " --iterations 7 --top-k 150 --alpha-sentiment 0.6");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = testing::read_file(dir_ / "out" / "train_log.tsv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 7);
  const std::string echo = testing::read_file(dir_ / "out" / "config_echo.txt");
  EXPECT_NE(echo.find("top_k = 150\n"), std::string::npos);
  EXPECT_NE(echo.find("alpha.sentiment = 0.59999999999999998\n"), std::string::npos);
  EXPECT_EQ(run_cli(dir_, "train --config " + config_.string() + " --alpha-frequency 0.5").code, 3);
}

TEST_F(Cli, MissingEmbeddingFileIsExitTwo) {
  testing::write_file(dir_ / "bad.cfg", "embeddings = nowhere.txt\nresource.sentiment = sentiment.tsv\n");
  const CliRun r = run_cli(dir_, "train --config " + (dir_ / "bad.cfg").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere.txt"), std::string::npos);
}

TEST_F(Cli, LexiconAndEval) {
  ASSERT_EQ(run_cli(dir_, "train --config " + config_.string()).code, 0);
  const std::string transform = (dir_ / "out" / "transform.txt").string();
  const std::string embeddings = (dir_ / "embeddings.txt").string();
  const std::string lexicon = (dir_ / "lexicon.tsv").string();
  const CliRun lex = run_cli(dir_, "lexicon --transform " + transform + " --embeddings " + embeddings +
                                    " --property sentiment --out " + lexicon);
  ASSERT_EQ(lex.code, 0) << lex.err;
  const std::string text = testing::read_file(lexicon);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 200);

  const CliRun unknown = run_cli(dir_, "lexicon --transform " + transform + " --embeddings " + embeddings +
                                        " --property concreteness --out " + lexicon);
  EXPECT_EQ(unknown.code, 3);

  // The lexicon against itself as gold.
  const CliRun self = run_cli(dir_, "eval --lexicon " + lexicon + " --gold " + lexicon + " --property sentiment");
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_EQ(self.out, "sentiment\t200\t1.000000\t1.000000\tultradense\n");

  const CliRun held_out = run_cli(dir_, "eval --lexicon " + lexicon + " --gold " + (dir_ / "out" / "sentiment_gold.tsv").string() +
                                         " --property sentiment --tau-variant tau_a");
  ASSERT_EQ(held_out.code, 0) << held_out.err;
  EXPECT_EQ(held_out.out.rfind("sentiment\t40\t", 0), 0u);

  testing::write_file(dir_ / "flat.tsv", "w0\t1\nw1\t1\nw2\t1\n");
  EXPECT_EQ(run_cli(dir_, "eval --lexicon " + lexicon + " --gold " + (dir_ / "flat.tsv").string()).code, 4);

  testing::write_file(dir_ / "half.tsv", "w0\t0.5\nw1\t-0.5\nnot_a_word\t0.1\nalso_missing\t0.2\n");
  const CliRun half = run_cli(dir_, "eval --lexicon " + lexicon + " --gold " + (dir_ / "half.tsv").string());
  ASSERT_EQ(half.code, 0) << half.err;
  EXPECT_NE(half.out.find("\t0.500000\tultradense"), std::string::npos);
}

TEST_F(Cli, LexiconFromBinaryEmbeddings) {
  ASSERT_EQ(run_cli(dir_, "train --config " + config_.string()).code, 0);
  const auto e = load_embeddings((dir_ / "embeddings.txt").string(), EmbeddingFormat::Text);
  save_embeddings(e, (dir_ / "embeddings.bin").string(), EmbeddingFormat::Binary);
  const CliRun r = run_cli(dir_, "lexicon --transform " + (dir_ / "out" / "transform.txt").string() + " --embeddings " +
                                  (dir_ / "embeddings.bin").string() + " --format binary --max-vocab 50 --out " +
                                  (dir_ / "lex.tsv").string() + " --normalize-scores");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = testing::read_file(dir_ / "lex.tsv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 50);
  EXPECT_NE(text.find("\t1\n"), std::string::npos);
  EXPECT_NE(text.find("\t-1\n"), std::string::npos);
}

TEST_F(Cli, SweepsAreReproducible) {
  const std::string base = "sweep --config " + config_.string() + " --iterations 50 ";
  const CliRun a = run_cli(dir_, base + "--kind subspace --values 1,2,4");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 3);
  EXPECT_EQ(run_cli(dir_, base + "--kind subspace --values 1,2,4").out, a.out);

  const CliRun pca = run_cli(dir_, base + "--kind subspace --values 1 --method pca --out " + (dir_ / "pca.tsv").string());
  ASSERT_EQ(pca.code, 0) << pca.err;
  EXPECT_EQ(testing::read_file(dir_ / "pca.tsv").rfind("1\t", 0), 0u);

  const CliRun too_big = run_cli(dir_, base + "--kind resource --values 10000");
  EXPECT_EQ(too_big.code, 3);
  EXPECT_NE(too_big.err.find("MissingClass"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(run_cli(dir_, "").code, 0);
  EXPECT_NE(run_cli(dir_, "train").code, 0);
  EXPECT_EQ(run_cli(dir_, "lexicon --transform x --embeddings y --out z --property colour").code, 3);
}

}  // namespace
}  // namespace ultradense
