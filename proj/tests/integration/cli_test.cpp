#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "../unit/test_util.hpp"
#include "hyperaug/experiment.hpp"
#include "hyperaug/hsio.hpp"

namespace fs = std::filesystem;
using namespace hyperaug;

namespace {

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HYPERAUG_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kCnnFlags = " --kernels 4 --dense1 16 --dense2 8 --learning-rate 0.01 --max-epochs 8 --patience 4";

std::string config_text(const fs::path& data) {
  return "dataset = toy\n"
         "cube = " + (data / "cube.hsr").string() + "\n"
         "labels = " + (data / "labels.hsl").string() + "\n"
         "train_total = 24\nval_total = 9\nruns = 2\n"
         "variants = without, pca, pca-on, noise-on\n"
         "tta_samples = 3\n"
         "cnn.kernels = 4\ncnn.dense1 = 16\ncnn.dense2 = 8\ncnn.learning_rate = 0.01\n"
         "cnn.max_epochs = 8\ncnn.patience = 4\n"
         "seed = 5\n";
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(cli("ingest --synthetic classes=3 bands=16 per-class=40 --seed 2 --out " +
                      (dir / "data").string(),
                  dir / "ingest.log"),
              0);
    testutil::spit(dir / "exp.cfg", config_text(dir / "data"));
  }

  std::string data_flags(std::size_t fold) const {
    return " --cube " + (dir / "data/cube.hsr").string() + " --labels " +
           (dir / "data/labels.hsl").string() + " --split " +
           (dir / ("splits/split_" + std::to_string(fold) + ".csv")).string() + " --seed 5 --fold " +
           std::to_string(fold);
  }

  testutil::TempDir dir{"cli"};
};

}  // namespace

TEST_F(Cli, IngestMatchesLibrary) {
  SyntheticParams p{.classes = 3, .bands = 16, .per_class = 40, .seed = 2};
  const auto scene = generate_synthetic(p);
  save_cube(dir / "lib.hsr", scene.cube);
  EXPECT_EQ(testutil::slurp(dir / "lib.hsr"), testutil::slurp(dir / "data/cube.hsr"));
}

TEST_F(Cli, RunIsByteReproducible) {
  ASSERT_EQ(cli("run " + (dir / "exp.cfg").string() + " --output " + (dir / "a").string(), dir / "a.log"), 0);
  ASSERT_EQ(cli("run " + (dir / "exp.cfg").string() + " --output " + (dir / "b").string() + " --threads 3",
                dir / "b.log"),
            0);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "timings.csv") continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(testutil::slurp(e.path()), testutil::slurp(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 20u);
  EXPECT_TRUE(fs::exists(dir / "a/timings.csv"));
  EXPECT_TRUE(fs::exists(dir / "a/run_1/pca-on/report.json"));
}

TEST_F(Cli, StepwiseMatchesRun) {
  ASSERT_EQ(cli("run " + (dir / "exp.cfg").string() + " --output " + (dir / "full").string(),
                dir / "full.log"),
            0);
  const auto labels = (dir / "data/labels.hsl").string();
  ASSERT_EQ(cli("split --labels " + labels + " --train-total 24 --val-total 9 --runs 2 --seed 5 --out " +
                    (dir / "splits").string(),
                dir / "split.log"),
            0);
  for (std::size_t fold = 0; fold < 2; ++fold) {
    const auto f = std::to_string(fold);
    const auto run_dir = dir / "full" / ("run_" + f);
    EXPECT_EQ(load_split(dir / ("splits/split_" + f + ".csv")).train, load_split(run_dir / "split.csv").train);

    // without, and its online variant noise-on
    const auto plain = (dir / ("plain_" + f + ".ckpt")).string();
    const auto norm = (dir / ("norm_" + f + ".txt")).string();
    ASSERT_EQ(cli("train" + data_flags(fold) + kCnnFlags + " --out " + plain + " --normalizer-out " + norm,
                  dir / "train.log"),
              0);
    const auto p0 = dir / ("without_" + f + ".csv");
    ASSERT_EQ(cli("infer" + data_flags(fold) + " --model " + plain + " --normalizer " + norm + " --out " +
                      p0.string(),
                  dir / "infer.log"),
              0);
    EXPECT_EQ(testutil::slurp(p0), testutil::slurp(run_dir / "without/predictions.csv"));
    const auto p1 = dir / ("noise_on_" + f + ".csv");
    ASSERT_EQ(cli("infer" + data_flags(fold) + " --model " + plain + " --normalizer " + norm +
                      " --tta-samples 3 --method noise --threads 2 --out " + p1.string(),
                  dir / "infer.log"),
              0);
    EXPECT_EQ(testutil::slurp(p1), testutil::slurp(run_dir / "noise-on/predictions.csv"));

    // pca offline, then pca online on the plain network
    const auto samples = (dir / ("enlarged_" + f + ".csv")).string();
    ASSERT_EQ(cli("augment" + data_flags(fold) + " --method pca --out " + samples, dir / "augment.log"), 0);
    const auto big = (dir / ("pca_" + f + ".ckpt")).string();
    ASSERT_EQ(cli("train" + data_flags(fold) + kCnnFlags + " --samples " + samples + " --out " + big +
                      " --normalizer-out " + norm,
                  dir / "train.log"),
              0);
    const auto p2 = dir / ("pca_" + f + ".csv");
    ASSERT_EQ(cli("infer" + data_flags(fold) + " --model " + big + " --normalizer " + norm + " --out " +
                      p2.string(),
                  dir / "infer.log"),
              0);
    EXPECT_EQ(testutil::slurp(p2), testutil::slurp(run_dir / "pca/predictions.csv"));
    const auto p3 = dir / ("pca_on_" + f + ".csv");
    ASSERT_EQ(cli("infer" + data_flags(fold) + " --model " + plain + " --normalizer " + norm +
                      " --tta-samples 3 --method pca --out " + p3.string(),
                  dir / "infer.log"),
              0);
    EXPECT_EQ(testutil::slurp(p3), testutil::slurp(run_dir / "pca-on/predictions.csv"));
  }

  const auto report = dir / "r.json";
  ASSERT_EQ(cli("evaluate --predictions " + (dir / "without_0.csv").string() + " --report " + report.string(),
                dir / "eval.log"),
            0);
  const auto from_cli = load_report_json(report);
  const auto from_run = load_report_json(dir / "full/run_0/without/report.json");
  EXPECT_EQ(from_cli.scores.confusion, from_run.scores.confusion);
  EXPECT_EQ(from_cli.scores.oa, from_run.scores.oa);
}

TEST_F(Cli, CompareReports) {
  ASSERT_EQ(cli("run " + (dir / "exp.cfg").string() + " --output " + (dir / "full").string(),
                dir / "full.log"),
            0);
  const auto a = (dir / "full/run_0/without/report.json").string();
  // Three classes are too few pairs for the signed-rank test.
  EXPECT_EQ(cli("evaluate --compare " + a + " " + a, dir / "cmp.log"), 0);
  EXPECT_NE(testutil::slurp(dir / "cmp.log").find("all differences zero"), std::string::npos);
}

TEST_F(Cli, ErrorsExitWithTwo) {
  EXPECT_EQ(cli("ingest --cube /nonexistent.hsr --labels /nonexistent.hsl", dir / "e1.log"), 2);
  EXPECT_NE(testutil::slurp(dir / "e1.log").find("error"), std::string::npos);
  EXPECT_EQ(cli("run /nonexistent.cfg", dir / "e2.log"), 2);
  testutil::spit(dir / "bad.cfg", "variants = gan\n");
  EXPECT_EQ(cli("run " + (dir / "bad.cfg").string(), dir / "e3.log"), 2);
  testutil::spit(dir / "data/short.hsr", testutil::slurp(dir / "data/cube.hsr").substr(0, 40));
  EXPECT_EQ(cli("ingest --cube " + (dir / "data/short.hsr").string() + " --labels " +
                    (dir / "data/labels.hsl").string(),
                dir / "e4.log"),
            2);
}

TEST_F(Cli, InfeasibleRunExitsWithOne) {
  testutil::spit(dir / "big.cfg", config_text(dir / "data") + "train_total = 500\n");
  EXPECT_EQ(cli("run " + (dir / "big.cfg").string(), dir / "big.log"), 1);
}
