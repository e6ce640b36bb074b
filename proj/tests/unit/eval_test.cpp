#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "../oracles/wilcoxon_oracle.hpp"
#include "hyperaug/errors.hpp"
#include "hyperaug/eval.hpp"
#include "test_util.hpp"

using namespace hyperaug;

namespace {

EvaluationReport report_of(std::vector<ClassId> truth, std::vector<ClassId> pred, std::size_t classes,
                           std::size_t fold) {
  EvaluationReport r;
  r.meta.dataset = "toy";
  r.meta.variant = "without";
  r.meta.fold = fold;
  r.scores = score(truth, pred, classes);
  r.timings.train_s = static_cast<double>(fold + 1);
  return r;
}

}  // namespace

TEST(Score, HandWorkedExample) {
  const std::vector<ClassId> truth{1, 1, 2, 2}, pred{1, 2, 2, 2};
  const auto s = score(truth, pred, 2);
  EXPECT_DOUBLE_EQ(s.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(s.per_class[1], 1.0);
  EXPECT_DOUBLE_EQ(s.oa, 0.75);
  EXPECT_DOUBLE_EQ(s.aa, 0.75);
  EXPECT_EQ(s.at(1, 2), 1u);
  EXPECT_EQ(s.at(2, 1), 0u);
}

TEST(Score, AbsentClassExcludedFromAverage) {
  const std::vector<ClassId> truth{1, 1, 3}, pred{1, 2, 3};
  const auto s = score(truth, pred, 3);
  EXPECT_FALSE(s.present[1]);
  EXPECT_DOUBLE_EQ(s.aa, 0.75);
  EXPECT_NEAR(s.oa, 2.0 / 3.0, 1e-15);
}

TEST(Score, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 200, classes = 1 + rng() % 6;
    std::vector<ClassId> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<ClassId>(1 + rng() % classes);
      pred[i] = static_cast<ClassId>(1 + rng() % classes);
    }
    const auto s = score(truth, pred, classes);
    EXPECT_EQ(std::accumulate(s.confusion.begin(), s.confusion.end(), std::size_t{0}), n);
    EXPECT_GE(s.oa, 0.0);
    EXPECT_LE(s.oa, 1.0);
    EXPECT_GE(s.aa, 0.0);
    EXPECT_LE(s.aa, 1.0);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ClassId> t2, p2;
    for (std::size_t i : perm) {
      t2.push_back(truth[i]);
      p2.push_back(pred[i]);
    }
    const auto s2 = score(t2, p2, classes);
    EXPECT_EQ(s2.confusion, s.confusion);
    EXPECT_EQ(s2.oa, s.oa);
    EXPECT_EQ(s2.aa, s.aa);
  }
}

TEST(Score, Errors) {
  const std::vector<ClassId> a{1, 2}, b{1}, bad{1, 4};
  EXPECT_THROW(score(a, b, 2), DimError);
  EXPECT_THROW(score({}, {}, 2), DimError);
  EXPECT_THROW(score(a, bad, 3), ClassError);
}

TEST(MeanStdTest, SampleStatistics) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std, std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one{7};
  EXPECT_EQ(mean_std(one).std, 0.0);
}

TEST(Aggregate, PerClassOverPresentRuns) {
  std::vector<EvaluationReport> reports{report_of({1, 1, 2}, {1, 1, 2}, 3, 0),
                                        report_of({1, 1, 3}, {1, 2, 1}, 3, 1)};
  const auto a = aggregate(reports);
  EXPECT_EQ(a.runs, 2u);
  EXPECT_DOUBLE_EQ(a.per_class[0].mean, 0.75);
  EXPECT_DOUBLE_EQ(a.per_class[1].mean, 1.0);  // only run 0 has class 2
  EXPECT_EQ(a.per_class[1].std, 0.0);
  EXPECT_DOUBLE_EQ(a.per_class[2].mean, 0.0);
  EXPECT_DOUBLE_EQ(a.train_s.mean, 1.5);
  EXPECT_THROW(aggregate({}), DegenerateError);
  reports[1].meta.scenario = Scenario::Patched;
  EXPECT_THROW(aggregate(reports), ConfigError);
}

TEST(Wilcoxon, AllPositiveFive) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y(5, 0.0);
  const auto r = wilcoxon_two_tailed(x, y);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.w_plus, 15.0);
  EXPECT_DOUBLE_EQ(r.w_minus, 0.0);
  EXPECT_NEAR(r.p, 0.0625, 1e-12);
}

TEST(Wilcoxon, IdenticalSamplesAreDegenerate) {
  const std::vector<double> x{0.3, 0.5, 0.9, 0.1, 0.4, 0.8};
  const auto r = wilcoxon_two_tailed(x, x);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p, 1.0);
}

TEST(Wilcoxon, TooFewPairsAndMismatch) {
  const std::vector<double> x{1, 2, 3}, y{0, 0, 0}, z{1, 2};
  EXPECT_THROW(wilcoxon_two_tailed(x, y), DegenerateError);
  EXPECT_THROW(wilcoxon_two_tailed(x, z), DimError);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values force ties and zero differences.
      x[i] = static_cast<double>(rng() % 5);
      y[i] = static_cast<double>(rng() % 5);
    }
    const auto ref = oracle::wilcoxon_enumerate(x, y);
    const auto got = wilcoxon_exact(x, y);
    ASSERT_EQ(got.n, ref.n);
    EXPECT_NEAR(got.w_plus, ref.w_plus, 1e-12);
    EXPECT_NEAR(got.p, ref.p, 1e-12) << "trial " << t;
  }
}

TEST(Wilcoxon, SymmetricInArguments) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (std::size_t n : {6u, 10u, 20u, 40u}) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = normal(rng);
      y[i] = normal(rng) + 0.3;
    }
    const auto a = wilcoxon_two_tailed(x, y);
    const auto b = wilcoxon_two_tailed(y, x);
    EXPECT_NEAR(a.p, b.p, 1e-12);
    EXPECT_EQ(a.w_plus, b.w_minus);
    EXPECT_EQ(a.exact, n <= kWilcoxonExactLimit);
    EXPECT_GE(a.p, 0.0);
    EXPECT_LE(a.p, 1.0);
  }
}

TEST(Wilcoxon, NormalApproximationCloseAtTwelve) {
  // Continuity-corrected normal vs exact at n = 12 differs by up to 0.0137
  // near the centre of the distribution; the tail is tighter.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = normal(rng);
      y[i] = normal(rng) + 0.2;
    }
    const double exact = wilcoxon_exact(x, y).p;
    const double approx = wilcoxon_normal(x, y).p;
    EXPECT_NEAR(exact, approx, exact < 0.1 ? 0.005 : 0.014);
  }
}

TEST(Timing, SleepIsMeasured) {
  const double s = time_seconds([] { std::this_thread::sleep_for(std::chrono::milliseconds(50)); });
  EXPECT_NEAR(s, 0.050, 0.010);
  EXPECT_LT(time_seconds([] {}), 1e-3);
}

TEST(ReportFiles, JsonRoundTripAndTables) {
  auto r = report_of({1, 2, 2, 3}, {1, 2, 3, 3}, 3, 4);
  r.meta.seed = 77;
  r.meta.best_epoch = 12;
  testutil::TempDir dir("eval");
  save_report_json(dir / "r.json", r);
  const auto back = load_report_json(dir / "r.json");
  EXPECT_EQ(back.meta.dataset, "toy");
  EXPECT_EQ(back.meta.seed, 77u);
  EXPECT_EQ(back.meta.fold, 4u);
  EXPECT_EQ(back.meta.best_epoch, 12u);
  EXPECT_EQ(back.scores.confusion, r.scores.confusion);
  EXPECT_EQ(back.scores.oa, r.scores.oa);
  EXPECT_EQ(back.scores.per_class, r.scores.per_class);

  save_report_json(dir / "again.json", r);
  EXPECT_EQ(testutil::slurp(dir / "r.json"), testutil::slurp(dir / "again.json"));

  const std::vector<EvaluationReport> runs{report_of({1, 1}, {1, 2}, 2, 0)};
  const std::vector<AggregateReport> rows{aggregate(runs)};
  save_accuracy_table(dir / "t.csv", rows);
  const auto table = testutil::slurp(dir / "t.csv");
  EXPECT_NE(table.find("50.00"), std::string::npos);
  EXPECT_NE(table.find(",,"), std::string::npos);  // class 2 absent

  testutil::spit(dir / "broken.json", "{\"meta\": 3}");
  EXPECT_THROW(load_report_json(dir / "broken.json"), FormatError);
}
