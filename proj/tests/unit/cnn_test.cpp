#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles/numeric_oracle.hpp"
#include "hyperaug/cnn.hpp"
#include "hyperaug/errors.hpp"
#include "test_util.hpp"

using namespace hyperaug;

namespace {

CNNConfig micro_config() {
  CNNConfig c;
  c.bands = 12;
  c.classes = 2;
  c.kernels = 3;
  c.dense1 = 10;
  c.dense2 = 6;
  c.seed = 4;
  return c;
}

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd m(rows, cols);
  for (auto& v : m.reshaped()) v = u(rng);
  return m;
}

/// Two bumps at different band positions, easy to separate.
std::vector<Spectrum> bump_set(std::size_t per_class, std::size_t bands, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 0.05);
  std::vector<Spectrum> out;
  for (ClassId c = 1; c <= 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Spectrum s;
      for (std::size_t j = 0; j < bands; ++j) {
        const double centre = c == 1 ? 0.25 * bands : 0.75 * bands;
        s.bands.push_back(std::exp(-std::pow((j - centre) / 2.0, 2)) + noise(rng));
      }
      s.label = c;
      out.push_back(s);
    }
  return out;
}

}  // namespace

TEST(CnnConfig, DerivedSizesAndValidation) {
  CNNConfig c;
  c.bands = 103;
  c.classes = 9;
  EXPECT_EQ(c.conv_length(), 99u);
  EXPECT_EQ(c.pooled_length(), 49u);
  EXPECT_EQ(c.flatten_size(), 9800u);
  c.validate();
  c.bands = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.bands = 103;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CnnInit, ShapesAndScale) {
  CNNConfig c;
  c.bands = 103;
  c.classes = 9;
  const auto m = init_model(c);
  const auto& p = m.params;
  EXPECT_EQ(p.conv_w.rows(), 200);
  EXPECT_EQ(p.conv_w.cols(), 5);
  EXPECT_EQ(p.fc1_w.rows(), 9800);
  EXPECT_EQ(p.fc1_w.cols(), 512);
  EXPECT_EQ(p.out_w.cols(), 9);
  const std::size_t expected = 200 * 5 + 200 * 3 + 9800 * 512 + 512 + 512 * 128 + 128 + 128 * 9 + 9;
  EXPECT_EQ(p.parameter_count(), expected);
  const double sd = std::sqrt(p.fc1_w.squaredNorm() / static_cast<double>(p.fc1_w.size()));
  EXPECT_NEAR(sd, std::sqrt(2.0 / 9800), 0.01 * std::sqrt(2.0 / 9800));
  EXPECT_EQ(p.bn_gamma, Eigen::MatrixXd::Ones(1, 200));
  EXPECT_EQ(m.bn_running_var, Eigen::MatrixXd::Ones(1, 200));
  EXPECT_EQ(init_model(c).params.fc2_w, p.fc2_w);
}

TEST(CnnForward, ProbabilitiesAndBatchIndependenceAtInference) {
  const auto m = init_model(micro_config());
  const auto x = random_batch(7, 12, 1);
  const auto p = forward(m, x, Mode::Inference);
  ASSERT_EQ(p.rows(), 7);
  ASSERT_EQ(p.cols(), 2);
  for (Eigen::Index r = 0; r < 7; ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    const auto single = forward(m, x.row(r), Mode::Inference);
    EXPECT_LT((single - p.row(r)).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_THROW(forward(m, random_batch(2, 11, 1), Mode::Inference), DimError);
}

TEST(CnnForward, TrainingModeUsesBatchStatistics) {
  const auto m = init_model(micro_config());
  const auto x = random_batch(5, 12, 2);
  const auto whole = forward(m, x, Mode::Training);
  const auto part = forward(m, x.topRows(3), Mode::Training);
  EXPECT_GT((whole.topRows(3) - part).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CnnGradient, MatchesCentralDifferences) {
  auto m = init_model(micro_config());
  const auto x = random_batch(6, 12, 3);
  const std::vector<ClassId> y{1, 2, 2, 1, 1, 2};
  // Perturb BN and biases away from their initial values so every gradient is exercised.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 0.3);
  for (auto* t : {&m.params.bn_gamma, &m.params.bn_beta, &m.params.fc1_b, &m.params.fc2_b,
                  &m.params.out_b, &m.params.conv_b})
    for (auto& v : t->reshaped()) v += n(rng);

  const auto g = loss_and_gradients(m, x, y);
  EXPECT_NEAR(g.loss, batch_loss(m, x, y), 1e-14);
  double worst = 0;
  CNNParams::zip(
      [&](Eigen::MatrixXd& w, const Eigen::MatrixXd& grad) {
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          const double numeric = oracle::central_difference(
              w.data()[i], 1e-5, [&] { return batch_loss(m, x, y); });
          const double analytic = grad.data()[i];
          const double rel = std::abs(analytic - numeric) /
                             std::max({std::abs(analytic), std::abs(numeric), 1e-6});
          worst = std::max(worst, rel);
        }
      },
      m.params, g.grads);
  EXPECT_LT(worst, 1e-4);
}

TEST(CnnGradient, LabelValidation) {
  const auto m = init_model(micro_config());
  const auto x = random_batch(2, 12, 3);
  EXPECT_THROW(loss_and_gradients(m, x, std::vector<ClassId>{1, 3}), ClassError);
  EXPECT_THROW(loss_and_gradients(m, x, std::vector<ClassId>{0, 1}), ClassError);
  EXPECT_THROW(loss_and_gradients(m, x, std::vector<ClassId>{1}), DimError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto m = init_model(micro_config());
  const auto before = m.params;
  auto g = m.params.zeros_like();
  g.out_b(0, 0) = 0.3;
  g.out_b(0, 1) = -2.0;
  adam_step(m, g);
  EXPECT_EQ(m.step, 1u);
  const double lr = m.config.learning_rate;
  // Bias correction makes the first update lr * g / (|g| + eps).
  EXPECT_NEAR(m.params.out_b(0, 0) - before.out_b(0, 0), -lr * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(m.params.out_b(0, 1) - before.out_b(0, 1), lr * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(m.params.fc1_w, before.fc1_w);
  EXPECT_NEAR(m.adam_m.out_b(0, 0), 0.1 * 0.3, 1e-15);
  EXPECT_NEAR(m.adam_v.out_b(0, 1), 0.001 * 4.0, 1e-15);
}

TEST(Adam, RejectsNonFiniteParameters) {
  auto m = init_model(micro_config());
  auto g = m.params.zeros_like();
  g.conv_w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(m, g), NumericError);
}

TEST(RunningStats, ExponentialAverageWithUnbiasedVariance) {
  auto m = init_model(micro_config());
  LossGradients s;
  s.batch_mean = Eigen::RowVectorXd::Constant(3, 2.0);
  s.batch_var = Eigen::RowVectorXd::Constant(3, 4.0);
  update_running_stats(m, s, 5);
  EXPECT_NEAR(m.bn_running_mean(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(m.bn_running_var(0, 1), 0.9 + 0.1 * 4.0 * 5.0 / 4.0, 1e-15);
}

TEST(ArgmaxClass, LowestIdOnTie) {
  EXPECT_EQ(argmax_class(std::vector<double>{0.2, 0.4, 0.4}), 2);
  EXPECT_EQ(argmax_class(std::vector<double>{0.5, 0.5}), 1);
  EXPECT_THROW(argmax_class(std::vector<double>{}), DimError);
}

TEST(Training, LearnsTwoBumpsAndStopsOnPlateau) {
  auto c = micro_config();
  c.bands = 16;
  c.kernels = 8;
  c.dense1 = 32;
  c.dense2 = 16;
  c.learning_rate = 1e-2;
  c.batch_size = 16;
  c.patience = 5;
  c.max_epochs = 300;
  const auto train_set = bump_set(30, 16, 1);
  const auto val_set = bump_set(10, 16, 2);
  const auto r = train(init_model(c), train_set, val_set);
  EXPECT_DOUBLE_EQ(r.best_val_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(accuracy(r.model, val_set), r.best_val_accuracy);
  ASSERT_LT(r.history.size(), c.max_epochs);
  // Stopping: exactly `patience` epochs after the last strict improvement.
  EXPECT_EQ(r.history.size(), r.best_epoch + 1 + c.patience);
  for (std::size_t e = r.best_epoch + 1; e < r.history.size(); ++e)
    EXPECT_LE(r.history[e].val_accuracy, r.best_val_accuracy);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);

  const auto again = train(init_model(c), train_set, val_set);
  EXPECT_EQ(again.model.params.fc1_w, r.model.params.fc1_w);
  EXPECT_EQ(again.history.size(), r.history.size());
}

TEST(Training, RejectsEmptyAndMislabeledSets) {
  const auto m = init_model(micro_config());
  const auto xs = bump_set(3, 12, 1);
  EXPECT_THROW(train(m, {}, xs), DegenerateError);
  auto bad = xs;
  bad[0].label.reset();
  EXPECT_THROW(train(m, bad, xs), ClassError);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto m = init_model(micro_config());
  const auto x = random_batch(4, 12, 5);
  const std::vector<ClassId> y{1, 2, 1, 2};
  const auto g = loss_and_gradients(m, x, y);
  adam_step(m, g.grads);
  update_running_stats(m, g, 32);
  testutil::TempDir dir("ckpt");
  save_checkpoint(dir / "m.ckpt", m);
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.step, m.step);
  EXPECT_EQ(back.config.seed, m.config.seed);
  CNNParams::zip([](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { EXPECT_EQ(a, b); },
                 back.params, m.params);
  CNNParams::zip([](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { EXPECT_EQ(a, b); },
                 back.adam_v, m.adam_v);
  EXPECT_EQ(back.bn_running_var, m.bn_running_var);
  EXPECT_EQ(forward(back, x, Mode::Inference), forward(m, x, Mode::Inference));

  const auto bytes = testutil::slurp(dir / "m.ckpt");
  testutil::spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), TruncatedError);
  testutil::spit(dir / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), FormatError);
  testutil::spit(dir / "bad.ckpt", "NOPE" + bytes.substr(4));
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), FormatError);
}
