#include "hyperaug/cnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"
#include "hyperaug/rng.hpp"

namespace hyperaug {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

constexpr std::string_view kCheckpointMagic = "HCNN";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr Index kEvalChunk = 512;

struct Activations {
  MatrixXd patches;  // (B*L) x K, row s*L + t holds x[s, t .. t+K-1]
  MatrixXd xhat;     // (B*L) x n, normalized conv output
  RowVectorXd mean;
  RowVectorXd var;
  RowVectorXd inv_std;
  MatrixXd bn_out;  // pre-ReLU
  std::vector<Index> pool_src;  // (B*Lp*n) source row in bn_out per pooled cell
  MatrixXd flat;    // B x (Lp*n), index u*n + k
  MatrixXd h1, a1, h2, a2, logits, proba;
};

MatrixXd relu(const MatrixXd& m) { return m.cwiseMax(0.0); }

MatrixXd relu_mask(const MatrixXd& pre, const MatrixXd& grad) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

Activations run_forward(const CNNModel& model, const MatrixXd& x, Mode mode) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  const Index batch = x.rows();
  const auto bands = static_cast<Index>(cfg.bands);
  const auto K = static_cast<Index>(cfg.kernel_length);
  const auto L = static_cast<Index>(cfg.conv_length());
  const auto Lp = static_cast<Index>(cfg.pooled_length());
  const auto n = static_cast<Index>(cfg.kernels);
  const auto pool = static_cast<Index>(cfg.pool);
  if (x.cols() != bands)
    throw DimError("batch has " + std::to_string(x.cols()) + " bands, model expects " +
                   std::to_string(bands));
  if (batch == 0) throw DimError("empty batch");

  Activations a;
  a.patches.resize(batch * L, K);
  for (Index s = 0; s < batch; ++s)
    for (Index t = 0; t < L; ++t)
      for (Index i = 0; i < K; ++i) a.patches(s * L + t, i) = x(s, t + i);

  MatrixXd conv = a.patches * p.conv_w.transpose();
  conv.rowwise() += p.conv_b.row(0);

  if (mode == Mode::Training) {
    const double rows = static_cast<double>(conv.rows());
    a.mean = conv.colwise().sum() / rows;
    MatrixXd centered = conv.rowwise() - a.mean;
    a.var = centered.array().square().colwise().sum() / rows;
    a.inv_std = (a.var.array() + cfg.bn_epsilon).rsqrt();
    a.xhat = centered.array().rowwise() * a.inv_std.array();
  } else {
    a.mean = model.bn_running_mean.row(0);
    a.var = model.bn_running_var.row(0);
    a.inv_std = (a.var.array() + cfg.bn_epsilon).rsqrt();
    a.xhat = (conv.rowwise() - a.mean).array().rowwise() * a.inv_std.array();
  }
  a.bn_out = (a.xhat.array().rowwise() * p.bn_gamma.row(0).array()).matrix();
  a.bn_out.rowwise() += p.bn_beta.row(0);

  a.flat.resize(batch, Lp * n);
  a.pool_src.resize(static_cast<std::size_t>(batch * Lp * n));
  for (Index s = 0; s < batch; ++s) {
    for (Index u = 0; u < Lp; ++u) {
      for (Index k = 0; k < n; ++k) {
        Index best = s * L + u * pool;
        double value = std::max(a.bn_out(best, k), 0.0);
        for (Index j = 1; j < pool; ++j) {
          const Index row = s * L + u * pool + j;
          const double v = std::max(a.bn_out(row, k), 0.0);
          if (v > value) {
            value = v;
            best = row;
          }
        }
        a.flat(s, u * n + k) = value;
        a.pool_src[static_cast<std::size_t>((s * Lp + u) * n + k)] = best;
      }
    }
  }

  a.h1 = a.flat * p.fc1_w;
  a.h1.rowwise() += p.fc1_b.row(0);
  a.a1 = relu(a.h1);
  a.h2 = a.a1 * p.fc2_w;
  a.h2.rowwise() += p.fc2_b.row(0);
  a.a2 = relu(a.h2);
  a.logits = a.a2 * p.out_w;
  a.logits.rowwise() += p.out_b.row(0);

  a.proba.resize(a.logits.rows(), a.logits.cols());
  for (Index r = 0; r < a.logits.rows(); ++r) {
    const double top = a.logits.row(r).maxCoeff();
    const RowVectorXd e = (a.logits.row(r).array() - top).exp();
    a.proba.row(r) = e / e.sum();
  }
  if (!a.proba.allFinite()) throw NumericError("non-finite activation in forward pass");
  return a;
}

double cross_entropy(const MatrixXd& logits, std::span<const ClassId> labels) {
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const double lse = top + std::log((logits.row(r).array() - top).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)] - 1);
  }
  const double loss = total / static_cast<double>(logits.rows());
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

void check_labels(const CNNModel& model, const MatrixXd& batch,
                  std::span<const ClassId> labels) {
  if (labels.size() != static_cast<std::size_t>(batch.rows()))
    throw DimError("label count does not match batch size");
  for (ClassId l : labels)
    if (l < 1 || l > model.config.classes)
      throw ClassError("label " + std::to_string(l) + " outside 1.." +
                       std::to_string(model.config.classes));
}

MatrixXd he_normal(Index rows, Index cols, double fan_in, Rng& rng, double gain = 2.0) {
  std::normal_distribution<double> normal(0.0, std::sqrt(gain / fan_in));
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

std::vector<ClassId> labels_of(std::span<const Spectrum> samples, std::size_t classes) {
  std::vector<ClassId> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw ClassError("training sample without label");
    if (*s.label < 1 || *s.label > classes)
      throw ClassError("label " + std::to_string(*s.label) + " outside 1.." +
                       std::to_string(classes));
    out.push_back(*s.label);
  }
  return out;
}

}  // namespace

void CNNConfig::validate() const {
  if (bands == 0 || classes == 0 || kernels == 0 || kernel_length == 0 || pool == 0 ||
      dense1 == 0 || dense2 == 0 || batch_size == 0 || max_epochs == 0)
    throw ConfigError("CNN counts must be positive");
  if (bands < kernel_length)
    throw ConfigError("band count " + std::to_string(bands) + " is shorter than the kernel");
  if (pooled_length() == 0) throw ConfigError("band count too small for pooling");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(learning_rate > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) ||
      !(adam_epsilon > 0) || !(bn_epsilon > 0) || !(bn_momentum >= 0 && bn_momentum <= 1))
    throw ConfigError("invalid optimizer or batch-norm constants");
}

CNNParams CNNParams::zeros_like() const {
  CNNParams out = *this;
  CNNParams::zip([](MatrixXd& m) { m.setZero(); }, out);
  return out;
}

std::size_t CNNParams::parameter_count() const {
  std::size_t count = 0;
  CNNParams::zip([&](const MatrixXd& m) { count += static_cast<std::size_t>(m.size()); }, *this);
  return count;
}

CNNModel init_model(const CNNConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 0, Stage::Init));
  const auto n = static_cast<Index>(config.kernels);
  const auto K = static_cast<Index>(config.kernel_length);
  const auto F = static_cast<Index>(config.flatten_size());
  const auto d1 = static_cast<Index>(config.dense1);
  const auto d2 = static_cast<Index>(config.dense2);
  const auto C = static_cast<Index>(config.classes);

  CNNModel model;
  model.config = config;
  auto& p = model.params;
  p.conv_w = he_normal(n, K, static_cast<double>(K), rng);
  p.conv_b = MatrixXd::Zero(1, n);
  p.bn_gamma = MatrixXd::Ones(1, n);
  p.bn_beta = MatrixXd::Zero(1, n);
  p.fc1_w = he_normal(F, d1, static_cast<double>(F), rng);
  p.fc1_b = MatrixXd::Zero(1, d1);
  p.fc2_w = he_normal(d1, d2, static_cast<double>(d1), rng);
  p.fc2_b = MatrixXd::Zero(1, d2);
  p.out_w = he_normal(d2, C, static_cast<double>(d2), rng, 1.0);
  p.out_b = MatrixXd::Zero(1, C);
  model.bn_running_mean = MatrixXd::Zero(1, n);
  model.bn_running_var = MatrixXd::Ones(1, n);
  model.adam_m = p.zeros_like();
  model.adam_v = p.zeros_like();
  return model;
}

MatrixXd to_batch(std::span<const Spectrum> spectra) {
  if (spectra.empty()) return MatrixXd(0, 0);
  const std::size_t b = spectra.front().size();
  MatrixXd m(static_cast<Index>(spectra.size()), static_cast<Index>(b));
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    if (spectra[i].size() != b) throw DimError("spectra differ in band count");
    for (std::size_t j = 0; j < b; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = spectra[i].bands[j];
  }
  return m;
}

MatrixXd forward(const CNNModel& model, const MatrixXd& batch, Mode mode) {
  return run_forward(model, batch, mode).proba;
}

double batch_loss(const CNNModel& model, const MatrixXd& batch,
                  std::span<const ClassId> labels) {
  check_labels(model, batch, labels);
  return cross_entropy(run_forward(model, batch, Mode::Training).logits, labels);
}

LossGradients loss_and_gradients(const CNNModel& model, const MatrixXd& batch,
                                 std::span<const ClassId> labels) {
  check_labels(model, batch, labels);
  const auto& cfg = model.config;
  const auto& p = model.params;
  const Activations a = run_forward(model, batch, Mode::Training);

  LossGradients out;
  out.loss = cross_entropy(a.logits, labels);
  out.batch_mean = a.mean;
  out.batch_var = a.var;
  auto& g = out.grads;

  const Index B = batch.rows();
  const auto L = static_cast<Index>(cfg.conv_length());
  const auto Lp = static_cast<Index>(cfg.pooled_length());
  const auto n = static_cast<Index>(cfg.kernels);

  MatrixXd dlogits = a.proba;
  for (Index r = 0; r < B; ++r) dlogits(r, labels[static_cast<std::size_t>(r)] - 1) -= 1.0;
  dlogits /= static_cast<double>(B);

  g.out_w = a.a2.transpose() * dlogits;
  g.out_b = dlogits.colwise().sum();
  const MatrixXd dh2 = relu_mask(a.h2, dlogits * p.out_w.transpose());
  g.fc2_w = a.a1.transpose() * dh2;
  g.fc2_b = dh2.colwise().sum();
  const MatrixXd dh1 = relu_mask(a.h1, dh2 * p.fc2_w.transpose());
  g.fc1_w = a.flat.transpose() * dh1;
  g.fc1_b = dh1.colwise().sum();
  const MatrixXd dflat = dh1 * p.fc1_w.transpose();

  // Max-pool routes each pooled gradient to its source; ReLU gates it.
  MatrixXd dbn = MatrixXd::Zero(B * L, n);
  for (Index s = 0; s < B; ++s)
    for (Index u = 0; u < Lp; ++u)
      for (Index k = 0; k < n; ++k) {
        const Index src = a.pool_src[static_cast<std::size_t>((s * Lp + u) * n + k)];
        if (a.bn_out(src, k) > 0.0) dbn(src, k) += dflat(s, u * n + k);
      }

  g.bn_gamma = (dbn.array() * a.xhat.array()).colwise().sum();
  g.bn_beta = dbn.colwise().sum();

  const double M = static_cast<double>(B * L);
  const MatrixXd dxhat = dbn.array().rowwise() * p.bn_gamma.row(0).array();
  const RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const RowVectorXd sum_dxhat_xhat = (dxhat.array() * a.xhat.array()).colwise().sum();
  MatrixXd dconv = (M * dxhat).rowwise() - sum_dxhat;
  dconv -= (a.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  dconv = dconv.array().rowwise() * (a.inv_std.array() / M);

  g.conv_w = dconv.transpose() * a.patches;
  g.conv_b = dconv.colwise().sum();
  return out;
}

void adam_step(CNNModel& model, const CNNParams& grads) {
  const auto& cfg = model.config;
  ++model.step;
  const double t = static_cast<double>(model.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  bool finite = true;
  CNNParams::zip(
      [&](MatrixXd& w, MatrixXd& m, MatrixXd& v, const MatrixXd& g) {
        if (g.rows() != w.rows() || g.cols() != w.cols())
          throw DimError("gradient shape does not match parameter shape");
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
        w.array() -= cfg.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + cfg.adam_epsilon);
        finite = finite && w.allFinite();
      },
      model.params, model.adam_m, model.adam_v, grads);
  if (!finite) throw NumericError("non-finite parameter after ADAM step");
}

void update_running_stats(CNNModel& model, const LossGradients& step_result,
                          std::size_t rows_per_channel) {
  const double m = model.config.bn_momentum;
  const double rows = static_cast<double>(rows_per_channel);
  const double unbias = rows > 1 ? rows / (rows - 1) : 1.0;
  model.bn_running_mean = (1 - m) * model.bn_running_mean + m * step_result.batch_mean;
  model.bn_running_var = (1 - m) * model.bn_running_var + (m * unbias) * step_result.batch_var;
}

ClassId argmax_class(std::span<const double> proba) {
  if (proba.empty()) throw DimError("empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < proba.size(); ++i)
    if (proba[i] > proba[best]) best = i;
  return static_cast<ClassId>(best + 1);
}

std::vector<double> predict_proba(const CNNModel& model, std::span<const double> spectrum) {
  const Eigen::Map<const Eigen::RowVectorXd> row(spectrum.data(),
                                                  static_cast<Index>(spectrum.size()));
  const MatrixXd proba = forward(model, MatrixXd(row), Mode::Inference);
  return {proba.data(), proba.data() + proba.size()};
}

ClassId predict(const CNNModel& model, std::span<const double> spectrum) {
  return argmax_class(predict_proba(model, spectrum));
}

double accuracy(const CNNModel& model, std::span<const Spectrum> samples) {
  if (samples.empty()) return 0.0;
  const auto labels = labels_of(samples, model.config.classes);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
    const auto chunk = samples.subspan(start, std::min<std::size_t>(kEvalChunk, samples.size() - start));
    const MatrixXd proba = forward(model, to_batch(chunk), Mode::Inference);
    for (Index r = 0; r < proba.rows(); ++r) {
      const RowVectorXd row = proba.row(r);
      if (argmax_class(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) ==
          labels[start + static_cast<std::size_t>(r)])
        ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(CNNModel model, std::span<const Spectrum> train_set,
                  std::span<const Spectrum> val_set) {
  const auto& cfg = model.config;
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw DegenerateError("training and validation sets must be non-empty");
  const MatrixXd x = to_batch(train_set);
  if (static_cast<std::size_t>(x.cols()) != cfg.bands)
    throw DimError("training spectra do not match the configured band count");
  const auto y = labels_of(train_set, cfg.classes);
  labels_of(val_set, cfg.classes);

  TrainResult result;
  result.model = model;
  double best = -1.0;
  std::size_t stale = 0;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0, Stage::Shuffle, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      MatrixXd xb(static_cast<Index>(count), x.cols());
      std::vector<ClassId> yb(count);
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<Index>(i)) = x.row(static_cast<Index>(order[start + i]));
        yb[i] = y[order[start + i]];
      }
      const auto step = loss_and_gradients(model, xb, yb);
      update_running_stats(model, step, count * cfg.conv_length());
      adam_step(model, step.grads);
      loss_sum += step.loss * static_cast<double>(count);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.val_accuracy = accuracy(model, val_set);
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(record);

    if (record.val_accuracy > best) {
      best = record.val_accuracy;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  result.best_val_accuracy = best;
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const CNNModel& model) {
  const auto& c = model.config;
  detail::ByteWriter out;
  out.raw(kCheckpointMagic);
  out.u32(kCheckpointVersion);
  for (std::size_t v : {c.bands, c.classes, c.kernels, c.kernel_length, c.pool, c.dense1,
                        c.dense2, c.batch_size, c.patience, c.max_epochs})
    out.u64(v);
  out.u64(c.seed);
  for (double v : {c.learning_rate, c.beta1, c.beta2, c.adam_epsilon, c.bn_epsilon,
                   c.bn_momentum})
    out.f64(v);
  out.u64(model.step);
  auto tensor = [&](const MatrixXd& m) {
    for (Index i = 0; i < m.size(); ++i) out.f64(m.data()[i]);
  };
  CNNParams::zip(tensor, model.params);
  tensor(model.bn_running_mean);
  tensor(model.bn_running_var);
  CNNParams::zip(tensor, model.adam_m);
  CNNParams::zip(tensor, model.adam_v);
  detail::write_file(path, out.bytes());
}

CNNModel load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes);
  if (in.remaining() < kCheckpointMagic.size() || in.raw(kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError(path.string() + ": not a CNN checkpoint");
  if (const auto version = in.u32(); version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  CNNConfig c;
  for (std::size_t* f : {&c.bands, &c.classes, &c.kernels, &c.kernel_length, &c.pool, &c.dense1,
                         &c.dense2, &c.batch_size, &c.patience, &c.max_epochs})
    *f = static_cast<std::size_t>(in.u64());
  c.seed = in.u64();
  for (double* f : {&c.learning_rate, &c.beta1, &c.beta2, &c.adam_epsilon, &c.bn_epsilon,
                    &c.bn_momentum})
    *f = in.f64();
  c.validate();
  CNNModel model = init_model(c);
  model.step = in.u64();
  auto tensor = [&](MatrixXd& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = in.f64();
  };
  CNNParams::zip(tensor, model.params);
  tensor(model.bn_running_mean);
  tensor(model.bn_running_var);
  CNNParams::zip(tensor, model.adam_m);
  CNNParams::zip(tensor, model.adam_v);
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes in checkpoint");
  return model;
}

}  // namespace hyperaug
