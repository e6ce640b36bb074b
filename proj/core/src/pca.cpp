#include "hyperaug/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "hyperaug/errors.hpp"

namespace hyperaug {

namespace {

constexpr std::string_view kPcaMagic = "HPCA1";

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

void check_dims(const PCAModel& model, std::size_t n, const char* what) {
  if (n != model.bands())
    throw DimError(std::string(what) + " has length " + std::to_string(n) +
                   ", model has " + std::to_string(model.bands()) + " bands");
}

}  // namespace

SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, double tolerance, int max_sweeps) {
  if (a.rows() != a.cols()) throw DimError("jacobi_eigen needs a square matrix");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= tolerance * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    Eigen::VectorXd col = v.col(src);
    Eigen::Index largest = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(col(i)) > std::abs(col(largest))) largest = i;
    if (col(largest) < 0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

Eigen::MatrixXd covariance(std::span<const Spectrum> samples,
                           const Eigen::VectorXd& mean) {
  const auto b = mean.size();
  Eigen::MatrixXd centered(b, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != static_cast<std::size_t>(b))
      throw DimError("spectrum " + std::to_string(i) + " has wrong band count");
    centered.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(samples[i].bands.data(), b) - mean;
  }
  Eigen::MatrixXd c = centered * centered.transpose() / static_cast<double>(samples.size());
  return (c + c.transpose()) * 0.5;
}

PCAModel fit_pca(std::span<const Spectrum> samples) {
  if (samples.size() < 2)
    throw DegenerateError("PCA needs at least 2 samples, got " + std::to_string(samples.size()));
  const auto b = static_cast<Eigen::Index>(samples.front().size());
  if (b == 0) throw DimError("PCA on zero-band spectra");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(b);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != static_cast<std::size_t>(b))
      throw DimError("spectrum " + std::to_string(i) + " has " +
                     std::to_string(samples[i].size()) + " bands, expected " +
                     std::to_string(b));
    mean += Eigen::Map<const Eigen::VectorXd>(samples[i].bands.data(), b);
  }
  mean /= static_cast<double>(samples.size());

  auto eig = jacobi_eigen(covariance(samples, mean));
  const double floor = -1e-9 * std::max(1.0, eig.values(0));
  for (Eigen::Index k = 0; k < b; ++k) {
    if (eig.values(k) < floor)
      throw NumericError("covariance eigenvalue " + std::to_string(eig.values(k)) +
                         " is significantly negative");
    if (eig.values(k) < 0) eig.values(k) = 0.0;
  }

  PCAModel model;
  model.mean = std::move(mean);
  model.eigenvalues = std::move(eig.values);
  model.basis = std::move(eig.vectors);
  model.sample_count = samples.size();
  return model;
}

Eigen::VectorXd project(const PCAModel& model, std::span<const double> x) {
  check_dims(model, x.size(), "spectrum");
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return model.basis.transpose() * (v - model.mean);
}

std::vector<double> backproject(const PCAModel& model, const Eigen::VectorXd& coords) {
  check_dims(model, static_cast<std::size_t>(coords.size()), "coordinate vector");
  const Eigen::VectorXd x = model.basis * coords + model.mean;
  return {x.data(), x.data() + x.size()};
}

ReconstructionError reconstruction_error(const PCAModel& model,
                                         std::span<const double> x,
                                         std::size_t retained) {
  check_dims(model, x.size(), "spectrum");
  if (retained < 1 || retained > model.bands())
    throw DimError("retained component count must lie in [1, " +
                   std::to_string(model.bands()) + "]");
  const auto k = static_cast<Eigen::Index>(retained);
  const Eigen::VectorXd coords = project(model, x);
  const Eigen::VectorXd restored =
      model.basis.leftCols(k) * coords.head(k) + model.mean;
  ReconstructionError err;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - restored(static_cast<Eigen::Index>(i));
    err.signed_sum += d;
    err.squared += d * d;
  }
  return err;
}

void save_pca(const std::filesystem::path& path, const PCAModel& model) {
  detail::ByteWriter out;
  out.raw(std::string(kPcaMagic) + " " + std::to_string(model.bands()) + " " +
          std::to_string(model.sample_count) + "\n");
  for (double v : model.mean) out.f64(v);
  for (double v : model.eigenvalues) out.f64(v);
  for (Eigen::Index j = 0; j < model.basis.cols(); ++j)
    for (Eigen::Index i = 0; i < model.basis.rows(); ++i) out.f64(model.basis(i, j));
  detail::write_file(path, out.bytes());
}

PCAModel load_pca(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const auto newline = std::find(bytes.begin(), bytes.end(), '\n');
  if (newline == bytes.end()) throw FormatError(path.string() + ": missing PCA header");
  std::istringstream header(std::string(bytes.begin(), newline));
  std::string magic;
  std::size_t b = 0, n = 0;
  if (!(header >> magic >> b >> n) || magic != kPcaMagic || b == 0)
    throw FormatError(path.string() + ": bad PCA header");
  detail::ByteReader reader(bytes, static_cast<std::size_t>(newline - bytes.begin()) + 1);
  if (reader.remaining() != (2 * b + b * b) * sizeof(double))
    throw TruncatedError(path.string() + ": PCA payload size mismatch");
  PCAModel model;
  const auto bi = static_cast<Eigen::Index>(b);
  model.sample_count = n;
  model.mean.resize(bi);
  model.eigenvalues.resize(bi);
  model.basis.resize(bi, bi);
  for (auto& v : model.mean) v = reader.f64();
  for (auto& v : model.eigenvalues) v = reader.f64();
  for (Eigen::Index j = 0; j < bi; ++j)
    for (Eigen::Index i = 0; i < bi; ++i) model.basis(i, j) = reader.f64();
  return model;
}

}  // namespace hyperaug
