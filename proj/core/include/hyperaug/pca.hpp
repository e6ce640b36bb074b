#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "hyperaug/types.hpp"

namespace hyperaug {

/// Principal components of a training set. Columns of `basis` are PC_1..PC_b,
/// ordered by non-increasing eigenvalue; each column's largest-magnitude entry
/// is non-negative (first such entry on a tie).
struct PCAModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd basis;
  std::size_t sample_count = 0;

  std::size_t bands() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

struct SymmetricEigen {
  Eigen::VectorXd values;   // non-increasing
  Eigen::MatrixXd vectors;  // orthonormal columns
  int sweeps = 0;
};

/// Cyclic Jacobi rotations. Stops once the off-diagonal Frobenius norm drops
/// below `tolerance` times the Frobenius norm of the input, or after
/// `max_sweeps` sweeps. Output is sorted and sign-normalized.
SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, double tolerance = 1e-12,
                            int max_sweeps = 100);

/// Population covariance (1/N) D D^T of the centered samples.
Eigen::MatrixXd covariance(std::span<const Spectrum> samples,
                           const Eigen::VectorXd& mean);

PCAModel fit_pca(std::span<const Spectrum> samples);

/// Phi^T (x - mean).
Eigen::VectorXd project(const PCAModel& model, std::span<const double> x);
/// Phi * coords + mean.
std::vector<double> backproject(const PCAModel& model, const Eigen::VectorXd& coords);

struct ReconstructionError {
  double signed_sum = 0.0;  // sum_i (t_i - t''_i)
  double squared = 0.0;     // sum_i (t_i - t''_i)^2
};

/// Reconstructs x from its first `retained` components only.
ReconstructionError reconstruction_error(const PCAModel& model,
                                         std::span<const double> x,
                                         std::size_t retained);

void save_pca(const std::filesystem::path& path, const PCAModel& model);
PCAModel load_pca(const std::filesystem::path& path);

}  // namespace hyperaug
