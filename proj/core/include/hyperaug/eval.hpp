#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperaug/types.hpp"

namespace hyperaug {

struct Scores {
  std::size_t classes = 0;
  std::vector<std::size_t> confusion;  // row-major C x C, rows = truth
  std::vector<double> per_class;       // recall; 0 for absent classes
  std::vector<bool> present;           // class has at least one true sample
  double oa = 0.0;
  double aa = 0.0;

  std::size_t at(ClassId truth, ClassId predicted) const {
    return confusion[(truth - 1) * classes + (predicted - 1)];
  }
};

/// Confusion matrix, per-class recall, OA, and AA over the present classes.
Scores score(std::span<const ClassId> truth, std::span<const ClassId> predicted,
             std::size_t classes);

struct Timings {
  double offline_augment_s = 0.0;
  double train_s = 0.0;
  double per_sample_infer_ms = 0.0;
};

struct RunMetadata {
  std::string dataset;
  std::string variant;
  Scenario scenario = Scenario::Balanced;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t test_size = 0;
  std::size_t best_epoch = 0;
};

struct EvaluationReport {
  RunMetadata meta;
  Scores scores;
  Timings timings;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
  std::string dataset;
  std::string variant;
  Scenario scenario = Scenario::Balanced;
  std::size_t runs = 0;
  std::size_t classes = 0;
  // A class contributes only the runs whose test set contains it; a class
  // absent from every run has present = false and NaN statistics.
  std::vector<MeanStd> per_class;
  std::vector<bool> present;
  MeanStd oa, aa;
  MeanStd offline_augment_s, train_s, per_sample_infer_ms;
};

AggregateReport aggregate(std::span<const EvaluationReport> reports);

struct WilcoxonResult {
  double p = 1.0;
  double w_plus = 0.0;   // rank sum of positive differences
  double w_minus = 0.0;  // rank sum of negative differences
  std::size_t n = 0;     // nonzero differences
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

/// Two-tailed signed-rank test of paired samples. Zero differences are
/// dropped, tied magnitudes share their average rank. Exact null
/// distribution up to 12 nonzero differences, normal approximation with tie
/// and continuity correction above.
WilcoxonResult wilcoxon_two_tailed(std::span<const double> x, std::span<const double> y);

/// Branch-forcing variants; neither enforces the minimum sample size.
WilcoxonResult wilcoxon_exact(std::span<const double> x, std::span<const double> y);
WilcoxonResult wilcoxon_normal(std::span<const double> x, std::span<const double> y);

inline constexpr std::size_t kWilcoxonMinPairs = 5;
inline constexpr std::size_t kWilcoxonExactLimit = 12;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  void reset() { start_ = std::chrono::steady_clock::now(); }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Wall time of one call on the monotonic clock.
template <class F>
double time_seconds(F&& work) {
  Stopwatch watch;
  std::forward<F>(work)();
  return watch.seconds();
}

/// Full run report without timings, so reruns produce identical bytes.
void save_report_json(const std::filesystem::path& path, const EvaluationReport& report);
EvaluationReport load_report_json(const std::filesystem::path& path);
void save_aggregate_json(const std::filesystem::path& path, const AggregateReport& report);

/// One row per aggregate: dataset,scenario,variant,runs,class_1..class_C,OA,AA
/// in percent with two decimals; absent classes are empty cells.
void save_accuracy_table(const std::filesystem::path& path,
                         std::span<const AggregateReport> rows);

/// dataset,scenario,variant,fold,offline_augment_s,train_s,per_sample_infer_ms
void save_timings_csv(const std::filesystem::path& path,
                      std::span<const EvaluationReport> reports);

}  // namespace hyperaug
