#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperaug/augment.hpp"
#include "hyperaug/cnn.hpp"
#include "hyperaug/eval.hpp"
#include "hyperaug/hsio.hpp"
#include "hyperaug/splits.hpp"
#include "hyperaug/tta.hpp"

namespace hyperaug {

enum class Variant { Without, Noise, Pca, NoiseOn, PcaOn, PcaPcaOn };

/// "without", "noise", "pca", "noise-on", "pca-on", "pca/pca-on".
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
/// Same as to_string with '/' replaced, usable as a directory name.
std::string variant_slug(Variant v);

std::optional<AugmentMethod> offline_method(Variant v);
std::optional<AugmentMethod> online_method(Variant v);

struct ExperimentConfig {
  std::string dataset = "dataset";
  std::filesystem::path cube;
  std::filesystem::path labels;
  std::optional<SyntheticParams> synthetic;  // used when no cube is given

  ScenarioParams split;
  std::size_t runs = 1;
  std::vector<Variant> variants{Variant::Without};

  double alpha_min = 0.9;
  double alpha_max = 1.1;
  std::vector<std::size_t> scaled_components{0};
  double noise_scale = 0.25;
  std::size_t tta_samples = 4;

  CNNConfig cnn;  // bands, classes and seed are filled in per run
  std::filesystem::path output;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  AugmentConfig augment_config(AugmentMethod method) const;
  void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Relative paths are taken
/// relative to base_dir.
ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct Dataset {
  std::string name;
  HSICube cube;
  LabelMap labels;
};

Dataset load_dataset(const ExperimentConfig& config);

using Logger = std::function<void(std::string_view)>;

struct VariantRun {
  EvaluationReport report;
  std::vector<Spectrum> test;
  std::vector<TTAResult> predictions;
  TrainResult training;
  std::size_t enlarged_train_size = 0;
};

/// All requested variants on one split. Variants that share an offline
/// method share one trained network, and one PCA model serves both offline
/// and online use.
std::vector<VariantRun> run_split(const Dataset& data, const SplitSet& split,
                                  const ExperimentConfig& config, std::size_t run,
                                  const Logger& log = {});

/// Split seed of Monte-Carlo run `run`.
std::uint64_t split_seed(const ExperimentConfig& config, std::size_t run);

struct ExperimentOutcome {
  std::vector<EvaluationReport> reports;   // run-major, variants in config order
  std::vector<AggregateReport> aggregates; // one per variant
  std::vector<std::string> failures;
};

/// The full protocol. When config.output is set, writes per-run reports and
/// predictions, aggregates, accuracy_table.csv, wilcoxon.csv and timings.csv.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const Logger& log = {});

/// Timing table: variant, offline augmentation (s), training (s),
/// per-sample inference (ms), means over runs.
std::string format_timing_table(std::span<const AggregateReport> aggregates);

}  // namespace hyperaug
