#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hyperaug/augment.hpp"
#include "hyperaug/cnn.hpp"
#include "hyperaug/hsio.hpp"
#include "hyperaug/rng.hpp"
#include "hyperaug/types.hpp"

namespace hyperaug {

struct TTAConfig {
  std::size_t samples = 4;  // A; zero means plain inference
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TTAResult {
  ClassId label = 0;
  std::vector<std::size_t> votes;  // entry c-1 counts votes for class c
  std::vector<double> mean_proba;
  bool soft_vote_used = false;
  std::vector<ClassId> member_labels;  // member 0 is the original sample
};

/// Majority vote over the rows of `member_proba` (one row per ensemble
/// member). When the top vote count is shared, the tied class with the
/// largest mean probability wins, lowest id on an exact tie.
TTAResult vote(const Eigen::MatrixXd& member_proba);

/// Anything that maps spectra to class probabilities.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;
  /// One row of probabilities per input spectrum.
  virtual Eigen::MatrixXd predict_proba(std::span<const Spectrum> spectra) const = 0;
  virtual std::size_t classes() const = 0;
};

/// A trained network behind the normalizer fitted on its training set.
/// Inputs are raw (unnormalized) spectra.
class CnnClassifier final : public ProbabilityModel {
 public:
  CnnClassifier(CNNModel model, MinMaxNormalizer normalizer);
  Eigen::MatrixXd predict_proba(std::span<const Spectrum> spectra) const override;
  std::size_t classes() const override { return model_.config.classes; }
  const CNNModel& model() const noexcept { return model_; }
  const MinMaxNormalizer& normalizer() const noexcept { return normalizer_; }

 private:
  CNNModel model_;
  MinMaxNormalizer normalizer_;
};

/// Classifies x together with config.samples synthetic variants of it. The
/// true label of x is never read; augmenters that need a class get the
/// plain prediction of x instead.
TTAResult tta_classify(const ProbabilityModel& model, const Augmenter* augmenter,
                       const Spectrum& x, const TTAConfig& config, Rng& rng);

struct TTASetResult {
  std::vector<TTAResult> results;
  double total_seconds = 0.0;
  double mean_ms = 0.0;  // mean per-sample wall time
};

/// Per-sample randomness is keyed by the sample coordinate (or its index
/// when it has none), so order and thread count never change the labels.
TTASetResult tta_classify_set(const ProbabilityModel& model, const Augmenter* augmenter,
                              std::span<const Spectrum> test_set, const TTAConfig& config);

std::uint64_t sample_key(const Spectrum& x, std::size_t index);

/// Columns: row,col,true_label,pred_label,soft_vote_used,vote_1..vote_C.
void save_tta_results(const std::filesystem::path& path, std::span<const Spectrum> test_set,
                      std::span<const TTAResult> results);

struct PredictionFile {
  std::vector<std::optional<Coord>> coords;
  std::vector<ClassId> truth;
  std::vector<ClassId> predicted;
  std::vector<bool> soft_vote_used;
  std::size_t classes = 0;  // number of vote columns
};

PredictionFile load_tta_results(const std::filesystem::path& path);

}  // namespace hyperaug
