#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperaug/pca.hpp"
#include "hyperaug/rng.hpp"
#include "hyperaug/types.hpp"

namespace hyperaug {

enum class AugmentMethod { Pca, Noise };

std::string_view to_string(AugmentMethod method);
AugmentMethod parse_augment_method(std::string_view text);

struct AugmentConfig {
  AugmentMethod method = AugmentMethod::Pca;
  // PCA: each listed component is scaled by alpha ~ U(alpha_min, alpha_max).
  double alpha_min = 0.9;
  double alpha_max = 1.1;
  std::vector<std::size_t> scaled_components{0};
  // Noise: perturbation variance is noise_scale * sigma_c^2 per band.
  double noise_scale = 0.25;

  void validate() const;
};

double draw_alpha(const AugmentConfig& config, Rng& rng);

/// Scales the listed PC coordinates of x by alpha and maps back through the
/// full basis. The label and coordinate of x are kept.
Spectrum pca_augment(const PCAModel& model, const Spectrum& x, double alpha,
                     std::span<const std::size_t> components = {});

/// Per-class, per-band population standard deviations.
struct ClassNoiseModel {
  std::map<ClassId, std::vector<double>> sigma;
  std::vector<std::string> warnings;
};

ClassNoiseModel noise_fit(std::span<const Spectrum> train);

Spectrum noise_augment(const ClassNoiseModel& model, const Spectrum& x,
                       double noise_scale, Rng& rng);

/// A sample-synthesis method bound to its fitted model. Implementations are
/// immutable, so one instance may be shared by concurrent callers as long as
/// each supplies its own Rng.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual Spectrum synthesize(const Spectrum& x, Rng& rng) const = 0;
  /// True when synthesize() needs x.label to be set.
  virtual bool needs_label() const { return false; }
  virtual std::string_view name() const = 0;
};

class PcaAugmenter final : public Augmenter {
 public:
  PcaAugmenter(PCAModel model, AugmentConfig config);
  Spectrum synthesize(const Spectrum& x, Rng& rng) const override;
  std::string_view name() const override { return "pca"; }
  const PCAModel& model() const noexcept { return model_; }

 private:
  PCAModel model_;
  AugmentConfig config_;
};

class NoiseAugmenter final : public Augmenter {
 public:
  NoiseAugmenter(ClassNoiseModel model, double noise_scale);
  Spectrum synthesize(const Spectrum& x, Rng& rng) const override;
  bool needs_label() const override { return true; }
  std::string_view name() const override { return "noise"; }
  const ClassNoiseModel& model() const noexcept { return model_; }

 private:
  ClassNoiseModel model_;
  double noise_scale_;
};

/// Fits the configured method on the original (never enlarged) training set.
std::unique_ptr<Augmenter> make_augmenter(const AugmentConfig& config,
                                          std::span<const Spectrum> original_train);

/// Synthetic samples to add per class: classes at the majority count are
/// doubled; every other class gains min(n_c, n_max - n_c).
std::map<ClassId, std::size_t> enlargement_quota(
    const std::map<ClassId, std::size_t>& counts);

struct EnlargedSet {
  std::vector<Spectrum> samples;  // originals first, then synthetics
  std::size_t original_count = 0;

  std::span<const Spectrum> originals() const {
    return std::span<const Spectrum>(samples).first(original_count);
  }
  std::span<const Spectrum> synthetics() const {
    return std::span<const Spectrum>(samples).subspan(original_count);
  }
};

/// Each synthetic comes from a uniformly drawn original of its class, with
/// randomness keyed by (seed, synthetic index).
EnlargedSet offline_enlarge(std::span<const Spectrum> train,
                            const Augmenter& augmenter, std::uint64_t seed);

}  // namespace hyperaug
