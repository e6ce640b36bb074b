#include "hyperaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hyperaug/errors.hpp"

namespace hyperaug {

namespace {

constexpr std::size_t kFirstComponent[] = {0};

ClassId require_label(const Spectrum& x) {
  if (!x.label) throw ClassError("sample has no class label");
  return *x.label;
}

}  // namespace

std::string_view to_string(AugmentMethod method) {
  return method == AugmentMethod::Pca ? "pca" : "noise";
}

AugmentMethod parse_augment_method(std::string_view text) {
  if (text == "pca") return AugmentMethod::Pca;
  if (text == "noise") return AugmentMethod::Noise;
  throw ConfigError("unknown augmentation method '" + std::string(text) + "'");
}

void AugmentConfig::validate() const {
  if (!std::isfinite(alpha_min) || !std::isfinite(alpha_max) || alpha_min > alpha_max)
    throw ConfigError("alpha bounds must be finite with alpha_min <= alpha_max");
  if (!(noise_scale >= 0) || !std::isfinite(noise_scale))
    throw ConfigError("noise_scale must be finite and >= 0");
  if (scaled_components.empty())
    throw ConfigError("at least one principal component must be scaled");
}

double draw_alpha(const AugmentConfig& config, Rng& rng) {
  if (config.alpha_min == config.alpha_max) return config.alpha_min;
  return std::uniform_real_distribution<double>(config.alpha_min, config.alpha_max)(rng);
}

Spectrum pca_augment(const PCAModel& model, const Spectrum& x, double alpha,
                     std::span<const std::size_t> components) {
  if (!std::isfinite(alpha)) throw NumericError("alpha must be finite");
  if (components.empty()) components = kFirstComponent;
  Eigen::VectorXd coords = project(model, x.bands);
  for (std::size_t k : components) {
    if (k >= model.bands()) throw DimError("principal component index out of range");
    coords(static_cast<Eigen::Index>(k)) *= alpha;
  }
  Spectrum out;
  out.bands = backproject(model, coords);
  out.label = x.label;
  out.coord = x.coord;
  return out;
}

ClassNoiseModel noise_fit(std::span<const Spectrum> train) {
  if (train.empty()) throw DegenerateError("noise model needs a non-empty training set");
  const std::size_t b = train.front().size();

  std::map<ClassId, std::vector<const Spectrum*>> by_class;
  for (const auto& s : train) {
    if (s.size() != b) throw DimError("spectra differ in band count");
    by_class[require_label(s)].push_back(&s);
  }

  ClassNoiseModel model;
  for (const auto& [cls, members] : by_class) {
    std::vector<double> sigma(b, 0.0);
    if (members.size() < 2) {
      model.warnings.push_back("class " + std::to_string(cls) +
                               " has fewer than 2 training samples; its noise sigma is zero");
    } else {
      const double n = static_cast<double>(members.size());
      for (std::size_t j = 0; j < b; ++j) {
        double mean = 0.0;
        for (const auto* s : members) mean += s->bands[j];
        mean /= n;
        double ss = 0.0;
        for (const auto* s : members) ss += (s->bands[j] - mean) * (s->bands[j] - mean);
        sigma[j] = std::sqrt(ss / n);
      }
    }
    model.sigma.emplace(cls, std::move(sigma));
  }
  return model;
}

Spectrum noise_augment(const ClassNoiseModel& model, const Spectrum& x,
                       double noise_scale, Rng& rng) {
  if (!(noise_scale >= 0)) throw ConfigError("noise_scale must be >= 0");
  const ClassId cls = require_label(x);
  const auto it = model.sigma.find(cls);
  if (it == model.sigma.end())
    throw ClassError("class " + std::to_string(cls) + " is not in the noise model");
  const auto& sigma = it->second;
  if (sigma.size() != x.size()) throw DimError("noise model band count mismatch");

  Spectrum out = x;
  const double amplitude = std::sqrt(noise_scale);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < out.bands.size(); ++j) {
    const double sd = amplitude * sigma[j];
    if (sd > 0) out.bands[j] += sd * normal(rng);
  }
  return out;
}

PcaAugmenter::PcaAugmenter(PCAModel model, AugmentConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.validate();
}

Spectrum PcaAugmenter::synthesize(const Spectrum& x, Rng& rng) const {
  return pca_augment(model_, x, draw_alpha(config_, rng), config_.scaled_components);
}

NoiseAugmenter::NoiseAugmenter(ClassNoiseModel model, double noise_scale)
    : model_(std::move(model)), noise_scale_(noise_scale) {
  if (!(noise_scale_ >= 0)) throw ConfigError("noise_scale must be >= 0");
}

Spectrum NoiseAugmenter::synthesize(const Spectrum& x, Rng& rng) const {
  return noise_augment(model_, x, noise_scale_, rng);
}

std::unique_ptr<Augmenter> make_augmenter(const AugmentConfig& config,
                                          std::span<const Spectrum> original_train) {
  config.validate();
  switch (config.method) {
    case AugmentMethod::Pca:
      return std::make_unique<PcaAugmenter>(fit_pca(original_train), config);
    case AugmentMethod::Noise:
      return std::make_unique<NoiseAugmenter>(noise_fit(original_train), config.noise_scale);
  }
  throw ConfigError("unknown augmentation method");
}

std::map<ClassId, std::size_t> enlargement_quota(
    const std::map<ClassId, std::size_t>& counts) {
  if (counts.empty()) throw DegenerateError("no classes to enlarge");
  std::size_t n_max = 0;
  for (const auto& [cls, n] : counts) n_max = std::max(n_max, n);
  std::map<ClassId, std::size_t> quota;
  for (const auto& [cls, n] : counts)
    quota[cls] = n == n_max ? n : std::min(n, n_max - n);
  return quota;
}

EnlargedSet offline_enlarge(std::span<const Spectrum> train,
                            const Augmenter& augmenter, std::uint64_t seed) {
  if (train.empty()) throw DegenerateError("cannot enlarge an empty training set");
  std::map<ClassId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < train.size(); ++i) members[require_label(train[i])].push_back(i);
  std::map<ClassId, std::size_t> counts;
  for (const auto& [cls, idx] : members) counts[cls] = idx.size();
  const auto quota = enlargement_quota(counts);

  EnlargedSet out;
  out.samples.assign(train.begin(), train.end());
  out.original_count = train.size();
  std::uint64_t synthetic_index = 0;
  for (const auto& [cls, k] : quota) {
    const auto& idx = members.at(cls);
    for (std::size_t i = 0; i < k; ++i, ++synthetic_index) {
      Rng rng(derive_seed(seed, 0, Stage::OfflineAugment, synthetic_index));
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      out.samples.push_back(augmenter.synthesize(train[idx[pick(rng)]], rng));
    }
  }
  return out;
}

}  // namespace hyperaug
