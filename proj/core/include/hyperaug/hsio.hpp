#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hyperaug/types.hpp"

namespace hyperaug {

/// Dense reflectance raster, pixel-interleaved and row-major over (row, col).
/// Construction validates every invariant, so an HSICube is always sound.
class HSICube {
 public:
  HSICube(std::uint32_t height, std::uint32_t width, std::uint32_t bands,
          std::vector<float> values);

  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t bands() const noexcept { return bands_; }
  std::size_t pixel_count() const noexcept {
    return std::size_t{height_} * width_;
  }

  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> pixel(std::uint32_t row, std::uint32_t col) const;

  friend bool operator==(const HSICube&, const HSICube&) = default;

 private:
  std::uint32_t height_;
  std::uint32_t width_;
  std::uint32_t bands_;
  std::vector<float> values_;
};

/// Ground truth aligned with a cube. Labels are compacted on construction so
/// that the classes present are exactly 1..C; the original ids are kept in
/// original_ids() (entry c-1 is the original id of compact class c).
class LabelMap {
 public:
  LabelMap(std::uint32_t height, std::uint32_t width,
           std::vector<ClassId> labels);

  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  std::size_t num_classes() const noexcept { return original_ids_.size(); }

  ClassId at(std::uint32_t row, std::uint32_t col) const;
  std::span<const ClassId> labels() const noexcept { return labels_; }
  std::span<const ClassId> original_ids() const noexcept {
    return original_ids_;
  }
  bool remapped() const noexcept;

  /// Counts indexed by class id; entry 0 counts unlabeled pixels.
  std::vector<std::size_t> histogram() const;
  std::vector<LabeledPixel> labeled_pixels() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::uint32_t height_;
  std::uint32_t width_;
  std::vector<ClassId> labels_;
  std::vector<ClassId> original_ids_;
};

HSICube load_cube(const std::filesystem::path& path);
void save_cube(const std::filesystem::path& path, const HSICube& cube);

LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelMap& labels);

/// Sidecar text file `compact,original` recording a label compaction.
void save_class_mapping(const std::filesystem::path& path,
                        const LabelMap& labels);

void save_split(const std::filesystem::path& path, const SplitSet& split);
/// Reads records only; scenario/seed/fold are left at their defaults.
SplitSet load_split(const std::filesystem::path& path);

/// Sample list with a trailing synthetic flag column and the spectrum values
/// printed in shortest round-trip form. Synthetic samples carry the
/// coordinate of the original they were derived from.
void save_samples(const std::filesystem::path& path,
                  std::span<const Spectrum> samples,
                  std::size_t original_count);
struct SampleFile {
  std::vector<Spectrum> samples;
  std::vector<bool> synthetic;
};
SampleFile load_samples(const std::filesystem::path& path);

struct SyntheticParams {
  std::size_t classes = 3;
  std::size_t bands = 20;
  std::size_t per_class = 50;
  std::uint64_t seed = 0;
  // Per-band Gaussian noise around each class mean.
  double spread = 0.05;
  // Multiplicative per-pixel illumination jitter (std of the scale factor).
  double brightness = 0.1;
};

struct SyntheticScene {
  HSICube cube;
  LabelMap labels;
};

/// Class c occupies row c-1; every pixel is labeled.
SyntheticScene generate_synthetic(const SyntheticParams& params);

std::vector<Spectrum> gather_spectra(const HSICube& cube,
                                     std::span<const LabeledPixel> pixels);

/// Per-band min-max scaling to [0, 1] fitted on training pixels.
class MinMaxNormalizer {
 public:
  MinMaxNormalizer() = default;
  MinMaxNormalizer(std::vector<double> lo, std::vector<double> hi);

  static MinMaxNormalizer fit(std::span<const Spectrum> train);

  std::size_t bands() const noexcept { return lo_.size(); }
  std::span<const double> lo() const noexcept { return lo_; }
  std::span<const double> hi() const noexcept { return hi_; }

  void apply(std::span<double> values) const;
  Spectrum apply(const Spectrum& x) const;
  std::vector<Spectrum> apply(std::span<const Spectrum> xs) const;

  friend bool operator==(const MinMaxNormalizer&,
                         const MinMaxNormalizer&) = default;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

void save_normalizer(const std::filesystem::path& path,
                     const MinMaxNormalizer& normalizer);
MinMaxNormalizer load_normalizer(const std::filesystem::path& path);

}  // namespace hyperaug
