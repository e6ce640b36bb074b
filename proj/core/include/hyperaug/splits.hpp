#pragma once

#include <cstdint>
#include <vector>

#include "hyperaug/hsio.hpp"
#include "hyperaug/types.hpp"

namespace hyperaug {

/// Parameters for one of the three split scenarios. train_total/val_total
/// apply to B and IB; the patch fields apply to P.
struct ScenarioParams {
  Scenario scenario = Scenario::Balanced;
  std::size_t train_total = 0;
  std::size_t val_total = 0;
  std::uint32_t patch_rows = 2;
  std::uint32_t patch_cols = 2;
  double train_fraction = 0.5;
  double val_fraction = 0.1;
};

/// Non-overlapping rectangular tiling of an image; tile edges fall at
/// floor(i * extent / count).
class PatchGrid {
 public:
  PatchGrid(std::uint32_t height, std::uint32_t width, std::uint32_t rows,
            std::uint32_t cols);

  std::size_t tile_count() const noexcept { return std::size_t{rows_} * cols_; }
  std::size_t tile_of(Coord c) const;

 private:
  std::uint32_t height_;
  std::uint32_t width_;
  std::uint32_t rows_;
  std::uint32_t cols_;
};

/// Equal per-class quotas (remainders go to the most numerous classes). The
/// training pool of train_total + val_total pixels is drawn first; validation
/// is then taken out of that pool with the same per-class quota rule, so
/// train and val are disjoint and train stays balanced.
SplitSet split_balanced(const LabelMap& labels, std::size_t train_total,
                        std::size_t val_total, std::uint64_t seed);

/// Uniform draw over all labeled pixels, no stratification.
SplitSet split_imbalanced(const LabelMap& labels, std::size_t train_total,
                          std::size_t val_total, std::uint64_t seed);

/// Whole tiles go to train or test; val comes from training-tile pixels.
/// At least one tile is always assigned to train.
SplitSet split_patched(const LabelMap& labels, std::uint32_t patch_rows,
                       std::uint32_t patch_cols, double train_fraction,
                       double val_fraction, std::uint64_t seed);

SplitSet make_split(const LabelMap& labels, const ScenarioParams& params,
                    std::uint64_t seed);

/// `runs` splits with seeds base_seed + i and fold index i.
std::vector<SplitSet> monte_carlo(const LabelMap& labels,
                                  const ScenarioParams& params,
                                  std::size_t runs, std::uint64_t base_seed);

}  // namespace hyperaug
