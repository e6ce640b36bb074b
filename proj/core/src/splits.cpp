#include "hyperaug/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hyperaug/errors.hpp"
#include "hyperaug/rng.hpp"

namespace hyperaug {

namespace {

void sort_by_coord(std::vector<LabeledPixel>& pixels) {
  std::sort(pixels.begin(), pixels.end(),
            [](const auto& a, const auto& b) { return a.coord < b.coord; });
}

void finish(SplitSet& split) {
  sort_by_coord(split.train);
  sort_by_coord(split.val);
  sort_by_coord(split.test);
  if (split.test.empty())
    split.warnings.push_back("test set is empty: every labeled pixel was drawn for training");
}

/// total / C per class; the remainder goes one each to the most numerous
/// classes (ties to the lower id).
std::vector<std::size_t> distribute(std::size_t total,
                                    const std::vector<std::size_t>& counts) {
  const std::size_t classes = counts.size();
  std::vector<std::size_t> quota(classes, total / classes);
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  for (std::size_t i = 0; i < total % classes; ++i) ++quota[order[i]];
  return quota;
}

}  // namespace

PatchGrid::PatchGrid(std::uint32_t height, std::uint32_t width,
                     std::uint32_t rows, std::uint32_t cols)
    : height_(height), width_(width), rows_(rows), cols_(cols) {
  if (rows_ == 0 || cols_ == 0) throw ConfigError("patch grid dimensions must be >= 1");
  if (rows_ > height_ || cols_ > width_)
    throw ConfigError("patch grid finer than the image");
}

std::size_t PatchGrid::tile_of(Coord c) const {
  if (c.row >= height_ || c.col >= width_) throw DimError("coordinate outside grid");
  // Largest t with floor(t * extent / count) <= pos.
  auto locate = [](std::uint32_t pos, std::uint32_t count, std::uint32_t extent) {
    std::size_t t = std::min<std::size_t>(std::size_t{pos} * count / extent, count - 1);
    while (t > 0 && t * extent / count > pos) --t;
    while (t + 1 < count && (t + 1) * extent / count <= pos) ++t;
    return t;
  };
  return locate(c.row, rows_, height_) * cols_ + locate(c.col, cols_, width_);
}

SplitSet split_balanced(const LabelMap& labels, std::size_t train_total,
                        std::size_t val_total, std::uint64_t seed) {
  const std::size_t classes = labels.num_classes();
  if (classes == 0) throw InsufficientDataError("label map has no labeled pixels");

  std::vector<std::vector<LabeledPixel>> by_class(classes);
  for (const auto& p : labels.labeled_pixels()) by_class[p.label - 1].push_back(p);
  std::vector<std::size_t> counts(classes);
  for (std::size_t c = 0; c < classes; ++c) counts[c] = by_class[c].size();

  const auto train_quota = distribute(train_total, counts);
  const auto val_quota = distribute(val_total, counts);

  SplitSet split;
  split.scenario = Scenario::Balanced;
  split.seed = seed;
  Rng rng(seed);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t pool = train_quota[c] + val_quota[c];
    const auto id = static_cast<ClassId>(c + 1);
    if (counts[c] < pool)
      throw InsufficientClassError(
          id, "class " + std::to_string(id) + " has " + std::to_string(counts[c]) +
                  " labeled pixels, needs " + std::to_string(pool));
    auto& pixels = by_class[c];
    std::shuffle(pixels.begin(), pixels.end(), rng);
    auto it = pixels.begin();
    split.val.insert(split.val.end(), it, it + static_cast<std::ptrdiff_t>(val_quota[c]));
    it += static_cast<std::ptrdiff_t>(val_quota[c]);
    split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(train_quota[c]));
    it += static_cast<std::ptrdiff_t>(train_quota[c]);
    split.test.insert(split.test.end(), it, pixels.end());
  }
  finish(split);
  return split;
}

SplitSet split_imbalanced(const LabelMap& labels, std::size_t train_total,
                          std::size_t val_total, std::uint64_t seed) {
  auto pixels = labels.labeled_pixels();
  if (train_total + val_total > pixels.size())
    throw InsufficientDataError(
        "requested " + std::to_string(train_total + val_total) +
        " training pixels but only " + std::to_string(pixels.size()) + " are labeled");

  SplitSet split;
  split.scenario = Scenario::Imbalanced;
  split.seed = seed;
  Rng rng(seed);
  std::shuffle(pixels.begin(), pixels.end(), rng);
  auto it = pixels.begin();
  split.val.assign(it, it + static_cast<std::ptrdiff_t>(val_total));
  it += static_cast<std::ptrdiff_t>(val_total);
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(train_total));
  it += static_cast<std::ptrdiff_t>(train_total);
  split.test.assign(it, pixels.end());
  finish(split);
  return split;
}

SplitSet split_patched(const LabelMap& labels, std::uint32_t patch_rows,
                       std::uint32_t patch_cols, double train_fraction,
                       double val_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ConfigError("train_fraction must lie in [0, 1]");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in [0, 1)");
  const PatchGrid grid(labels.height(), labels.width(), patch_rows, patch_cols);

  const std::size_t tiles = grid.tile_count();
  const auto wanted = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(tiles)));
  const std::size_t train_tiles = std::clamp<std::size_t>(wanted, 1, tiles);

  Rng rng(seed);
  std::vector<std::size_t> order(tiles);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_train(tiles, false);
  for (std::size_t i = 0; i < train_tiles; ++i) is_train[order[i]] = true;

  SplitSet split;
  split.scenario = Scenario::Patched;
  split.seed = seed;
  std::vector<LabeledPixel> pool;
  for (const auto& p : labels.labeled_pixels())
    (is_train[grid.tile_of(p.coord)] ? pool : split.test).push_back(p);

  std::shuffle(pool.begin(), pool.end(), rng);
  const auto val_count = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(pool.size())));
  split.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(val_count));
  split.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(val_count), pool.end());

  std::vector<bool> seen(labels.num_classes() + 1, false);
  for (const auto& p : split.train) seen[p.label] = true;
  for (std::size_t c = 1; c < seen.size(); ++c)
    if (!seen[c])
      split.warnings.push_back("class " + std::to_string(c) + " is absent from the training tiles");
  finish(split);
  return split;
}

SplitSet make_split(const LabelMap& labels, const ScenarioParams& params,
                    std::uint64_t seed) {
  switch (params.scenario) {
    case Scenario::Balanced:
      return split_balanced(labels, params.train_total, params.val_total, seed);
    case Scenario::Imbalanced:
      return split_imbalanced(labels, params.train_total, params.val_total, seed);
    case Scenario::Patched:
      return split_patched(labels, params.patch_rows, params.patch_cols,
                           params.train_fraction, params.val_fraction, seed);
  }
  throw ConfigError("unknown scenario");
}

std::vector<SplitSet> monte_carlo(const LabelMap& labels,
                                  const ScenarioParams& params,
                                  std::size_t runs, std::uint64_t base_seed) {
  if (runs == 0) throw ConfigError("runs must be >= 1");
  std::vector<SplitSet> out;
  out.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    auto split = make_split(labels, params, base_seed + i);
    split.fold = static_cast<std::uint32_t>(i);
    out.push_back(std::move(split));
  }
  return out;
}

}  // namespace hyperaug
