#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "hyperaug/errors.hpp"
#include "hyperaug/splits.hpp"

using namespace hyperaug;

namespace {

LabelMap grid_labels(std::uint32_t h, std::uint32_t w, std::uint32_t classes,
                     std::uint64_t seed, double unlabeled = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ClassId> l(std::size_t{h} * w);
  for (auto& v : l)
    v = u(rng) < unlabeled ? 0 : static_cast<ClassId>(1 + rng() % classes);
  return LabelMap(h, w, std::move(l));
}

std::map<ClassId, std::size_t> per_class(const std::vector<LabeledPixel>& px) {
  std::map<ClassId, std::size_t> m;
  for (const auto& p : px) ++m[p.label];
  return m;
}

void expect_valid(const SplitSet& s, const LabelMap& labels) {
  std::set<Coord> seen;
  std::size_t total = 0;
  for (const auto* list : {&s.train, &s.val, &s.test})
    for (const auto& p : *list) {
      EXPECT_TRUE(seen.insert(p.coord).second) << "duplicate coordinate";
      EXPECT_NE(labels.at(p.coord.row, p.coord.col), 0);
      EXPECT_EQ(labels.at(p.coord.row, p.coord.col), p.label);
      ++total;
    }
  EXPECT_EQ(total, labels.labeled_pixels().size());
}

}  // namespace

TEST(Balanced, TwoClassesQuota) {
  std::vector<ClassId> l(20);
  for (std::size_t i = 0; i < 20; ++i) l[i] = i < 10 ? 1 : 2;
  const LabelMap labels(4, 5, l);
  const auto s = split_balanced(labels, 4, 0, 1);
  EXPECT_EQ(per_class(s.train), (std::map<ClassId, std::size_t>{{1, 2}, {2, 2}}));
  EXPECT_EQ(s.test.size(), 16u);
  expect_valid(s, labels);
}

TEST(Balanced, PerClassCountsDifferByAtMostOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto labels = grid_labels(30, 30, 5, seed);
    const auto s = split_balanced(labels, 47, 11, seed);
    EXPECT_EQ(s.train.size(), 47u);
    EXPECT_EQ(s.val.size(), 11u);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (ClassId c = 1; c <= 5; ++c) {
      const std::size_t n = per_class(s.train)[c];
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_LE(hi - lo, 1u);
    expect_valid(s, labels);
  }
}

TEST(Balanced, PaviaSizedCounts) {
  // Nine classes with the Pavia University histogram, laid out in rows.
  const std::vector<std::size_t> hist{6631, 18649, 2099, 3064, 1345, 5029, 1330, 3682, 947};
  std::vector<ClassId> l;
  for (std::size_t c = 0; c < hist.size(); ++c) l.insert(l.end(), hist[c], static_cast<ClassId>(c + 1));
  const auto n = static_cast<std::uint32_t>(l.size());
  const LabelMap labels(1, n, l);
  const auto s = split_balanced(labels, 2025, 225, 0);
  EXPECT_EQ(s.train.size(), 2025u);
  EXPECT_EQ(s.val.size(), 225u);
  EXPECT_EQ(s.test.size(), 40526u);
}

TEST(Balanced, DeterministicAndSeedSensitive) {
  const auto labels = grid_labels(20, 20, 4, 3);
  const auto a = split_balanced(labels, 40, 8, 5);
  const auto b = split_balanced(labels, 40, 8, 5);
  const auto c = split_balanced(labels, 40, 8, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_NE(a.train, c.train);
}

TEST(Balanced, SmallClassNamesItself) {
  std::vector<ClassId> l(20, 1);
  l[0] = 2;
  const LabelMap labels(4, 5, l);
  try {
    split_balanced(labels, 6, 0, 0);
    FAIL() << "expected InsufficientClassError";
  } catch (const InsufficientClassError& e) {
    EXPECT_EQ(e.class_id(), 2);
  }
}

TEST(Imbalanced, FollowsPrevalence) {
  std::vector<ClassId> l(1000);
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = i < 900 ? 1 : 2;
  const LabelMap labels(10, 100, l);
  double mean_major = 0;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = split_imbalanced(labels, 100, 0, static_cast<std::uint64_t>(seed));
    ASSERT_EQ(s.train.size(), 100u);
    mean_major += static_cast<double>(per_class(s.train)[1]);
  }
  mean_major /= seeds;
  EXPECT_NEAR(mean_major, 90.0, 3.0);
}

TEST(Imbalanced, SingleClassAndExhaustiveDraw) {
  const LabelMap one(2, 5, std::vector<ClassId>(10, 1));
  const auto s = split_imbalanced(one, 4, 2, 1);
  EXPECT_EQ(per_class(s.train)[1], 4u);
  const auto all = split_imbalanced(one, 10, 0, 1);
  EXPECT_TRUE(all.test.empty());
  EXPECT_FALSE(all.warnings.empty());
  EXPECT_THROW(split_imbalanced(one, 10, 1, 1), InsufficientDataError);
}

TEST(Patched, OneByOneGridIsAllTrain) {
  const auto labels = grid_labels(6, 6, 2, 1);
  const auto s = split_patched(labels, 1, 1, 0.5, 0.0, 1);
  EXPECT_TRUE(s.test.empty());
  EXPECT_FALSE(s.warnings.empty());
}

TEST(Patched, HalfOfFourTilesTrain) {
  const LabelMap labels(8, 8, std::vector<ClassId>(64, 1));
  const auto s = split_patched(labels, 2, 2, 0.5, 0.0, 4);
  const PatchGrid grid(8, 8, 2, 2);
  std::set<std::size_t> train_tiles, test_tiles;
  for (const auto& p : s.train) train_tiles.insert(grid.tile_of(p.coord));
  for (const auto& p : s.test) test_tiles.insert(grid.tile_of(p.coord));
  EXPECT_EQ(train_tiles.size(), 2u);
  EXPECT_EQ(test_tiles.size(), 2u);
}

TEST(Patched, TestTilesHoldNoTrainingPixel) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const auto h = static_cast<std::uint32_t>(5 + rng() % 30);
    const auto w = static_cast<std::uint32_t>(5 + rng() % 30);
    const auto labels = grid_labels(h, w, 3, seed);
    const auto rows = static_cast<std::uint32_t>(1 + rng() % 4);
    const auto cols = static_cast<std::uint32_t>(1 + rng() % 4);
    const auto s = split_patched(labels, rows, cols, 0.4, 0.2, seed);
    expect_valid(s, labels);
    const PatchGrid grid(h, w, rows, cols);
    std::set<std::size_t> train_tiles;
    for (const auto& p : s.train) train_tiles.insert(grid.tile_of(p.coord));
    for (const auto& p : s.val) train_tiles.insert(grid.tile_of(p.coord));
    for (const auto& p : s.test) EXPECT_EQ(train_tiles.count(grid.tile_of(p.coord)), 0u);
  }
}

TEST(PatchGridTest, TilesPartitionTheImage) {
  const PatchGrid grid(7, 10, 3, 4);
  std::map<std::size_t, std::size_t> sizes;
  for (std::uint32_t r = 0; r < 7; ++r)
    for (std::uint32_t c = 0; c < 10; ++c) ++sizes[grid.tile_of({r, c})];
  EXPECT_EQ(sizes.size(), 12u);
  EXPECT_EQ(grid.tile_of({0, 0}), 0u);
  EXPECT_EQ(grid.tile_of({6, 9}), 11u);
  EXPECT_THROW(PatchGrid(2, 2, 3, 1), ConfigError);
  EXPECT_THROW(grid.tile_of({7, 0}), DimError);
}

TEST(MonteCarlo, SeedsAndDeterminism) {
  const auto labels = grid_labels(20, 20, 3, 2);
  ScenarioParams p{.scenario = Scenario::Balanced, .train_total = 30, .val_total = 6};
  const auto runs = monte_carlo(labels, p, 25, 100);
  ASSERT_EQ(runs.size(), 25u);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    seeds.insert(runs[i].seed);
    EXPECT_EQ(runs[i].fold, i);
  }
  EXPECT_EQ(seeds.size(), 25u);
  const auto single = monte_carlo(labels, p, 1, 100);
  EXPECT_EQ(single[0].train, make_split(labels, p, 100).train);
  const auto again = monte_carlo(labels, p, 25, 100);
  for (std::size_t i = 0; i < runs.size(); ++i) EXPECT_EQ(again[i].test, runs[i].test);
  EXPECT_THROW(monte_carlo(labels, p, 0, 1), ConfigError);
}
