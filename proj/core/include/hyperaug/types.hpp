#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hyperaug {

/// Class id; 0 is "unlabeled", real classes are 1..C.
using ClassId = std::uint16_t;

struct Coord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend auto operator<=>(const Coord&, const Coord&) = default;
};

/// One pixel's spectrum in compute precision.
struct Spectrum {
  std::vector<double> bands;
  std::optional<ClassId> label;
  std::optional<Coord> coord;

  std::size_t size() const noexcept { return bands.size(); }
};

struct LabeledPixel {
  Coord coord;
  ClassId label = 0;

  friend bool operator==(const LabeledPixel&, const LabeledPixel&) = default;
};

enum class Role { Train, Val, Test };

/// B, IB and P train/test scenarios.
enum class Scenario { Balanced, Imbalanced, Patched };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

struct SplitSet {
  std::vector<LabeledPixel> train;
  std::vector<LabeledPixel> val;
  std::vector<LabeledPixel> test;
  Scenario scenario = Scenario::Balanced;
  std::uint64_t seed = 0;
  std::uint32_t fold = 0;
  // Non-fatal conditions (empty test set, class missing from train, ...).
  std::vector<std::string> warnings;
};

}  // namespace hyperaug
