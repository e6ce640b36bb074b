#pragma once

#include <cstdint>
#include <random>

namespace hyperaug {

using Rng = std::mt19937_64;

/// Pipeline stages that consume randomness. Values are part of the seed
/// derivation scheme and must never be renumbered.
enum class Stage : std::uint64_t {
  Split = 1,
  OfflineAugment = 2,
  Init = 3,
  Shuffle = 4,
  Online = 5,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based seed: hash(master, run, stage, index). Every random draw in
/// the pipeline is keyed this way so that order and parallelism never change
/// results.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run,
                                    Stage stage,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ run);
  h = mix64(h ^ static_cast<std::uint64_t>(stage));
  return mix64(h ^ index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace hyperaug
