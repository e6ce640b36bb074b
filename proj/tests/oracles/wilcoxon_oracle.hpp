#pragma once

// Exhaustive signed-rank test: ranks by direct counting, p-value by
// enumerating every sign assignment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct WilcoxonEnumeration {
  double p = 1.0;
  double w_plus = 0.0;
  std::size_t n = 0;
};

inline WilcoxonEnumeration wilcoxon_enumerate(const std::vector<double>& x,
                                              const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
  WilcoxonEnumeration out;
  out.n = d.size();
  if (d.empty()) return out;

  std::vector<double> rank(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double below = 0, equal = 0;
    for (double e : d) {
      if (std::abs(e) < std::abs(d[i])) ++below;
      if (std::abs(e) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1) / 2;
  }
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) out.w_plus += rank[i];

  std::uint64_t le = 0, ge = 0;
  const std::uint64_t patterns = std::uint64_t{1} << d.size();
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double t = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (mask >> i & 1) t += rank[i];
    if (t <= out.w_plus + 1e-9) ++le;
    if (t >= out.w_plus - 1e-9) ++ge;
  }
  out.p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(patterns));
  return out;
}

}  // namespace oracle
