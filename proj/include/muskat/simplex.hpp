#ifndef MUSKAT_SIMPLEX_HPP
#define MUSKAT_SIMPLEX_HPP

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "muskat/errors.hpp"

namespace muskat {

/// Euclidean projection onto {w >= 0, dx * sum(w) = mass}, in place.
///
/// Sort-based threshold search: w_i <- max(w_i - theta, 0).
inline void project_to_simplex(std::span<double> w, double dx, double mass = 1.0) {
  if (w.empty()) return;
  if (!(dx > 0.0) || !(mass > 0.0)) throw DomainError("project_to_simplex: dx and mass must be positive");
  const double target = mass / dx;
  std::vector<double> sorted(w.begin(), w.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double running = 0.0;
  double theta = 0.0;
  std::size_t k = 0;
  for (; k < sorted.size(); ++k) {
    running += sorted[k];
    const double t = (running - target) / static_cast<double>(k + 1);
    if (k + 1 == sorted.size() || sorted[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  for (double& v : w) v = std::max(v - theta, 0.0);
}

}  // namespace muskat

#endif  // MUSKAT_SIMPLEX_HPP
