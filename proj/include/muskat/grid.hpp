#ifndef MUSKAT_GRID_HPP
#define MUSKAT_GRID_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "muskat/errors.hpp"

namespace muskat {

/// Uniform cell-centred discretization of [0, L].
class Grid {
 public:
  Grid() = default;

  Grid(double length, std::size_t cells) : length_(length), n_(cells) {
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw ConfigError("grid length must be positive and finite, got " + std::to_string(length));
    }
    if (cells < kMinCells) {
      throw ConfigError("grid needs at least " + std::to_string(kMinCells) + " cells, got " +
                        std::to_string(cells));
    }
    dx_ = length / static_cast<double>(cells);
  }

  static constexpr std::size_t kMinCells = 8;

  double length() const { return length_; }
  std::size_t size() const { return n_; }
  double dx() const { return dx_; }

  double center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dx_; }
  /// Left edge of cell i; edge(n) is the right end of the domain.
  double edge(std::size_t i) const { return static_cast<double>(i) * dx_; }

  std::vector<double> centers() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = center(i);
    return xs;
  }

  /// Midpoint quadrature weights; they sum to L.
  std::vector<double> weights() const { return std::vector<double>(n_, dx_); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  double length_ = 1.0;
  std::size_t n_ = 0;
  double dx_ = 0.0;
};

/// Builds the grid with dx = L/n; rejects L <= 0 and n < 8.
inline Grid build_grid(double length, std::size_t cells) { return Grid(length, cells); }

/// Cell-centred samples of one scalar quantity.
class GridField {
 public:
  GridField() = default;
  explicit GridField(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}
  GridField(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw ShapeError("field has " + std::to_string(values_.size()) + " values for a grid of " +
                       std::to_string(grid_.size()) + " cells");
    }
  }

  template <class Fn>
  static GridField sample(const Grid& grid, Fn&& fn) {
    GridField out(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) out.values_[i] = fn(grid.center(i));
    return out;
  }

  static GridField constant(const Grid& grid, double value) {
    return GridField(grid, std::vector<double>(grid.size(), value));
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  GridField& operator+=(const GridField& other) {
    check_same(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  GridField& operator-=(const GridField& other) {
    check_same(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }
  GridField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(double s, GridField a) { return a *= s; }
  friend GridField operator*(GridField a, double s) { return a *= s; }

  void check_same(const GridField& other) const {
    if (!(grid_ == other.grid_) || values_.size() != other.values_.size()) {
      throw ShapeError("fields live on different grids");
    }
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const GridField& a, const GridField& b) { a.check_same(b); }

/// Midpoint rule: dx * sum(values).
inline double integrate(const GridField& h) {
  double s = 0.0;
  for (double v : h.values()) s += v;
  return h.grid().dx() * s;
}

/// Centred differences inside, second-order one-sided rows at the two boundary cells.
inline GridField gradient(const GridField& h) {
  const std::size_t n = h.size();
  const double dx = h.grid().dx();
  GridField out(h.grid());
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (h[i + 1] - h[i - 1]) / (2.0 * dx);
  out[0] = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dx);
  out[n - 1] = (3.0 * h[n - 1] - 4.0 * h[n - 2] + h[n - 3]) / (2.0 * dx);
  return out;
}

/// Three-point Laplacian with even reflection h[-1] = h[0], h[n] = h[n-1] (no-flux).
inline GridField laplacian(const GridField& h) {
  const std::size_t n = h.size();
  const double inv = 1.0 / (h.grid().dx() * h.grid().dx());
  GridField out(h.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i == 0 ? h[0] : h[i - 1];
    const double right = i + 1 == n ? h[n - 1] : h[i + 1];
    out[i] = (left - 2.0 * h[i] + right) * inv;
  }
  return out;
}

/// ||h||_2^2 by midpoint quadrature.
inline double l2_norm_sq(const GridField& h) {
  double s = 0.0;
  for (double v : h.values()) s += v * v;
  return h.grid().dx() * s;
}

/// ||h'||_2^2 from edge differences; equals -<h, laplacian(h)> exactly.
inline double dirichlet_norm_sq(const GridField& h) {
  const double dx = h.grid().dx();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    const double d = h[i + 1] - h[i];
    s += d * d;
  }
  return s / dx;
}

/// int h(x) (1 + (x - center)^2) dx; h must be nonnegative.
inline double second_moment(const GridField& h, double center) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < 0.0) throw DomainError("second_moment: negative density entry");
    const double r = h.grid().center(i) - center;
    s += h[i] * (1.0 + r * r);
  }
  return h.grid().dx() * s;
}

}  // namespace muskat

#endif  // MUSKAT_GRID_HPP
