#ifndef MUSKAT_TRANSPORT1D_HPP
#define MUSKAT_TRANSPORT1D_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "muskat/errors.hpp"
#include "muskat/grid.hpp"

namespace muskat {

/// Cumulative mass at the n+1 cell edges of a piecewise-constant density.
struct Cdf1D {
  Grid grid;
  std::vector<double> values;

  double cell_mass(std::size_t i) const { return values[i + 1] - values[i]; }
};

namespace detail {

inline void check_density_for_transport(const GridField& h, double mass_tol) {
  for (double v : h.values()) {
    if (!(v >= 0.0)) throw DomainError("transport: density entries must be nonnegative and finite");
  }
  const double m = integrate(h);
  if (std::abs(m - 1.0) > mass_tol) {
    throw DomainError("transport: mass " + std::to_string(m) + " deviates from 1");
  }
}

}  // namespace detail

/// CDF of a nonnegative unit-mass density; rescaled so values[n] == 1 exactly.
inline Cdf1D cdf(const GridField& h, double mass_tol = 1e-8) {
  detail::check_density_for_transport(h, mass_tol);
  const std::size_t n = h.size();
  const double dx = h.grid().dx();
  Cdf1D out{h.grid(), std::vector<double>(n + 1, 0.0)};
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += dx * h[i];
    out.values[i + 1] = acc;
  }
  if (!(acc > 0.0)) throw DomainError("transport: zero total mass");
  for (double& v : out.values) v /= acc;
  return out;
}

/// Left-continuous inverse inf{x : F(x) >= s}; quantile(0) is the left end of the support.
inline double quantile(const Cdf1D& c, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw DomainError("quantile: mass level outside [0,1]");
  const std::size_t n = c.grid.size();
  const double dx = c.grid.dx();
  if (s == 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      if (c.cell_mass(k) > 0.0) return c.grid.edge(k);
    }
    return 0.0;
  }
  // first edge k+1 with F >= s
  auto it = std::lower_bound(c.values.begin() + 1, c.values.end(), s);
  if (it == c.values.end()) it = c.values.end() - 1;
  const std::size_t k = static_cast<std::size_t>(it - c.values.begin()) - 1;
  const double m = c.cell_mass(k);
  if (m <= 0.0) return c.grid.edge(k + 1);
  return c.grid.edge(k) + dx * std::min(1.0, (s - c.values[k]) / m);
}

/// Exact W2^2 between two piecewise-constant densities (quantiles merged in mass space).
inline double w2_squared_exact(const Cdf1D& cu, const Cdf1D& cv) {
  const std::size_t n = cu.grid.size();
  const double dx = cu.grid.dx();
  std::size_t ku = 0;
  std::size_t kv = 0;
  double s = 0.0;
  double total = 0.0;
  while (true) {
    while (ku < n && cu.values[ku + 1] <= s) ++ku;
    while (kv < n && cv.values[kv + 1] <= s) ++kv;
    if (ku >= n || kv >= n) break;
    const double end = std::min(cu.values[ku + 1], cv.values[kv + 1]);
    const double mu = cu.cell_mass(ku);
    const double mv = cv.cell_mass(kv);
    auto qu = [&](double t) { return cu.grid.edge(ku) + dx * (t - cu.values[ku]) / mu; };
    auto qv = [&](double t) { return cv.grid.edge(kv) + dx * (t - cv.values[kv]) / mv; };
    const double da = qu(s) - qv(s);
    const double db = qu(end) - qv(end);
    total += (end - s) * (da * da + da * db + db * db) / 3.0;
    s = end;
    if (s >= 1.0) break;
  }
  return total;
}

/// W2 distance. `mass_points` > 0 uses that many midpoint nodes in mass space;
/// 0 evaluates the exact integral for piecewise-constant densities.
inline double w2_distance(const GridField& u, const GridField& v, std::size_t mass_points) {
  require_same_grid(u, v);
  const Cdf1D cu = cdf(u);
  const Cdf1D cv = cdf(v);
  if (mass_points == 0) return std::sqrt(std::max(0.0, w2_squared_exact(cu, cv)));
  double acc = 0.0;
  const double inv = 1.0 / static_cast<double>(mass_points);
  for (std::size_t k = 0; k < mass_points; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * inv;
    const double d = quantile(cu, s) - quantile(cv, s);
    acc += d * d;
  }
  return std::sqrt(acc * inv);
}

/// Default resolution M = 4n.
inline double w2_distance(const GridField& u, const GridField& v) {
  return w2_distance(u, v, 4 * u.size());
}

/// Exact transport data for a variable density u against a fixed reference f0.
///
/// For piecewise-constant densities the monotone map T = Q0 o U is piecewise linear,
/// so W2^2 = int (x - T)^2 u dx and the cell integrals of the potential phi
/// (phi' = x - T) are computed without quadrature error. The cell integrals are the
/// exact partial derivatives of W2^2(u, f0)/2 with respect to the density values u_i.
///
/// The second variation is int Q0'(U) dU^2 dx with dU linear inside each cell; the
/// three cell moments of q = Q0'(U(x)) against (1-t)^2, t(1-t), t^2 give it exactly.
struct ExactTransport {
  double w2sq = 0.0;
  std::vector<double> potential_cell_integrals;  ///< int_{cell i} phi dx
  std::vector<double> curvature_moments;         ///< 3 per cell
};

inline ExactTransport exact_transport(std::span<const double> u, std::span<const double> f0, const Grid& grid) {
  const std::size_t n = grid.size();
  const double dx = grid.dx();
  std::vector<double> cu(n + 1, 0.0);
  std::vector<double> c0(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cu[i + 1] = cu[i] + dx * std::max(0.0, u[i]);
    c0[i + 1] = c0[i] + dx * std::max(0.0, f0[i]);
  }
  if (!(cu[n] > 0.0) || !(c0[n] > 0.0)) throw DomainError("exact_transport: zero mass");
  const double su = cu[n];
  const double s0 = c0[n];
  for (double& v : cu) v /= su;
  for (double& v : c0) v /= s0;

  ExactTransport out;
  out.potential_cell_integrals.assign(n, 0.0);
  out.curvature_moments.assign(3 * n, 0.0);

  std::size_t last_massive = n - 1;
  while (last_massive > 0 && !(c0[last_massive + 1] - c0[last_massive] > 0.0)) --last_massive;
  // first reference cell carrying mass above level s; the last massive cell at the top
  auto ref_cell = [&](double s, std::size_t from) {
    std::size_t j = from;
    while (j < last_massive && (c0[j + 1] <= s || c0[j + 1] - c0[j] <= 0.0)) ++j;
    return j;
  };
  auto q0 = [&](std::size_t j, double s) {
    const double m = c0[j + 1] - c0[j];
    return grid.edge(j) + dx * std::clamp((s - c0[j]) / m, 0.0, 1.0);
  };

  double phi = 0.0;
  std::size_t j = ref_cell(0.0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ua = cu[i];
    const double ub = cu[i + 1];
    const double xa0 = grid.edge(i);
    j = ref_cell(ua, j);
    const double density = (ub - ua) / dx;
    auto add_piece = [&](double xa, double xb, double ta, double tb, std::size_t jref) {
      const double h = xb - xa;
      if (h <= 0.0) return;
      const double ra = xa - ta;
      const double rb = xb - tb;
      out.w2sq += density * h * (ra * ra + ra * rb + rb * rb) / 3.0;
      out.potential_cell_integrals[i] += phi * h + ra * h * h / 2.0 + (rb - ra) * h * h / 6.0;
      phi += 0.5 * h * (ra + rb);
      const double q = dx / (c0[jref + 1] - c0[jref]);
      const double t0 = (xa - xa0) / dx;
      const double t1 = (xb - xa0) / dx;
      const double w0 = 1.0 - t0;
      const double w1 = 1.0 - t1;
      out.curvature_moments[3 * i] += q * dx * (w0 * w0 * w0 - w1 * w1 * w1) / 3.0;
      out.curvature_moments[3 * i + 1] +=
          q * dx * ((t1 * t1 - t0 * t0) / 2.0 - (t1 * t1 * t1 - t0 * t0 * t0) / 3.0);
      out.curvature_moments[3 * i + 2] += q * dx * (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
    };
    if (ub - ua <= 0.0) {
      const double t = ua <= 0.0 ? grid.edge(j) : q0(j, ua);
      add_piece(xa0, xa0 + dx, t, t, j);
      continue;
    }
    double s = ua;
    double xa = xa0;
    while (s < ub) {
      j = ref_cell(s, j);
      const double send = std::min(ub, c0[j + 1]);
      const double xb = send >= ub ? xa0 + dx : xa0 + dx * (send - ua) / (ub - ua);
      add_piece(xa, xb, q0(j, s), q0(j, send), j);
      if (send <= s) break;
      s = send;
      xa = xb;
    }
  }
  return out;
}

/// Monotone rearrangement from `source` to `target` with its potential.
struct TransportPlan1D {
  Cdf1D source;
  Cdf1D target;
  std::vector<double> map_values;  ///< T(x_i) at cell centres
  GridField potential;             ///< phi with phi' = x - T(x), zero mean

  /// int |x - T(x)|^2 dF(x), integrated exactly along the piecewise-linear map.
  double transport_cost() const {
    const std::size_t n = source.grid.size();
    const double dx = source.grid.dx();
    std::vector<double> u(n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = source.cell_mass(i) / dx;
      v[i] = target.cell_mass(i) / dx;
    }
    return exact_transport(u, v, source.grid).w2sq;
  }
};

namespace detail {

inline std::vector<double> map_at_centers(const Cdf1D& cu, const Cdf1D& cv) {
  const std::size_t n = cu.grid.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.5 * (cu.values[i] + cu.values[i + 1]);
    t[i] = quantile(cv, std::clamp(s, 0.0, 1.0));
  }
  return t;
}

inline GridField potential_from_map(const Grid& grid, const std::vector<double>& t) {
  const std::size_t n = grid.size();
  const double dx = grid.dx();
  GridField phi(grid);
  double at_edge = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = grid.center(i) - t[i];
    phi[i] = at_edge + 0.5 * dx * r;
    at_edge += dx * r;
  }
  const double mean = integrate(phi) / grid.length();
  for (std::size_t i = 0; i < n; ++i) phi[i] -= mean;
  return phi;
}

}  // namespace detail

/// T = G^{-1} o F sampled at cell centres, F and G the CDFs of u and v.
inline TransportPlan1D optimal_map(const GridField& u, const GridField& v) {
  require_same_grid(u, v);
  TransportPlan1D plan{cdf(u), cdf(v), {}, GridField(u.grid())};
  plan.map_values = detail::map_at_centers(plan.source, plan.target);
  plan.potential = detail::potential_from_map(u.grid(), plan.map_values);
  return plan;
}

/// First variation of u -> W2^2(u,v)/2: cumulative midpoint integral of (x - T(x)), zero mean.
inline GridField kantorovich_potential(const GridField& u, const GridField& v) {
  return optimal_map(u, v).potential;
}

}  // namespace muskat

#endif  // MUSKAT_TRANSPORT1D_HPP
