#ifndef MUSKAT_JKO_HPP
#define MUSKAT_JKO_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "muskat/errors.hpp"
#include "muskat/functionals.hpp"
#include "muskat/grid.hpp"
#include "muskat/simplex.hpp"
#include "muskat/test_functions.hpp"
#include "muskat/transport1d.hpp"

namespace muskat {

/// Inner-solver settings of the minimizing-movement step.
struct JkoConfig {
  std::size_t inner_max_iters = 400;
  double inner_tol = 1e-10;
  double step_shrink = 0.5;
  double step_grow = 2.0;
  /// Flux threshold delta in units of 1/L.
  double positivity_floor = 1e-6;
  /// Mass-space nodes for reported W2 values; 0 selects 4n.
  std::size_t m_quadrature = 0;

  void validate() const {
    if (!(inner_tol > 0.0)) throw ConfigError("jko: inner_tol > 0 required");
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) throw ConfigError("jko: 0 < step_shrink < 1 required");
    if (!(step_grow > 1.0)) throw ConfigError("jko: step_grow > 1 required");
    if (!(positivity_floor >= 0.0)) throw ConfigError("jko: positivity_floor >= 0 required");
    if (inner_max_iters == 0) throw ConfigError("jko: inner_max_iters >= 1 required");
  }

  std::size_t mass_points(const Grid& grid) const { return m_quadrature == 0 ? 4 * grid.size() : m_quadrature; }
  double flux_threshold(const Grid& grid) const { return positivity_floor / grid.length(); }
};

/// Discretization slack C (dx^2 + 1/M) shared by all inequality checks; C = 1.
inline double tol_disc(const Grid& grid, std::size_t mass_points) {
  constexpr double kC = 1.0;
  return kC * (grid.dx() * grid.dx() + 1.0 / static_cast<double>(mass_points));
}

struct StepReport {
  double w2_f = 0.0;
  double w2_g = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double entropy_f = 0.0;
  double entropy_g = 0.0;
  std::size_t inner_iters = 0;
  double el_residual_f = 0.0;  ///< |lhs| of the f inequality for xi = x^2
  double el_residual_g = 0.0;
  double el_bound_f = 0.0;  ///< sup|xi''| W2^2/2
  double el_bound_g = 0.0;
  bool entropy_estimate_ok = false;

  double objective = 0.0;       ///< F_tau at the returned pair
  double pg_norm = 0.0;         ///< projected-gradient mapping norm at termination
  bool converged = false;
  double wf_l2 = 0.0;           ///< ||w_f||_2 at the returned pair
  double wg_l2 = 0.0;
  double entropy_lhs = 0.0;     ///< dissipation side of the per-step entropy estimate
  double entropy_rhs = 0.0;     ///< entropy-difference side
};

/// Inner solver could not make progress; carries the last iterate.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, DensityPair last, StepReport partial)
      : Error(what), last_iterate(std::move(last)), report(std::move(partial)) {}
  DensityPair last_iterate;
  StepReport report;
};

/// j = sqrt(rho) w; w = sqrt(rho) d/dx(potential), zero where rho <= delta.
struct FluxFields {
  GridField j_f;
  GridField w_f;
  GridField j_g;
  GridField w_g;
};

inline FluxFields flux_fields(const DensityPair& pair, const ModelParams& p, double delta) {
  require_same_grid(pair.f, pair.g);
  auto [mu_f, mu_g] = energy_variations(pair.f, pair.g, p);
  mu_g *= 1.0 / p.B;  // -(f+g)'' + c (f+g)
  const GridField df = gradient(mu_f);
  const GridField dg = gradient(mu_g);
  const Grid& grid = pair.grid();
  FluxFields out{GridField(grid), GridField(grid), GridField(grid), GridField(grid)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (pair.f[i] > delta) {
      const double r = std::sqrt(pair.f[i]);
      out.w_f[i] = r * df[i];
      out.j_f[i] = r * out.w_f[i];
    }
    if (pair.g[i] > delta) {
      const double r = std::sqrt(pair.g[i]);
      out.w_g[i] = r * dg[i];
      out.j_g[i] = r * out.w_g[i];
    }
  }
  return out;
}

/// Two sides of the discrete Euler-Lagrange inequality for one test function.
///
/// lhs = |int (f - f0) xi + tau int f (mu_f)' xi'|, the flux form of the weak
/// operator, which vanishes at the no-flux walls of the interval.
struct ElResidual {
  double lhs_f = 0.0;
  double rhs_f = 0.0;
  double scale_f = 0.0;  ///< |first term| + |second term|, the size of the cancelling parts
  double lhs_g = 0.0;
  double rhs_g = 0.0;
  double scale_g = 0.0;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// int_{cell i} xi dx by Simpson's rule.
inline std::vector<double> cell_integrals(const Grid& grid, const TestFunction& xi) {
  std::vector<double> out(grid.size());
  const double dx = grid.dx();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = grid.edge(i);
    out[i] = dx / 6.0 * (xi.value(a) + 4.0 * xi.value(a + 0.5 * dx) + xi.value(a + dx));
  }
  return out;
}

/// sum over interior edges of mean(rho) * (mu_{i} - mu_{i-1}) * xi'(edge).
inline double edge_flux_pairing(const GridField& rho, const GridField& mu, const TestFunction& xi) {
  const Grid& grid = rho.grid();
  double s = 0.0;
  for (std::size_t e = 1; e < grid.size(); ++e) {
    const double m = 0.5 * (rho[e - 1] + rho[e]);
    s += m * (mu[e] - mu[e - 1]) * xi.d1(grid.edge(e));
  }
  return s;
}

}  // namespace detail

/// Weak operator int rho (mu)' xi' dx for both components, mu_g scaled by 1/B.
inline std::pair<double, double> weak_operator(const DensityPair& pair, const ModelParams& p, const TestFunction& xi) {
  auto [mu_f, mu_g] = energy_variations(pair.f, pair.g, p);
  mu_g *= 1.0 / p.B;
  return {detail::edge_flux_pairing(pair.f, mu_f, xi), detail::edge_flux_pairing(pair.g, mu_g, xi)};
}

inline ElResidual el_residual(const DensityPair& prev, const DensityPair& next, const ModelParams& p,
                              const TestFunction& xi) {
  require_same_grid(prev.f, next.f);
  const std::vector<double> xi_cell = detail::cell_integrals(next.grid(), xi);
  double mass_f = 0.0;
  double mass_g = 0.0;
  for (std::size_t i = 0; i < xi_cell.size(); ++i) {
    mass_f += (next.f[i] - prev.f[i]) * xi_cell[i];
    mass_g += (next.g[i] - prev.g[i]) * xi_cell[i];
  }
  const auto [op_f, op_g] = weak_operator(next, p, xi);
  const double w2f = w2_distance(next.f, prev.f, 0);
  const double w2g = w2_distance(next.g, prev.g, 0);
  ElResidual r;
  r.lhs_f = std::abs(mass_f + p.tau * op_f);
  r.lhs_g = std::abs(mass_g + p.tau * op_g);
  r.rhs_f = 0.5 * xi.d2_sup * w2f * w2f;
  r.rhs_g = 0.5 * xi.d2_sup * w2g * w2g;
  r.scale_f = std::abs(mass_f) + std::abs(p.tau * op_f);
  r.scale_g = std::abs(mass_g) + std::abs(p.tau * op_g);
  return r;
}

/// Per-step entropy estimate: D_H(next) <= [H(f0) - H(f) + B (H(g0) - H(g))] / tau.
struct EntropyEstimate {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

inline EntropyEstimate step_entropy_estimate(const DensityPair& prev, const DensityPair& next, const ModelParams& p,
                                             double tol) {
  EntropyEstimate e;
  e.lhs = dissipation_DH(next.f, next.g, p);
  e.rhs = (entropy(prev.f) - entropy(next.f) + p.B * (entropy(prev.g) - entropy(next.g))) / p.tau;
  e.ok = e.lhs <= e.rhs + tol * (std::abs(e.lhs) + std::abs(e.rhs));
  return e;
}

namespace detail {

/// F_tau(u, v) = (W2^2(u, f0) + B W2^2(v, g0)) / (2 tau) + E(u, v) on the stacked vector x = [u; v].
class StepObjective {
 public:
  StepObjective(const DensityPair& prev, const ModelParams& p)
      : grid_(prev.grid()), p_(p), f0_(prev.f.data()), g0_(prev.g.data()) {
    build_energy_hessian();
  }

  struct Eval {
    double value = 0.0;
    std::vector<double> grad;  ///< raw partial derivatives dF/dx_i
    std::vector<double> moments_u;  ///< transport curvature moments, 3 per cell
    std::vector<double> moments_v;
  };

  std::size_t n() const { return grid_.size(); }
  const Grid& grid() const { return grid_; }

  double energy_of(std::span<const double> x) const {
    const std::size_t n = grid_.size();
    const double dx = grid_.dx();
    double grad_f = 0.0;
    double grad_s = 0.0;
    double l2_f = 0.0;
    double l2_s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = x[i] + x[n + i];
      l2_f += x[i] * x[i];
      l2_s += s * s;
      if (i + 1 < n) {
        const double df = x[i + 1] - x[i];
        const double ds = x[i + 1] + x[n + i + 1] - s;
        grad_f += df * df;
        grad_s += ds * ds;
      }
    }
    return 0.5 * ((p_.A - p_.B) * grad_f / dx + p_.B * grad_s / dx + (p_.a - p_.b) * l2_f * dx + p_.b * l2_s * dx);
  }

  double value(std::span<const double> x) const {
    const std::size_t n = grid_.size();
    const ExactTransport tu = exact_transport(x.subspan(0, n), f0_, grid_);
    const ExactTransport tv = exact_transport(x.subspan(n, n), g0_, grid_);
    return (tu.w2sq + p_.B * tv.w2sq) / (2.0 * p_.tau) + energy_of(x);
  }

  Eval evaluate(std::span<const double> x) const {
    const std::size_t n = grid_.size();
    ExactTransport tu = exact_transport(x.subspan(0, n), f0_, grid_);
    ExactTransport tv = exact_transport(x.subspan(n, n), g0_, grid_);
    Eval e;
    e.value = (tu.w2sq + p_.B * tv.w2sq) / (2.0 * p_.tau) + energy_of(x);
    e.grad.assign(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      e.grad[i] = tu.potential_cell_integrals[i] / p_.tau;
      e.grad[n + i] = p_.B * tv.potential_cell_integrals[i] / p_.tau;
    }
    // energy part: dx * (K x)/dx
    for (int k = 0; k < hessian_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(hessian_, k); it; ++it) {
        e.grad[static_cast<std::size_t>(it.row())] += it.value() * x[static_cast<std::size_t>(it.col())];
      }
    }
    e.moments_u = std::move(tu.curvature_moments);
    e.moments_v = std::move(tv.curvature_moments);
    return e;
  }

  const Eigen::SparseMatrix<double>& energy_hessian() const { return hessian_; }

 private:
  void build_energy_hessian() {
    const std::size_t n = grid_.size();
    const double dx = grid_.dx();
    std::vector<Eigen::Triplet<double>> trip;
    // raw Hessian blocks: dx (A L + a I), dx (B L + b I), dx (B L + b I); L = -Laplacian
    auto add_block = [&](std::size_t r0, std::size_t c0, double lap_coef, double mass_coef) {
      for (std::size_t i = 0; i < n; ++i) {
        const double diag_lap = (i == 0 || i + 1 == n) ? 1.0 : 2.0;
        trip.emplace_back(r0 + i, c0 + i, dx * (lap_coef * diag_lap / (dx * dx) + mass_coef));
        if (i + 1 < n) {
          trip.emplace_back(r0 + i, c0 + i + 1, -dx * lap_coef / (dx * dx));
          trip.emplace_back(r0 + i + 1, c0 + i, -dx * lap_coef / (dx * dx));
        }
      }
    };
    add_block(0, 0, p_.A, p_.a);
    add_block(0, n, p_.B, p_.b);
    add_block(n, 0, p_.B, p_.b);
    add_block(n, n, p_.B, p_.b);
    hessian_.resize(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
    hessian_.setFromTriplets(trip.begin(), trip.end());
  }

  Grid grid_;
  ModelParams p_;
  std::span<const double> f0_;
  std::span<const double> g0_;
  Eigen::SparseMatrix<double> hessian_;
};

/// Rounding residue of the projection (entries below 1e-13 of the peak) is set to
/// exact vacuum and the mass restored by rescaling. Left in place, such entries give
/// the reference quantile slopes of order 1e13 at the next step.
inline void snap_vacuum(std::span<double> w, double dx) {
  constexpr double kRelative = 1e-13;
  double peak = 0.0;
  for (double v : w) peak = std::max(peak, v);
  double mass = 0.0;
  for (double& v : w) {
    if (v < kRelative * peak) v = 0.0;
    mass += dx * v;
  }
  if (mass > 0.0) {
    for (double& v : w) v /= mass;
  }
}

/// ||x - P(x - grad_L2 F)||_L2 with P the projection onto the product of simplices.
inline double projected_gradient_norm(std::span<const double> x, std::span<const double> grad, const Grid& grid) {
  const std::size_t n = grid.size();
  const double dx = grid.dx();
  std::vector<double> y(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) y[i] = x[i] - grad[i] / dx;
  project_to_simplex(std::span<double>(y).subspan(0, n), dx);
  project_to_simplex(std::span<double>(y).subspan(n, n), dx);
  double s = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(dx * s);
}

/// Newton direction on the free cells, expressed through cumulative mass increments.
///
/// Fixed cells are sent to zero and their mass is spread over the free cells in
/// proportion to their values; on top of that particular step, the unknowns D_l are
/// the cumulative mass changes at the gaps between consecutive free cells. Holding
/// D = 0 at both ends keeps each component's mass.
class FreeSetNewton {
 public:
  FreeSetNewton(const StepObjective& obj, const ModelParams& p) : obj_(obj), p_(p) {}

  /// Returns false when the reduced system is singular or the direction is not a descent direction.
  bool direction(std::span<const double> x, const StepObjective::Eval& e, const std::vector<char>& free,
                 std::vector<double>& d) {
    const std::size_t n = obj_.n();
    const double dx = obj_.grid().dx();
    std::vector<Eigen::Triplet<double>> s_trip;
    std::vector<Eigen::Triplet<double>> p_trip;
    std::vector<Eigen::Triplet<double>> m_trip;
    std::vector<double> part(2 * n, 0.0);
    Eigen::VectorXd part_edges = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * (n + 1)));
    std::vector<std::ptrdiff_t> col_of_edge(n + 1);
    std::size_t col = 0;
    for (int comp = 0; comp < 2; ++comp) {
      const std::size_t off = comp == 0 ? 0 : n;
      const std::size_t eoff = comp == 0 ? 0 : n + 1;
      const std::vector<double>& mom = comp == 0 ? e.moments_u : e.moments_v;
      const double coef = (comp == 0 ? 1.0 : p_.B) / p_.tau;
      std::vector<std::size_t> idx;
      double fixed_mass = 0.0;
      double free_mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (free[off + i]) {
          idx.push_back(i);
          free_mass += x[off + i];
        } else {
          fixed_mass += x[off + i];
        }
      }
      if (free_mass > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          part[off + i] = free[off + i] ? x[off + i] * fixed_mass / free_mass : -x[off + i];
        }
      }
      double cum = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        cum += dx * part[off + k - 1];
        part_edges[static_cast<Eigen::Index>(eoff + k)] = k == n ? 0.0 : cum;
      }
      for (std::size_t i = 0; i < n; ++i) {
        m_trip.emplace_back(eoff + i, eoff + i, coef * mom[3 * i]);
        m_trip.emplace_back(eoff + i + 1, eoff + i + 1, coef * mom[3 * i + 2]);
        m_trip.emplace_back(eoff + i, eoff + i + 1, coef * mom[3 * i + 1]);
        m_trip.emplace_back(eoff + i + 1, eoff + i, coef * mom[3 * i + 1]);
      }
      const std::size_t m = idx.size();
      if (m < 2) continue;
      // D_l for l = 1..m-1 sits between free cells idx[l-1] and idx[l]
      for (std::size_t l = 1; l < m; ++l) {
        const std::size_t c = col + l - 1;
        s_trip.emplace_back(off + idx[l - 1], c, 1.0 / dx);
        s_trip.emplace_back(off + idx[l], c, -1.0 / dx);
        for (std::size_t edge = idx[l - 1] + 1; edge <= idx[l]; ++edge) p_trip.emplace_back(eoff + edge, c, 1.0);
      }
      col += m - 1;
    }
    d.assign(2 * n, 0.0);
    if (col == 0) return false;
    const auto rows = static_cast<Eigen::Index>(2 * n);
    const auto erows = static_cast<Eigen::Index>(2 * (n + 1));
    const auto cols = static_cast<Eigen::Index>(col);
    Eigen::SparseMatrix<double> S(rows, cols);
    S.setFromTriplets(s_trip.begin(), s_trip.end());
    Eigen::SparseMatrix<double> P(erows, cols);
    P.setFromTriplets(p_trip.begin(), p_trip.end());
    Eigen::SparseMatrix<double> M(erows, erows);
    M.setFromTriplets(m_trip.begin(), m_trip.end());
    const Eigen::SparseMatrix<double> St = S.transpose();
    const Eigen::SparseMatrix<double> Pt = P.transpose();
    Eigen::SparseMatrix<double> R = St * obj_.energy_hessian() * S;
    R += Pt * M * P;
    const Eigen::Map<const Eigen::VectorXd> g(e.grad.data(), rows);
    const Eigen::Map<const Eigen::VectorXd> pv(part.data(), rows);
    Eigen::VectorXd rhs = -(St * (g + obj_.energy_hessian() * pv)) - Pt * (M * part_edges);
    solver_.compute(R);
    if (solver_.info() != Eigen::Success) return false;
    Eigen::VectorXd D = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success || !D.allFinite()) return false;
    Eigen::VectorXd dir = S * D + pv;
    double slope = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      d[i] = dir[static_cast<Eigen::Index>(i)];
      slope += d[i] * e.grad[i];
    }
    return slope < 0.0;
  }

 private:
  const StepObjective& obj_;
  ModelParams p_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

struct InnerResult {
  std::vector<double> x;
  double value = 0.0;
  double pg_norm = 0.0;
  std::size_t iters = 0;
  bool stalled = false;
  bool converged = false;
};

inline InnerResult minimize_step(const DensityPair& prev, const ModelParams& p, const JkoConfig& cfg) {
  const StepObjective obj(prev, p);
  const std::size_t n = obj.n();
  const double dx = obj.grid().dx();
  FreeSetNewton newton(obj, p);
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  constexpr double kRoundoff = 1e-13;
  constexpr int kStallCount = 5;
  // a stalled solve is only accepted this close to stationarity
  constexpr double kStallStationarity = 1e-6;
  const double eps_max = 1e-3 / obj.grid().length();

  InnerResult res;
  res.x.resize(2 * n);
  std::copy(prev.f.data().begin(), prev.f.data().end(), res.x.begin());
  std::copy(prev.g.data().begin(), prev.g.data().end(), res.x.begin() + static_cast<std::ptrdiff_t>(n));

  StepObjective::Eval ev = obj.evaluate(res.x);
  double pg_step = 1e-6;
  int stalled = 0;
  // predicted decrease -grad.d of the last Newton direction
  double decrement = std::numeric_limits<double>::infinity();
  std::vector<double> d;
  std::vector<double> trial(2 * n);
  std::vector<double> probe(2 * n);
  std::vector<char> free(2 * n);
  auto project = [&](std::vector<double>& y) {
    project_to_simplex(std::span<double>(y).subspan(0, n), dx);
    project_to_simplex(std::span<double>(y).subspan(n, n), dx);
    snap_vacuum(std::span<double>(y).subspan(0, n), dx);
    snap_vacuum(std::span<double>(y).subspan(n, n), dx);
  };

  for (std::size_t it = 0; it < cfg.inner_max_iters; ++it) {
    res.iters = it;
    res.pg_norm = projected_gradient_norm(res.x, ev.grad, obj.grid());
    if (res.pg_norm <= cfg.inner_tol * (1.0 + std::abs(ev.value))) break;

    // cells within eps of zero that the projected-gradient probe empties stay fixed
    for (std::size_t i = 0; i < 2 * n; ++i) probe[i] = res.x[i] - ev.grad[i] / dx;
    project(probe);
    double gap = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) gap = std::max(gap, std::abs(res.x[i] - probe[i]));
    const double eps = std::min(eps_max, gap);
    for (std::size_t i = 0; i < 2 * n; ++i) free[i] = res.x[i] > eps || probe[i] > 0.0 ? 1 : 0;

    const double f_old = ev.value;
    bool accepted = false;
    bool roundoff_step = false;
    decrement = std::numeric_limits<double>::infinity();
    if (newton.direction(res.x, ev, free, d)) {
      decrement = 0.0;
      for (std::size_t i = 0; i < 2 * n; ++i) decrement -= ev.grad[i] * d[i];
      // largest step along the ray that stays nonnegative (d conserves mass)
      double ray = 1.0;
      for (std::size_t i = 0; i < 2 * n; ++i) {
        if (d[i] < 0.0) ray = std::min(ray, res.x[i] / -d[i]);
      }
      double alpha = 1.0;
      bool try_ray = ray < 1.0 && ray > 0.0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        for (std::size_t i = 0; i < 2 * n; ++i) trial[i] = res.x[i] + alpha * d[i];
        project(trial);
        double slope = 0.0;
        for (std::size_t i = 0; i < 2 * n; ++i) slope += ev.grad[i] * (trial[i] - res.x[i]);
        const double f_new = slope < 0.0 ? obj.value(trial) : f_old;
        if (slope < 0.0 && f_new <= f_old + kArmijo * slope) {
          accepted = f_new < f_old;
          break;
        }
        if (alpha == 1.0 && slope < 0.0 && -slope < kRoundoff * (1.0 + std::abs(f_old))) {
          // decrease below rounding of F: fall back on the stationarity measure
          StepObjective::Eval ev_trial = obj.evaluate(trial);
          if (projected_gradient_norm(trial, ev_trial.grad, obj.grid()) < res.pg_norm) {
            res.x.swap(trial);
            ev = std::move(ev_trial);
            roundoff_step = true;
          }
          break;
        }
        if (try_ray) {
          // the full step left the orthant; next try the feasible ray step
          try_ray = false;
          alpha = ray;
          continue;
        }
        alpha *= cfg.step_shrink;
      }
    }
    if (roundoff_step) {
      res.iters = it + 1;
      continue;
    }
    if (!accepted) {
      // projected-gradient fallback with Armijo backtracking
      double s = pg_step * cfg.step_grow;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        for (std::size_t i = 0; i < 2 * n; ++i) trial[i] = res.x[i] - s * ev.grad[i] / dx;
        project(trial);
        double slope = 0.0;
        for (std::size_t i = 0; i < 2 * n; ++i) slope += ev.grad[i] * (trial[i] - res.x[i]);
        const double f_new = obj.value(trial);
        if (slope < 0.0 && f_new <= f_old + kArmijo * slope) {
          accepted = f_new < f_old;
          pg_step = s;
          break;
        }
        s *= cfg.step_shrink;
      }
    }
    if (!accepted) {
      // no decrease available at working precision: the stall rule holds from here on
      stalled = kStallCount;
      break;
    }

    res.x.swap(trial);
    ev = obj.evaluate(res.x);
    const double rel = (f_old - ev.value) / (1.0 + std::abs(ev.value));
    stalled = rel < cfg.inner_tol ? stalled + 1 : 0;
    res.iters = it + 1;
    if (stalled >= kStallCount) break;
  }
  res.value = ev.value;
  res.pg_norm = projected_gradient_norm(res.x, ev.grad, obj.grid());
  const double scale = 1.0 + std::abs(ev.value);
  res.stalled = stalled >= kStallCount;
  // near thin edge cells the transport curvature makes the L2 gradient mapping a poor
  // stationarity measure, so a stall also counts when Newton predicts no decrease
  res.converged = res.pg_norm <= cfg.inner_tol * scale ||
                  (res.stalled && (res.pg_norm <= kStallStationarity * scale || decrement <= cfg.inner_tol * scale));
  return res;
}

}  // namespace detail

/// F_tau(u, v) relative to the previous pair.
inline double step_objective(const DensityPair& prev, const DensityPair& next, const ModelParams& p) {
  const double wf = w2_distance(next.f, prev.f, 0);
  const double wg = w2_distance(next.g, prev.g, 0);
  return (wf * wf + p.B * wg * wg) / (2.0 * p.tau) + energy(next, p);
}

/// One minimizing-movement step from `prev`.
inline std::pair<DensityPair, StepReport> jko_step(const DensityPair& prev, const ModelParams& p,
                                                   const JkoConfig& cfg) {
  p.validate();
  cfg.validate();
  check_pair(prev, 1e-10);
  const Grid& grid = prev.grid();
  const std::size_t n = grid.size();

  detail::InnerResult inner = detail::minimize_step(prev, p, cfg);

  DensityPair next{GridField(grid), GridField(grid)};
  for (std::size_t i = 0; i < n; ++i) {
    next.f[i] = std::max(0.0, inner.x[i]);
    next.g[i] = std::max(0.0, inner.x[n + i]);
  }
  detail::snap_vacuum(std::span<double>(next.f.data().data(), n), grid.dx());
  detail::snap_vacuum(std::span<double>(next.g.data().data(), n), grid.dx());

  StepReport r;
  const std::size_t m = cfg.mass_points(grid);
  r.w2_f = w2_distance(next.f, prev.f, m);
  r.w2_g = w2_distance(next.g, prev.g, m);
  r.energy_before = energy(prev, p);
  r.energy_after = energy(next, p);
  r.entropy_f = entropy(next.f);
  r.entropy_g = entropy(next.g);
  r.inner_iters = inner.iters;
  r.objective = inner.value;
  r.pg_norm = inner.pg_norm;
  r.converged = inner.converged;
  const ElResidual el = el_residual(prev, next, p, test_square());
  r.el_residual_f = el.lhs_f;
  r.el_residual_g = el.lhs_g;
  r.el_bound_f = el.rhs_f;
  r.el_bound_g = el.rhs_g;
  const EntropyEstimate ee = step_entropy_estimate(prev, next, p, tol_disc(grid, m));
  r.entropy_lhs = ee.lhs;
  r.entropy_rhs = ee.rhs;
  r.entropy_estimate_ok = ee.ok;
  const FluxFields flux = flux_fields(next, p, cfg.flux_threshold(grid));
  r.wf_l2 = std::sqrt(l2_norm_sq(flux.w_f));
  r.wg_l2 = std::sqrt(l2_norm_sq(flux.w_g));

  if (!(inner.value <= step_objective(prev, prev, p) + 1e-10) || !inner.converged) {
    throw StepFailure("jko_step: inner solver did not converge (pg_norm " + detail::sci(inner.pg_norm) +
                          " after " + std::to_string(inner.iters) + " iterations)",
                      next, r);
  }
  return {std::move(next), r};
}

/// Iterates and step reports; states[k] is the pair at time k tau.
struct TrajectoryReport {
  ModelParams params;
  std::vector<DensityPair> states;
  std::vector<StepReport> steps;

  double tau() const { return params.tau; }

  /// Piecewise-constant interpolant: the pair of the step interval containing t.
  const DensityPair& eval_at(double t) const {
    if (!(t >= 0.0)) throw DomainError("eval_at: negative time");
    const double k = std::floor(t / params.tau + 1e-9);
    const std::size_t idx = static_cast<std::size_t>(std::min<double>(k, static_cast<double>(states.size() - 1)));
    return states[idx];
  }
};

inline TrajectoryReport run_trajectory(const DensityPair& init, const ModelParams& p, const JkoConfig& cfg,
                                       std::size_t steps) {
  if (steps == 0) throw ConfigError("run_trajectory: steps >= 1 required");
  TrajectoryReport traj;
  traj.params = p;
  traj.states.reserve(steps + 1);
  traj.states.push_back(init);
  for (std::size_t k = 0; k < steps; ++k) {
    auto [next, report] = jko_step(traj.states.back(), p, cfg);
    traj.states.push_back(std::move(next));
    traj.steps.push_back(report);
  }
  return traj;
}

}  // namespace muskat

#endif  // MUSKAT_JKO_HPP
