#ifndef MUSKAT_PDE_REF_HPP
#define MUSKAT_PDE_REF_HPP

#include <lapacke.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "muskat/errors.hpp"
#include "muskat/functionals.hpp"
#include "muskat/grid.hpp"

namespace muskat {

/// Time stepping of the finite-difference reference solver.
struct PdeConfig {
  double dt = 1e-5;
  double t_end = 0.1;
  double theta = 1.0;  ///< 1 is backward Euler

  /// dt <= 0.1 dx is the budget the linearized scheme was checked against.
  void validate(const Grid& grid) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("pde: dt > 0 required");
    if (dt > 0.1 * grid.dx() * (1.0 + 1e-12)) {
      throw ConfigError("pde: dt = " + std::to_string(dt) + " exceeds the budget 0.1*dx = " +
                        std::to_string(0.1 * grid.dx()));
    }
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("pde: theta must lie in [1/2, 1]");
    if (!(t_end >= dt)) throw ConfigError("pde: t_end >= dt required");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }
};

/// Mass removed by clipping negative cells, before renormalization.
struct PdeStepInfo {
  double clipped_f = 0.0;
  double clipped_g = 0.0;
  bool accuracy_warning = false;  ///< clipped mass above 1e-6
};

namespace detail {

/// Rows of a matrix with bandwidth 2 (five diagonals), stored as band[i][j - i + 2].
using Penta = std::vector<std::array<double, 5>>;

/// (G^T diag(m) G) (kappa G^T G + s I) with m the arithmetic-mean edge mobility of rho
/// and G the edge gradient; G^T G is minus the reflecting Laplacian. Columns sum to
/// zero, so the operator moves no mass, and it annihilates constants.
inline Penta mobility_times_potential(const GridField& rho, double kappa, double s) {
  const auto n = static_cast<std::ptrdiff_t>(rho.size());
  const double inv = 1.0 / (rho.grid().dx() * rho.grid().dx());
  auto edge_m = [&](std::ptrdiff_t e) {  // edge e between cells e and e+1
    return e < 0 || e + 1 >= n ? 0.0 : 0.5 * (rho[static_cast<std::size_t>(e)] + rho[static_cast<std::size_t>(e + 1)]);
  };
  auto unit = [&](std::ptrdiff_t e) { return e < 0 || e + 1 >= n ? 0.0 : 1.0; };
  auto tri = [&](std::ptrdiff_t i, std::ptrdiff_t j, auto weight) {  // (G^T diag(w) G)_{ij}
    if (i == j) return (weight(i - 1) + weight(i)) * inv;
    if (j == i + 1) return -weight(i) * inv;
    if (j == i - 1) return -weight(j) * inv;
    return 0.0;
  };
  Penta out(rho.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - 2); j <= std::min(n - 1, i + 2); ++j) {
      double v = 0.0;
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - 1); k <= std::min(n - 1, i + 1); ++k) {
        v += tri(i, k, edge_m) * (kappa * tri(k, j, unit) + (k == j ? s : 0.0));
      }
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - i + 2)] = v;
    }
  }
  return out;
}

inline std::vector<double> apply(const Penta& m, std::span<const double> x) {
  const auto n = static_cast<std::ptrdiff_t>(m.size());
  std::vector<double> y(m.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - 2); j <= std::min(n - 1, i + 2); ++j) {
      y[static_cast<std::size_t>(i)] += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - i + 2)] *
                                        x[static_cast<std::size_t>(j)];
    }
  }
  return y;
}

inline double clip_and_renormalize(GridField& h) {
  const double dx = h.grid().dx();
  double clipped = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < 0.0) {
      clipped -= dx * h[i];
      h[i] = 0.0;
    }
    mass += dx * h[i];
  }
  if (!(mass > 0.0)) throw SolverError("pde_step: component lost all mass");
  h *= 1.0 / mass;
  return clipped;
}

}  // namespace detail

/// One linearized theta step of
///   f_t = (f (-A f''' - B g''' + a f' + b g'))',  g_t = (g (-f''' - g''' + c f' + c g'))'
/// with mobilities frozen at the current level and no flux through the walls.
inline std::pair<DensityPair, PdeStepInfo> pde_step_report(const DensityPair& pair, const ModelParams& p,
                                                           const PdeConfig& cfg) {
  p.validate();
  const Grid& grid = pair.grid();
  cfg.validate(grid);
  check_pair(pair, 1e-10);
  const std::size_t n = grid.size();

  // f_t = -Sf (Kff f + Kfg g),  g_t = -Sg Kg (f + g)
  const detail::Penta ff = detail::mobility_times_potential(pair.f, p.A, p.a);
  const detail::Penta fg = detail::mobility_times_potential(pair.f, p.B, p.b);
  const detail::Penta gg = detail::mobility_times_potential(pair.g, 1.0, p.c);

  // interleaved unknowns (f_0, g_0, f_1, ...) keep the bandwidth at 5 on both sides
  const auto dim = static_cast<lapack_int>(2 * n);
  constexpr lapack_int kl = 5;
  constexpr lapack_int ku = 5;
  constexpr lapack_int ldab = 2 * kl + ku + 1;
  std::vector<double> ab(static_cast<std::size_t>(ldab) * 2 * n, 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& {
    return ab[c * static_cast<std::size_t>(ldab) + static_cast<std::size_t>(kl + ku) + r - c];
  };
  const double imp = cfg.theta * cfg.dt;
  const double expl = (1.0 - cfg.theta) * cfg.dt;
  for (std::size_t i = 0; i < n; ++i) {
    at(2 * i, 2 * i) += 1.0;
    at(2 * i + 1, 2 * i + 1) += 1.0;
    for (std::size_t d = 0; d < 5; ++d) {
      if (i + d < 2 || i + d - 2 >= n) continue;
      const std::size_t j = i + d - 2;
      at(2 * i, 2 * j) += imp * ff[i][d];
      at(2 * i, 2 * j + 1) += imp * fg[i][d];
      at(2 * i + 1, 2 * j) += imp * gg[i][d];
      at(2 * i + 1, 2 * j + 1) += imp * gg[i][d];
    }
  }

  std::vector<double> rhs(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[2 * i] = pair.f[i];
    rhs[2 * i + 1] = pair.g[i];
  }
  if (expl > 0.0) {
    const auto a1 = detail::apply(ff, pair.f.values());
    const auto a2 = detail::apply(fg, pair.g.values());
    const auto b1 = detail::apply(gg, pair.f.values());
    const auto b2 = detail::apply(gg, pair.g.values());
    for (std::size_t i = 0; i < n; ++i) {
      rhs[2 * i] -= expl * (a1[i] + a2[i]);
      rhs[2 * i + 1] -= expl * (b1[i] + b2[i]);
    }
  }

  std::vector<lapack_int> piv(2 * n);
  const lapack_int info =
      LAPACKE_dgbsv(LAPACK_COL_MAJOR, dim, kl, ku, 1, ab.data(), ldab, piv.data(), rhs.data(), dim);
  if (info != 0) throw SolverError("pde_step: banded solve failed (info " + std::to_string(info) + ")");

  DensityPair next{GridField(grid), GridField(grid)};
  for (std::size_t i = 0; i < n; ++i) {
    next.f[i] = rhs[2 * i];
    next.g[i] = rhs[2 * i + 1];
  }
  if (!next.f.all_finite() || !next.g.all_finite()) throw SolverError("pde_step: non-finite solution");
  PdeStepInfo step;
  step.clipped_f = detail::clip_and_renormalize(next.f);
  step.clipped_g = detail::clip_and_renormalize(next.g);
  step.accuracy_warning = std::max(step.clipped_f, step.clipped_g) > 1e-6;
  return {std::move(next), step};
}

inline DensityPair pde_step(const DensityPair& pair, const ModelParams& p, const PdeConfig& cfg) {
  return pde_step_report(pair, p, cfg).first;
}

struct PdeSnapshot {
  double t = 0.0;
  DensityPair state;
  double energy = 0.0;
  double entropy_f = 0.0;
  double entropy_g = 0.0;
};

struct PdeRun {
  std::vector<PdeSnapshot> snapshots;
  std::size_t steps = 0;
  double max_clipped = 0.0;
  std::size_t warning_steps = 0;
  /// Largest per-step energy increase relative to E(init); the scheme is not
  /// energy-stable by construction, so this is recorded rather than enforced.
  double worst_energy_rise = 0.0;
  bool energy_nonincreasing = true;  ///< every rise below 1e-6 E(init)

  const DensityPair& final_state() const { return snapshots.back().state; }
};

/// Runs to cfg.t_end. Output times are rounded to the nearest step; t_end is always kept.
inline PdeRun pde_run(const DensityPair& init, const ModelParams& p, const PdeConfig& cfg,
                      std::vector<double> output_times = {}) {
  cfg.validate(init.grid());
  const std::size_t steps = cfg.steps();
  std::vector<std::size_t> marks;
  for (double t : output_times) {
    if (!(t >= 0.0) || t > cfg.t_end * (1.0 + 1e-12)) throw ConfigError("pde_run: output time outside [0, t_end]");
    marks.push_back(static_cast<std::size_t>(std::llround(t / cfg.dt)));
  }
  marks.push_back(steps);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  PdeRun run;
  run.steps = steps;
  auto snap = [&](std::size_t k, const DensityPair& s) {
    run.snapshots.push_back({static_cast<double>(k) * cfg.dt, s, energy(s, p), entropy(s.f), entropy(s.g)});
  };
  DensityPair state = init;
  const double e0 = energy(init, p);
  double e_prev = e0;
  std::size_t next_mark = 0;
  if (marks[next_mark] == 0) {
    snap(0, state);
    ++next_mark;
  }
  for (std::size_t k = 1; k <= steps; ++k) {
    auto [next, info] = pde_step_report(state, p, cfg);
    state = std::move(next);
    run.max_clipped = std::max({run.max_clipped, info.clipped_f, info.clipped_g});
    run.warning_steps += info.accuracy_warning ? 1 : 0;
    const double e = energy(state, p);
    const double rise = (e - e_prev) / std::max(std::abs(e0), 1e-300);
    run.worst_energy_rise = std::max(run.worst_energy_rise, rise);
    if (rise > 1e-6) run.energy_nonincreasing = false;
    e_prev = e;
    if (next_mark < marks.size() && marks[next_mark] == k) {
      snap(k, state);
      ++next_mark;
    }
  }
  return run;
}

/// Cell averages of a field on a grid with twice as many cells.
inline GridField restrict_to(const GridField& fine, const Grid& coarse) {
  if (fine.size() != 2 * coarse.size()) throw ShapeError("restrict_to: fine grid must have 2n cells");
  GridField out(coarse);
  for (std::size_t i = 0; i < coarse.size(); ++i) out[i] = 0.5 * (fine[2 * i] + fine[2 * i + 1]);
  return out;
}

/// L2 distance of both components, sqrt(||df||^2 + ||dg||^2).
inline double pair_l2_distance(const DensityPair& x, const DensityPair& y) {
  return std::sqrt(l2_norm_sq(x.f - y.f) + l2_norm_sq(x.g - y.g));
}

/// Differences between runs at (dt, dx), (dt/2, dx/2), ... measured on the coarser grid.
///
/// diffs[k] = ||u_k - R u_{k+1}||; diffs[0] is the error estimate reported for the
/// coarsest run.
struct SelfConvergence {
  std::vector<std::size_t> cells;
  std::vector<double> diffs;

  double error_estimate() const { return diffs.front(); }
  double ratio() const { return diffs.size() < 2 ? 0.0 : diffs[0] / diffs[1]; }
};

inline SelfConvergence pde_self_convergence(const std::function<DensityPair(const Grid&)>& make_init,
                                            const ModelParams& p, const PdeConfig& cfg, const Grid& coarse,
                                            std::size_t levels = 2) {
  if (levels < 2) throw ConfigError("pde_self_convergence: at least two levels required");
  SelfConvergence out;
  std::vector<DensityPair> finals;
  PdeConfig c = cfg;
  for (std::size_t l = 0; l < levels; ++l) {
    const Grid grid(coarse.length(), coarse.size() << l);
    out.cells.push_back(grid.size());
    finals.push_back(pde_run(make_init(grid), p, c).final_state());
    c.dt *= 0.5;
  }
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    const Grid& g = finals[l].grid();
    const DensityPair r{restrict_to(finals[l + 1].f, g), restrict_to(finals[l + 1].g, g)};
    out.diffs.push_back(pair_l2_distance(finals[l], r));
  }
  return out;
}

}  // namespace muskat

#endif  // MUSKAT_PDE_REF_HPP
