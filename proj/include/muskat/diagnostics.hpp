#ifndef MUSKAT_DIAGNOSTICS_HPP
#define MUSKAT_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "muskat/errors.hpp"
#include "muskat/functionals.hpp"
#include "muskat/grid.hpp"
#include "muskat/jko.hpp"
#include "muskat/pde_ref.hpp"
#include "muskat/test_functions.hpp"
#include "muskat/transport1d.hpp"

namespace muskat {

/// Outcome of one named check. slack is the worst margin (allowed - observed);
/// negative exactly when the check fails.
struct Verdict {
  bool pass = true;
  bool asserted = true;  ///< false: both sides reported without judgment
  double slack = 0.0;
  double lhs = 0.0;  ///< at the worst time
  double rhs = 0.0;
  std::size_t violations = 0;
  std::string note;
};

/// Time integrals over the interpolant follow the discrete estimates: on the
/// window [tau, (N+1) tau) they sum the states 1..N.
struct DiagnosticsRecord {
  double tau = 0.0;
  std::vector<double> times;
  std::vector<double> mass_f;
  std::vector<double> mass_g;
  std::vector<double> energy_series;
  std::vector<double> entropy_series;  ///< H(f) + B H(g)
  std::vector<double> second_moment_series;  ///< int (f + g)(1 + x^2)
  std::vector<double> wf_l2_series;
  std::vector<double> wg_l2_series;
  std::vector<double> dissipation_series;  ///< D_H per state
  double w2sq_sum = 0.0;  ///< sum W2^2(f) + W2^2(g)
  double penalty_sum = 0.0;  ///< sum W2^2(f) + B W2^2(g)
  double moment_envelope_intercept = 0.0;
  double moment_envelope_slope = 0.0;
  double laplacian_integral = 0.0;
  double wfield_integral = 0.0;
  std::map<std::string, Verdict> verdicts;
};

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Unit-mass copy for transport distances of states that fail the mass check.
inline GridField normalized(const GridField& h) {
  const double m = integrate(h);
  GridField out = h;
  if (m > 0.0 && std::isfinite(m)) out *= 1.0 / m;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

/// Relative slack tol (|lhs| + |rhs|) around lhs <= rhs; keeps the smallest margin.
inline void accumulate(Verdict& v, double lhs, double rhs, double tol) {
  const double margin = rhs + tol * (std::abs(lhs) + std::abs(rhs)) - lhs;
  if (!(margin >= 0.0)) {
    ++v.violations;
    if (v.asserted) v.pass = false;
  }
  if (!(margin >= v.slack)) {
    v.slack = margin;
    v.lhs = lhs;
    v.rhs = rhs;
  }
}

}  // namespace detail

/// Estimates (i)-(vi) of the uniform bounds plus the telescoped penalty bound.
inline DiagnosticsRecord check_uniform_estimates(const TrajectoryReport& traj, const ModelParams& p,
                                                 double delta = 1e-6) {
  if (traj.states.empty()) throw DomainError("check_uniform_estimates: empty trajectory");
  DiagnosticsRecord r;
  r.tau = traj.tau();
  const std::size_t count = traj.states.size();
  for (std::size_t k = 0; k < count; ++k) {
    const DensityPair& s = traj.states[k];
    r.times.push_back(static_cast<double>(k) * r.tau);
    r.mass_f.push_back(integrate(s.f));
    r.mass_g.push_back(integrate(s.g));
    r.energy_series.push_back(energy(s, p));
    r.entropy_series.push_back(entropy(s.f) + p.B * entropy(s.g));
    r.second_moment_series.push_back(second_moment(s.f, 0.0) + second_moment(s.g, 0.0));
    const FluxFields flux = flux_fields(s, p, delta);
    r.wf_l2_series.push_back(std::sqrt(l2_norm_sq(flux.w_f)));
    r.wg_l2_series.push_back(std::sqrt(l2_norm_sq(flux.w_g)));
    r.dissipation_series.push_back(dissipation_DH(s.f, s.g, p));
  }

  // (i) unit masses
  Verdict mass;
  mass.slack = 1e-12;
  for (std::size_t k = 0; k < count; ++k) {
    const double err = std::max(std::abs(r.mass_f[k] - 1.0), std::abs(r.mass_g[k] - 1.0));
    const double margin = 1e-12 - err;
    if (!(margin >= 0.0)) {
      mass.pass = false;
      ++mass.violations;
    }
    if (!(margin >= mass.slack)) {
      mass.slack = margin;
      mass.lhs = err;
      mass.rhs = 1e-12;
    }
  }
  r.verdicts["mass"] = mass;

  // (ii) penalty sums
  for (std::size_t k = 0; k + 1 < count; ++k) {
    const DensityPair& a = traj.states[k];
    const DensityPair& b = traj.states[k + 1];
    const double wf = w2_distance(detail::normalized(b.f), detail::normalized(a.f), 0);
    const double wg = w2_distance(detail::normalized(b.g), detail::normalized(a.g), 0);
    r.w2sq_sum += wf * wf + wg * wg;
    r.penalty_sum += wf * wf + p.B * wg * wg;
  }
  Verdict w2;
  w2.pass = std::isfinite(r.w2sq_sum);
  w2.lhs = r.w2sq_sum;
  w2.rhs = r.w2sq_sum / r.tau;  // empirical C3
  w2.note = "sum W2^2 = C3 tau with the recorded C3";
  r.verdicts["w2sq_sum"] = w2;

  // telescoped form: sum (W2^2(f) + B W2^2(g)) / (2 tau) + E(N) <= E(0)
  Verdict tele;
  tele.slack = 1e-8 + r.energy_series.front() - r.energy_series.back() - r.penalty_sum / (2.0 * r.tau);
  tele.lhs = r.penalty_sum / (2.0 * r.tau) + r.energy_series.back();
  tele.rhs = r.energy_series.front();
  tele.pass = tele.slack >= 0.0;
  tele.violations = tele.pass ? 0 : 1;
  r.verdicts["telescoping"] = tele;

  // (iii) energy below its initial value
  Verdict en;
  en.slack = 1e-10;
  for (std::size_t k = 0; k < count; ++k) {
    const double margin = r.energy_series.front() + 1e-10 - r.energy_series[k];
    if (!(margin >= 0.0)) {
      en.pass = false;
      ++en.violations;
    }
    if (!(margin >= en.slack)) {
      en.slack = margin;
      en.lhs = r.energy_series[k];
      en.rhs = r.energy_series.front();
    }
  }
  r.verdicts["energy"] = en;

  // (iv) smallest affine envelope M(0) + s T over the recorded second moments
  r.moment_envelope_intercept = r.second_moment_series.front();
  for (std::size_t k = 1; k < count; ++k) {
    const double s = (r.second_moment_series[k] - r.moment_envelope_intercept) / r.times[k];
    r.moment_envelope_slope = std::max(r.moment_envelope_slope, s);
  }
  Verdict mom;
  mom.pass = detail::all_finite(r.second_moment_series);
  mom.lhs = r.moment_envelope_intercept;
  mom.rhs = r.moment_envelope_slope;
  mom.note = "envelope intercept (lhs) and slope (rhs)";
  r.verdicts["second_moment"] = mom;

  // (v) and (vi) on [tau, (N+1) tau)
  for (std::size_t k = 1; k < count; ++k) {
    const DensityPair& s = traj.states[k];
    r.laplacian_integral += r.tau * (l2_norm_sq(laplacian(s.f)) + l2_norm_sq(laplacian(s.g)));
    r.wfield_integral += r.tau * (r.wf_l2_series[k] * r.wf_l2_series[k] + r.wg_l2_series[k] * r.wg_l2_series[k]);
  }
  Verdict lap;
  lap.pass = std::isfinite(r.laplacian_integral);
  lap.lhs = r.laplacian_integral;
  lap.rhs = r.laplacian_integral / (1.0 + r.times.back());
  lap.note = "integral (lhs) and its ratio to 1 + T (rhs)";
  r.verdicts["laplacian_integral"] = lap;
  Verdict wint;
  wint.pass = std::isfinite(r.wfield_integral);
  wint.lhs = r.wfield_integral;
  wint.rhs = r.energy_series.front() - r.energy_series.back();
  wint.note = "integral (lhs) against the energy drop (rhs)";
  r.verdicts["wfield_integral"] = wint;
  return r;
}

/// H(f_N) + B H(g_N) + tau sum_{n=1}^N D_H(n) <= H(f_0) + B H(g_0) at every N.
inline Verdict check_dissipation_series(const std::vector<double>& entropy_series,
                                        const std::vector<double>& dissipation_series, double tau, bool assert_it,
                                        double tol) {
  Verdict v;
  v.asserted = assert_it;
  v.slack = std::numeric_limits<double>::infinity();
  double integral = 0.0;
  for (std::size_t k = 1; k < entropy_series.size(); ++k) {
    integral += tau * dissipation_series[k];
    detail::accumulate(v, entropy_series[k] + integral, entropy_series.front(), tol);
  }
  if (entropy_series.size() < 2) v.slack = 0.0;
  if (!assert_it) v.note = "a < b: reported without assertion";
  return v;
}

inline Verdict check_dissipation_dem3(const TrajectoryReport& traj, const ModelParams& p, double tol) {
  std::vector<double> h;
  std::vector<double> d;
  for (const DensityPair& s : traj.states) {
    h.push_back(entropy(s.f) + p.B * entropy(s.g));
    d.push_back(dissipation_DH(s.f, s.g, p));
  }
  return check_dissipation_series(h, d, traj.tau(), p.gravity_stable(), tol);
}

/// E(N) + 1/2 tau sum_{n=1}^N (||w_f||^2 + B ||w_g||^2) <= E(0) at every N.
inline Verdict check_energy_series(const std::vector<double>& energy_series, const std::vector<double>& wf_sq,
                                   const std::vector<double>& wg_sq, double tau, double B, double tol) {
  Verdict v;
  v.slack = std::numeric_limits<double>::infinity();
  double integral = 0.0;
  for (std::size_t k = 1; k < energy_series.size(); ++k) {
    integral += tau * (wf_sq[k] + B * wg_sq[k]);
    detail::accumulate(v, energy_series[k] + 0.5 * integral, energy_series.front(), tol);
  }
  if (energy_series.size() < 2) v.slack = 0.0;
  return v;
}

inline Verdict check_energy_dem4(const TrajectoryReport& traj, const ModelParams& p, double delta, double tol) {
  std::vector<double> e;
  std::vector<double> wf;
  std::vector<double> wg;
  for (const DensityPair& s : traj.states) {
    e.push_back(energy(s, p));
    const FluxFields flux = flux_fields(s, p, delta);
    wf.push_back(l2_norm_sq(flux.w_f));
    wg.push_back(l2_norm_sq(flux.w_g));
  }
  return check_energy_series(e, wf, wg, traj.tau(), p.B, tol);
}

/// Per-step consequences of minimality: Euler-Lagrange inequality over the test
/// basket, velocity bound tau ||w|| <= W2 (on at least `velocity_fraction` of the
/// steps), and the one-step entropy estimate (asserted only when a >= b).
struct StepChecks {
  Verdict euler_lagrange;
  Verdict velocity_bound;
  Verdict entropy_step;
  std::vector<std::size_t> velocity_violations;  ///< 1-based step indices
};

inline StepChecks check_steps(const TrajectoryReport& traj, const ModelParams& p, double delta, double tol,
                              double velocity_fraction = 0.95) {
  StepChecks out;
  out.euler_lagrange.slack = std::numeric_limits<double>::infinity();
  out.entropy_step.slack = std::numeric_limits<double>::infinity();
  out.entropy_step.asserted = p.gravity_stable();
  if (!p.gravity_stable()) out.entropy_step.note = "a < b: reported without assertion";
  if (traj.states.empty()) throw DomainError("check_steps: empty trajectory");
  const std::vector<TestFunction> basket = test_basket(traj.states.front().grid().length());
  std::size_t steps = 0;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const DensityPair& a = traj.states[k];
    const DensityPair& b = traj.states[k + 1];
    for (const TestFunction& xi : basket) {
      const ElResidual el = el_residual(a, b, p, xi);
      // roundoff in the cancelling terms enters through their size, not through lhs
      for (const auto& [lhs, rhs, scale] : {std::tuple{el.lhs_f, el.rhs_f, el.scale_f},
                                           std::tuple{el.lhs_g, el.rhs_g, el.scale_g}}) {
        const double margin = rhs + tol * scale - lhs;
        Verdict& v = out.euler_lagrange;
        if (!(margin >= 0.0)) {
          v.pass = false;
          ++v.violations;
        }
        if (!(margin >= v.slack)) {
          v.slack = margin;
          v.lhs = lhs;
          v.rhs = rhs;
        }
      }
    }
    const FluxFields flux = flux_fields(b, p, delta);
    const double wf = w2_distance(detail::normalized(b.f), detail::normalized(a.f), 0);
    const double wg = w2_distance(detail::normalized(b.g), detail::normalized(a.g), 0);
    const double vf = p.tau * std::sqrt(l2_norm_sq(flux.w_f));
    const double vg = p.tau * std::sqrt(l2_norm_sq(flux.w_g));
    const bool ok = vf <= wf * (1.0 + tol) && vg <= wg * (1.0 + tol);
    if (!ok) out.velocity_violations.push_back(k + 1);
    for (const auto& [num, den] : {std::pair{vf, wf}, std::pair{vg, wg}}) {
      const double ratio = den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      worst_ratio = std::max(worst_ratio, ratio);
    }
    const EntropyEstimate e = step_entropy_estimate(a, b, p, tol);
    detail::accumulate(out.entropy_step, e.lhs, e.rhs, tol);
    ++steps;
  }
  if (steps == 0) {
    out.euler_lagrange.slack = 0.0;
    out.entropy_step.slack = 0.0;
  }
  Verdict& vel = out.velocity_bound;
  const double fraction =
      steps == 0 ? 1.0 : 1.0 - static_cast<double>(out.velocity_violations.size()) / static_cast<double>(steps);
  vel.lhs = fraction;
  vel.rhs = velocity_fraction;
  vel.slack = fraction - velocity_fraction;
  vel.pass = vel.slack >= 0.0;
  vel.violations = out.velocity_violations.size();
  vel.note = "fraction of steps within the bound (lhs), worst tau||w||/W2 = " + std::to_string(worst_ratio);
  if (!out.velocity_violations.empty()) {
    vel.note += "; violating steps:";
    for (std::size_t s : out.velocity_violations) vel.note += " " + std::to_string(s);
  }
  return out;
}

/// j = sqrt(rho) w recomputed on every state; the identity must hold bitwise.
inline Verdict check_flux_identity(const TrajectoryReport& traj, const ModelParams& p, double delta) {
  Verdict v;
  for (const DensityPair& s : traj.states) {
    const FluxFields flux = flux_fields(s, p, delta);
    for (std::size_t i = 0; i < s.f.size(); ++i) {
      const double ef = std::abs(flux.j_f[i] - std::sqrt(std::max(s.f[i], 0.0)) * flux.w_f[i]);
      const double eg = std::abs(flux.j_g[i] - std::sqrt(std::max(s.g[i], 0.0)) * flux.w_g[i]);
      const double err = std::max(ef, eg);
      if (!(err == 0.0)) {
        v.pass = false;
        ++v.violations;
        v.lhs = std::max(v.lhs, err);
      }
    }
  }
  v.slack = 0.0 - v.lhs;
  return v;
}

/// Uniform estimates, both dissipation inequalities and the per-step checks in one verdict map.
inline DiagnosticsRecord run_diagnostics(const TrajectoryReport& traj, const ModelParams& p, double delta,
                                         double tol) {
  DiagnosticsRecord r = check_uniform_estimates(traj, p, delta);
  r.verdicts["dissipation"] = check_dissipation_dem3(traj, p, tol);
  r.verdicts["energy_dissipation"] = check_energy_dem4(traj, p, delta, tol);
  StepChecks sc = check_steps(traj, p, delta, tol);
  r.verdicts["euler_lagrange"] = sc.euler_lagrange;
  r.verdicts["velocity_bound"] = sc.velocity_bound;
  r.verdicts["entropy_step"] = sc.entropy_step;
  r.verdicts["flux_identity"] = check_flux_identity(traj, p, delta);
  return r;
}

inline std::vector<std::string> failed_verdicts(const DiagnosticsRecord& r) {
  std::vector<std::string> out;
  for (const auto& [name, v] : r.verdicts) {
    if (!v.pass) out.push_back(name);
  }
  return out;
}

/// Residual of the weak formulation at t = N tau for one test function.
///
/// res = |int (f_N - f_0) xi + tau sum_{n=1}^N int f_n (mu_f)' xi'|; the *_origin values
/// use the window [0, N tau) instead, i.e. the states 0..N-1.
struct WeakFormResidual {
  double res_f = 0.0;
  double res_g = 0.0;
  double res_f_origin = 0.0;
  double res_g_origin = 0.0;
};

inline WeakFormResidual weak_form_residual(const TrajectoryReport& traj, const ModelParams& p,
                                           const TestFunction& xi, double t) {
  if (traj.states.empty()) throw DomainError("weak_form_residual: empty trajectory");
  if (!(t >= 0.0)) throw DomainError("weak_form_residual: negative time");
  const std::size_t last = traj.states.size() - 1;
  const std::size_t N = std::min<std::size_t>(last, static_cast<std::size_t>(std::floor(t / traj.tau() + 1e-9)));
  const DensityPair& s0 = traj.states.front();
  const DensityPair& sN = traj.states[N];
  const std::vector<double> cells = detail::cell_integrals(s0.grid(), xi);
  double mf = 0.0;
  double mg = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    mf += (sN.f[i] - s0.f[i]) * cells[i];
    mg += (sN.g[i] - s0.g[i]) * cells[i];
  }
  std::vector<std::pair<double, double>> ops;
  for (std::size_t k = 0; k <= N; ++k) ops.push_back(weak_operator(traj.states[k], p, xi));
  WeakFormResidual r;
  double sf = 0.0;
  double sg = 0.0;
  double of = 0.0;
  double og = 0.0;
  for (std::size_t k = 0; k <= N; ++k) {
    if (k >= 1) {
      sf += ops[k].first;
      sg += ops[k].second;
    }
    if (k < N) {
      of += ops[k].first;
      og += ops[k].second;
    }
  }
  r.res_f = std::abs(mf + traj.tau() * sf);
  r.res_g = std::abs(mg + traj.tau() * sg);
  r.res_f_origin = std::abs(mf + traj.tau() * of);
  r.res_g_origin = std::abs(mg + traj.tau() * og);
  return r;
}

/// Pointwise differences of two pairs on the same grid.
struct ErrorRow {
  double t = 0.0;
  double l2_f = 0.0;
  double l2_g = 0.0;
  double l1_f = 0.0;
  double l1_g = 0.0;

  double l2() const { return std::sqrt(l2_f * l2_f + l2_g * l2_g); }
};

inline ErrorRow pair_errors(const DensityPair& x, const DensityPair& y, double t) {
  require_same_grid(x.f, y.f);
  require_same_grid(x.g, y.g);
  ErrorRow row;
  row.t = t;
  const double dx = x.grid().dx();
  for (std::size_t i = 0; i < x.f.size(); ++i) {
    const double df = x.f[i] - y.f[i];
    const double dg = x.g[i] - y.g[i];
    row.l2_f += df * df;
    row.l2_g += dg * dg;
    row.l1_f += std::abs(df);
    row.l1_g += std::abs(dg);
  }
  row.l2_f = std::sqrt(dx * row.l2_f);
  row.l2_g = std::sqrt(dx * row.l2_g);
  row.l1_f *= dx;
  row.l1_g *= dx;
  return row;
}

/// JKO interpolant against PDE snapshots at the requested times.
inline std::vector<ErrorRow> compare_trajectories(const TrajectoryReport& jko, const PdeRun& pde,
                                                  const std::vector<double>& times) {
  std::vector<ErrorRow> out;
  for (double t : times) {
    const PdeSnapshot* match = nullptr;
    for (const PdeSnapshot& s : pde.snapshots) {
      if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) match = &s;
    }
    if (match == nullptr) throw DomainError("compare_trajectories: no PDE snapshot at t = " + std::to_string(t));
    out.push_back(pair_errors(jko.eval_at(t), match->state, t));
  }
  return out;
}

/// Cross-method errors for a list of step sizes against one reference state at t.
struct ConvergenceTable {
  std::vector<double> taus;
  std::vector<ErrorRow> errors;
  bool monotone = true;  ///< L2 error decreases along the list
};

inline ConvergenceTable jko_against_reference(const DensityPair& init, const ModelParams& p, const JkoConfig& cfg,
                                              const std::vector<double>& taus, const DensityPair& reference,
                                              double t) {
  ConvergenceTable table;
  for (double tau : taus) {
    ModelParams q = p;
    q.tau = tau;
    const auto steps = static_cast<std::size_t>(std::llround(t / tau));
    const TrajectoryReport traj = run_trajectory(init, q, cfg, std::max<std::size_t>(steps, 1));
    table.taus.push_back(tau);
    table.errors.push_back(pair_errors(traj.eval_at(t), reference, t));
  }
  for (std::size_t k = 1; k < table.errors.size(); ++k) {
    if (!(table.errors[k].l2() < table.errors[k - 1].l2())) table.monotone = false;
  }
  return table;
}

/// Pairwise L2 distances of interpolants at t_probe for successive step sizes.
struct CauchyRow {
  double tau_coarse = 0.0;
  double tau_fine = 0.0;
  double distance = 0.0;
};

inline std::vector<CauchyRow> tau_refinement_study(const DensityPair& init, const ModelParams& p,
                                                   const JkoConfig& cfg, const std::vector<double>& tau_list,
                                                   double t_probe) {
  for (std::size_t k = 1; k < tau_list.size(); ++k) {
    if (!(tau_list[k] < tau_list[k - 1])) throw ConfigError("tau_refinement_study: tau_list must decrease strictly");
  }
  std::vector<CauchyRow> rows;
  if (tau_list.size() < 2) return rows;
  std::vector<DensityPair> probes;
  for (double tau : tau_list) {
    ModelParams q = p;
    q.tau = tau;
    const auto steps = static_cast<std::size_t>(std::floor(t_probe / tau + 1e-9));
    const TrajectoryReport traj = run_trajectory(init, q, cfg, std::max<std::size_t>(steps, 1));
    probes.push_back(traj.eval_at(t_probe));
  }
  for (std::size_t k = 0; k + 1 < probes.size(); ++k) {
    rows.push_back({tau_list[k], tau_list[k + 1], pair_l2_distance(probes[k], probes[k + 1])});
  }
  return rows;
}

}  // namespace muskat

#endif  // MUSKAT_DIAGNOSTICS_HPP
