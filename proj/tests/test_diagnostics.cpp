#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "muskat/diagnostics.hpp"

using namespace muskat;

namespace {

GridField bump(const Grid& g, double c, double r) {
  GridField h = GridField::sample(g, [&](double x) {
    const double s = (x - c) / r;
    return std::abs(s) >= 1.0 ? 0.0 : std::pow(1.0 - s * s, 3);
  });
  h *= 1.0 / integrate(h);
  return h;
}

DensityPair offset_bump(const Grid& g) { return {bump(g, 0.35, 0.25), bump(g, 0.65, 0.25)}; }

std::set<std::string> failed_set(const DiagnosticsRecord& r) {
  const std::vector<std::string> f = failed_verdicts(r);
  return {f.begin(), f.end()};
}

/// Shared offset-bump trajectory, computed once.
const TrajectoryReport& preset_run() {
  static const TrajectoryReport traj = run_trajectory(offset_bump(Grid(1.0, 128)), ModelParams{}, JkoConfig{}, 100);
  return traj;
}

constexpr double kDelta = 1e-6;

double preset_tol() { return tol_disc(Grid(1.0, 128), 512); }

}  // namespace

TEST(Diagnostics, FlatTrajectoryPassesEverything) {
  const Grid g(1.0, 32);
  const TrajectoryReport traj =
      run_trajectory({GridField::constant(g, 1.0), GridField::constant(g, 1.0)}, ModelParams{}, JkoConfig{}, 5);
  const DiagnosticsRecord r = run_diagnostics(traj, ModelParams{}, kDelta, tol_disc(g, 128));
  EXPECT_TRUE(failed_set(r).empty());
  EXPECT_LE(r.w2sq_sum, 1e-16);
  EXPECT_LE(r.laplacian_integral, 1e-20);
  EXPECT_EQ(r.verdicts.size(), 13u);
}

TEST(Diagnostics, PresetPasses) {
  const DiagnosticsRecord r = run_diagnostics(preset_run(), ModelParams{}, kDelta, preset_tol());
  EXPECT_TRUE(failed_set(r).empty());
  EXPECT_GT(r.verdicts.at("dissipation").slack, 0.0);
  EXPECT_GT(r.verdicts.at("energy_dissipation").slack, 0.0);
  EXPECT_TRUE(std::isfinite(r.moment_envelope_slope));
}

// Targets declared before running: a 1e-9 relative leak sits far below every
// tolerance except the 1e-12 mass check.
TEST(NegativeControl, MassLeakFailsOnlyMass) {
  TrajectoryReport leak = preset_run();
  std::mt19937_64 rng(7);
  const std::size_t k = 1 + rng() % (leak.states.size() - 1);
  leak.states[k].f *= 1.0 + 1e-9;
  const DiagnosticsRecord r = run_diagnostics(leak, ModelParams{}, kDelta, preset_tol());
  EXPECT_EQ(failed_set(r), (std::set<std::string>{"mass"})) << "leak at state " << k;
}

// Reversal keeps masses, moments and the recorded integrals but breaks every
// consequence of minimality.
TEST(NegativeControl, TimeReversalFailsVariationalVerdicts) {
  TrajectoryReport rev = preset_run();
  std::reverse(rev.states.begin(), rev.states.end());
  const DiagnosticsRecord r = run_diagnostics(rev, ModelParams{}, kDelta, preset_tol());
  const std::set<std::string> expected = {"dissipation", "energy", "energy_dissipation", "entropy_step",
                                          "euler_lagrange", "telescoping", "velocity_bound"};
  EXPECT_EQ(failed_set(r), expected);
}

TEST(NegativeControl, InflatedVelocityFailsEnergyDissipation) {
  const DiagnosticsRecord r = run_diagnostics(preset_run(), ModelParams{}, kDelta, preset_tol());
  std::vector<double> wf, wg;
  for (std::size_t k = 0; k < r.wf_l2_series.size(); ++k) {
    wf.push_back(100.0 * r.wf_l2_series[k] * r.wf_l2_series[k]);  // w scaled by 10
    wg.push_back(100.0 * r.wg_l2_series[k] * r.wg_l2_series[k]);
  }
  const Verdict v = check_energy_series(r.energy_series, wf, wg, r.tau, 1.0, preset_tol());
  EXPECT_FALSE(v.pass);
  EXPECT_LT(v.slack, 0.0);
}

TEST(NegativeControl, InflatedDissipationFailsOnlyWhenAsserted) {
  const DiagnosticsRecord r = run_diagnostics(preset_run(), ModelParams{}, kDelta, preset_tol());
  std::vector<double> d = r.dissipation_series;
  for (double& v : d) v *= 10.0;
  EXPECT_FALSE(check_dissipation_series(r.entropy_series, d, r.tau, true, preset_tol()).pass);
  const Verdict unasserted = check_dissipation_series(r.entropy_series, d, r.tau, false, preset_tol());
  EXPECT_TRUE(unasserted.pass);
  EXPECT_GT(unasserted.violations, 0u);
}

TEST(Diagnostics, GravityUnstableDissipationIsReported) {
  ModelParams p;
  p.a = 0.2;
  const Grid g(1.0, 64);
  const TrajectoryReport traj = run_trajectory(offset_bump(g), p, JkoConfig{}, 5);
  const Verdict v = check_dissipation_dem3(traj, p, tol_disc(g, 256));
  EXPECT_FALSE(v.asserted);
  EXPECT_TRUE(v.pass);
}

TEST(WeakForm, ConstantTestFunctionGivesZero) {
  const WeakFormResidual r = weak_form_residual(preset_run(), ModelParams{}, test_constant(1.0), 0.02);
  EXPECT_LE(r.res_f, 1e-13);
  EXPECT_LE(r.res_g, 1e-13);
  EXPECT_LE(r.res_f_origin, 1e-13);
}

TEST(WeakForm, ResidualIsSmallAgainstItsParts) {
  const TrajectoryReport& traj = preset_run();
  for (const TestFunction& xi : test_basket(1.0)) {
    const WeakFormResidual r = weak_form_residual(traj, ModelParams{}, xi, 0.04);
    const std::vector<double> cells = detail::cell_integrals(traj.states.front().grid(), xi);
    double moved = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) moved += std::abs((traj.states[40].f[i] - traj.states[0].f[i]) * cells[i]);
    EXPECT_LT(r.res_f, moved) << xi.name;
  }
}

TEST(Compare, IdenticalPairsHaveZeroError) {
  const DensityPair s = offset_bump(Grid(1.0, 32));
  const ErrorRow row = pair_errors(s, s, 0.5);
  EXPECT_EQ(row.l2(), 0.0);
  EXPECT_EQ(row.l1_f, 0.0);
}

TEST(Compare, MissingSnapshotThrows) {
  PdeRun run;
  run.snapshots.push_back({0.0, offset_bump(Grid(1.0, 32)), 0.0, 0.0, 0.0});
  TrajectoryReport traj;
  traj.states.push_back(offset_bump(Grid(1.0, 32)));
  EXPECT_EQ(compare_trajectories(traj, run, {0.0}).front().l2(), 0.0);
  EXPECT_THROW(compare_trajectories(traj, run, {0.5}), DomainError);
}

TEST(Refine, RejectsNonDecreasingList) {
  const DensityPair s = offset_bump(Grid(1.0, 32));
  EXPECT_THROW(tau_refinement_study(s, ModelParams{}, JkoConfig{}, {1e-3, 2e-3}, 0.01), ConfigError);
  EXPECT_TRUE(tau_refinement_study(s, ModelParams{}, JkoConfig{}, {1e-3}, 0.01).empty());
}

TEST(Refine, CauchyDistancesShrink) {
  const DensityPair s = offset_bump(Grid(1.0, 64));
  const std::vector<CauchyRow> rows = tau_refinement_study(s, ModelParams{}, JkoConfig{}, {4e-3, 2e-3, 1e-3}, 0.02);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[1].distance, rows[0].distance);
}
