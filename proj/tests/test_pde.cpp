#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "muskat/pde_ref.hpp"

using namespace muskat;

namespace {

DensityPair smooth_positive(const Grid& g) {
  GridField f = GridField::sample(g, [](double x) { return 1.0 + 0.5 * std::cos(M_PI * x) + 0.2 * std::cos(3.0 * M_PI * x); });
  GridField h = GridField::sample(g, [](double x) { return 1.0 - 0.4 * std::cos(2.0 * M_PI * x); });
  f *= 1.0 / integrate(f);
  h *= 1.0 / integrate(h);
  return {f, h};
}

/// Coefficient of cos(pi x) in h - 1 (discrete cosines are orthogonal on cell centres).
double mode_amplitude(const GridField& h) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double c = std::cos(M_PI * h.grid().center(i));
    num += (h[i] - 1.0) * c;
    den += c * c;
  }
  return num / den;
}

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

Vec2 solve(const Mat2& m, const Vec2& b) {
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  return {(m[1][1] * b[0] - m[0][1] * b[1]) / det, (m[0][0] * b[1] - m[1][0] * b[0]) / det};
}

}  // namespace

TEST(PdeConfig, Validation) {
  const Grid g(1.0, 32);
  PdeConfig c;
  EXPECT_NO_THROW(c.validate(g));
  c.dt = 0.2 * g.dx();
  EXPECT_THROW(c.validate(g), ConfigError);
  c = PdeConfig{};
  c.theta = 0.3;
  EXPECT_THROW(c.validate(g), ConfigError);
  c = PdeConfig{};
  c.dt = 0.0;
  EXPECT_THROW(c.validate(g), ConfigError);
}

TEST(Pde, FlatStateIsStationary) {
  const Grid g(1.0, 64);
  const DensityPair flat{GridField::constant(g, 1.0), GridField::constant(g, 1.0)};
  PdeConfig c;
  c.t_end = 1e-3;
  const PdeRun run = pde_run(flat, ModelParams{}, c);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_NEAR(run.final_state().f[i], 1.0, 1e-11);
    EXPECT_NEAR(run.final_state().g[i], 1.0, 1e-11);
  }
  EXPECT_EQ(run.max_clipped, 0.0);
}

TEST(Pde, MassAndPositivityEveryStep) {
  const Grid g(1.0, 64);
  DensityPair s = smooth_positive(g);
  PdeConfig c;
  c.dt = 1e-4;
  for (int k = 0; k < 50; ++k) {
    const auto [next, info] = pde_step_report(s, ModelParams{}, c);
    EXPECT_NEAR(integrate(next.f), 1.0, 1e-12);
    EXPECT_NEAR(integrate(next.g), 1.0, 1e-12);
    for (double v : next.f.values()) EXPECT_GE(v, 0.0);
    EXPECT_FALSE(info.accuracy_warning);
    s = next;
  }
}

// Small cosine perturbation of the flat state: the frozen-mobility scheme advances the
// mode amplitudes by (I + dt M)^{-1} per step, M = lam [[A lam + a, B lam + b], [lam + c, lam + c]],
// lam the discrete Neumann eigenvalue; nonlinear corrections are O(eps^2).
TEST(Pde, LinearModeDecay) {
  const Grid g(1.0, 32);
  const ModelParams p;
  const double eps = 1e-4;
  DensityPair s{GridField::sample(g, [&](double x) { return 1.0 + eps * std::cos(M_PI * x); }),
                GridField::sample(g, [&](double x) { return 1.0 - 0.5 * eps * std::cos(M_PI * x); })};
  const double lam = 4.0 / (g.dx() * g.dx()) * std::pow(std::sin(0.5 * M_PI * g.dx()), 2);
  const Mat2 M = {{{lam * (p.A * lam + p.a), lam * (p.B * lam + p.b)}, {lam * (lam + p.c), lam * (lam + p.c)}}};
  PdeConfig c;
  c.dt = 1e-5;
  c.t_end = 2e-3;
  Vec2 v = {mode_amplitude(s.f), mode_amplitude(s.g)};
  const Mat2 I_dtM = {{{1.0 + c.dt * M[0][0], c.dt * M[0][1]}, {c.dt * M[1][0], 1.0 + c.dt * M[1][1]}}};
  for (std::size_t k = 0; k < c.steps(); ++k) v = solve(I_dtM, v);
  const DensityPair out = pde_run(s, p, c).final_state();
  EXPECT_NEAR(mode_amplitude(out.f), v[0], 1e-3 * eps);
  EXPECT_NEAR(mode_amplitude(out.g), v[1], 1e-3 * eps);
  EXPECT_LT(std::abs(v[0]), 0.9 * eps);  // the mode has visibly decayed
}

TEST(Pde, SnapshotsAtRequestedTimes) {
  const Grid g(1.0, 32);
  PdeConfig c;
  c.dt = 1e-4;
  c.t_end = 1e-2;
  const PdeRun run = pde_run(smooth_positive(g), ModelParams{}, c, {0.0, 5e-3});
  ASSERT_EQ(run.snapshots.size(), 3u);
  EXPECT_EQ(run.snapshots[0].t, 0.0);
  EXPECT_NEAR(run.snapshots[1].t, 5e-3, 1e-15);
  EXPECT_NEAR(run.snapshots[2].t, 1e-2, 1e-15);
  EXPECT_EQ(run.steps, 100u);
  for (const PdeSnapshot& s : run.snapshots) EXPECT_NEAR(s.energy, energy(s.state, ModelParams{}), 1e-12);
  EXPECT_TRUE(run.energy_nonincreasing);
}

TEST(Pde, SelfConvergenceOnSmoothData) {
  PdeConfig c;
  c.dt = 1e-4;
  c.t_end = 1e-2;
  const SelfConvergence sc = pde_self_convergence(smooth_positive, ModelParams{}, c, Grid(1.0, 32), 3);
  ASSERT_EQ(sc.diffs.size(), 2u);
  EXPECT_GE(sc.ratio(), 1.8);
  EXPECT_EQ(sc.error_estimate(), sc.diffs[0]);
}

TEST(Pde, RestrictionAveragesPairs) {
  const Grid fine(1.0, 16), coarse(1.0, 8);
  const DensityPair s = smooth_positive(fine);
  const GridField r = restrict_to(s.f, coarse);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r[i], 0.5 * (s.f[2 * i] + s.f[2 * i + 1]), 1e-15);
  EXPECT_NEAR(integrate(r), 1.0, 1e-14);
  EXPECT_THROW(restrict_to(s.f, Grid(1.0, 16)), ShapeError);
  EXPECT_EQ(pair_l2_distance(s, s), 0.0);
}

TEST(Pde, CrankNicolsonLinearMode) {
  const Grid g(1.0, 32);
  const double eps = 1e-4;
  const DensityPair s{GridField::sample(g, [&](double x) { return 1.0 + eps * std::cos(M_PI * x); }),
                      GridField::constant(g, 1.0)};
  PdeConfig half;
  half.dt = 2e-5;
  half.t_end = 2e-3;
  half.theta = 0.5;
  PdeConfig euler = half;
  euler.theta = 1.0;
  PdeConfig fine = euler;
  fine.dt = 1e-7;
  const double ref = mode_amplitude(pde_run(s, ModelParams{}, fine).final_state().f);
  const double cn = mode_amplitude(pde_run(s, ModelParams{}, half).final_state().f);
  const double be = mode_amplitude(pde_run(s, ModelParams{}, euler).final_state().f);
  EXPECT_LT(std::abs(cn - ref), std::abs(be - ref));
}
