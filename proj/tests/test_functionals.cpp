#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "muskat/functionals.hpp"

using namespace muskat;

namespace {

std::string message_of(const ModelParams& p) {
  try {
    p.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

DensityPair random_pair(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  DensityPair s{GridField(g), GridField(g)};
  for (double& v : s.f.data()) v = u(rng);
  for (double& v : s.g.data()) v = u(rng);
  s.f *= 1.0 / integrate(s.f);
  s.g *= 1.0 / integrate(s.g);
  return s;
}

}  // namespace

TEST(ModelParams, DefaultsValid) {
  EXPECT_NO_THROW(ModelParams{}.validate());
  EXPECT_TRUE(ModelParams{}.gravity_stable());
}

TEST(ModelParams, NamesViolatedConstraint) {
  ModelParams p;
  p.A = p.B;
  EXPECT_NE(message_of(p).find("A > B required"), std::string::npos);
  p = ModelParams{};
  p.c = 0.7;
  EXPECT_NE(message_of(p).find("cB=b"), std::string::npos);
  p = ModelParams{};
  p.tau = 0.0;
  EXPECT_NE(message_of(p).find("tau > 0"), std::string::npos);
  p = ModelParams{};
  p.a = -1.0;
  EXPECT_FALSE(message_of(p).empty());
  p = ModelParams{};
  p.B = 0.0;
  p.b = 0.0;
  EXPECT_FALSE(message_of(p).empty());
}

TEST(Functionals, FlatValues) {
  const Grid g(2.0, 16);
  const ModelParams p;
  const GridField flat = GridField::constant(g, 0.5);
  // (a-b) ||f||^2 + b ||2f||^2 over [0,2] with f = 1/2
  EXPECT_NEAR(energy(flat, flat, p), 0.5 * ((p.a - p.b) * 0.5 + p.b * 2.0), 1e-14);
  EXPECT_NEAR(entropy(flat), std::log(0.5), 1e-14);
  EXPECT_NEAR(dissipation_DH(flat, flat, p), 0.0, 1e-14);
}

TEST(Functionals, EntropyVacuumConvention) {
  const Grid g(1.0, 8);
  GridField h(g);
  h[0] = 8.0;
  EXPECT_NEAR(entropy(h), std::log(8.0), 1e-14);
  h[1] = -1e-13;
  EXPECT_NO_THROW(entropy(h));
  h[1] = -1e-6;
  EXPECT_THROW(entropy(h), DomainError);
}

TEST(Functionals, CheckPair) {
  const Grid g(1.0, 8);
  DensityPair s{GridField::constant(g, 1.0), GridField::constant(g, 1.0)};
  EXPECT_NO_THROW(check_pair(s));
  s.g[2] = 1.0 + 1e-9;
  EXPECT_THROW(check_pair(s), DomainError);
  s.g[2] = 1.0;
  s.f[0] = -0.5;
  s.f[1] = 1.5;
  EXPECT_THROW(check_pair(s), DomainError);
}

// dE/df_i = dx mu_f[i]; the energy is quadratic, so central differences are exact up to rounding.
TEST(Functionals, VariationsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  const Grid g(1.0, 16);
  ModelParams p;
  p.A = 3.0;
  p.B = 1.5;
  p.c = 0.4;
  p.b = 0.6;
  p.a = 0.2;
  const DensityPair s = random_pair(g, rng);
  const auto [mu_f, mu_g] = energy_variations(s.f, s.g, p);
  const double h = 1e-5;
  for (std::size_t i = 0; i < g.size(); ++i) {
    GridField fp = s.f, fm = s.f, gp = s.g, gm = s.g;
    fp[i] += h;
    fm[i] -= h;
    gp[i] += h;
    gm[i] -= h;
    const double df = (energy(fp, s.g, p) - energy(fm, s.g, p)) / (2.0 * h);
    const double dg = (energy(s.f, gp, p) - energy(s.f, gm, p)) / (2.0 * h);
    EXPECT_NEAR(df, g.dx() * mu_f[i], 1e-6 * (1.0 + std::abs(df)));
    EXPECT_NEAR(dg, g.dx() * mu_g[i], 1e-6 * (1.0 + std::abs(dg)));
  }
}

// D_H = -<mu_f, f''> - <mu_g, g''> with the same discrete operators.
TEST(Functionals, DissipationIsLaplacianPairing) {
  std::mt19937_64 rng(22);
  const Grid g(1.0, 32);
  const ModelParams p;
  const DensityPair s = random_pair(g, rng);
  const auto [mu_f, mu_g] = energy_variations(s.f, s.g, p);
  const GridField lf = laplacian(s.f);
  const GridField lg = laplacian(s.g);
  double pairing = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) pairing -= g.dx() * (mu_f[i] * lf[i] + mu_g[i] * lg[i]);
  EXPECT_NEAR(dissipation_DH(s.f, s.g, p), pairing, 1e-9 * std::abs(pairing));
}
