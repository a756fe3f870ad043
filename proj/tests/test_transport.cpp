#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "muskat/transport1d.hpp"

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

GridField shifted(const GridField& h, std::size_t d) {
  GridField out(h.grid());
  for (std::size_t i = d; i < h.size(); ++i) out[i] = h[i - d];
  return out;
}

}  // namespace

TEST(Cdf, EndpointsAndQuantiles) {
  const Grid g(2.0, 8);
  const Cdf1D c = cdf(GridField::constant(g, 0.5));
  EXPECT_EQ(c.values.front(), 0.0);
  EXPECT_EQ(c.values.back(), 1.0);
  EXPECT_NEAR(quantile(c, 0.25), 0.5, 1e-14);
  EXPECT_NEAR(quantile(c, 1.0), 2.0, 1e-14);
  EXPECT_THROW(quantile(c, 1.5), DomainError);
}

TEST(Cdf, RejectsNegativeAndMassless) {
  const Grid g(1.0, 8);
  GridField h = GridField::constant(g, 1.0);
  h[0] = -0.1;
  EXPECT_THROW(cdf(h), DomainError);
  EXPECT_THROW(cdf(GridField(g)), DomainError);
}

TEST(W2, TranslateOfBump) {
  const Grid g(1.0, 128);
  const GridField u = bump(g, 0.3, 0.1);
  for (std::size_t d : {1u, 5u, 17u}) {
    const GridField v = shifted(u, d);
    EXPECT_NEAR(w2_distance(u, v, 0), static_cast<double>(d) * g.dx(), 1e-10);
    EXPECT_NEAR(w2_distance(u, v), static_cast<double>(d) * g.dx(), 1e-10);
  }
}

TEST(W2, UniformAgainstStretchedUniform) {
  const Grid g(2.0, 256);
  const GridField wide = GridField::constant(g, 0.5);
  const GridField narrow = GridField::sample(g, [](double x) { return x < 1.0 ? 1.0 : 0.0; });
  EXPECT_NEAR(w2_distance(narrow, wide), 1.0 / std::sqrt(3.0), 2.0 * g.dx());
  EXPECT_NEAR(w2_distance(narrow, wide, 0), 1.0 / std::sqrt(3.0), 1e-12);
}

TEST(W2, MetricProperties) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Grid g(1.0, 32);
  auto random_density = [&] {
    GridField h(g);
    for (double& v : h.data()) v = u01(rng) < 0.3 ? 0.0 : u01(rng);
    h[static_cast<std::size_t>(rng() % 32)] += 1.0;
    h *= 1.0 / integrate(h);
    return h;
  };
  for (int t = 0; t < 50; ++t) {
    const GridField a = random_density(), b = random_density(), c = random_density();
    EXPECT_EQ(w2_distance(a, a, 0), 0.0);
    EXPECT_NEAR(w2_distance(a, b, 0), w2_distance(b, a, 0), 1e-13);
    EXPECT_LE(w2_distance(a, c, 0), w2_distance(a, b, 0) + w2_distance(b, c, 0) + 1e-12);
  }
}

TEST(W2, QuadratureConvergesToExact) {
  const Grid g(1.0, 64);
  const GridField u = bump(g, 0.4, 0.2);
  const GridField v = GridField::sample(g, [](double x) { return 1.0 + 0.5 * std::cos(3.0 * x); });
  GridField vn = v;
  vn *= 1.0 / integrate(v);
  const double exact = w2_distance(u, vn, 0);
  double prev = std::abs(w2_distance(u, vn, 64) - exact);
  for (std::size_t m : {256u, 1024u, 4096u}) {
    const double err = std::abs(w2_distance(u, vn, m) - exact);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
}

// Directional derivative of W2^2/2 along zero-mass directions, seeded smooth instances.
TEST(Potential, MatchesCentredDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Grid g(1.0, 64);
  for (int t = 0; t < 20; ++t) {
    const double a1 = u01(rng), a2 = u01(rng), p1 = 6.28 * u01(rng), p2 = 6.28 * u01(rng);
    GridField u = GridField::sample(g, [&](double x) { return 1.0 + 0.5 * a1 * std::sin(2.0 * M_PI * x + p1); });
    GridField v = GridField::sample(g, [&](double x) { return 1.0 + 0.5 * a2 * std::sin(4.0 * M_PI * x + p2); });
    u *= 1.0 / integrate(u);
    v *= 1.0 / integrate(v);
    GridField h = GridField::sample(g, [&](double x) { return std::cos(2.0 * M_PI * x * (1 + t % 3)); });
    const double mean = integrate(h);
    for (double& x : h.data()) x -= mean;

    const GridField phi = kantorovich_potential(u, v);
    double midpoint = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) midpoint += phi[i] * h[i] * g.dx();
    const ExactTransport tr = exact_transport(u.data(), v.data(), g);
    double exact = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) exact += tr.potential_cell_integrals[i] * h[i];

    const double e = 1e-5;
    const double wp = w2_distance(u + e * h, v, 0);
    const double wm = w2_distance(u - e * h, v, 0);
    const double fd = (wp * wp - wm * wm) / (4.0 * e);
    EXPECT_NEAR(midpoint, fd, std::max(1e-6, 0.05 * g.dx() * g.dx()));
    EXPECT_NEAR(exact, fd, 1e-9);
  }
}

// Cell integrals are exact partial derivatives, also with vacuum cells in both densities.
TEST(ExactTransport, GradientWithVacuum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Grid g(1.0, 16);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<double> u(16), f0(16);
    for (std::size_t i = 0; i < 16; ++i) {
      u[i] = u01(rng) < 0.4 ? 0.0 : u01(rng);
      f0[i] = u01(rng) < 0.4 ? 0.0 : u01(rng);
    }
    double su = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      su += u[i];
      s0 += f0[i];
    }
    if (su == 0.0 || s0 == 0.0) continue;
    for (std::size_t i = 0; i < 16; ++i) {
      u[i] *= 16.0 / su;
      f0[i] *= 16.0 / s0;
    }
    const std::size_t from = rng() % 16, to = rng() % 16;
    if (u[from] < 1e-3 || from == to) continue;
    const ExactTransport tr = exact_transport(u, f0, g);
    const double an = tr.potential_cell_integrals[to] - tr.potential_cell_integrals[from];
    const double h = 1e-7;
    std::vector<double> up = u, um = u;
    up[to] += h;
    up[from] -= h;
    um[to] -= h;
    um[from] += h;
    // one-sided into empty cells: moving mass out of vacuum is infeasible
    const bool forward = u[to] < 1e-3;
    const double fd = forward ? (exact_transport(up, f0, g).w2sq - tr.w2sq) / (2.0 * h)
                              : (exact_transport(up, f0, g).w2sq - exact_transport(um, f0, g).w2sq) / (4.0 * h);
    EXPECT_NEAR(an, fd, (forward ? 1e-5 : 1e-6) * (1.0 + std::abs(an)));
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(ExactTransport, AgreesWithDistance) {
  const Grid g(1.0, 64);
  const GridField u = bump(g, 0.3, 0.15);
  const GridField v = bump(g, 0.6, 0.25);
  const ExactTransport tr = exact_transport(u.data(), v.data(), g);
  const double w = w2_distance(u, v, 0);
  EXPECT_NEAR(tr.w2sq, w * w, 1e-13);
  EXPECT_NEAR(optimal_map(u, v).transport_cost(), w * w, 1e-13);
}
