#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "muskat/grid.hpp"
#include "muskat/simplex.hpp"

using namespace muskat;

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(0.0, 16), ConfigError);
  EXPECT_THROW(Grid(-1.0, 16), ConfigError);
  EXPECT_THROW(Grid(1.0, 7), ConfigError);
  EXPECT_NO_THROW(Grid(1.0, 8));
}

TEST(Grid, CentersAndEdges) {
  const Grid g(2.0, 8);
  EXPECT_DOUBLE_EQ(g.dx(), 0.25);
  EXPECT_DOUBLE_EQ(g.center(0), 0.125);
  EXPECT_DOUBLE_EQ(g.edge(8), 2.0);
  double w = 0.0;
  for (double v : g.weights()) w += v;
  EXPECT_DOUBLE_EQ(w, 2.0);
}

TEST(Grid, MismatchedFieldsThrow) {
  const GridField a(Grid(1.0, 8));
  const GridField b(Grid(1.0, 16));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(GridField(Grid(1.0, 8), std::vector<double>(9, 0.0)), ShapeError);
}

TEST(Grid, IntegrateConstant) {
  const Grid g(3.0, 30);
  EXPECT_NEAR(integrate(GridField::constant(g, 2.0)), 6.0, 1e-14);
}

TEST(Grid, GradientExactOnQuadratics) {
  const Grid g(1.0, 16);
  const GridField h = GridField::sample(g, [](double x) { return 3.0 * x * x - x + 2.0; });
  const GridField d = gradient(h);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(d[i], 6.0 * g.center(i) - 1.0, 1e-11);
}

TEST(Grid, LaplacianConservesAndMatchesInterior) {
  const Grid g(1.0, 32);
  const GridField h = GridField::sample(g, [](double x) { return x * x * x; });
  const GridField l = laplacian(h);
  EXPECT_NEAR(integrate(l), 0.0, 1e-10);  // no-flux walls
  for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(l[i], 6.0 * g.center(i), 1e-9);
  const GridField c = laplacian(GridField::constant(g, 4.0));
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Grid, DirichletFormIsMinusLaplacianPairing) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Grid g(1.5, 24);
  GridField h(g);
  for (double& v : h.data()) v = u(rng);
  const GridField l = laplacian(h);
  double pairing = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) pairing -= h[i] * l[i] * g.dx();
  EXPECT_NEAR(dirichlet_norm_sq(h), pairing, 1e-10 * std::abs(pairing));
}

TEST(Grid, SecondMoment) {
  const Grid g(1.0, 10);
  const GridField h = GridField::constant(g, 1.0);
  double expect = 0.0;
  for (std::size_t i = 0; i < 10; ++i) expect += 0.1 * (1.0 + g.center(i) * g.center(i));
  EXPECT_NEAR(second_moment(h, 0.0), expect, 1e-14);
  GridField neg = h;
  neg[3] = -1.0;
  EXPECT_THROW(second_moment(neg, 0.0), DomainError);
}

TEST(Simplex, FeasibleAndIdempotent) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const double dx = 0.125;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(8);
    for (double& v : w) v = 3.0 * n01(rng);
    project_to_simplex(w, dx);
    double mass = 0.0;
    for (double v : w) {
      EXPECT_GE(v, 0.0);
      mass += dx * v;
    }
    EXPECT_NEAR(mass, 1.0, 1e-13);
    std::vector<double> again = w;
    project_to_simplex(again, dx);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(again[i], w[i], 1e-13);
  }
}

// The projection is at least as close as any feasible point drawn at random.
TEST(Simplex, NearestAmongRandomFeasiblePoints) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  std::exponential_distribution<double> e1;
  const double dx = 0.25;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = 2.0 * n01(rng);
    std::vector<double> p = x;
    project_to_simplex(p, dx);
    double best = 0.0;
    for (std::size_t i = 0; i < 4; ++i) best += (p[i] - x[i]) * (p[i] - x[i]);
    for (int k = 0; k < 500; ++k) {
      std::vector<double> y(4);
      double s = 0.0;
      for (double& v : y) s += dx * (v = e1(rng) * (rng() % 3 == 0 ? 0.0 : 1.0));
      if (s == 0.0) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < 4; ++i) d += (y[i] / s - x[i]) * (y[i] / s - x[i]);
      EXPECT_GE(d, best - 1e-12);
    }
  }
}
