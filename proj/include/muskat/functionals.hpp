#ifndef MUSKAT_FUNCTIONALS_HPP
#define MUSKAT_FUNCTIONALS_HPP

#include <cmath>
#include <string>

#include "muskat/errors.hpp"
#include "muskat/grid.hpp"

namespace muskat {

/// Capillary (A, B), gravity (a, b, c) coefficients and the time step tau.
struct ModelParams {
  double A = 2.0;
  double B = 1.0;
  double a = 1.0;
  double b = 0.5;
  double c = 0.5;
  double tau = 1e-3;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(finite(A) && finite(B) && finite(a) && finite(b) && finite(c) && finite(tau))) {
      throw ConfigError("model parameters must be finite");
    }
    if (a < 0.0 || b < 0.0 || c < 0.0) {
      throw ConfigError("gravity coefficients must satisfy a >= 0, b >= 0, c >= 0");
    }
    if (!(B > 0.0)) throw ConfigError("B > 0 required (constraint cB=b, and A>B>0)");
    if (!(A > B)) throw ConfigError("A > B required (constraint cB=b, and A>B>0)");
    if (std::abs(c * B - b) > 1e-12) {
      throw ConfigError("cB=b violated: c*B = " + std::to_string(c * B) + " but b = " + std::to_string(b) +
                        " (constraint cB=b, and A>B>0)");
    }
    if (!(tau > 0.0)) throw ConfigError("time step tau > 0 required");
  }

  /// Uniqueness regime of the minimization step and sign-definite entropy dissipation.
  bool gravity_stable() const { return a >= b; }
};

/// Heights of the lower (f) and upper (g) layer on a common grid.
struct DensityPair {
  GridField f;
  GridField g;

  const Grid& grid() const { return f.grid(); }
};

/// Throws unless both components are nonnegative with unit mass within `mass_tol`.
inline void check_probability_density(const GridField& h, const char* name, double mass_tol = 1e-12) {
  for (double v : h.values()) {
    if (!std::isfinite(v)) throw DomainError(std::string(name) + ": non-finite density entry");
    if (v < 0.0) throw DomainError(std::string(name) + ": negative density entry");
  }
  const double m = integrate(h);
  if (std::abs(m - 1.0) > mass_tol) {
    throw DomainError(std::string(name) + ": mass " + std::to_string(m) + " differs from 1");
  }
}

inline void check_pair(const DensityPair& p, double mass_tol = 1e-12) {
  require_same_grid(p.f, p.g);
  check_probability_density(p.f, "f", mass_tol);
  check_probability_density(p.g, "g", mass_tol);
}

/// 1/2 int [(A-B)|f'|^2 + B|(f+g)'|^2 + (a-b) f^2 + b (f+g)^2] dx.
///
/// Gradient terms use edge differences, so the exact derivative of this discrete
/// quadratic form is the three-point Laplacian stencil of grid.hpp.
inline double energy(const GridField& f, const GridField& g, const ModelParams& p) {
  require_same_grid(f, g);
  const GridField s = f + g;
  return 0.5 * ((p.A - p.B) * dirichlet_norm_sq(f) + p.B * dirichlet_norm_sq(s) + (p.a - p.b) * l2_norm_sq(f) +
                p.b * l2_norm_sq(s));
}

inline double energy(const DensityPair& pair, const ModelParams& p) { return energy(pair.f, pair.g, p); }

/// int h ln h dx with 0 ln 0 = 0; entries in (-1e-12, 0) count as zero.
inline double entropy(const GridField& h) {
  double s = 0.0;
  for (double v : h.values()) {
    if (v < -1e-12 || std::isnan(v)) throw DomainError("entropy: negative density entry");
    if (v > 0.0) s += v * std::log(v);
  }
  return h.grid().dx() * s;
}

/// (A-B)||f''||^2 + B||(f+g)''||^2 + (a-b)||f'||^2 + b||(f+g)'||^2; negative possible when a < b.
inline double dissipation_DH(const GridField& f, const GridField& g, const ModelParams& p) {
  require_same_grid(f, g);
  const GridField s = f + g;
  return (p.A - p.B) * l2_norm_sq(laplacian(f)) + p.B * l2_norm_sq(laplacian(s)) +
         (p.a - p.b) * dirichlet_norm_sq(f) + p.b * dirichlet_norm_sq(s);
}

/// L2 first variations of the energy: (dE/df, dE/dg).
///
/// dE/df = -A f'' - B g'' + a f + b g,  dE/dg = B(-(f+g)'' + c (f+g)).
inline std::pair<GridField, GridField> energy_variations(const GridField& f, const GridField& g,
                                                         const ModelParams& p) {
  require_same_grid(f, g);
  const GridField lf = laplacian(f);
  const GridField lg = laplacian(g);
  GridField mu_f(f.grid());
  GridField mu_g(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) {
    mu_f[i] = -p.A * lf[i] - p.B * lg[i] + p.a * f[i] + p.b * g[i];
    mu_g[i] = -p.B * (lf[i] + lg[i]) + p.b * (f[i] + g[i]);
  }
  return {std::move(mu_f), std::move(mu_g)};
}

}  // namespace muskat

#endif  // MUSKAT_FUNCTIONALS_HPP
