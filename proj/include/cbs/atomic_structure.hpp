#pragma once

// Angular-momentum algebra and the level scheme of the 87Rb D1 line used by
// the simulator: probe on F=1 -> F'=1, sigma+ control on F=2 -> F'=1.
//
// Conventions (Condon-Shortley phases, 3j normalization):
//   <F' n| d_q |F m> = (-1)^(F'-n) (F' 1 F; -n q m) <F'||d||F>
// with d_q = e_q . d and e_{+-1} = -+(e_x +- i e_y)/sqrt(2), e_0 = e_z.
// The reduced element of F=1 <-> F'=1 is the internal dipole unit.

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <gsl/gsl_sf_coupling.h>

#include "cbs/core.hpp"

namespace cbs {

/// Wigner 3j symbol with all arguments passed as twice their value, so
/// half-integers are representable. Returns 0 when a selection rule fails.
inline double wigner3j(int two_j1, int two_j2, int two_j3, int two_m1,
                       int two_m2, int two_m3) {
  if (two_j1 < 0 || two_j2 < 0 || two_j3 < 0) return 0.0;
  if (two_m1 + two_m2 + two_m3 != 0) return 0.0;
  if (std::abs(two_m1) > two_j1 || std::abs(two_m2) > two_j2 ||
      std::abs(two_m3) > two_j3)
    return 0.0;
  if ((two_j1 + two_m1) % 2 != 0 || (two_j2 + two_m2) % 2 != 0 ||
      (two_j3 + two_m3) % 2 != 0)
    return 0.0;
  if (two_j3 > two_j1 + two_j2 || two_j3 < std::abs(two_j1 - two_j2))
    return 0.0;
  if ((two_j1 + two_j2 + two_j3) % 2 != 0) return 0.0;
  return gsl_sf_coupling_3j(two_j1, two_j2, two_j3, two_m1, two_m2, two_m3);
}

/// Spherical unit vector e_q in Cartesian components.
inline Vec3c spherical_unit(int q) {
  const double s = 1.0 / std::sqrt(2.0);
  switch (q) {
    case +1: return Vec3c(-s, Complex(0.0, -s), 0.0);
    case -1: return Vec3c(s, Complex(0.0, -s), 0.0);
    case 0: return Vec3c(0.0, 0.0, 1.0);
    default: throw DomainError("spherical index must be -1, 0 or +1");
  }
}

struct LevelScheme {
  int ground_F = 1;
  int excited_F = 1;
  /// Ground hyperfine splitting, rad/s (87Rb: 2 pi x 6.834682611 GHz).
  double hyperfine_splitting_ground = 2.0 * kPi * 6.834682610904e9;
  /// Natural linewidth Gamma, rad/s (87Rb D1: 2 pi x 5.750 MHz).
  double gamma = 2.0 * kPi * 5.7500e6;
  /// Probe wavelength, cm (87Rb D1).
  double wavelength_cm = 794.978851156e-7;
  /// Fraction of F'=1 decays that end in F=1; fixes the physical dipole scale.
  double branching_to_probed = 1.0 / 6.0;

  void validate() const {
    if (excited_F != 1) throw DomainError("only the F'=1 excited level is modelled");
    if (ground_F != 1 && ground_F != 2) throw DomainError("ground F must be 1 or 2");
    if (!(gamma > 0.0)) throw DomainError("natural linewidth must be positive");
    if (!(wavelength_cm > 0.0)) throw DomainError("wavelength must be positive");
    if (!(branching_to_probed > 0.0 && branching_to_probed <= 1.0))
      throw DomainError("branching ratio must lie in (0, 1]");
  }

  double wavenumber() const { return 2.0 * kPi / wavelength_cm; }
  /// Reduced element <F'=1||d||F> relative to the F=1 unit.
  double reduced_dipole(int F) const {
    if (F == 1) return 1.0;
    if (F == 2) return std::sqrt((1.0 - branching_to_probed) / branching_to_probed);
    throw DomainError("ground F must be 1 or 2");
  }
  /// |d_red|^2 / (hbar Gamma) in cm^3: converts internal polarizabilities
  /// (hbar = Gamma = d_red = 1) to Gaussian-unit volumes.
  double polarizability_unit() const {
    const double k = wavenumber();
    return 9.0 * branching_to_probed / (4.0 * k * k * k);
  }
};

struct GroundState {
  int F;
  int m;
};

struct ExcitedState {
  int F;
  int n;
};

/// A ground/excited Zeeman pair with its dipole amplitude in reduced units.
struct ZeemanTransition {
  GroundState ground;
  ExcitedState excited;
  int spherical_component;
  double amplitude;
};

namespace detail {
inline void check_dipole_args(GroundState g, ExcitedState e, int q) {
  if (g.F != 1 && g.F != 2) throw DomainError("ground F must be 1 or 2");
  if (e.F != 1) throw DomainError("excited F' must be 1");
  if (std::abs(g.m) > g.F) throw DomainError("|m| exceeds F");
  if (std::abs(e.n) > e.F) throw DomainError("|n| exceeds F'");
  if (std::abs(q) > 1) throw DomainError("spherical index must be -1, 0 or +1");
}
}  // namespace detail

/// <F' n| d_q |F m> in units of the F=1 reduced dipole.
inline double dipole_element(GroundState g, ExcitedState e, int q,
                             const LevelScheme& levels = {}) {
  detail::check_dipole_args(g, e, q);
  if (e.n != g.m + q) return 0.0;
  const double phase = ((e.F - e.n) % 2 == 0) ? 1.0 : -1.0;
  return phase * wigner3j(2 * e.F, 2, 2 * g.F, -2 * e.n, 2 * q, 2 * g.m) *
         levels.reduced_dipole(g.F);
}

/// Cartesian vector <F' n| d |F m> = sum_q <n|d_q|m> e_q^*.
inline Vec3c dipole_vector(GroundState g, ExcitedState e,
                           const LevelScheme& levels = {}) {
  Vec3c v = Vec3c::Zero();
  for (int q = -1; q <= 1; ++q) {
    const double d = dipole_element(g, e, q, levels);
    if (d != 0.0) v += d * spherical_unit(q).conjugate();
  }
  return v;
}

/// Every (m, n, q) triple of F -> F'=1, including the vanishing ones.
inline std::vector<ZeemanTransition> enumerate_transitions(
    int F, const LevelScheme& levels = {}) {
  std::vector<ZeemanTransition> out;
  for (int m = -F; m <= F; ++m)
    for (int n = -1; n <= 1; ++n)
      for (int q = -1; q <= 1; ++q) {
        GroundState g{F, m};
        ExcitedState e{1, n};
        out.push_back({g, e, q, dipole_element(g, e, q, levels)});
      }
  return out;
}

/// sigma+ control field on F=2 -> F'=1. Rabi frequency and detuning in Gamma.
struct ControlCoupling {
  double rabi_frequency = 0.0;
  double detuning = 0.0;

  void validate() const {
    if (!(rabi_frequency >= 0.0) || !std::isfinite(rabi_frequency))
      throw ConfigError("rabi_frequency must be finite and >= 0");
    if (!std::isfinite(detuning)) throw ConfigError("control detuning must be finite");
  }
};

/// V_{n m'} for the control field, in units of Gamma. Real and non-negative;
/// |V| on |F=2,m'=-1> -> |F'=1,n=0> is Omega_c / 2.
inline Complex control_matrix_element(int n, int m_prime,
                                      const ControlCoupling& coupling) {
  if (std::abs(n) > 1 || std::abs(m_prime) > 2) return 0.0;
  if (m_prime != n - 1) return 0.0;
  const double ref = std::abs(wigner3j(2, 2, 4, 0, 2, -2));
  const double here = std::abs(wigner3j(2, 2, 4, -2 * n, 2, 2 * m_prime));
  return 0.5 * coupling.rabi_frequency * here / ref;
}

/// The control partner m'(n) = n - 1 of excited sublevel n.
inline int control_partner(int n) { return n - 1; }

/// |V_{n, m'(n)}|^2 for the three excited sublevels, indexed by n + 1.
inline std::array<double, 3> control_strengths(const ControlCoupling& coupling) {
  std::array<double, 3> v{};
  for (int n = -1; n <= 1; ++n)
    v[n + 1] = std::norm(control_matrix_element(n, control_partner(n), coupling));
  return v;
}

}  // namespace cbs
