#pragma once

// Coherent propagation of the slowly varying field amplitude along straight
// rays through the cloud. The transverse susceptibility is proportional to the
// local density in every component, so the director is constant along a ray
// and the propagator is the exponential of a constant 2x2 generator scaled by
// the column density.

#include <cmath>
#include <limits>

#include "cbs/medium.hpp"

namespace cbs {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// A straight ray segment p + s u, s in [s_begin, s_end].
struct RaySegment {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double s_begin = 0.0;
  double s_end = 0.0;

  /// Finite chord r1 -> r2.
  static RaySegment chord(const Vec3& r1, const Vec3& r2) {
    const Vec3 d = r2 - r1;
    const double len = d.norm();
    if (!(len > 0.0)) throw DomainError("chord end points coincide");
    return {r1, d / len, 0.0, len};
  }
  /// Incoming leg from infinity along `direction` ending at r.
  static RaySegment from_infinity(const Vec3& r, const Vec3& direction) {
    return {r, direction.normalized(), -kInfinity, 0.0};
  }
  /// Outgoing leg from r to infinity along `direction`.
  static RaySegment to_infinity(const Vec3& r, const Vec3& direction) {
    return {r, direction.normalized(), 0.0, kInfinity};
  }

  double length() const { return s_end - s_begin; }
};

struct PhaseIntegrals {
  Complex phi0 = 0.0;
  Complex phi = 0.0;
};

/// Transverse optics of one ray direction at one detuning, per unit column
/// density: multiply by 2 pi k u_alpha N to get the phase integrals.
struct RayOptics {
  RayFrame frame;
  TransverseSusceptibility unit;  // internal units per atom
  double phase_per_column = 0.0;  // 2 pi k u_alpha, cm^2

  static RayOptics make(const Vec3& direction, const LabSusceptibility& unit_chi,
                        const LevelScheme& levels) {
    RayOptics o;
    o.frame = RayFrame::along(direction);
    o.unit = pauli_decompose(project_susceptibility(unit_chi, o.frame.euler()));
    o.phase_per_column = 2.0 * kPi * levels.wavenumber() * levels.polarizability_unit();
    return o;
  }

  PhaseIntegrals phases(double column) const {
    const double eta = phase_per_column * column;
    return {eta * unit.chi0, eta * unit.chi_len};
  }
};

struct PropagatorMatrix {
  /// Amplitude matrix in the ray's Cartesian transverse basis (x, y).
  Mat2c X = Mat2c::Identity();
  Complex phi0 = 0.0;
  Complex phi = 0.0;
  Vec3c director = Vec3c::Zero();
  bool isotropic = true;
  RayFrame frame;

  /// The same operator acting on lab-frame 3-vectors (zero along the ray).
  Mat3c lab() const {
    const Eigen::Matrix<Complex, 3, 2> f = frame.transverse().cast<Complex>();
    return f * X * f.transpose();
  }
};

/// X = e^{i phi0} [cos(phi) I + i sin(phi) (-n_x s_z + n_y s_x - n_z s_y)] in the
/// Cartesian transverse basis:
///   X11 = e^{i phi0}(cos phi - i sin phi n_x)
///   X22 = e^{i phi0}(cos phi + i sin phi n_x)
///   X12 = i e^{i phi0} sin phi (n_y + i n_z)
///   X21 = i e^{i phi0} sin phi (n_y - i n_z)
/// evaluated with sin(phi) n = [sin(eta chi)/chi] chi_vec so that isotropic
/// and null-vector generators are handled without dividing by chi.
inline PropagatorMatrix greens_matrix(const RayOptics& optics, double column) {
  const double eta = optics.phase_per_column * column;
  const TransverseSusceptibility& u = optics.unit;
  PropagatorMatrix p;
  p.frame = optics.frame;
  p.isotropic = u.isotropic;
  p.director = u.director;
  p.phi0 = eta * u.chi0;
  p.phi = eta * u.chi_len;
  const Complex z = p.phi;
  Complex sinc_eta;  // sin(eta chi) / chi
  if (std::abs(z) < 1e-4) {
    sinc_eta = eta * (1.0 - z * z / 6.0 + z * z * z * z / 120.0);
  } else {
    sinc_eta = std::sin(z) / u.chi_len;
  }
  const Complex c = std::cos(z);
  const Vec3c sv = sinc_eta * u.chi_vec;  // sin(phi) * n
  const Complex e0 = std::exp(kI * p.phi0);
  p.X(0, 0) = e0 * (c - kI * sv.x());
  p.X(1, 1) = e0 * (c + kI * sv.x());
  p.X(0, 1) = kI * e0 * (sv.y() + kI * sv.z());
  p.X(1, 0) = kI * e0 * (sv.y() - kI * sv.z());
  return p;
}

/// The four components with the factor i missing from the n_x terms. Kept to
/// document that this form does not solve the propagation equation when
/// n_x != 0; never used by the engine.
inline Mat2c greens_matrix_as_printed(const PropagatorMatrix& p) {
  const Complex e0 = std::exp(kI * p.phi0);
  const Complex s = std::sin(p.phi), c = std::cos(p.phi);
  const Vec3c& n = p.director;
  Mat2c x;
  x(0, 0) = e0 * (c - s * n.x());
  x(1, 1) = e0 * (c + s * n.x());
  x(0, 1) = kI * e0 * s * (n.y() + kI * n.z());
  x(1, 0) = kI * e0 * s * (n.y() - kI * n.z());
  return x;
}

template <class Density>
PhaseIntegrals phase_integrals(const RaySegment& seg, double delta, const Density& density,
                               const ControlCoupling& coupling, const LevelScheme& levels = {}) {
  const RayOptics optics =
      RayOptics::make(seg.direction, unit_lab_susceptibility(delta, coupling, levels), levels);
  return optics.phases(density.column(seg.origin, seg.direction, seg.s_begin, seg.s_end));
}

template <class Density>
PropagatorMatrix greens_matrix(const RaySegment& seg, double delta, const Density& density,
                               const ControlCoupling& coupling, const LevelScheme& levels = {}) {
  const RayOptics optics =
      RayOptics::make(seg.direction, unit_lab_susceptibility(delta, coupling, levels), levels);
  return greens_matrix(optics, density.column(seg.origin, seg.direction, seg.s_begin, seg.s_end));
}

/// X_b . X_a for consecutive segments of one ray (same frame, same director).
inline PropagatorMatrix compose(const PropagatorMatrix& a, const PropagatorMatrix& b) {
  const double tol = 1e-9;
  if ((a.frame.z - b.frame.z).norm() > tol || (a.frame.x - b.frame.x).norm() > tol ||
      (a.frame.y - b.frame.y).norm() > tol)
    throw DomainError("compose: segments do not share a ray frame");
  if (!a.isotropic && !b.isotropic && (a.director - b.director).norm() > 1e-9 &&
      (a.director + b.director).norm() > 1e-9)
    throw DomainError("compose: segments have different directors");
  PropagatorMatrix c = a;
  c.X = b.X * a.X;
  c.phi0 = a.phi0 + b.phi0;
  c.isotropic = a.isotropic && b.isotropic;
  if (!a.isotropic && !b.isotropic && (a.director + b.director).norm() <= 1e-9 &&
      (a.director - b.director).norm() > 1e-9)
    c.phi = a.phi - b.phi;
  else
    c.phi = a.phi + b.phi;
  if (a.isotropic) c.director = b.director;
  return c;
}

}  // namespace cbs
