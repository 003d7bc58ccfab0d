#pragma once

// Bulk optical response of the cloud: density model, lab-frame susceptibility,
// its projection onto a ray's transverse plane and the Pauli decomposition.

#include <array>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "cbs/dressed_scatterer.hpp"
#include "cbs/frame.hpp"

namespace cbs {

enum class GaussianConvention {
  /// n(r) = n0 exp(-r^2 / (2 r0^2))
  kSigma,
  /// n(r) = n0 exp(-r^2 / r0^2)
  kEFold,
};

inline const char* to_string(GaussianConvention c) {
  return c == GaussianConvention::kSigma ? "exp(-r^2/(2 r0^2))" : "exp(-r^2/r0^2)";
}

struct CloudGeometry {
  double peak_density = 3.2e10;  // cm^-3
  double gaussian_radius = 0.5;  // cm
  Vec3 center = Vec3::Zero();    // cm
  GaussianConvention convention = GaussianConvention::kSigma;

  void validate() const {
    if (!(peak_density >= 0.0) || !std::isfinite(peak_density))
      throw ConfigError("peak_density must be finite and >= 0");
    if (!(gaussian_radius > 0.0) || !std::isfinite(gaussian_radius))
      throw ConfigError("gaussian_radius must be finite and > 0");
  }

  /// Standard deviation of the Gaussian profile.
  double sigma() const {
    return convention == GaussianConvention::kSigma ? gaussian_radius
                                                    : gaussian_radius / std::sqrt(2.0);
  }

  double density(const Vec3& r) const {
    const double s = sigma();
    return peak_density * std::exp(-(r - center).squaredNorm() / (2.0 * s * s));
  }

  /// Column density (cm^-2) along p + s u for s in [s0, s1]; either bound
  /// may be infinite. `u` must be a unit vector.
  double column(const Vec3& p, const Vec3& u, double s0, double s1) const {
    if (peak_density == 0.0 || !(s1 > s0)) return 0.0;
    const double s = sigma();
    const Vec3 d = p - center;
    const double a = d.dot(u);
    const double b2 = std::max(0.0, d.squaredNorm() - a * a);
    const double pref = peak_density * std::exp(-b2 / (2.0 * s * s)) * s * std::sqrt(kPi / 2.0);
    const double scale = 1.0 / (std::sqrt(2.0) * s);
    return pref * erf_difference((s0 + a) * scale, (s1 + a) * scale);
  }

  /// Inverse of column(): the s >= s0 where the column from s0 reaches
  /// `target`. `target` must be below column(p, u, s0, inf).
  double distance_for_column(const Vec3& p, const Vec3& u, double s0, double target) const {
    const double s = sigma();
    const Vec3 d = p - center;
    const double a = d.dot(u);
    const double b2 = std::max(0.0, d.squaredNorm() - a * a);
    const double pref = peak_density * std::exp(-b2 / (2.0 * s * s)) * s * std::sqrt(kPi / 2.0);
    const double scale = 1.0 / (std::sqrt(2.0) * s);
    const double x0 = (s0 + a) * scale;
    const double t = target / pref;
    double x;
    if (x0 >= 0.0) {
      // erfc(x) = erfc(x0) - t keeps precision in the far tail
      x = boost::math::erfc_inv(std::max(std::erfc(x0) - t, 1e-300));
    } else {
      // 1 + erf(x) = erfc(-x0) + t
      const double c = std::erfc(-x0) + t;
      if (c <= 1.0) {
        x = -boost::math::erfc_inv(std::max(c, 1e-300));
      } else if (c < 1.5) {
        x = boost::math::erf_inv(c - 1.0);
      } else {
        x = boost::math::erfc_inv(std::max(2.0 - c, 1e-300));
      }
    }
    return std::max(s0, x / scale - a);
  }

  /// erf(x1) - erf(x0) without cancellation in either tail.
  static double erf_difference(double x0, double x1) {
    if (x0 >= 0.0) return std::erfc(x0) - std::erfc(x1);
    if (x1 <= 0.0) return std::erfc(-x1) - std::erfc(-x0);
    return std::erf(x1) - std::erf(x0);
  }
};

/// Uniform infinite medium; a test fixture for the propagation formulas.
struct HomogeneousMedium {
  double number_density = 0.0;

  double density(const Vec3&) const { return number_density; }
  double column(const Vec3&, const Vec3&, double s0, double s1) const {
    return number_density * (s1 - s0);
  }
};

/// Diagonal lab-frame susceptibility in the circular basis, stored as
/// q = -1, 0, +1. chi_q = e_q^* . chi . e_q.
struct LabSusceptibility {
  std::array<Complex, 3> diag{};

  Complex operator[](int q) const { return diag[q + 1]; }
  Complex& operator[](int q) { return diag[q + 1]; }

  LabSusceptibility scaled(double f) const {
    LabSusceptibility s;
    for (int i = 0; i < 3; ++i) s.diag[i] = diag[i] * f;
    return s;
  }

  Complex isotropic_part() const { return (diag[0] + diag[1] + diag[2]) / 3.0; }

  /// sum_q chi_q e_q e_q^dagger in Cartesian components.
  Mat3c cartesian() const {
    Mat3c m = Mat3c::Zero();
    for (int q = -1; q <= 1; ++q) {
      const Vec3c e = spherical_unit(q);
      m += (*this)[q] * (e * e.adjoint());
    }
    return m;
  }
};

/// Per-atom susceptibility in internal units (hbar = Gamma = d_red = 1):
/// chi_q = -(1/3) sum_m |<m+q| d_q |m>|^2 f_{m+q}(Delta), averaged over the
/// uniformly populated F=1 sublevels.
inline LabSusceptibility unit_lab_susceptibility(double delta, const ControlCoupling& coupling,
                                                 const LevelScheme& levels = {},
                                                 bool dressed = true) {
  LabSusceptibility chi;
  for (int q = -1; q <= 1; ++q) {
    Complex sum = 0.0;
    for (int m = -1; m <= 1; ++m) {
      const int n = m + q;
      if (std::abs(n) > 1) continue;
      const double d = dipole_element({1, m}, {1, n}, q, levels);
      if (d == 0.0) continue;
      sum += d * d * resonance_factor(n, delta, coupling, dressed);
    }
    chi[q] = -sum / 3.0;
  }
  return chi;
}

/// Dimensionless (Gaussian-unit) susceptibility at position r.
inline LabSusceptibility lab_susceptibility(const Vec3& r, double delta,
                                            const CloudGeometry& cloud,
                                            const ControlCoupling& coupling,
                                            const LevelScheme& levels = {}) {
  return unit_lab_susceptibility(delta, coupling, levels)
      .scaled(cloud.density(r) * levels.polarizability_unit());
}

/// Lab tensor projected onto the transverse plane of a ray frame with Euler
/// angles (alpha, beta, gamma). Rows and columns are ordered q = -1, +1 and
/// element (q, q') = e~_q^* . chi . e~_q' with e~ the ray's circular vectors.
/// Only beta and gamma enter.
inline Mat2c project_susceptibility(const LabSusceptibility& lab, const EulerAngles& euler) {
  const double c = std::cos(euler.beta);
  const double s2 = std::sin(euler.beta) * std::sin(euler.beta);
  const Complex chp = lab[+1];
  const Complex chm = lab[-1];
  const Complex ch0 = lab[0];
  const Complex plus = (1.0 + c) * (1.0 + c) / 4.0 * chp + (1.0 - c) * (1.0 - c) / 4.0 * chm +
                       s2 / 2.0 * ch0;
  const Complex minus = (1.0 - c) * (1.0 - c) / 4.0 * chp + (1.0 + c) * (1.0 + c) / 4.0 * chm +
                        s2 / 2.0 * ch0;
  const Complex bracket = s2 / 4.0 * (chp + chm - 2.0 * ch0);
  Mat2c t;
  t(0, 0) = minus;
  t(1, 1) = plus;
  t(1, 0) = std::exp(Complex(0.0, 2.0 * euler.gamma)) * bracket;
  t(0, 1) = std::exp(Complex(0.0, -2.0 * euler.gamma)) * bracket;
  return t;
}

/// chi~ = chi0 I + chi_vec . sigma with the Pauli matrices acting on the
/// (q = -1, q = +1) ordering, chi^2 = chi_x^2 + chi_y^2 + chi_z^2 and the
/// director n = chi_vec / chi.
struct TransverseSusceptibility {
  Complex chi0 = 0.0;
  Vec3c chi_vec = Vec3c::Zero();
  Complex chi_len = 0.0;
  Vec3c director = Vec3c::Zero();
  /// chi_vec vanishes (or is a null vector): the director is undefined.
  bool isotropic = true;

  Mat2c reconstruct() const {
    Mat2c m;
    m(0, 0) = chi0 + chi_vec.z();
    m(1, 1) = chi0 - chi_vec.z();
    m(0, 1) = chi_vec.x() - kI * chi_vec.y();
    m(1, 0) = chi_vec.x() + kI * chi_vec.y();
    return m;
  }
};

/// Principal-branch Pauli decomposition of a 2x2 matrix.
inline TransverseSusceptibility pauli_decompose(const Mat2c& t) {
  TransverseSusceptibility d;
  d.chi0 = 0.5 * (t(0, 0) + t(1, 1));
  d.chi_vec = Vec3c(0.5 * (t(0, 1) + t(1, 0)), 0.5 * kI * (t(0, 1) - t(1, 0)),
                    0.5 * (t(0, 0) - t(1, 1)));
  d.chi_len = std::sqrt(d.chi_vec.x() * d.chi_vec.x() + d.chi_vec.y() * d.chi_vec.y() +
                        d.chi_vec.z() * d.chi_vec.z());
  const double scale = t.cwiseAbs().maxCoeff();
  d.isotropic = !(std::abs(d.chi_len) > 1e-14 * scale) || scale == 0.0;
  d.director = d.isotropic ? Vec3c::Zero() : Vec3c(d.chi_vec / d.chi_len);
  return d;
}

/// Keeps the sign of chi continuous along a sweep; chi and -chi describe the
/// same propagator, only the reported phase integral changes.
class BranchTracker {
 public:
  TransverseSusceptibility follow(TransverseSusceptibility d) {
    if (has_previous_ && !d.isotropic && std::abs(d.chi_len + previous_) < std::abs(d.chi_len - previous_)) {
      d.chi_len = -d.chi_len;
      d.director = -d.director;
    }
    if (!d.isotropic) {
      previous_ = d.chi_len;
      has_previous_ = true;
    }
    return d;
  }

 private:
  Complex previous_ = 0.0;
  bool has_previous_ = false;
};

/// Extinction cross section (cm^2) of light with lab circular polarization q:
/// 4 pi k Im(chi_q) per atom.
inline double extinction_cross_section(const LabSusceptibility& unit_chi, int q,
                                       const LevelScheme& levels) {
  return 4.0 * kPi * levels.wavenumber() * levels.polarizability_unit() * unit_chi[q].imag();
}

/// Bare resonant extinction cross section, the same for every q and m: the
/// normalization sigma_0 of all reported cross sections.
inline double resonant_cross_section(const LevelScheme& levels) {
  return extinction_cross_section(unit_lab_susceptibility(0.0, {}, levels, false), 0, levels);
}

/// Width of the transparency window of the orientation-averaged absorption
/// Im(chi_iso): distance between the points on either side of Delta = Delta_c
/// where Im chi recovers half of its nearest flanking maximum. Returns 0 when
/// there is no window (Omega_c = 0).
inline double transparency_window_width(const ControlCoupling& coupling,
                                        const LevelScheme& levels = {}, double step = 1e-3,
                                        double reach = 10.0) {
  if (coupling.rabi_frequency == 0.0) return 0.0;
  auto absorption = [&](double d) {
    return unit_lab_susceptibility(d, coupling, levels).isotropic_part().imag();
  };
  const double center = coupling.detuning;
  auto half_point = [&](double sign) {
    double prev = absorption(center);
    double peak = prev;
    double d = center;
    // climb to the nearest local maximum
    for (double x = step; x < reach; x += step) {
      const double v = absorption(center + sign * x);
      if (v < prev) break;
      prev = v;
      peak = v;
      d = center + sign * x;
    }
    const double half = 0.5 * (peak + absorption(center));
    double lo = center, hi = d;
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (absorption(mid) < half) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  return half_point(+1.0) - half_point(-1.0);
}

}  // namespace cbs
