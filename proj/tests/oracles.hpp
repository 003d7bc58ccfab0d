#pragma once

// Independent reference implementations used only by the tests.

#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cbs/engine.hpp"

namespace oracle {

using cbs::Complex;
using cbs::Mat2c;
using cbs::Mat3c;
using cbs::Vec3;
using cbs::Vec3c;

/// Wigner 3j by the Racah formula, arguments doubled.
inline double racah_3j(int j1, int j2, int j3, int m1, int m2, int m3) {
  if (m1 + m2 + m3 != 0) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
  if ((j1 + m1) % 2 || (j2 + m2) % 2 || (j3 + m3) % 2) return 0.0;
  if (j3 > j1 + j2 || j3 < std::abs(j1 - j2) || (j1 + j2 + j3) % 2) return 0.0;
  auto f = [](int twice) { return std::tgamma(twice / 2 + 1.0); };
  const double tri = f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3) / f(j1 + j2 + j3 + 2);
  const double pre = std::sqrt(tri * f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) *
                               f(j3 + m3) * f(j3 - m3));
  double sum = 0.0;
  for (int k = 0; k <= 2 * (j1 + j2 + j3); k += 2) {
    const int a = j1 + j2 - j3 - k, b = j1 - m1 - k, c = j2 + m2 - k;
    const int d = j3 - j2 + m1 + k, e = j3 - j1 - m2 + k;
    if (a < 0 || b < 0 || c < 0 || d < 0 || e < 0) continue;
    const double sign = ((k / 2) % 2) ? -1.0 : 1.0;
    sum += sign / (f(k) * f(a) * f(b) * f(c) * f(d) * f(e));
  }
  const int ph = (j1 - j2 - m3) / 2;
  return ((ph % 2 + 2) % 2 ? -1.0 : 1.0) * pre * sum;
}

/// Wigner small-d matrix d^1_{m m'}(beta) in closed form.
inline double small_d1(int m, int mp, double b) {
  const double c = std::cos(b), s = std::sin(b);
  const double r = 1.0 / std::sqrt(2.0);
  if (m == 1 && mp == 1) return (1 + c) / 2;
  if (m == 1 && mp == 0) return -s * r;
  if (m == 1 && mp == -1) return (1 - c) / 2;
  if (m == 0 && mp == 1) return s * r;
  if (m == 0 && mp == 0) return c;
  if (m == 0 && mp == -1) return -s * r;
  if (m == -1 && mp == 1) return (1 - c) / 2;
  if (m == -1 && mp == 0) return s * r;
  return (1 + c) / 2;
}

/// D^1_{m m'}(alpha, beta, gamma) = e^{-i m alpha} d e^{-i m' gamma}.
inline Complex wigner_d1(int m, int mp, double a, double b, double g) {
  return std::exp(Complex(0, -m * a)) * small_d1(m, mp, b) * std::exp(Complex(0, -mp * g));
}

/// Projection of a diagonal spherical tensor onto rotated circular vectors,
/// computed with Wigner D-matrices: e~_q = sum_m D^1_{m q} e_m.
inline Mat2c projected_by_wigner(const cbs::LabSusceptibility& lab, const cbs::EulerAngles& e) {
  Mat2c t;
  const int qs[2] = {-1, +1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Complex s = 0.0;
      for (int m = -1; m <= 1; ++m)
        s += std::conj(wigner_d1(m, qs[i], e.alpha, e.beta, e.gamma)) * lab[m] *
             wigner_d1(m, qs[j], e.alpha, e.beta, e.gamma);
      t(i, j) = s;
    }
  return t;
}

/// RK4 integration of dA/ds = i eta n(s) chi~ A for the 2x2 Cartesian
/// transverse generator, from s0 to s1 (finite).
inline Mat2c integrate_propagator(const std::function<double(double)>& density, double s0, double s1,
                                  const Mat2c& generator, int steps) {
  Mat2c a = Mat2c::Identity();
  const double h = (s1 - s0) / steps;
  auto rhs = [&](double s, const Mat2c& x) -> Mat2c {
    return Complex(0, 1) * density(s) * generator * x;
  };
  for (int i = 0; i < steps; ++i) {
    const double s = s0 + i * h;
    const Mat2c k1 = rhs(s, a);
    const Mat2c k2 = rhs(s + h / 2, a + h / 2 * k1);
    const Mat2c k3 = rhs(s + h / 2, a + h / 2 * k2);
    const Mat2c k4 = rhs(s + h, a + h * k3);
    a += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return a;
}

/// The circular-basis susceptibility as a Cartesian transverse generator:
/// G_cart = C T C^dagger with columns of C the (e~_-1, e~_+1) components.
inline Mat2c cartesian_generator(const Mat2c& t_circular) {
  const double r = 1.0 / std::sqrt(2.0);
  Mat2c c;
  c << r, -r, Complex(0, -r), Complex(0, -r);
  // circular_q = x-component, y-component in columns: e_-1 = (1, -i)/sqrt2, e_+1 = -(1, i)/sqrt2
  return c * t_circular * c.adjoint();
}

/// Adaptive Gauss-Kronrod line integral of the cloud density.
inline double column_quadrature(const cbs::CloudGeometry& cloud, const Vec3& p, const Vec3& u,
                                double s0, double s1) {
  auto f = [&](double s) { return cloud.density(p + s * u); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, s0, s1, 15, 1e-13);
}

/// Explicit-labeling amplitudes of one atom sequence, internal units.
struct Amplitudes {
  std::vector<Complex> direct, reciprocal;  // indexed by labeling
};

/// Enumerates every Zeeman labeling (m_a, m''_a) of a path at rest and builds
/// the direct and reciprocal amplitudes from freshly computed tensors and
/// propagators.
inline Amplitudes enumerate(const std::vector<Vec3>& r, double delta, const cbs::ChannelVectors& ch,
                            const cbs::CloudGeometry& cloud, const cbs::ControlCoupling& cc,
                            bool attenuation = true) {
  const cbs::LevelScheme lv;
  const int n = static_cast<int>(r.size());
  const auto chi = cbs::unit_lab_susceptibility(delta, cc, lv);
  auto prop = [&](const Vec3& p, const Vec3& u, double s0, double s1) {
    const cbs::RaySegment seg{p, u, s0, s1};
    const double col = attenuation ? cloud.column(p, u, s0, s1) : 0.0;
    const auto optics = cbs::RayOptics::make(u, chi, lv);
    const Mat2c x = cbs::greens_matrix(optics, col).X;
    Eigen::Matrix<Complex, 3, 2> f;
    f.col(0) = optics.frame.x.cast<Complex>();
    f.col(1) = optics.frame.y.cast<Complex>();
    (void)seg;
    return Mat3c(f * x * f.transpose());
  };
  const Vec3 z = Vec3::UnitZ();
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) total *= 9;
  Amplitudes out;
  for (std::size_t lab = 0; lab < total; ++lab) {
    std::vector<int> m(n), mf(n);
    std::size_t x = lab;
    for (int a = 0; a < n; ++a) {
      m[a] = static_cast<int>(x % 9) / 3 - 1;
      mf[a] = static_cast<int>(x % 9) % 3 - 1;
      x /= 9;
    }
    auto alpha = [&](int a) {
      return cbs::scattering_tensor({1, m[a]}, {1, mf[a]}, delta, cc, lv).components;
    };
    Vec3c v = prop(r[0], z, -cbs::kInfinity, 0.0) * ch.input;
    for (int a = 0; a < n; ++a) {
      v = alpha(a) * v;
      if (a + 1 < n) {
        const Vec3 d = r[a + 1] - r[a];
        v = prop(r[a], d.normalized(), 0.0, d.norm()) * v;
      }
    }
    out.direct.push_back(ch.output.dot(prop(r[n - 1], -z, 0.0, cbs::kInfinity) * v));
    Vec3c w = prop(r[n - 1], z, -cbs::kInfinity, 0.0) * ch.input;
    for (int a = n - 1; a >= 0; --a) {
      w = alpha(a) * w;
      if (a > 0) {
        const Vec3 d = r[a - 1] - r[a];
        w = prop(r[a], d.normalized(), 0.0, d.norm()) * w;
      }
    }
    out.reciprocal.push_back(ch.output.dot(prop(r[0], -z, 0.0, cbs::kInfinity) * w));
  }
  return out;
}

/// Prefactor turning (1/3^n) sum |A|^2 into units of sigma_0 with 1/r^2 legs.
inline double path_prefactor(const std::vector<Vec3>& r) {
  const cbs::LevelScheme lv;
  const int n = static_cast<int>(r.size());
  double f = std::pow(cbs::event_factor(lv), n) / cbs::resonant_cross_section(lv) / std::pow(3.0, n);
  for (int a = 0; a + 1 < n; ++a) f /= (r[a + 1] - r[a]).squaredNorm();
  return f;
}

}  // namespace oracle
