#include <catch_amalgamated.hpp>

#include "cbs/dressed_scatterer.hpp"

using namespace cbs;
using Catch::Approx;

namespace {
double max_abs(const Mat3c& m) { return m.cwiseAbs().maxCoeff(); }
}

TEST_CASE("dark point: every Rayleigh and Raman tensor vanishes at Delta = Delta_c = 0") {
  for (double om : {0.5, 3.0}) {
    const ControlCoupling c{om, 0.0};
    for (int m = -1; m <= 1; ++m) {
      for (int mf = -1; mf <= 1; ++mf)
        CHECK(max_abs(scattering_tensor({1, m}, {1, mf}, 0.0, c).components) < 1e-10);
      for (int mf = -2; mf <= 2; ++mf)
        CHECK(max_abs(scattering_tensor({1, m}, {2, mf}, 0.0, c).components) < 1e-10);
    }
  }
}

TEST_CASE("stable dressing factor equals the printed brace away from the dark point") {
  for (double v2 : {0.0, 0.0625, 2.25, 4.5})
    for (double d : {-3.0, -1.1, -0.2, 0.3, 1.7})
      for (double dc : {0.0, 0.4}) {
        const Complex a = dressing_factor(v2, d, dc);
        const Complex b = dressing_factor_printed(v2, d, dc);
        CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(b)));
      }
  CHECK(dressing_factor(2.25, 0.0, 0.0) == Complex(0.0));
  CHECK(self_energy(0, -1, 1.0, {3.0, 0.0}) == Complex(2.25) / Complex(1.0, 0.5));
}

TEST_CASE("bare tensor equals the hand contraction of two dipole vectors") {
  const ControlCoupling none;
  const double d = 1.0;
  const auto t = scattering_tensor({1, 1}, {1, 0}, d, none);
  // only n = 1 couples m = 1 (q = 0) and m'' = 0 (q = +1)
  const Vec3c absorb = dipole_vector({1, 1}, {1, 1});
  const Vec3c emit = dipole_vector({1, 0}, {1, 1}).conjugate();
  const Mat3c expected = -(emit * absorb.transpose()) / Complex(d, 0.5);
  CHECK(max_abs(t.components - expected) < 1e-15);
}

TEST_CASE("Autler-Townes doublet of a dressed resonance factor") {
  // f_n has poles where (Delta + i/2)(Delta_c - Delta) + |V|^2 = 0.
  const ControlCoupling c{3.0, 0.0};
  for (int n = -1; n <= 1; ++n) {
    const double v = std::abs(control_matrix_element(n, control_partner(n), c));
    double best = 0.0, at = 0.0;
    for (double x = 0.01; x < 6.0; x += 1e-3) {
      const double y = std::abs(resonance_factor(n, x, c));
      if (y > best) {
        best = y;
        at = x;
      }
    }
    CHECK(at == Approx(v).margin(0.1));
  }
}

TEST_CASE("F=2 final states use the sqrt(5) reduced element") {
  const ControlCoupling none;
  const auto t = scattering_tensor({1, 0}, {2, 1}, 1.0, none);
  CHECK(max_abs(t.components) > 0.0);
  CHECK_THROWS_AS(scattering_tensor({2, 0}, {1, 0}, 0.0, none), DomainError);
  CHECK_THROWS_AS(scattering_tensor({1, 0}, {1, 2}, 0.0, none), DomainError);
  CHECK_THROWS_AS(scattering_tensor({1, 0}, {3, 0}, 0.0, none), DomainError);
}

TEST_CASE("transverse restriction contracts with frame axes") {
  const ControlCoupling none;
  const auto t = scattering_tensor({1, 0}, {1, 0}, 0.5, none);
  const RayFrame in = RayFrame::along(Vec3::UnitZ());
  const RayFrame out = RayFrame::along(Vec3(1, 1, 0));
  const Mat2c r = transverse_restriction(t, in, out);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const Vec3 ea = a == 0 ? out.x : out.y;
      const Vec3 eb = b == 0 ? in.x : in.y;
      CHECK(std::abs(r(a, b) - Complex(ea.cast<Complex>().transpose() * t.components * eb.cast<Complex>())) < 1e-15);
    }
  RayFrame skew = in;
  skew.x = Vec3(1, 1, 0);
  CHECK_THROWS_AS(transverse_restriction(t, skew, out), DomainError);
}

TEST_CASE("Rayleigh tensor cache indexes initial then final") {
  const ControlCoupling c{0.5, 0.0};
  const RayleighTensors cache(0.7, c);
  CHECK(max_abs(cache(-1, 1) - scattering_tensor({1, -1}, {1, 1}, 0.7, c).components) == 0.0);
}
