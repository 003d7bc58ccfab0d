#include <catch_amalgamated.hpp>

#include "cbs/atomic_structure.hpp"
#include "oracles.hpp"

using namespace cbs;
using Catch::Approx;

TEST_CASE("wigner3j matches the Racah sum on every small argument set") {
  int checked = 0;
  for (int j1 = 0; j1 <= 4; ++j1)
    for (int j2 = 0; j2 <= 4; ++j2)
      for (int j3 = 0; j3 <= 6; ++j3)
        for (int m1 = -j1; m1 <= j1; ++m1)
          for (int m2 = -j2; m2 <= j2; ++m2) {
            const int m3 = -m1 - m2;
            const double a = wigner3j(j1, j2, j3, m1, m2, m3);
            const double b = oracle::racah_3j(j1, j2, j3, m1, m2, m3);
            REQUIRE(a == Approx(b).margin(1e-13));
            ++checked;
          }
  CHECK(checked > 1000);
}

TEST_CASE("wigner3j known values and selection rules") {
  CHECK(wigner3j(2, 2, 0, 0, 0, 0) == Approx(-1.0 / std::sqrt(3.0)));
  CHECK(wigner3j(2, 2, 2, 2, -2, 0) == Approx(1.0 / std::sqrt(6.0)));
  CHECK(wigner3j(2, 2, 2, 0, 0, 0) == 0.0);  // odd J sum with all m = 0
  CHECK(wigner3j(2, 2, 2, 2, 2, 0) == 0.0);  // m sum
  CHECK(wigner3j(2, 2, 6, 0, 0, 0) == 0.0);  // triangle
  CHECK(wigner3j(1, 1, 2, 1, 1, -2) == Approx(-1.0 / std::sqrt(3.0)));  // stretched, j = 1/2
}

TEST_CASE("dipole elements follow the Wigner-Eckart convention") {
  const LevelScheme lv;
  CHECK(dipole_element({1, 0}, {1, 0}, 0, lv) == 0.0);
  CHECK(dipole_element({1, 0}, {1, 1}, 1, lv) == Approx(-1.0 / std::sqrt(6.0)));
  CHECK(dipole_element({1, -1}, {1, 0}, 1, lv) == Approx(-1.0 / std::sqrt(6.0)));
  CHECK(dipole_element({1, 1}, {1, 1}, 0, lv) == Approx(1.0 / std::sqrt(6.0)));
  CHECK(dipole_element({1, 1}, {1, 0}, 1, lv) == 0.0);  // q mismatch
  CHECK_THROWS_AS(dipole_element({1, 2}, {1, 0}, 0, lv), DomainError);
  CHECK_THROWS_AS(dipole_element({1, 0}, {2, 0}, 0, lv), DomainError);
  CHECK_THROWS_AS(dipole_element({3, 0}, {1, 0}, 0, lv), DomainError);
}

TEST_CASE("line strengths reproduce the 1/6 branching to F=1") {
  const LevelScheme lv;
  for (int n = -1; n <= 1; ++n) {
    double to1 = 0.0, to2 = 0.0;
    for (int q = -1; q <= 1; ++q) {
      for (int m = -1; m <= 1; ++m) to1 += std::pow(dipole_element({1, m}, {1, n}, q, lv), 2);
      for (int m = -2; m <= 2; ++m) to2 += std::pow(dipole_element({2, m}, {1, n}, q, lv), 2);
    }
    CHECK(to1 / (to1 + to2) == Approx(1.0 / 6.0));
  }
}

TEST_CASE("enumerate_transitions covers the manifold") {
  const auto t1 = enumerate_transitions(1);
  const auto t2 = enumerate_transitions(2);
  CHECK(t1.size() == 27);
  CHECK(t2.size() == 45);
  int nonzero = 0;
  for (const auto& t : t1) nonzero += t.amplitude != 0.0;
  CHECK(nonzero == 6);  // m = 0 -> n = 0 is forbidden
}

TEST_CASE("dipole vectors pick out one spherical component") {
  // e_q . v = d_q for v = sum_q d_q e_q^*
  const Vec3c v = dipole_vector({1, 0}, {1, 1});
  const Complex plus = spherical_unit(1).transpose() * v;
  const Complex minus = spherical_unit(-1).transpose() * v;
  const Complex zero = spherical_unit(0).transpose() * v;
  CHECK(std::abs(plus - dipole_element({1, 0}, {1, 1}, 1, LevelScheme{})) < 1e-15);
  CHECK(std::abs(minus) < 1e-15);
  CHECK(std::abs(zero) < 1e-15);
  CHECK(std::abs(spherical_unit(1).squaredNorm() - 1.0) < 1e-15);
  CHECK(std::abs(spherical_unit(1).dot(spherical_unit(-1))) < 1e-15);
}

TEST_CASE("control couplings scale with the F=2 -> F'=1 sigma+ Clebsch-Gordan ratios") {
  const ControlCoupling c{3.0, 0.0};
  CHECK(std::abs(control_matrix_element(0, -1, c)) == Approx(1.5));
  CHECK(std::abs(control_matrix_element(-1, -2, c)) / 1.5 == Approx(std::sqrt(2.0)));
  CHECK(std::abs(control_matrix_element(1, 0, c)) / 1.5 == Approx(1.0 / std::sqrt(3.0)));
  CHECK(control_matrix_element(0, 0, c) == 0.0);
  CHECK(control_partner(1) == 0);
  const auto s = control_strengths(c);
  CHECK(s[0] == Approx(4.5));
  CHECK(s[1] == Approx(2.25));
  CHECK(s[2] == Approx(0.75));
}

TEST_CASE("control coupling validation") {
  CHECK_THROWS_AS((ControlCoupling{-1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((ControlCoupling{1.0, std::nan("")}.validate()), ConfigError);
  CHECK_NOTHROW((ControlCoupling{0.0, 0.0}.validate()));
}

TEST_CASE("level scheme physical scale") {
  const LevelScheme lv;
  lv.validate();
  // F=2 reduced element from the 5/6 branching
  CHECK(lv.reduced_dipole(2) == Approx(std::sqrt(5.0)));
  // u = 9 b / (4 k^3) with b = 1/6
  const double k = lv.wavenumber();
  CHECK(lv.polarizability_unit() == Approx(3.0 / (8.0 * k * k * k)));
  LevelScheme bad = lv;
  bad.excited_F = 2;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}
