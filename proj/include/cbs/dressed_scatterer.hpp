#pragma once

// Single-atom scattering tensor of an F=1 atom dressed by the sigma+ control
// field (Lambda configuration through F'=1, n <-> |F=2, m'=n-1>).
// Internal units: hbar = Gamma = 1, dipoles in units of the F=1 reduced
// element, detunings in Gamma.

#include <array>

#include "cbs/atomic_structure.hpp"
#include "cbs/frame.hpp"

namespace cbs {

/// Sigma_{n m'}(Delta) = |V_{n m'}|^2 / (Delta + i/2).
inline Complex self_energy(int n, int m_prime, double delta,
                           const ControlCoupling& coupling) {
  const double v2 = std::norm(control_matrix_element(n, m_prime, coupling));
  return v2 / Complex(delta, 0.5);
}

/// The EIT brace 1 - |V|^2 / [(D)(Dc - D + Sigma)], D = Delta + i/2, written
/// as D x / (D x + |V|^2) with x = Delta_c - Delta so the dark point Delta =
/// Delta_c gives an exact zero.
inline Complex dressing_factor(double v2, double delta, double control_detuning) {
  if (v2 == 0.0) return 1.0;
  const Complex d(delta, 0.5);
  const double x = control_detuning - delta;
  const Complex dx = d * x;
  return dx / (dx + v2);
}

/// The brace exactly as printed, 1 - (|V|^2/D) / (Dc - Delta + Sigma).
inline Complex dressing_factor_printed(double v2, double delta, double control_detuning) {
  const Complex d(delta, 0.5);
  const Complex sigma = v2 / d;
  return 1.0 - (v2 / d) / (control_detuning - delta + sigma);
}

/// Resonance denominator times brace for excited sublevel n:
/// f_n(Delta) = {brace_n} / (Delta + i/2).
inline Complex resonance_factor(int n, double delta, const ControlCoupling& coupling,
                                bool dressed = true) {
  const Complex bare = 1.0 / Complex(delta, 0.5);
  if (!dressed) return bare;
  const double v2 = std::norm(control_matrix_element(n, control_partner(n), coupling));
  return bare * dressing_factor(v2, delta, coupling.detuning);
}

struct ScatteringTensor {
  GroundState initial{1, 0};
  GroundState final_state{1, 0};
  double detuning = 0.0;
  /// alpha_{lj} in the lab Cartesian basis; amplitude e_out^* . alpha . e_in.
  Mat3c components = Mat3c::Zero();
};

/// alpha^{(m'' m)}_{lj}(Delta) = -sum_n (d_l)_{m'' n} (d_j)_{n m} f_n(Delta).
/// Set `dressed` to false to force the brace to 1.
inline ScatteringTensor scattering_tensor(GroundState initial, GroundState final_state,
                                          double delta, const ControlCoupling& coupling,
                                          const LevelScheme& levels = {},
                                          bool dressed = true) {
  if (initial.F != 1) throw DomainError("scattering starts from the populated F=1 level");
  if (final_state.F != 1 && final_state.F != 2)
    throw DomainError("final ground level must be F=1 or F=2");
  if (std::abs(initial.m) > 1 || std::abs(final_state.m) > final_state.F)
    throw DomainError("Zeeman label out of range");
  ScatteringTensor t{initial, final_state, delta, Mat3c::Zero()};
  for (int n = -1; n <= 1; ++n) {
    const Vec3c absorb = dipole_vector(initial, {1, n}, levels);
    if (absorb.isZero(0.0)) continue;
    const Vec3c emit = dipole_vector(final_state, {1, n}, levels).conjugate();
    if (emit.isZero(0.0)) continue;
    t.components -= resonance_factor(n, delta, coupling, dressed) * (emit * absorb.transpose());
  }
  return t;
}

/// The tensor contracted with the transverse axes of the incoming and outgoing
/// ray frames: result(a, b) = out_a . alpha . in_b.
inline Mat2c transverse_restriction(const ScatteringTensor& tensor, const RayFrame& frame_in,
                                    const RayFrame& frame_out) {
  if (!frame_in.is_orthonormal() || !frame_out.is_orthonormal())
    throw DomainError("ray frames must be orthonormal right-handed triads");
  return frame_out.transverse().cast<Complex>().transpose() * tensor.components *
         frame_in.transverse().cast<Complex>();
}

/// The nine F=1 -> F=1 tensors at one detuning, indexed [m + 1][m'' + 1].
struct RayleighTensors {
  double detuning = 0.0;
  std::array<std::array<Mat3c, 3>, 3> alpha;

  RayleighTensors(double delta, const ControlCoupling& coupling,
                  const LevelScheme& levels = {})
      : detuning(delta) {
    for (int m = -1; m <= 1; ++m)
      for (int mf = -1; mf <= 1; ++mf)
        alpha[m + 1][mf + 1] =
            scattering_tensor({1, m}, {1, mf}, delta, coupling, levels).components;
  }

  const Mat3c& operator()(int m, int m_final) const { return alpha[m + 1][m_final + 1]; }
};

}  // namespace cbs
