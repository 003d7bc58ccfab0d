#pragma once

// Exact-backscattering cross sections of the cloud by Monte Carlo over atomic
// configurations. Zeeman sums are exact: each scattering event acts on the
// 3x3 field coherence (ladder) or direct/reciprocal cross coherence (crossed)
// through a 9x9 superoperator averaged over m and summed over m''.
//
// Estimator: one chain r_1, ..., r_N per sample. r_1 is a forced first
// collision along the incident ray; each later atom is a forced collision along
// an isotropic direction from its predecessor. The order-n contribution of the
// chain prefix (r_1..r_n) is scored at every n (local estimation toward
// k' = -k). Cross sections are dsigma/dOmega in units of sigma_0 per steradian.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cbs/dressed_scatterer.hpp"
#include "cbs/medium.hpp"
#include "cbs/observables.hpp"
#include "cbs/parallel.hpp"
#include "cbs/propagation.hpp"
#include "cbs/rng.hpp"

namespace cbs {

using Mat9c = Eigen::Matrix<Complex, 9, 9>;
using Vec9c = Eigen::Matrix<Complex, 9, 1>;

/// Incident direction; detection is at k' = -k.
inline const Vec3 kIncidence = Vec3::UnitZ();

struct MonteCarloParams {
  std::size_t samples = 10000;
  int max_order = 8;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Extinction cross section (cm^2) used to place atoms; 0 selects it from
  /// the lab extinction at the detuning.
  double sampling_cross_section = 0.0;
  /// Maxwellian width k sigma_v / Gamma of the scatterers' velocities.
  double doppler_width = 0.0;
  /// Test hook: false sets every phase integral to zero.
  bool attenuation = true;
  HelicityConvention convention = HelicityConvention::kPerBeam;

  void validate() const {
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (max_order < 1) throw ConfigError("max_order must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(sampling_cross_section >= 0.0) || !std::isfinite(sampling_cross_section))
      throw ConfigError("sampling_cross_section must be finite and >= 0");
    if (!(doppler_width >= 0.0) || !std::isfinite(doppler_width))
      throw ConfigError("doppler_width must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Superoperators

/// Matrix of X -> A X B on column-major vec(X), given B^T and A.
inline Mat9c sandwich(const Mat3c& b_transpose, const Mat3c& a) {
  Mat9c m;
  for (int c = 0; c < 3; ++c)
    for (int l = 0; l < 3; ++l)
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) m(r + 3 * c, k + 3 * l) = b_transpose(c, l) * a(r, k);
  return m;
}

/// rho -> (1/3) sum alpha rho alpha^dagger over initial m and final m''.
inline Mat9c ladder_superoperator(const RayleighTensors& t) {
  Mat9c s = Mat9c::Zero();
  for (const auto& row : t.alpha)
    for (const Mat3c& a : row) s += sandwich(a.conjugate(), a);
  return s / 3.0;
}

/// Q -> (1/3) sum alpha_d Q conj(alpha_r) with matching labels.
inline Mat9c crossed_superoperator(const RayleighTensors& direct, const RayleighTensors& reciprocal) {
  Mat9c s = Mat9c::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += sandwich(reciprocal.alpha[i][j].adjoint(), direct.alpha[i][j]);
  return s / 3.0;
}

inline Mat3c apply_superoperator(const Mat9c& s, const Mat3c& x) {
  Mat3c y;
  Eigen::Map<Vec9c>(y.data()) = s * Eigen::Map<const Vec9c>(x.data());
  return y;
}

// ---------------------------------------------------------------------------
// Per-detuning cache

/// Everything about one probe detuning that does not depend on positions.
struct SpectralPoint {
  double delta = 0.0;
  LabSusceptibility unit_chi;
  RayleighTensors tensors;
  Mat9c ladder_super;
  Mat9c crossed_super;
  RayOptics incoming;  // along +z
  RayOptics outgoing;  // along -z

  SpectralPoint(double d, const ControlCoupling& coupling, const LevelScheme& levels)
      : delta(d),
        unit_chi(unit_lab_susceptibility(d, coupling, levels)),
        tensors(d, coupling, levels),
        ladder_super(ladder_superoperator(tensors)),
        crossed_super(crossed_superoperator(tensors, tensors)),
        incoming(RayOptics::make(kIncidence, unit_chi, levels)),
        outgoing(RayOptics::make(-kIncidence, unit_chi, levels)) {}
};

/// Lab-frame propagator along `direction` through `column` atoms/cm^2.
inline Mat3c lab_propagator(const RayOptics& optics, double column) {
  return greens_matrix(optics, column).lab();
}

inline Mat3c lab_propagator(const Vec3& direction, double column, const LabSusceptibility& unit_chi,
                            const LevelScheme& levels) {
  return lab_propagator(RayOptics::make(direction, unit_chi, levels), column);
}

/// Placement cross section: the smallest lab eigen-extinction, floored at a
/// quarter of the mean and at 1e-3 sigma_0 so transparent points still sample.
inline double sampling_cross_section(const LabSusceptibility& unit_chi, const LevelScheme& levels) {
  double lo = std::numeric_limits<double>::infinity(), mean = 0.0;
  for (int q = -1; q <= 1; ++q) {
    const double s = std::max(0.0, extinction_cross_section(unit_chi, q, levels));
    lo = std::min(lo, s);
    mean += s / 3.0;
  }
  return std::max({lo, 0.25 * mean, 1e-3 * resonant_cross_section(levels)});
}

/// (k^2 u_alpha)^2: converts one internal |alpha|^2 to cm^2.
inline double event_factor(const LevelScheme& levels) {
  const double k = levels.wavenumber();
  const double a = k * k * levels.polarizability_unit();
  return a * a;
}

// ---------------------------------------------------------------------------
// Paths

/// Ordered atoms of one scattering sequence plus the probe detuning. The
/// frequencies of every leg follow from elastic scattering in each atom's rest
/// frame (F=1 Zeeman sublevels are degenerate, so omega_{m''m} = 0).
struct ScatteringPath {
  std::vector<Vec3> positions;   // cm
  std::vector<Vec3> velocities;  // cm/s; empty means all at rest
  double delta = 0.0;            // incident detuning, Gamma
  Vec3 k_in = kIncidence;

  int order() const { return static_cast<int>(positions.size()); }

  Vec3 velocity(int a) const {
    return velocities.empty() ? Vec3::Zero() : velocities[static_cast<std::size_t>(a)];
  }

  /// Unit direction of leg a -> a + 1.
  Vec3 leg_direction(int a) const {
    const Vec3 d = positions[a + 1] - positions[a];
    const double n = d.norm();
    if (!(n > 0.0)) throw DomainError("coincident atoms in scattering path");
    return d / n;
  }

  double leg_length(int a) const { return (positions[a + 1] - positions[a]).norm(); }

  /// Detunings along the direct sequence: [in, leg 1->2, ..., out], plus the
  /// rest-frame detuning seen by each atom.
  struct Frequencies {
    std::vector<double> legs;   // n + 1 entries
    std::vector<double> atoms;  // n entries, in direct visiting order
  };

  Frequencies direct_frequencies(const LevelScheme& levels) const {
    return frequencies(false, levels);
  }
  /// Same for the reciprocal sequence n -> ... -> 1; `atoms` is indexed by
  /// the original atom label, `legs` by visiting order.
  Frequencies reciprocal_frequencies(const LevelScheme& levels) const {
    return frequencies(true, levels);
  }

 private:
  Frequencies frequencies(bool reversed, const LevelScheme& levels) const {
    const int n = order();
    const double doppler = levels.wavenumber() / levels.gamma;
    Frequencies f;
    f.legs.push_back(delta);
    f.atoms.assign(static_cast<std::size_t>(n), 0.0);
    const Vec3 k_out = -k_in.normalized();
    double current = delta;
    for (int step = 0; step < n; ++step) {
      const int a = reversed ? n - 1 - step : step;
      Vec3 u_in, u_out;
      if (!reversed) {
        u_in = step == 0 ? k_in.normalized() : leg_direction(a - 1);
        u_out = step == n - 1 ? k_out : leg_direction(a);
      } else {
        u_in = step == 0 ? k_in.normalized() : Vec3(-leg_direction(a));
        u_out = step == n - 1 ? k_out : Vec3(-leg_direction(a - 1));
      }
      const Vec3 v = velocity(a);
      const double rest = current - doppler * v.dot(u_in);
      f.atoms[static_cast<std::size_t>(a)] = rest;
      current = rest + doppler * v.dot(u_out);
      f.legs.push_back(current);
    }
    return f;
  }
};

// ---------------------------------------------------------------------------
// Generic evaluation (per-leg frequencies)

struct MediumContext {
  const CloudGeometry* cloud;
  const ControlCoupling* coupling;
  const LevelScheme* levels;
  bool attenuation = true;

  double column(const Vec3& p, const Vec3& u, double s0, double s1) const {
    return attenuation ? cloud->column(p, u, s0, s1) : 0.0;
  }
  Mat3c propagator(const Vec3& p, const Vec3& u, double s0, double s1, double delta) const {
    return lab_propagator(u, column(p, u, s0, s1),
                          unit_lab_susceptibility(delta, *coupling, *levels), *levels);
  }
  Mat3c incoming(const Vec3& r, const Vec3& k_in, double delta) const {
    return propagator(r, k_in, -kInfinity, 0.0, delta);
  }
  Mat3c outgoing(const Vec3& r, const Vec3& k_in, double delta) const {
    return propagator(r, -k_in, 0.0, kInfinity, delta);
  }
};

/// Zeeman-summed ladder and direct x conj(reciprocal) products of one path,
/// in units of sigma_0, with the 1/r^2 leg factors included.
struct PathContribution {
  double ladder = 0.0;   // (1/3^n) sum |A_d|^2
  Complex crossed = 0.0; // (1/3^n) sum A_d conj(A_r), times the frequency phase
};

inline PathContribution evaluate_path(const ScatteringPath& path, const ChannelVectors& ch,
                                      const MediumContext& medium) {
  const int n = path.order();
  if (n < 1) throw DomainError("empty scattering path");
  const LevelScheme& levels = *medium.levels;
  const auto fd = path.direct_frequencies(levels);
  const auto fr = path.reciprocal_frequencies(levels);
  const Vec3 k_in = path.k_in.normalized();

  double geometric = std::pow(event_factor(levels), n) / resonant_cross_section(levels);
  for (int a = 0; a + 1 < n; ++a) {
    const double l = path.leg_length(a);
    if (!(l > 0.0)) throw DomainError("coincident atoms in scattering path");
    geometric /= l * l;
  }

  // Ladder along the direct sequence.
  Vec3c v = medium.incoming(path.positions[0], k_in, path.delta) * ch.input;
  Mat3c rho = v * v.adjoint();
  for (int a = 0; a < n; ++a) {
    const RayleighTensors t(fd.atoms[a], *medium.coupling, levels);
    rho = apply_superoperator(ladder_superoperator(t), rho);
    if (a + 1 < n) {
      const Vec3 u = path.leg_direction(a);
      const Mat3c g = medium.propagator(path.positions[a], u, 0.0, path.leg_length(a), fd.legs[a + 1]);
      rho = g * rho * g.adjoint();
    }
  }
  const Vec3c w = medium.outgoing(path.positions[n - 1], k_in, fd.legs[n]).adjoint() * ch.output;
  PathContribution out;
  out.ladder = geometric * (w.adjoint() * rho * w)(0, 0).real();

  // Cross coherence: left index follows the direct sequence 1 -> n, right
  // index the reciprocal sequence read backwards.
  const Mat3c x_out_rec = medium.outgoing(path.positions[0], k_in, fr.legs[n]);
  Mat3c q = (medium.incoming(path.positions[0], k_in, path.delta) * ch.input) *
            (ch.output.transpose() * x_out_rec.conjugate());
  for (int a = 0; a < n; ++a) {
    const RayleighTensors td(fd.atoms[a], *medium.coupling, levels);
    const RayleighTensors tr(fr.atoms[a], *medium.coupling, levels);
    q = apply_superoperator(crossed_superoperator(td, tr), q);
    if (a + 1 < n) {
      const Vec3 u = path.leg_direction(a);
      const double l = path.leg_length(a);
      // reciprocal leg a+1 -> a is visited at step n - 1 - a
      const Mat3c gf = medium.propagator(path.positions[a], u, 0.0, l, fd.legs[a + 1]);
      const Mat3c gb = medium.propagator(path.positions[a + 1], -u, 0.0, l, fr.legs[n - 1 - a]);
      q = gf * q * gb.conjugate();
    }
  }
  const Vec3c row = medium.outgoing(path.positions[n - 1], k_in, fd.legs[n]).transpose() *
                    ch.output.conjugate();
  const Vec3c col = (medium.incoming(path.positions[n - 1], k_in, path.delta) * ch.input).conjugate();
  Complex product = row.transpose() * q * col;

  // Residual free-space phase of frequency-shifted legs; zero when all atoms
  // are at rest.
  double phase = path.delta * (path.positions[0].dot(k_in) - path.positions[n - 1].dot(k_in));
  for (int a = 0; a + 1 < n; ++a)
    phase += (fd.legs[a + 1] - fr.legs[n - 1 - a]) * path.leg_length(a);
  phase += fd.legs[n] * path.positions[n - 1].dot(k_in) - fr.legs[n] * path.positions[0].dot(k_in);
  phase *= levels.gamma / kSpeedOfLight;
  out.crossed = geometric * product * std::exp(kI * phase);
  return out;
}

/// Ladder contribution of a path: Zeeman-summed |A_d|^2 in units of sigma_0.
inline double ladder_term(const ScatteringPath& path, const PolarizationChannel& channel,
                          const CloudGeometry& cloud, const ControlCoupling& coupling,
                          const LevelScheme& levels = {},
                          HelicityConvention convention = HelicityConvention::kPerBeam,
                          bool attenuation = true) {
  const MediumContext m{&cloud, &coupling, &levels, attenuation};
  return evaluate_path(path, channel_vectors(channel, path.k_in, convention), m).ladder;
}

/// Interference of a path with its reciprocal: 2 Re sum A_d conj(A_r), in
/// units of sigma_0. Evaluates the reversed path too and requires the pair
/// sum to be real.
inline double crossed_term(const ScatteringPath& path, const PolarizationChannel& channel,
                           const CloudGeometry& cloud, const ControlCoupling& coupling,
                           const LevelScheme& levels = {},
                           HelicityConvention convention = HelicityConvention::kPerBeam,
                           bool attenuation = true) {
  const MediumContext m{&cloud, &coupling, &levels, attenuation};
  const ChannelVectors ch = channel_vectors(channel, path.k_in, convention);
  const Complex p = evaluate_path(path, ch, m).crossed;
  ScatteringPath rev = path;
  std::reverse(rev.positions.begin(), rev.positions.end());
  if (!rev.velocities.empty()) std::reverse(rev.velocities.begin(), rev.velocities.end());
  const Complex pr = evaluate_path(rev, ch, m).crossed;
  const double scale = std::max(std::abs(p), std::abs(pr));
  if (std::abs((p + pr).imag()) > 1e-10 * scale + 1e-300)
    throw std::logic_error("crossed term of a path and its reverse is not real");
  return (p + pr).real();
}

// ---------------------------------------------------------------------------
// Sampling

struct SampledChain {
  std::vector<Vec3> positions;
  /// W_n: density-over-pdf weight of the prefix (r_1..r_n), 1/r^2 included;
  /// zero once the chain is rejected.
  std::vector<double> weights;
  int valid_orders = 0;
};

/// Draws a chain of `max_order` atoms. Always consumes 3 + 3 (max_order - 1)
/// uniforms so streams stay aligned across detunings.
inline SampledChain sample_chain(const CloudGeometry& cloud, double sigma_s, int max_order,
                                 SampleRng& rng) {
  SampledChain c;
  c.positions.resize(static_cast<std::size_t>(max_order), cloud.center);
  c.weights.assign(static_cast<std::size_t>(max_order), 0.0);
  const double s = cloud.sigma();
  const auto [g1, g2] = rng.normal_pair();
  const double xi1 = rng.uniform_open();
  const Vec3 origin = cloud.center + Vec3(s * g1, s * g2, 0.0);
  const double p_xy = std::exp(-0.5 * (g1 * g1 + g2 * g2)) / (2.0 * kPi * s * s);
  const double total = sigma_s * cloud.column(origin, kIncidence, -kInfinity, kInfinity);
  const double hit = -std::expm1(-total);
  double w = 0.0;
  if (hit > 0.0 && p_xy > 0.0) {
    const double tau = -std::log1p(-xi1 * hit);
    const double z = cloud.distance_for_column(origin, kIncidence, -kInfinity, tau / sigma_s);
    c.positions[0] = origin + z * kIncidence;
    w = hit * std::exp(tau) / (sigma_s * p_xy);
    if (!std::isfinite(w)) w = 0.0;
  }
  c.weights[0] = w;
  c.valid_orders = w > 0.0 ? 1 : 0;
  for (int a = 1; a < max_order; ++a) {
    const Vec3 u = rng.direction();
    const double xi = rng.uniform_open();
    if (w == 0.0) continue;
    const Vec3& r = c.positions[a - 1];
    const double reach = -std::expm1(-sigma_s * cloud.column(r, u, 0.0, kInfinity));
    if (!(reach > 0.0)) {
      w = 0.0;
      continue;
    }
    const double tau = -std::log1p(-xi * reach);
    const double dist = cloud.distance_for_column(r, u, 0.0, tau / sigma_s);
    if (!(dist > 1e-9 * s) || !std::isfinite(dist)) {
      w = 0.0;
      continue;
    }
    c.positions[a] = r + dist * u;
    w *= 4.0 * kPi * reach * std::exp(tau) / sigma_s;
    if (!std::isfinite(w)) w = 0.0;
    c.weights[a] = w;
    if (w > 0.0) c.valid_orders = a + 1;
  }
  return c;
}

/// Maxwellian velocities of a chain, from a stream independent of positions.
inline std::vector<Vec3> sample_velocities(double doppler_width, int count, std::uint64_t seed,
                                           std::uint64_t index, const LevelScheme& levels) {
  std::vector<Vec3> v(static_cast<std::size_t>(count), Vec3::Zero());
  if (doppler_width == 0.0) return v;
  SampleRng rng(seed ^ 0xa0761d6478bd642fULL, index);
  const double sv = doppler_width * levels.gamma / levels.wavenumber();
  for (auto& x : v) {
    const auto [a, b] = rng.normal_pair();
    const auto [c, d] = rng.normal_pair();
    (void)d;
    x = sv * Vec3(a, b, c);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Per-sample tallies

/// Layout of one sample's scores: for each of the four channels, N ladder
/// entries (order 1 is single scattering) followed by N crossed entries
/// (order 1 unused, always 0). Crossed entries hold Re(A_d conj(A_r)) so the
/// ordered-path integral counts each reciprocal pair once.
struct TallyLayout {
  int max_order = 1;
  int stride() const { return 4 * 2 * max_order; }
  int ladder(int channel, int order) const { return channel * 2 * max_order + order - 1; }
  int crossed(int channel, int order) const { return channel * 2 * max_order + max_order + order - 1; }
};

/// Scores one chain at rest for all four channels.
inline void score_chain_at_rest(const SampledChain& chain, const SpectralPoint& point,
                                const CloudGeometry& cloud, const LevelScheme& levels,
                                const MonteCarloParams& params, double* out) {
  const TallyLayout lay{params.max_order};
  const int n = chain.valid_orders;
  if (n == 0) return;
  const double unit = event_factor(levels) / resonant_cross_section(levels);
  const double kfac = event_factor(levels);
  auto col = [&](const Vec3& p, const Vec3& u, double s0, double s1) {
    return params.attenuation ? cloud.column(p, u, s0, s1) : 0.0;
  };
  std::vector<Mat3c> x_in(n), x_out(n), g_fwd(n), g_bwd(n);
  for (int a = 0; a < n; ++a) {
    const Vec3& r = chain.positions[a];
    x_in[a] = lab_propagator(point.incoming, col(r, kIncidence, -kInfinity, 0.0));
    x_out[a] = lab_propagator(point.outgoing, col(r, -kIncidence, 0.0, kInfinity));
  }
  for (int a = 0; a + 1 < n; ++a) {
    const Vec3 d = chain.positions[a + 1] - chain.positions[a];
    const double l = d.norm();
    const Vec3 u = d / l;
    const double column = col(chain.positions[a], u, 0.0, l);
    g_fwd[a] = lab_propagator(u, column, point.unit_chi, levels);
    g_bwd[a] = lab_propagator(-u, column, point.unit_chi, levels);
  }
  const auto channels = all_channels();
  std::array<Vec3c, 2> e_in, e_out;
  for (int c = 0; c < 4; ++c) {
    const ChannelVectors v = channel_vectors(channels[c], kIncidence, params.convention);
    e_in[c / 2] = v.input;
    e_out[c % 2] = v.output;
  }
  // Ladder: one coherence per input helicity, read out for both outputs.
  for (int h = 0; h < 2; ++h) {
    const Vec3c v = x_in[0] * e_in[h];
    Mat3c rho = v * v.adjoint();
    double scale = unit;
    for (int k = 1; k <= n; ++k) {
      const Mat3c after = apply_superoperator(point.ladder_super, rho);
      const double f = chain.weights[k - 1] * scale;
      for (int o = 0; o < 2; ++o) {
        const Vec3c w = x_out[k - 1].adjoint() * e_out[o];
        out[lay.ladder(2 * h + o, k)] = f * (w.adjoint() * after * w)(0, 0).real();
      }
      if (k < n) rho = g_fwd[k - 1] * after * g_fwd[k - 1].adjoint();
      scale *= kfac;
    }
  }
  if (n < 2) return;
  for (int c = 0; c < 4; ++c) {
    const Vec3c& e = e_in[c / 2];
    const Vec3c& ep = e_out[c % 2];
    Mat3c q = (x_in[0] * e) * (ep.transpose() * x_out[0].conjugate());
    double scale = unit;
    for (int k = 1; k <= n; ++k) {
      const Mat3c after = apply_superoperator(point.crossed_super, q);
      if (k >= 2) {
        const Vec3c row = x_out[k - 1].transpose() * ep.conjugate();
        const Vec3c colv = (x_in[k - 1] * e).conjugate();
        const Complex val = (row.transpose() * after * colv)(0, 0);
        out[lay.crossed(c, k)] = chain.weights[k - 1] * scale * val.real();
      }
      if (k < n) q = g_fwd[k - 1] * after * g_bwd[k - 1].conjugate();
      scale *= kfac;
    }
  }
}

/// Scores one chain with moving atoms: every order is evaluated on its own
/// frequency bookkeeping (O(N^2) per chain).
inline void score_chain_moving(const SampledChain& chain, const std::vector<Vec3>& velocities,
                               double delta, const CloudGeometry& cloud,
                               const ControlCoupling& coupling, const LevelScheme& levels,
                               const MonteCarloParams& params, double* out) {
  const TallyLayout lay{params.max_order};
  const MediumContext m{&cloud, &coupling, &levels, params.attenuation};
  const auto channels = all_channels();
  for (int k = 1; k <= chain.valid_orders; ++k) {
    ScatteringPath path;
    path.delta = delta;
    path.positions.assign(chain.positions.begin(), chain.positions.begin() + k);
    path.velocities.assign(velocities.begin(), velocities.begin() + k);
    // evaluate_path divides by leg lengths squared; the chain weight already did.
    double legs = 1.0;
    for (int a = 0; a + 1 < k; ++a) legs *= path.leg_length(a) * path.leg_length(a);
    for (int c = 0; c < 4; ++c) {
      const PathContribution pc =
          evaluate_path(path, channel_vectors(channels[c], kIncidence, params.convention), m);
      out[lay.ladder(c, k)] = chain.weights[k - 1] * legs * pc.ladder;
      if (k >= 2) out[lay.crossed(c, k)] = chain.weights[k - 1] * legs * pc.crossed.real();
    }
  }
}

// ---------------------------------------------------------------------------
// Reduction

struct CrossSectionBreakdown {
  PolarizationChannel channel;
  double delta = 0.0;
  double single = 0.0;
  double single_error = 0.0;
  std::vector<double> ladder_by_order;  // orders 2..N
  std::vector<double> crossed_by_order;
  std::vector<double> ladder_errors;
  std::vector<double> crossed_errors;
  /// Geometric-tail estimate of the ladder beyond N_max (inf if not decaying).
  double truncation_estimate = 0.0;
  /// Delta-method standard error of the enhancement factor.
  double enhancement_error = 0.0;
  std::size_t samples = 0;
  /// Placement cross section actually used, units of sigma_0.
  double sampling_cross_section = 0.0;

  double ladder_total() const {
    double s = 0.0;
    for (double x : ladder_by_order) s += x;
    return s;
  }
  double crossed_total() const {
    double s = 0.0;
    for (double x : crossed_by_order) s += x;
    return s;
  }
  double incoherent() const { return single + ladder_total(); }
};

struct EnhancementFactor {
  bool defined = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::quiet_NaN();
};

/// (single + sum ladder + sum crossed) / (single + sum ladder); undefined
/// when the denominator vanishes (total transparency).
inline EnhancementFactor enhancement_factor(const CrossSectionBreakdown& b) {
  EnhancementFactor e;
  const double den = b.incoherent();
  if (!(den > 0.0)) return e;
  e.defined = true;
  e.value = (den + b.crossed_total()) / den;
  e.error = b.enhancement_error;
  return e;
}

struct SampleStats {
  double mean = 0.0;
  double error = 0.0;
};

/// Mean and standard error of column j of a row-major table.
inline SampleStats column_stats(const std::vector<double>& table, std::size_t rows,
                                std::size_t stride, std::size_t j) {
  SampleStats s;
  if (rows == 0) return s;
  double sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) sum += table[i * stride + j];
  s.mean = sum / static_cast<double>(rows);
  if (rows < 2) return s;
  double ss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double d = table[i * stride + j] - s.mean;
    ss += d * d;
  }
  s.error = std::sqrt(ss / static_cast<double>(rows - 1) / static_cast<double>(rows));
  return s;
}

inline CrossSectionBreakdown reduce_channel(const std::vector<double>& table, std::size_t rows,
                                            const TallyLayout& lay, int channel) {
  const std::size_t stride = static_cast<std::size_t>(lay.stride());
  CrossSectionBreakdown b;
  b.channel = all_channels()[channel];
  b.samples = rows;
  const SampleStats s1 = column_stats(table, rows, stride, lay.ladder(channel, 1));
  b.single = s1.mean;
  b.single_error = s1.error;
  for (int k = 2; k <= lay.max_order; ++k) {
    const SampleStats l = column_stats(table, rows, stride, lay.ladder(channel, k));
    const SampleStats c = column_stats(table, rows, stride, lay.crossed(channel, k));
    b.ladder_by_order.push_back(l.mean);
    b.ladder_errors.push_back(l.error);
    b.crossed_by_order.push_back(c.mean);
    b.crossed_errors.push_back(c.error);
  }
  // Geometric tail of the incoherent series beyond N_max.
  const int n = lay.max_order;
  if (n >= 2) {
    const double last = b.ladder_by_order.back();
    const double prev = n >= 3 ? b.ladder_by_order[b.ladder_by_order.size() - 2] : b.single;
    if (prev > 0.0 && last >= 0.0) {
      const double r = last / prev;
      b.truncation_estimate = r < 1.0 ? last * r / (1.0 - r) : std::numeric_limits<double>::infinity();
    }
  }
  // Enhancement error: per-sample linearization of C / D.
  double den = 0.0, num = 0.0;
  std::vector<double> d(rows, 0.0), c(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (int k = 1; k <= n; ++k) {
      d[i] += table[i * stride + lay.ladder(channel, k)];
      if (k >= 2) c[i] += table[i * stride + lay.crossed(channel, k)];
    }
    den += d[i];
    num += c[i];
  }
  if (den > 0.0 && rows >= 2) {
    const double ratio = num / den;
    const double dm = den / static_cast<double>(rows);
    double ss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double z = c[i] - ratio * d[i];
      ss += z * z;
    }
    b.enhancement_error =
        std::sqrt(ss / static_cast<double>(rows - 1) / static_cast<double>(rows)) / dm;
  }
  return b;
}

/// Per-sample score table (samples x TallyLayout::stride) at one detuning.
inline std::vector<double> score_table(double delta, const CloudGeometry& cloud,
                                       const ControlCoupling& coupling,
                                       const MonteCarloParams& params, const LevelScheme& levels,
                                       double* sigma_used = nullptr) {
  params.validate();
  cloud.validate();
  coupling.validate();
  levels.validate();
  const SpectralPoint point(delta, coupling, levels);
  const double sigma_s = params.sampling_cross_section > 0.0
                             ? params.sampling_cross_section
                             : sampling_cross_section(point.unit_chi, levels);
  if (sigma_used) *sigma_used = sigma_s;
  const TallyLayout lay{params.max_order};
  const std::size_t stride = static_cast<std::size_t>(lay.stride());
  std::vector<double> table(params.samples * stride, 0.0);
  parallel_for(params.samples, params.workers, [&](std::size_t i) {
    SampleRng rng(params.seed, i);
    const SampledChain chain = sample_chain(cloud, sigma_s, params.max_order, rng);
    double* row = table.data() + i * stride;
    if (params.doppler_width > 0.0) {
      const auto v = sample_velocities(params.doppler_width, params.max_order, params.seed, i, levels);
      score_chain_moving(chain, v, delta, cloud, coupling, levels, params, row);
    } else {
      score_chain_at_rest(chain, point, cloud, levels, params, row);
    }
  });
  return table;
}

/// Breakdowns of all four channels (order of all_channels()) at one detuning.
inline std::array<CrossSectionBreakdown, 4> monte_carlo_all_channels(
    double delta, const CloudGeometry& cloud, const ControlCoupling& coupling,
    const MonteCarloParams& params, const LevelScheme& levels = {}) {
  double sigma_s = 0.0;
  const auto table = score_table(delta, cloud, coupling, params, levels, &sigma_s);
  const TallyLayout lay{params.max_order};
  std::array<CrossSectionBreakdown, 4> out;
  for (int c = 0; c < 4; ++c) {
    out[c] = reduce_channel(table, params.samples, lay, c);
    out[c].delta = delta;
    out[c].sampling_cross_section = sigma_s / resonant_cross_section(levels);
  }
  return out;
}

inline CrossSectionBreakdown monte_carlo_breakdown(const PolarizationChannel& channel, double delta,
                                                   const CloudGeometry& cloud,
                                                   const ControlCoupling& coupling,
                                                   const MonteCarloParams& params,
                                                   const LevelScheme& levels = {}) {
  return monte_carlo_all_channels(delta, cloud, coupling, params, levels)[channel_index(channel)];
}

inline SampleStats single_scattering(const PolarizationChannel& channel, double delta,
                                     const CloudGeometry& cloud, const ControlCoupling& coupling,
                                     MonteCarloParams params, const LevelScheme& levels = {}) {
  params.max_order = 1;
  const auto b = monte_carlo_breakdown(channel, delta, cloud, coupling, params, levels);
  return {b.single, b.single_error};
}

struct SpectrumPoint {
  double delta = 0.0;
  EnhancementFactor enhancement;
  CrossSectionBreakdown breakdown;
};

struct ChannelSpectrum {
  PolarizationChannel channel;
  std::vector<SpectrumPoint> points;
};

/// Sweeps the detuning grid. Sample i uses the same random stream at every
/// detuning (common random numbers).
inline std::vector<ChannelSpectrum> spectrum_sweep(const std::vector<PolarizationChannel>& channels,
                                                   const std::vector<double>& grid,
                                                   const CloudGeometry& cloud,
                                                   const ControlCoupling& coupling,
                                                   const MonteCarloParams& params,
                                                   const LevelScheme& levels = {}) {
  for (double d : grid)
    if (!std::isfinite(d)) throw ConfigError("detuning grid must be finite");
  params.validate();
  std::vector<ChannelSpectrum> out;
  for (const auto& c : channels) out.push_back({c, {}});
  for (double d : grid) {
    const auto all = monte_carlo_all_channels(d, cloud, coupling, params, levels);
    for (auto& s : out) {
      const auto& b = all[channel_index(s.channel)];
      s.points.push_back({d, enhancement_factor(b), b});
    }
  }
  return out;
}

inline ChannelSpectrum spectrum_sweep(const PolarizationChannel& channel, const std::vector<double>& grid,
                                      const CloudGeometry& cloud, const ControlCoupling& coupling,
                                      const MonteCarloParams& params, const LevelScheme& levels = {}) {
  return spectrum_sweep(std::vector<PolarizationChannel>{channel}, grid, cloud, coupling, params,
                        levels)
      .front();
}

/// Optical depth of light with lab circular polarization q along the full
/// central diameter: sigma_q(Delta) times the diametral column density.
inline double optical_depth(double delta, const CloudGeometry& cloud, const ControlCoupling& coupling,
                            int q, const LevelScheme& levels = {}) {
  if (std::abs(q) > 1) throw DomainError("polarization index must be -1, 0 or +1");
  const double column = cloud.column(cloud.center, kIncidence, -kInfinity, kInfinity);
  if (column == 0.0) return 0.0;
  return extinction_cross_section(unit_lab_susceptibility(delta, coupling, levels), q, levels) *
         column;
}

// ---------------------------------------------------------------------------
// Two-atom interference diagnostics

struct InterferencePair {
  int m1 = 0, m1_final = 0, m2 = 0, m2_final = 0;
  Complex direct;      // incident on atom 1 first
  Complex reciprocal;  // incident on atom 2 first
  /// arg(direct conj(reciprocal)); defined only when both are nonzero.
  double phase_difference = 0.0;
  bool rayleigh_then_raman() const { return m1 == m1_final && m2 != m2_final; }
  bool raman_then_rayleigh() const { return m1 != m1_final && m2 == m2_final; }
};

/// Direct and reciprocal double-scattering amplitudes of every Zeeman
/// labeling of a fixed atom pair, at rest, in internal units (no k^2 u or
/// 1/r factors).
inline std::vector<InterferencePair> interference_pairs(
    const PolarizationChannel& channel, double delta, const Vec3& r1, const Vec3& r2,
    const CloudGeometry& cloud, const ControlCoupling& coupling, const LevelScheme& levels = {},
    HelicityConvention convention = HelicityConvention::kPerBeam, bool attenuation = true) {
  const MediumContext m{&cloud, &coupling, &levels, attenuation};
  const ChannelVectors ch = channel_vectors(channel, kIncidence, convention);
  const RayleighTensors t(delta, coupling, levels);
  const RaySegment s12 = RaySegment::chord(r1, r2);
  const Mat3c g12 = m.propagator(r1, s12.direction, 0.0, s12.length(), delta);
  const Mat3c g21 = m.propagator(r2, -s12.direction, 0.0, s12.length(), delta);
  const Vec3c in1 = m.incoming(r1, kIncidence, delta) * ch.input;
  const Vec3c in2 = m.incoming(r2, kIncidence, delta) * ch.input;
  const Vec3c out1 = m.outgoing(r1, kIncidence, delta).adjoint() * ch.output;
  const Vec3c out2 = m.outgoing(r2, kIncidence, delta).adjoint() * ch.output;
  std::vector<InterferencePair> pairs;
  for (int m1 = -1; m1 <= 1; ++m1)
    for (int f1 = -1; f1 <= 1; ++f1)
      for (int m2 = -1; m2 <= 1; ++m2)
        for (int f2 = -1; f2 <= 1; ++f2) {
          InterferencePair p;
          p.m1 = m1;
          p.m1_final = f1;
          p.m2 = m2;
          p.m2_final = f2;
          p.direct = (out2.adjoint() * t(m2, f2) * g12 * t(m1, f1) * in1)(0, 0);
          p.reciprocal = (out1.adjoint() * t(m1, f1) * g21 * t(m2, f2) * in2)(0, 0);
          if (p.direct != 0.0 && p.reciprocal != 0.0)
            p.phase_difference = std::arg(p.direct * std::conj(p.reciprocal));
          pairs.push_back(p);
        }
  return pairs;
}

}  // namespace cbs
