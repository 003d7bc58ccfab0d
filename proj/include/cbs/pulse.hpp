#pragma once

// Time-resolved backscattering of a Gaussian probe pulse. For each sampled
// configuration and Zeeman labeling the frequency-domain transfer amplitude
// T(omega) of the direct and reciprocal sequences is multiplied by the pulse
// spectrum and transformed to the time domain; intensities are squared after
// the transform, per labeling.

#include <fftw3.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <vector>

#include "cbs/engine.hpp"

namespace cbs {

/// Gaussian pulse: field envelope exp(-t^2 / (2 tau^2)), so the intensity is
/// exp(-t^2 / tau^2). Times in 1/Gamma, detunings in Gamma.
struct PulseSpec {
  double tau = 200.0;
  double carrier_detuning = 0.0;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("pulse tau must be finite and > 0");
    if (!std::isfinite(carrier_detuning)) throw ConfigError("carrier detuning must be finite");
  }
  double envelope(double t) const { return std::exp(-t * t / (2.0 * tau * tau)); }
  double intensity(double t) const { return std::exp(-t * t / (tau * tau)); }
  /// Fourier transform of the envelope, integral E(t) e^{i omega t} dt, with
  /// omega measured from the carrier.
  double spectrum(double omega) const {
    return tau * std::sqrt(2.0 * kPi) * std::exp(-0.5 * omega * omega * tau * tau);
  }
};

/// Uniform grid omega_k = (k - N/2) d_omega, k = 0..N-1, relative to the
/// carrier, and its conjugate time grid t_j = (j - N/2) d_t.
struct FrequencyGrid {
  std::size_t points = 4096;
  double half_span = 1.0;

  double spacing() const { return 2.0 * half_span / static_cast<double>(points); }
  double omega(std::size_t k) const {
    return (static_cast<double>(k) - 0.5 * static_cast<double>(points)) * spacing();
  }
  double time_step() const { return 2.0 * kPi / (static_cast<double>(points) * spacing()); }
  double time(std::size_t j) const {
    return (static_cast<double>(j) - 0.5 * static_cast<double>(points)) * time_step();
  }
  double time_window() const { return static_cast<double>(points) * time_step(); }

  void validate(const PulseSpec& pulse) const {
    if (points < 16 || points % 4 != 0)
      throw ConfigError("omega_grid_points must be a multiple of 4 and >= 16");
    if (!(half_span > 0.0) || !std::isfinite(half_span))
      throw ConfigError("omega half span must be finite and > 0");
    if (half_span < 6.0 / pulse.tau)
      throw ConfigError("omega grid must span at least +-6/tau = +-" +
                        std::to_string(6.0 / pulse.tau) + " Gamma");
    const double required = 2.0 * kPi / (8.0 * pulse.tau);
    if (spacing() > required * (1.0 + 1e-12))
      throw ConfigError("omega grid under-resolved: spacing " + std::to_string(spacing()) +
                        " Gamma exceeds the required " + std::to_string(required) +
                        " Gamma (time window 8 tau)");
  }
};

/// +-(20/tau + Omega_c) around the carrier on 4096 points, narrowed if needed
/// so the time window still covers 8 tau.
inline FrequencyGrid default_frequency_grid(const PulseSpec& pulse, const ControlCoupling& coupling,
                                            std::size_t points = 4096) {
  FrequencyGrid g;
  g.points = points;
  const double wanted = 20.0 / pulse.tau + coupling.rabi_frequency;
  const double limit = kPi * static_cast<double>(points) / (8.0 * pulse.tau);
  g.half_span = std::min(wanted, limit);
  return g;
}

/// Pulse spectrum sampled on the grid.
inline std::vector<Complex> amplitude_spectrum(const PulseSpec& pulse, const FrequencyGrid& grid) {
  pulse.validate();
  grid.validate(pulse);
  std::vector<Complex> s(grid.points);
  for (std::size_t k = 0; k < grid.points; ++k) s[k] = pulse.spectrum(grid.omega(k));
  return s;
}

// ---------------------------------------------------------------------------
// Transform

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
}  // namespace detail

using FftBuffer = std::unique_ptr<fftw_complex[], detail::FftwFree>;

inline FftBuffer make_fft_buffer(std::size_t n) {
  return FftBuffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

/// Forward DFT plan shared by all threads; execution uses the thread-safe
/// new-array interface with fftw_malloc'ed buffers.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    FftBuffer in = make_fft_buffer(n), out = make_fft_buffer(n);
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }
  void execute(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(plan_, in, out); }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

/// A(t_j) = sum_k T_k E_k e^{-i omega_k t_j} d_omega / (2 pi), where `product`
/// holds T_k E_k. `in` and `out` are scratch buffers of the plan's size.
inline void synthesize(const std::vector<Complex>& product, const FrequencyGrid& grid,
                       const FftPlan& plan, fftw_complex* in, fftw_complex* out,
                       std::vector<Complex>& result) {
  const std::size_t n = grid.points;
  for (std::size_t k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    in[k][0] = sign * product[k].real();
    in[k][1] = sign * product[k].imag();
  }
  plan.execute(in, out);
  const double scale = grid.spacing() / (2.0 * kPi);
  result.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double sign = (j % 2 == 0) ? scale : -scale;
    result[j] = Complex(sign * out[j][0], sign * out[j][1]);
  }
}

// ---------------------------------------------------------------------------
// Transfer spectra of one configuration

/// Optics of every active frequency bin, shared read-only by all samples.
struct BandCache {
  std::vector<std::size_t> bins;  // active grid indices
  std::vector<double> detunings;  // carrier + omega_k
  std::vector<LabSusceptibility> unit_chi;
  std::vector<RayleighTensors> tensors;
  std::vector<RayOptics> incoming;
  std::vector<RayOptics> outgoing;

  BandCache(const PulseSpec& pulse, const FrequencyGrid& grid, const ControlCoupling& coupling,
            const LevelScheme& levels, double threshold = 1e-12) {
    const double peak = pulse.spectrum(0.0);
    for (std::size_t k = 0; k < grid.points; ++k) {
      if (pulse.spectrum(grid.omega(k)) < threshold * peak) continue;
      const double d = pulse.carrier_detuning + grid.omega(k);
      bins.push_back(k);
      detunings.push_back(d);
      unit_chi.push_back(unit_lab_susceptibility(d, coupling, levels));
      tensors.emplace_back(d, coupling, levels);
      incoming.push_back(RayOptics::make(kIncidence, unit_chi.back(), levels));
      outgoing.push_back(RayOptics::make(-kIncidence, unit_chi.back(), levels));
    }
  }
  std::size_t size() const { return bins.size(); }
};

/// Transfer amplitudes e'^* . X_out alpha_n G ... alpha_1 X_in . e of one atom
/// sequence for every Zeeman labeling, on the active bins. Labeling index
/// sum_a l_a 9^a with l_a = 3 (m_a + 1) + (m''_a + 1), a in original atom order.
struct PathSpectra {
  int order = 0;
  std::vector<std::vector<Complex>> direct;      // [labeling][active bin]
  std::vector<std::vector<Complex>> reciprocal;  // empty for order 1
};

inline PathSpectra path_transfer_spectra(const std::vector<Vec3>& positions, const ChannelVectors& ch,
                                         const BandCache& band, const CloudGeometry& cloud,
                                         const LevelScheme& levels, bool attenuation = true) {
  const int n = static_cast<int>(positions.size());
  if (n < 1) throw DomainError("empty scattering path");
  auto col = [&](const Vec3& p, const Vec3& u, double s0, double s1) {
    return attenuation ? cloud.column(p, u, s0, s1) : 0.0;
  };
  std::vector<double> in_col(n), out_col(n), leg_col(n > 1 ? n - 1 : 0);
  std::vector<Vec3> leg_dir(leg_col.size());
  for (int a = 0; a < n; ++a) {
    in_col[a] = col(positions[a], kIncidence, -kInfinity, 0.0);
    out_col[a] = col(positions[a], -kIncidence, 0.0, kInfinity);
  }
  for (int a = 0; a + 1 < n; ++a) {
    const RaySegment s = RaySegment::chord(positions[a], positions[a + 1]);
    leg_dir[a] = s.direction;
    leg_col[a] = col(positions[a], s.direction, 0.0, s.length());
  }
  std::size_t labelings = 1;
  for (int a = 0; a < n; ++a) labelings *= 9;
  PathSpectra ps;
  ps.order = n;
  ps.direct.assign(labelings, std::vector<Complex>(band.size()));
  if (n > 1) ps.reciprocal.assign(labelings, std::vector<Complex>(band.size()));

  std::vector<Vec3c> cur, next;
  for (std::size_t b = 0; b < band.size(); ++b) {
    const RayleighTensors& t = band.tensors[b];
    std::vector<Mat3c> g_fwd(leg_col.size()), g_bwd(leg_col.size());
    for (std::size_t a = 0; a < leg_col.size(); ++a) {
      g_fwd[a] = lab_propagator(leg_dir[a], leg_col[a], band.unit_chi[b], levels);
      if (n > 1) g_bwd[a] = lab_propagator(-leg_dir[a], leg_col[a], band.unit_chi[b], levels);
    }
    // One pass per sequence; `cur` holds the field after the atoms visited so
    // far for every partial labeling.
    for (int pass = 0; pass < (n > 1 ? 2 : 1); ++pass) {
      const bool rev = pass == 1;
      const int first = rev ? n - 1 : 0;
      const int last = rev ? 0 : n - 1;
      cur.assign(1, lab_propagator(band.incoming[b], in_col[first]) * ch.input);
      std::vector<std::size_t> index(1, 0), next_index;
      for (int step = 0; step < n; ++step) {
        const int a = rev ? n - 1 - step : step;
        std::size_t stride = 1;
        for (int i = 0; i < a; ++i) stride *= 9;
        next.clear();
        next_index.clear();
        for (std::size_t p = 0; p < cur.size(); ++p)
          for (int l = 0; l < 9; ++l) {
            Vec3c v = t.alpha[l / 3][l % 3] * cur[p];
            if (step + 1 < n) v = (rev ? g_bwd[a - 1] : g_fwd[a]) * v;
            next.push_back(v);
            next_index.push_back(index[p] + static_cast<std::size_t>(l) * stride);
          }
        cur.swap(next);
        index.swap(next_index);
      }
      const Vec3c w = lab_propagator(band.outgoing[b], out_col[last]).adjoint() * ch.output;
      auto& dest = rev ? ps.reciprocal : ps.direct;
      for (std::size_t p = 0; p < cur.size(); ++p) dest[index[p]][b] = w.dot(cur[p]);
    }
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Traces

struct TimeTrace {
  std::vector<double> times;
  std::vector<double> single;
  std::vector<double> single_error;
  std::vector<std::vector<double>> ladder_by_order;  // orders 2..N
  std::vector<std::vector<double>> crossed_by_order;
  std::vector<std::vector<double>> ladder_errors;
  std::vector<std::vector<double>> crossed_errors;
  std::vector<double> enhancement;  // NaN where masked
  std::vector<bool> enhancement_defined;
  /// Denominator floor of the time-resolved enhancement.
  double enhancement_floor = 0.0;
  /// Time integrals: index 0 is single scattering, then ladder 2..N; crossed
  /// index 0 is unused.
  std::vector<double> integrated_ladder;
  std::vector<double> integrated_crossed;
  EnhancementFactor integrated_enhancement;
  std::size_t samples = 0;
  double sampling_cross_section = 0.0;  // units of sigma_0
};

/// Pointwise (single + ladder + crossed) / (single + ladder) where the
/// denominator exceeds 1e-6 of its maximum.
inline void time_resolved_enhancement(TimeTrace& trace, double relative_floor = 1e-6) {
  const std::size_t n = trace.times.size();
  std::vector<double> den(n, 0.0), num(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    den[j] = trace.single.empty() ? 0.0 : trace.single[j];
    for (const auto& l : trace.ladder_by_order) den[j] += l[j];
    num[j] = den[j];
    for (const auto& c : trace.crossed_by_order) num[j] += c[j];
  }
  const double peak = n ? *std::max_element(den.begin(), den.end()) : 0.0;
  trace.enhancement_floor = relative_floor * peak;
  trace.enhancement.assign(n, std::numeric_limits<double>::quiet_NaN());
  trace.enhancement_defined.assign(n, false);
  for (std::size_t j = 0; j < n; ++j)
    if (den[j] > trace.enhancement_floor && den[j] > 0.0) {
      trace.enhancement[j] = num[j] / den[j];
      trace.enhancement_defined[j] = true;
    }
}

/// Placement cross section for a pulse: the steady-state rule applied to the
/// lab extinctions averaged over the pulse power spectrum.
inline double band_sampling_cross_section(const BandCache& band, const PulseSpec& pulse,
                                          const FrequencyGrid& grid, const LevelScheme& levels) {
  LabSusceptibility avg;
  double norm = 0.0;
  for (std::size_t b = 0; b < band.size(); ++b) {
    const double w = std::pow(pulse.spectrum(grid.omega(band.bins[b])), 2);
    for (int q = -1; q <= 1; ++q) avg[q] += w * band.unit_chi[b][q];
    norm += w;
  }
  return sampling_cross_section(avg.scaled(norm > 0.0 ? 1.0 / norm : 0.0), levels);
}

struct PulseRun {
  TimeTrace trace;
  /// Per-sample time integrals, row-major samples x (2 N); same layout as the
  /// integrated_* vectors (ladder block then crossed block).
  std::vector<double> integrals;
};

/// Scattered-intensity traces for one channel, orders 1..params.max_order.
inline PulseRun pulse_run(const PolarizationChannel& channel, const PulseSpec& pulse,
                          const FrequencyGrid& grid, const CloudGeometry& cloud,
                          const ControlCoupling& coupling, const MonteCarloParams& params,
                          const LevelScheme& levels = {}) {
  params.validate();
  pulse.validate();
  grid.validate(pulse);
  cloud.validate();
  coupling.validate();
  if (params.max_order > 3) throw ConfigError("pulse mode supports max_order <= 3");
  if (params.doppler_width > 0.0) throw ConfigError("pulse mode requires atoms at rest");
  const int N = params.max_order;
  const std::size_t nt = grid.points;
  const BandCache band(pulse, grid, coupling, levels);
  const double sigma_s = params.sampling_cross_section > 0.0
                             ? params.sampling_cross_section
                             : band_sampling_cross_section(band, pulse, grid, levels);
  const ChannelVectors ch = channel_vectors(channel, kIncidence, params.convention);
  const std::vector<Complex> spectrum = amplitude_spectrum(pulse, grid);
  const FftPlan plan(nt);
  const double unit = event_factor(levels) / resonant_cross_section(levels);
  const double kfac = event_factor(levels);
  const double dt = grid.time_step();

  // Columns: ladder 1..N then crossed 1..N (crossed 1 unused).
  const std::size_t cols = 2 * static_cast<std::size_t>(N);
  const std::size_t block = std::max<std::size_t>(16, (params.samples + 63) / 64);
  const std::size_t blocks = (params.samples + block - 1) / block;
  std::vector<double> sums(blocks * cols * nt, 0.0), squares(blocks * cols * nt, 0.0);
  PulseRun run;
  run.integrals.assign(params.samples * cols, 0.0);

  parallel_for(blocks, params.workers, [&](std::size_t blk) {
    FftBuffer in = make_fft_buffer(nt), out = make_fft_buffer(nt);
    std::vector<Complex> product(nt, 0.0), ad, ar;
    std::vector<double> sample(cols * nt);
    double* bsum = sums.data() + blk * cols * nt;
    double* bsq = squares.data() + blk * cols * nt;
    const std::size_t end = std::min(params.samples, (blk + 1) * block);
    for (std::size_t i = blk * block; i < end; ++i) {
      SampleRng rng(params.seed, i);
      const SampledChain chain = sample_chain(cloud, sigma_s, N, rng);
      std::fill(sample.begin(), sample.end(), 0.0);
      double scale = unit;
      for (int k = 1; k <= chain.valid_orders; ++k, scale *= kfac) {
        const std::vector<Vec3> pos(chain.positions.begin(), chain.positions.begin() + k);
        const PathSpectra ps = path_transfer_spectra(pos, ch, band, cloud, levels, params.attenuation);
        const double f = chain.weights[k - 1] * scale / std::pow(3.0, k);
        double* lad = sample.data() + static_cast<std::size_t>(k - 1) * nt;
        double* crs = sample.data() + static_cast<std::size_t>(N + k - 1) * nt;
        for (std::size_t z = 0; z < ps.direct.size(); ++z) {
          std::fill(product.begin(), product.end(), Complex(0.0));
          for (std::size_t b = 0; b < band.size(); ++b)
            product[band.bins[b]] = ps.direct[z][b] * spectrum[band.bins[b]];
          synthesize(product, grid, plan, in.get(), out.get(), ad);
          for (std::size_t j = 0; j < nt; ++j) lad[j] += f * std::norm(ad[j]);
          if (k < 2) continue;
          std::fill(product.begin(), product.end(), Complex(0.0));
          for (std::size_t b = 0; b < band.size(); ++b)
            product[band.bins[b]] = ps.reciprocal[z][b] * spectrum[band.bins[b]];
          synthesize(product, grid, plan, in.get(), out.get(), ar);
          for (std::size_t j = 0; j < nt; ++j) crs[j] += f * (ad[j] * std::conj(ar[j])).real();
        }
      }
      for (std::size_t c = 0; c < cols; ++c) {
        double integral = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
          const double v = sample[c * nt + j];
          bsum[c * nt + j] += v;
          bsq[c * nt + j] += v * v;
          integral += v;
        }
        run.integrals[i * cols + c] = integral * dt;
      }
    }
  });

  // Fixed-order reduction over blocks.
  std::vector<double> total(cols * nt, 0.0), total_sq(cols * nt, 0.0);
  for (std::size_t blk = 0; blk < blocks; ++blk)
    for (std::size_t x = 0; x < cols * nt; ++x) {
      total[x] += sums[blk * cols * nt + x];
      total_sq[x] += squares[blk * cols * nt + x];
    }
  const double ns = static_cast<double>(params.samples);
  auto mean_err = [&](std::size_t c, std::vector<double>& m, std::vector<double>& e) {
    m.resize(nt);
    e.resize(nt);
    for (std::size_t j = 0; j < nt; ++j) {
      const double mu = total[c * nt + j] / ns;
      m[j] = mu;
      const double var = ns > 1 ? std::max(0.0, (total_sq[c * nt + j] / ns - mu * mu) * ns / (ns - 1)) : 0.0;
      e[j] = std::sqrt(var / ns);
    }
  };
  TimeTrace& tr = run.trace;
  tr.samples = params.samples;
  tr.sampling_cross_section = sigma_s / resonant_cross_section(levels);
  tr.times.resize(nt);
  for (std::size_t j = 0; j < nt; ++j) tr.times[j] = grid.time(j);
  mean_err(0, tr.single, tr.single_error);
  for (int k = 2; k <= N; ++k) {
    std::vector<double> m, e;
    mean_err(static_cast<std::size_t>(k - 1), m, e);
    tr.ladder_by_order.push_back(m);
    tr.ladder_errors.push_back(e);
    mean_err(static_cast<std::size_t>(N + k - 1), m, e);
    tr.crossed_by_order.push_back(m);
    tr.crossed_errors.push_back(e);
  }
  time_resolved_enhancement(tr);

  // Time-integrated breakdown and its enhancement with a per-sample error.
  const TallyLayout lay{N};
  std::vector<double> table(params.samples * static_cast<std::size_t>(lay.stride()), 0.0);
  const int c = channel_index(channel);
  tr.integrated_ladder.assign(static_cast<std::size_t>(N), 0.0);
  tr.integrated_crossed.assign(static_cast<std::size_t>(N), 0.0);
  for (std::size_t i = 0; i < params.samples; ++i)
    for (int k = 1; k <= N; ++k) {
      const double l = run.integrals[i * cols + static_cast<std::size_t>(k - 1)];
      const double x = run.integrals[i * cols + static_cast<std::size_t>(N + k - 1)];
      table[i * lay.stride() + lay.ladder(c, k)] = l;
      table[i * lay.stride() + lay.crossed(c, k)] = x;
      tr.integrated_ladder[k - 1] += l / ns;
      tr.integrated_crossed[k - 1] += x / ns;
    }
  tr.integrated_enhancement = enhancement_factor(reduce_channel(table, params.samples, lay, c));
  return run;
}

inline TimeTrace scattered_traces(const PolarizationChannel& channel, const PulseSpec& pulse,
                                  const FrequencyGrid& grid, const CloudGeometry& cloud,
                                  const ControlCoupling& coupling, const MonteCarloParams& params,
                                  const LevelScheme& levels = {}) {
  return pulse_run(channel, pulse, grid, cloud, coupling, params, levels).trace;
}

// ---------------------------------------------------------------------------
// Monochromatic reference

/// Gauss-Hermite nodes and weights for integral f(x) exp(-x^2) dx.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(std::size_t n) {
  gsl_integration_fixed_workspace* w =
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
  if (!w) throw std::runtime_error("gauss-hermite allocation failed");
  std::vector<double> x(gsl_integration_fixed_nodes(w), gsl_integration_fixed_nodes(w) + n);
  std::vector<double> wt(gsl_integration_fixed_weights(w), gsl_integration_fixed_weights(w) + n);
  gsl_integration_fixed_free(w);
  return {x, wt};
}

/// Steady-state breakdown weighted by the pulse power spectrum: the time
/// integral of each trace equals tau * integral B(carrier + x/tau) e^{-x^2} dx.
/// Uses the same configurations as a pulse run when `params` carries that
/// run's seed and placement cross section.
inline CrossSectionBreakdown spectrally_weighted_breakdown(const PolarizationChannel& channel,
                                                           const PulseSpec& pulse,
                                                           const CloudGeometry& cloud,
                                                           const ControlCoupling& coupling,
                                                           const MonteCarloParams& params,
                                                           const LevelScheme& levels = {},
                                                           std::size_t nodes = 24) {
  const auto [x, w] = gauss_hermite(nodes);
  const TallyLayout lay{params.max_order};
  std::vector<double> table(params.samples * static_cast<std::size_t>(lay.stride()), 0.0);
  for (std::size_t j = 0; j < nodes; ++j) {
    const auto t = score_table(pulse.carrier_detuning + x[j] / pulse.tau, cloud, coupling, params, levels);
    for (std::size_t i = 0; i < table.size(); ++i) table[i] += pulse.tau * w[j] * t[i];
  }
  CrossSectionBreakdown b = reduce_channel(table, params.samples, lay, channel_index(channel));
  b.delta = pulse.carrier_detuning;
  return b;
}

}  // namespace cbs
