#include <catch_amalgamated.hpp>

#include <random>

#include <boost/math/quadrature/gauss.hpp>

#include "cbs/pulse.hpp"
#include "oracles.hpp"

using namespace cbs;
using Catch::Approx;

namespace {

std::vector<Complex> direct_synthesis(const std::vector<Complex>& p, const FrequencyGrid& g) {
  std::vector<Complex> a(g.points, 0.0);
  for (std::size_t j = 0; j < g.points; ++j)
    for (std::size_t k = 0; k < g.points; ++k)
      a[j] += p[k] * std::exp(Complex(0.0, -g.omega(k) * g.time(j))) * g.spacing() / (2.0 * kPi);
  return a;
}

std::vector<Complex> fft_synthesis(const std::vector<Complex>& p, const FrequencyGrid& g) {
  const FftPlan plan(g.points);
  auto in = make_fft_buffer(g.points), out = make_fft_buffer(g.points);
  std::vector<Complex> r;
  synthesize(p, g, plan, in.get(), out.get(), r);
  return r;
}

}  // namespace

TEST_CASE("pulse shape") {
  const PulseSpec p{150.0, 0.0};
  CHECK(p.intensity(150.0 * std::sqrt(std::log(2.0))) == Approx(0.5));  // FWHM 2 tau sqrt(ln 2)
  CHECK(p.envelope(150.0) == Approx(std::exp(-0.5)));
  // spectrum is the Fourier transform of the envelope
  const double w = 0.004;
  auto f = [&](double t) { return p.envelope(t) * std::cos(w * t); };
  const double ft = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -3000, 3000, 10, 1e-12);
  CHECK(p.spectrum(w) == Approx(ft).epsilon(1e-9));
}

TEST_CASE("FFT synthesis matches the direct Fourier sum") {
  const FrequencyGrid g{64, 0.5};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Complex> p(g.points);
  for (auto& x : p) x = Complex(U(rng), U(rng));
  const auto a = fft_synthesis(p, g), b = direct_synthesis(p, g);
  for (std::size_t j = 0; j < g.points; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
  // discrete Parseval
  double st = 0.0, sw = 0.0;
  for (std::size_t j = 0; j < g.points; ++j) st += std::norm(a[j]) * g.time_step();
  for (const auto& x : p) sw += std::norm(x) * g.spacing() / (2.0 * kPi);
  CHECK(st == Approx(sw).epsilon(1e-12));
}

TEST_CASE("synthesized free pulse reproduces the envelope") {
  const PulseSpec p{200.0, 0.0};
  const FrequencyGrid g = default_frequency_grid(p, {}, 512);
  const auto a = fft_synthesis(amplitude_spectrum(p, g), g);
  for (std::size_t j = 0; j < g.points; ++j) CHECK(std::abs(a[j] - p.envelope(g.time(j))) < 1e-10);
}

TEST_CASE("frequency grid validation") {
  const PulseSpec p{200.0, 0.0};
  CHECK_THROWS_AS((FrequencyGrid{4094, 1.0}.validate(p)), ConfigError);
  CHECK_THROWS_AS((FrequencyGrid{8, 0.1}.validate(p)), ConfigError);
  CHECK_THROWS_AS((FrequencyGrid{4096, 0.01}.validate(p)), ConfigError);  // narrower than 6/tau
  CHECK_THROWS_AS((FrequencyGrid{64, 1.0}.validate(p)), ConfigError);     // window shorter than 8 tau
  CHECK_NOTHROW((FrequencyGrid{4096, 1.0}.validate(p)));
  CHECK_THROWS_AS((PulseSpec{0.0, 0.0}.validate()), ConfigError);
  // the default span is clamped so the time window still covers 8 tau
  const auto g = default_frequency_grid(p, {3.0, 0.0});
  CHECK_NOTHROW(g.validate(p));
  CHECK(g.time_window() >= 8.0 * p.tau * (1 - 1e-12));
  const auto wide = default_frequency_grid(PulseSpec{20.0, 0.0}, {3.0, 0.0});
  CHECK(wide.half_span == Approx(20.0 / 20.0 + 3.0));
}

TEST_CASE("a long pulse concentrates on the carrier") {
  const PulseSpec p{1.0e4, 0.7};
  const FrequencyGrid g = default_frequency_grid(p, {3.0, 0.0});
  CHECK_NOTHROW(g.validate(p));
  const BandCache band(p, g, {3.0, 0.0}, {});
  REQUIRE(band.size() > 0);
  for (double d : band.detunings) CHECK(std::abs(d - 0.7) < 1e-3);
  // the carrier bin is present
  CHECK(std::find(band.detunings.begin(), band.detunings.end(), 0.7) != band.detunings.end());
}

TEST_CASE("transfer spectra equal the steady-state amplitudes bin by bin") {
  const CloudGeometry cloud;
  const ControlCoupling cc{3.0, 0.0};
  const PulseSpec p{20.0, 1.0};
  const FrequencyGrid g{64, 1.2};
  const BandCache band(p, g, cc, {});
  const std::vector<Vec3> r{Vec3(0.1, 0.0, -0.2), Vec3(-0.3, 0.2, 0.1)};
  const auto ch = channel_vectors(all_channels()[0], kIncidence);
  const auto ps = path_transfer_spectra(r, ch, band, cloud, {});
  for (std::size_t b = 0; b < band.size(); b += 7) {
    const auto amps = oracle::enumerate(r, band.detunings[b], ch, cloud, cc);
    for (std::size_t z = 0; z < amps.direct.size(); ++z) {
      CHECK(std::abs(ps.direct[z][b] - amps.direct[z]) < 1e-12 * (1.0 + std::abs(amps.direct[z])));
      CHECK(std::abs(ps.reciprocal[z][b] - amps.reciprocal[z]) <
            1e-12 * (1.0 + std::abs(amps.reciprocal[z])));
    }
  }
}

TEST_CASE("synthesized amplitudes equal a direct time-domain quadrature") {
  const CloudGeometry cloud;
  const ControlCoupling cc{0.5, 0.0};
  const PulseSpec p{20.0, 0.3};
  // fine enough that the narrow dressed resonance neither aliases nor rings
  const FrequencyGrid g{1024, 2.0};
  const BandCache band(p, g, cc, {});
  const std::vector<Vec3> r{Vec3(0.2, -0.1, -0.3), Vec3(-0.25, 0.3, 0.15)};
  const auto ch = channel_vectors(all_channels()[1], kIncidence);
  const auto ps = path_transfer_spectra(r, ch, band, cloud, {});
  const auto spectrum = amplitude_spectrum(p, g);
  // composite 30-point Gauss-Legendre over +-10/tau, amplitudes from explicit labelings
  using GL = boost::math::quadrature::gauss<double, 30>;
  std::vector<double> w, x;
  const int panels = 40;
  const double lo = -10.0 / p.tau, h = 20.0 / p.tau / panels;
  for (int k = 0; k < panels; ++k)
    for (std::size_t i = 0; i < GL::abscissa().size(); ++i)
      for (double s : {-1.0, 1.0}) {
        x.push_back(lo + h * (k + 0.5 + 0.5 * s * GL::abscissa()[i]));
        w.push_back(0.5 * h * GL::weights()[i]);
      }
  std::vector<oracle::Amplitudes> amps;
  for (double om : x) amps.push_back(oracle::enumerate(r, p.carrier_detuning + om, ch, cloud, cc));
  const FftPlan plan(g.points);
  auto in = make_fft_buffer(g.points), out = make_fft_buffer(g.points);
  std::vector<Complex> product(g.points), a;
  for (std::size_t z = 0; z < ps.direct.size(); z += 5) {
    std::fill(product.begin(), product.end(), Complex(0.0));
    for (std::size_t b = 0; b < band.size(); ++b) product[band.bins[b]] = ps.direct[z][b] * spectrum[band.bins[b]];
    synthesize(product, g, plan, in.get(), out.get(), a);
    double peak = 0.0;
    for (const auto& v : a) peak = std::max(peak, std::abs(v));
    for (std::size_t j = 0; j < g.points; j += 32) {
      Complex ref = 0.0;
      for (std::size_t q = 0; q < x.size(); ++q)
        ref += w[q] * amps[q].direct[z] * p.spectrum(x[q]) * std::exp(Complex(0.0, -x[q] * g.time(j))) /
               (2.0 * kPi);
      CHECK(std::abs(a[j] - ref) < 1e-9 * peak + 1e-300);
    }
  }
}

TEST_CASE("time-integrated traces equal the spectrally weighted steady state") {
  const CloudGeometry cloud;
  const PulseSpec p{20.0, 0.5};
  const FrequencyGrid g{128, 2.4};
  MonteCarloParams mc;
  mc.samples = 40;
  mc.max_order = 2;
  mc.seed = 17;
  const auto ch = all_channels()[1];
  const auto run = pulse_run(ch, p, g, cloud, {0.5, 0.0}, mc);
  const TimeTrace& tr = run.trace;
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    CHECK(tr.single[j] >= 0.0);
    CHECK(tr.ladder_by_order[0][j] >= 0.0);
  }
  mc.sampling_cross_section = tr.sampling_cross_section * resonant_cross_section({});
  const auto ref = spectrally_weighted_breakdown(ch, p, cloud, {0.5, 0.0}, mc);
  CHECK(tr.integrated_ladder[0] == Approx(ref.single).epsilon(1e-6));
  CHECK(tr.integrated_ladder[1] == Approx(ref.ladder_by_order[0]).epsilon(1e-6));
  CHECK(tr.integrated_crossed[1] ==
        Approx(ref.crossed_by_order[0]).epsilon(1e-6).margin(1e-6 * ref.ladder_by_order[0]));
  // the per-sample integrals equal the summed trace
  double s = 0.0;
  for (double v : tr.single) s += v * g.time_step();
  CHECK(s == Approx(tr.integrated_ladder[0]).epsilon(1e-12));
}

TEST_CASE("pulse traces do not depend on the worker count") {
  const PulseSpec p{20.0, 0.0};
  const FrequencyGrid g{64, 1.2};
  MonteCarloParams a;
  a.samples = 40;
  a.max_order = 2;
  a.seed = 3;
  MonteCarloParams b = a;
  b.workers = 3;
  const auto ta = scattered_traces(all_channels()[0], p, g, CloudGeometry{}, {}, a);
  const auto tb = scattered_traces(all_channels()[0], p, g, CloudGeometry{}, {}, b);
  CHECK(ta.single == tb.single);
  CHECK(ta.crossed_by_order == tb.crossed_by_order);
}

TEST_CASE("a carrier at the dark point scatters far less than one off the window") {
  const PulseSpec dark{200.0, 0.0}, bright{200.0, 2.0};
  const ControlCoupling cc{3.0, 0.0};
  const FrequencyGrid g{512, 0.6};
  MonteCarloParams mc;
  mc.samples = 30;
  mc.max_order = 1;
  mc.seed = 5;
  mc.sampling_cross_section = resonant_cross_section({});
  const auto td = scattered_traces(all_channels()[1], dark, g, CloudGeometry{}, cc, mc);
  const auto tb = scattered_traces(all_channels()[1], bright, g, CloudGeometry{}, cc, mc);
  CHECK(td.integrated_ladder[0] < 1e-3 * tb.integrated_ladder[0]);
}

TEST_CASE("pulse mode limits") {
  MonteCarloParams mc;
  mc.samples = 1;
  mc.max_order = 4;
  const PulseSpec p{20.0, 0.0};
  CHECK_THROWS_AS(scattered_traces(all_channels()[0], p, FrequencyGrid{64, 1.2}, CloudGeometry{}, {}, mc),
                  ConfigError);
  mc.max_order = 2;
  mc.doppler_width = 1.0;
  CHECK_THROWS_AS(scattered_traces(all_channels()[0], p, FrequencyGrid{64, 1.2}, CloudGeometry{}, {}, mc),
                  ConfigError);
}

TEST_CASE("Gauss-Hermite rule integrates polynomials against exp(-x^2)") {
  const auto [x, w] = gauss_hermite(24);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m0 += w[i];
    m2 += w[i] * x[i] * x[i];
    m4 += w[i] * std::pow(x[i], 4);
  }
  CHECK(m0 == Approx(std::sqrt(kPi)));
  CHECK(m2 == Approx(std::sqrt(kPi) / 2.0));
  CHECK(m4 == Approx(3.0 * std::sqrt(kPi) / 4.0));
}

TEST_CASE("time-resolved enhancement masks an empty denominator") {
  TimeTrace t;
  t.times = {0.0, 1.0, 2.0};
  t.single = {0.0, 1.0, 1e-9};
  t.ladder_by_order = {{0.0, 1.0, 0.0}};
  t.crossed_by_order = {{0.0, 0.5, 0.0}};
  time_resolved_enhancement(t);
  CHECK_FALSE(t.enhancement_defined[0]);
  CHECK(t.enhancement[1] == Approx(1.25));
  CHECK_FALSE(t.enhancement_defined[2]);
  CHECK(std::isnan(t.enhancement[0]));
}
