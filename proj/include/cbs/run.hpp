#pragma once

// Executes a validated RunConfig. All outputs are rendered in memory first and
// only then written, so a failing run leaves no partial results behind.

#include <filesystem>
#include <map>
#include <string>

#include "cbs/output.hpp"

namespace cbs {

/// File name -> content for one run.
using RunOutputs = std::map<std::string, std::string>;

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline RunOutputs run_spectrum(const RunConfig& c) {
  const auto sweep = spectrum_sweep(c.channels, c.delta_grid(), c.cloud, c.coupling, c.mc);
  const Json meta = run_metadata(c);
  RunOutputs out;
  for (const auto& s : sweep) {
    SpectrumRecord rec{s.channel, c.mc.max_order, {}, meta};
    for (const auto& p : s.points) rec.rows.push_back(make_row(p));
    const std::string stem = "spectrum_" + s.channel.tag();
    if (c.format == OutputFormat::kCsv)
      out[stem + ".csv"] = spectrum_csv(rec, c.per_order_columns);
    else
      out[stem + ".json"] = dump_json(to_json(rec));
  }
  if (c.format == OutputFormat::kCsv) out["metadata.json"] = dump_json(meta);
  return out;
}

inline RunOutputs run_pulse(const RunConfig& c) {
  MonteCarloParams mc = c.mc;
  mc.max_order = c.pulse_max_order;
  const FrequencyGrid grid = c.frequency_grid();
  const Json meta = run_metadata(c);
  RunOutputs out;
  Json integrals = Json::object();
  for (const auto& ch : c.channels) {
    const PulseRecord rec{ch, mc.max_order, scattered_traces(ch, c.pulse, grid, c.cloud, c.coupling, mc),
                          meta};
    const std::string stem = "pulse_" + ch.tag();
    if (c.format == OutputFormat::kCsv) {
      out[stem + ".csv"] = pulse_csv(rec);
      const auto& e = rec.trace.integrated_enhancement;
      integrals[ch.tag()] = {{"integrated_ladder", json_doubles(rec.trace.integrated_ladder)},
                             {"integrated_crossed", json_doubles(rec.trace.integrated_crossed)},
                             {"integrated_enhancement", json_double(e.value)},
                             {"integrated_enhancement_error", json_double(e.error)},
                             {"enhancement_floor", json_double(rec.trace.enhancement_floor)}};
    } else {
      out[stem + ".json"] = dump_json(to_json(rec));
    }
  }
  if (c.format == OutputFormat::kCsv) {
    Json m = meta;
    m["time_integrals"] = integrals;
    out["metadata.json"] = dump_json(m);
  }
  return out;
}

inline const char* pair_kind(const InterferencePair& p) {
  const bool e1 = p.m1 == p.m1_final, e2 = p.m2 == p.m2_final;
  if (e1 && e2) return "rayleigh_rayleigh";
  if (e1) return "rayleigh_raman";
  if (e2) return "raman_rayleigh";
  return "raman_raman";
}

/// Optical depths per lab polarization and the two-atom interference table
/// for a pair straddling the cloud center along x.
inline RunOutputs run_diagnostics(const RunConfig& c) {
  const LevelScheme levels;
  const auto grid = c.delta_grid();
  std::ostringstream optics, pairs;
  Json jo = Json::array(), jp = Json::array();
  optics << "delta_over_gamma,optical_depth_sigma_minus,optical_depth_pi,optical_depth_sigma_plus,"
            "re_chi_iso_per_atom,im_chi_iso_per_atom\n";
  pairs << "delta_over_gamma,channel,m1,m1_final,m2,m2_final,kind,direct_re,direct_im,"
           "reciprocal_re,reciprocal_im,phase_difference\n";
  const Vec3 half(0.5 * c.pair_separation, 0.0, 0.0);
  const Vec3 r1 = c.cloud.center - half, r2 = c.cloud.center + half;
  for (double d : grid) {
    const auto chi = unit_lab_susceptibility(d, c.coupling, levels).isotropic_part();
    double od[3];
    for (int q = -1; q <= 1; ++q) od[q + 1] = optical_depth(d, c.cloud, c.coupling, q, levels);
    optics << format_double(d) << "," << format_double(od[0]) << "," << format_double(od[1]) << ","
           << format_double(od[2]) << "," << format_double(chi.real()) << ","
           << format_double(chi.imag()) << "\n";
    jo.push_back({{"delta_over_gamma", json_double(d)},
                  {"optical_depth", json_doubles({od[0], od[1], od[2]})},
                  {"chi_iso_per_atom", json_doubles({chi.real(), chi.imag()})}});
    for (const auto& ch : c.channels)
      for (const auto& p : interference_pairs(ch, d, r1, r2, c.cloud, c.coupling, levels,
                                              c.mc.convention)) {
        if (p.direct == 0.0 && p.reciprocal == 0.0) continue;
        pairs << format_double(d) << "," << ch.name() << "," << p.m1 << "," << p.m1_final << ","
              << p.m2 << "," << p.m2_final << "," << pair_kind(p) << ","
              << format_double(p.direct.real()) << "," << format_double(p.direct.imag()) << ","
              << format_double(p.reciprocal.real()) << "," << format_double(p.reciprocal.imag())
              << "," << format_double(p.phase_difference) << "\n";
        jp.push_back({{"delta_over_gamma", json_double(d)},
                      {"channel", ch.name()},
                      {"labels", {p.m1, p.m1_final, p.m2, p.m2_final}},
                      {"kind", pair_kind(p)},
                      {"direct", json_doubles({p.direct.real(), p.direct.imag()})},
                      {"reciprocal", json_doubles({p.reciprocal.real(), p.reciprocal.imag()})},
                      {"phase_difference", json_double(p.phase_difference)}});
      }
  }
  Json meta = run_metadata(c);
  meta["transparency_window_width_over_gamma"] =
      json_double(transparency_window_width(c.coupling, levels));
  meta["pair_positions_cm"] = {json_doubles({r1.x(), r1.y(), r1.z()}),
                               json_doubles({r2.x(), r2.y(), r2.z()})};
  RunOutputs out;
  if (c.format == OutputFormat::kCsv) {
    out["diagnostics_optics.csv"] = optics.str();
    out["diagnostics_pairs.csv"] = pairs.str();
    out["metadata.json"] = dump_json(meta);
  } else {
    out["diagnostics.json"] =
        dump_json({{"record", "diagnostics"}, {"metadata", meta}, {"optics", jo}, {"pairs", jp}});
  }
  return out;
}

inline RunOutputs render_run(const RunConfig& c) {
  switch (c.mode) {
    case RunMode::kSpectrum: return run_spectrum(c);
    case RunMode::kPulse: return run_pulse(c);
    default: return run_diagnostics(c);
  }
}

inline void write_outputs(const std::filesystem::path& dir, const RunOutputs& outputs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
  for (const auto& [name, content] : outputs) write_atomically(dir / name, content);
}

}  // namespace cbs
