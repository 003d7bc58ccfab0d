#pragma once

// Result records and their CSV / JSON serialization. Doubles are written with
// 17 significant digits so a re-read reproduces every bit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cbs/config.hpp"

namespace cbs {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";  // no signed zeros in tables
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// JSON has no NaN or infinity: they travel as strings.
inline Json json_double(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline double double_from_json(const Json& v) {
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw ConfigError("not a number: " + s);
}

inline Json json_doubles(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(json_double(x));
  return a;
}

inline std::vector<double> doubles_from_json(const Json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(double_from_json(x));
  return v;
}

/// 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Run metadata: the resolved configuration minus the keys that cannot
/// change a result (worker count, output location), its digest and the code
/// version.
inline Json run_metadata(const RunConfig& c) {
  Json cfg = c.resolved;
  cfg.erase("workers");
  cfg.erase("output_dir");
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a(cfg.dump())));
  Json defaults = Json::array();
  for (const auto& k : c.defaults_applied)
    if (k != "workers" && k != "output_dir") defaults.push_back(k);
  Json m = {{"code_version", kVersion},
            {"config", cfg},
            {"config_digest", digest},
            {"defaults_applied", defaults},
            {"seed", c.mc.seed},
            {"density_convention", to_string(c.cloud.convention)},
            {"helicity_convention", to_string(c.mc.convention)},
            {"sigma0_cm2", json_double(resonant_cross_section(LevelScheme{}))}};
  if (c.mode == RunMode::kSpectrum) {
    m["max_order"] = c.mc.max_order;
    m["delta_grid"] = json_doubles(c.delta_grid());
  } else if (c.mode == RunMode::kPulse) {
    const FrequencyGrid g = c.frequency_grid();
    m["max_order"] = c.pulse_max_order;
    m["omega_grid"] = {{"points", g.points},
                       {"half_span_over_gamma", json_double(g.half_span)},
                       {"spacing_over_gamma", json_double(g.spacing())},
                       {"time_step_gamma_inv", json_double(g.time_step())}};
  } else {
    m["delta_grid"] = json_doubles(c.delta_grid());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Spectrum records

struct SpectrumRow {
  double delta = 0.0;
  bool enhancement_defined = false;
  double enhancement = 0.0;
  double enhancement_error = 0.0;
  double single = 0.0;
  double single_error = 0.0;
  std::vector<double> ladder, ladder_errors, crossed, crossed_errors;  // orders 2..N
  double truncation_estimate = 0.0;
  double sampling_cross_section = 0.0;
  std::size_t samples = 0;

  double ladder_total() const {
    double s = 0.0;
    for (double x : ladder) s += x;
    return s;
  }
  double crossed_total() const {
    double s = 0.0;
    for (double x : crossed) s += x;
    return s;
  }
  /// Field-wise equality with NaN equal to NaN.
  bool operator==(const SpectrumRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    auto same_v = [&](const std::vector<double>& a, const std::vector<double>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (!same(a[i], b[i])) return false;
      return true;
    };
    return same(delta, o.delta) && enhancement_defined == o.enhancement_defined &&
           same(enhancement, o.enhancement) && same(enhancement_error, o.enhancement_error) &&
           same(single, o.single) && same(single_error, o.single_error) &&
           same_v(ladder, o.ladder) && same_v(ladder_errors, o.ladder_errors) &&
           same_v(crossed, o.crossed) && same_v(crossed_errors, o.crossed_errors) &&
           same(truncation_estimate, o.truncation_estimate) &&
           same(sampling_cross_section, o.sampling_cross_section) && samples == o.samples;
  }
};

struct SpectrumRecord {
  PolarizationChannel channel;
  int max_order = 1;
  std::vector<SpectrumRow> rows;
  Json metadata;
};

inline SpectrumRow make_row(const SpectrumPoint& p) {
  SpectrumRow r;
  const auto& b = p.breakdown;
  r.delta = p.delta;
  r.enhancement_defined = p.enhancement.defined;
  r.enhancement = p.enhancement.value;
  r.enhancement_error = p.enhancement.error;
  r.single = b.single;
  r.single_error = b.single_error;
  r.ladder = b.ladder_by_order;
  r.ladder_errors = b.ladder_errors;
  r.crossed = b.crossed_by_order;
  r.crossed_errors = b.crossed_errors;
  r.truncation_estimate = b.truncation_estimate;
  r.sampling_cross_section = b.sampling_cross_section;
  r.samples = b.samples;
  return r;
}

inline std::string spectrum_csv(const SpectrumRecord& rec, bool per_order) {
  std::ostringstream os;
  os << "delta_over_gamma,enhancement,err,single,ladder_total,crossed_total";
  if (per_order) {
    for (int k = 2; k <= rec.max_order; ++k) os << ",ladder_" << k;
    for (int k = 2; k <= rec.max_order; ++k) os << ",crossed_" << k;
  }
  os << "\n";
  for (const auto& r : rec.rows) {
    os << format_double(r.delta) << "," << format_double(r.enhancement) << ","
       << format_double(r.enhancement_error) << "," << format_double(r.single) << ","
       << format_double(r.ladder_total()) << "," << format_double(r.crossed_total());
    if (per_order) {
      for (double x : r.ladder) os << "," << format_double(x);
      for (double x : r.crossed) os << "," << format_double(x);
    }
    os << "\n";
  }
  return os.str();
}

inline Json to_json(const SpectrumRecord& rec) {
  Json rows = Json::array();
  for (const auto& r : rec.rows)
    rows.push_back({{"delta_over_gamma", json_double(r.delta)},
                    {"enhancement_defined", r.enhancement_defined},
                    {"enhancement", json_double(r.enhancement)},
                    {"enhancement_error", json_double(r.enhancement_error)},
                    {"single", json_double(r.single)},
                    {"single_error", json_double(r.single_error)},
                    {"ladder", json_doubles(r.ladder)},
                    {"ladder_errors", json_doubles(r.ladder_errors)},
                    {"crossed", json_doubles(r.crossed)},
                    {"crossed_errors", json_doubles(r.crossed_errors)},
                    {"truncation_estimate", json_double(r.truncation_estimate)},
                    {"sampling_cross_section_over_sigma0", json_double(r.sampling_cross_section)},
                    {"samples", r.samples}});
  return {{"record", "spectrum"},
          {"channel", rec.channel.name()},
          {"max_order", rec.max_order},
          {"units", "cross sections in sigma0, detunings in Gamma"},
          {"metadata", rec.metadata},
          {"points", rows}};
}

inline SpectrumRecord spectrum_from_json(const Json& j) {
  SpectrumRecord rec;
  rec.channel = parse_channel(j.at("channel").get<std::string>());
  rec.max_order = j.at("max_order").get<int>();
  rec.metadata = j.at("metadata");
  for (const auto& p : j.at("points")) {
    SpectrumRow r;
    r.delta = double_from_json(p.at("delta_over_gamma"));
    r.enhancement_defined = p.at("enhancement_defined").get<bool>();
    r.enhancement = double_from_json(p.at("enhancement"));
    r.enhancement_error = double_from_json(p.at("enhancement_error"));
    r.single = double_from_json(p.at("single"));
    r.single_error = double_from_json(p.at("single_error"));
    r.ladder = doubles_from_json(p.at("ladder"));
    r.ladder_errors = doubles_from_json(p.at("ladder_errors"));
    r.crossed = doubles_from_json(p.at("crossed"));
    r.crossed_errors = doubles_from_json(p.at("crossed_errors"));
    r.truncation_estimate = double_from_json(p.at("truncation_estimate"));
    r.sampling_cross_section = double_from_json(p.at("sampling_cross_section_over_sigma0"));
    r.samples = p.at("samples").get<std::size_t>();
    rec.rows.push_back(std::move(r));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Pulse records

struct PulseRecord {
  PolarizationChannel channel;
  int max_order = 1;
  TimeTrace trace;
  Json metadata;
};

inline std::string pulse_csv(const PulseRecord& rec) {
  std::ostringstream os;
  os << "t_gamma,single";
  for (int k = 2; k <= rec.max_order; ++k) os << ",ladder_" << k << ",crossed_" << k;
  os << ",enhancement_t\n";
  const TimeTrace& t = rec.trace;
  for (std::size_t j = 0; j < t.times.size(); ++j) {
    os << format_double(t.times[j]) << "," << format_double(t.single[j]);
    for (std::size_t k = 0; k < t.ladder_by_order.size(); ++k)
      os << "," << format_double(t.ladder_by_order[k][j]) << ","
         << format_double(t.crossed_by_order[k][j]);
    os << "," << format_double(t.enhancement[j]) << "\n";
  }
  return os.str();
}

inline Json to_json(const PulseRecord& rec) {
  const TimeTrace& t = rec.trace;
  auto nested = [](const std::vector<std::vector<double>>& v) {
    Json a = Json::array();
    for (const auto& x : v) a.push_back(json_doubles(x));
    return a;
  };
  return {{"record", "pulse"},
          {"channel", rec.channel.name()},
          {"max_order", rec.max_order},
          {"units", "intensities in sigma0 per 1/Gamma, times in 1/Gamma"},
          {"metadata", rec.metadata},
          {"t_gamma", json_doubles(t.times)},
          {"single", json_doubles(t.single)},
          {"single_error", json_doubles(t.single_error)},
          {"ladder", nested(t.ladder_by_order)},
          {"ladder_errors", nested(t.ladder_errors)},
          {"crossed", nested(t.crossed_by_order)},
          {"crossed_errors", nested(t.crossed_errors)},
          {"enhancement_t", json_doubles(t.enhancement)},
          {"enhancement_floor", json_double(t.enhancement_floor)},
          {"integrated_ladder", json_doubles(t.integrated_ladder)},
          {"integrated_crossed", json_doubles(t.integrated_crossed)},
          {"integrated_enhancement",
           {{"defined", t.integrated_enhancement.defined},
            {"value", json_double(t.integrated_enhancement.value)},
            {"error", json_double(t.integrated_enhancement.error)}}},
          {"samples", t.samples},
          {"sampling_cross_section_over_sigma0", json_double(t.sampling_cross_section)}};
}

// ---------------------------------------------------------------------------
// Files

/// Writes through a temporary file in the same directory and renames it, so
/// a reader never sees a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string());
  }
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cbs
