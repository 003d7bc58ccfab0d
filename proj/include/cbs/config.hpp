#pragma once

// Run configuration: one flat JSON object with units in the key names.
// Layers are merged key by key, config file < environment < command line.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbs/engine.hpp"
#include "cbs/pulse.hpp"

namespace cbs {

using Json = nlohmann::json;

enum class RunMode { kSpectrum, kPulse, kDiagnostics };
enum class OutputFormat { kCsv, kJson };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::kSpectrum: return "spectrum";
    case RunMode::kPulse: return "pulse";
    default: return "diagnostics";
  }
}

inline const char* to_string(OutputFormat f) { return f == OutputFormat::kCsv ? "csv" : "json"; }

inline constexpr const char* kEnvPrefix = "CBS_SIM_";

/// Every accepted key with its default; keys whose default is null are
/// required.
inline const Json& config_schema() {
  static const Json schema = {
      {"mode", nullptr},
      {"seed", nullptr},
      {"peak_density_per_cm3", nullptr},
      {"gaussian_radius_cm", nullptr},
      {"rabi_frequency_over_gamma", nullptr},
      {"density_convention", "sigma"},
      {"control_detuning_over_gamma", 0.0},
      {"channels", Json::array({"H+->H+", "H+->H-", "H-->H+", "H-->H-"})},
      {"samples", 10000},
      {"max_order", 8},
      {"workers", 1},
      {"delta_min_over_gamma", -3.0},
      {"delta_max_over_gamma", 3.0},
      {"delta_points", 41},
      {"pulse_tau_over_gamma_inv", 200.0},
      {"carrier_detuning_over_gamma", 0.0},
      {"omega_grid_points", 4096},
      {"omega_half_span_over_gamma", 0.0},
      {"pulse_max_order", 2},
      {"helicity_convention", "per_beam"},
      {"doppler_width_over_gamma", 0.0},
      {"per_order_columns", true},
      {"sampling_cross_section_over_sigma0", 0.0},
      {"pair_separation_cm", 0.1},
      {"format", "csv"},
      {"output_dir", "."},
  };
  return schema;
}

struct RunConfig {
  RunMode mode = RunMode::kSpectrum;
  CloudGeometry cloud;
  ControlCoupling coupling;
  std::vector<PolarizationChannel> channels;
  MonteCarloParams mc;
  double delta_min = -3.0;
  double delta_max = 3.0;
  std::size_t delta_points = 41;
  PulseSpec pulse;
  std::size_t omega_points = 4096;
  /// 0 selects the default span.
  double omega_half_span = 0.0;
  int pulse_max_order = 2;
  bool per_order_columns = true;
  double pair_separation = 0.1;  // cm
  OutputFormat format = OutputFormat::kCsv;
  std::string output_dir = ".";
  /// Fully resolved document, defaults included.
  Json resolved;
  std::vector<std::string> defaults_applied;

  std::vector<double> delta_grid() const {
    std::vector<double> g;
    if (delta_points == 0) return g;
    if (delta_points == 1) return {delta_min};
    for (std::size_t i = 0; i < delta_points; ++i)
      g.push_back(delta_min + (delta_max - delta_min) * static_cast<double>(i) /
                                  static_cast<double>(delta_points - 1));
    return g;
  }

  FrequencyGrid frequency_grid() const {
    FrequencyGrid g = default_frequency_grid(pulse, coupling, omega_points);
    if (omega_half_span > 0.0) g.half_span = omega_half_span;
    return g;
  }
};

inline PolarizationChannel parse_channel(const std::string& s) {
  for (const auto& c : all_channels())
    if (s == c.name() || s == c.tag()) return c;
  throw ConfigError("channels: unknown channel '" + s + "' (use H+->H+, H+->H-, H-->H+, H-->H- or hp_hp style tags)");
}

/// Interprets an override string: JSON if it parses, a bare string otherwise.
inline Json override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

inline std::string env_name(const std::string& key) {
  std::string s = kEnvPrefix;
  for (char c : key) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// Values of CBS_SIM_<KEY> for every known key present in the environment.
inline Json environment_overrides() {
  Json out = Json::object();
  for (const auto& [key, _] : config_schema().items())
    if (const char* v = std::getenv(env_name(key).c_str())) out[key] = override_value(v);
  return out;
}

inline Json merge_layers(const std::vector<Json>& layers) {
  Json doc = Json::object();
  for (const auto& l : layers) {
    if (!l.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [k, v] : l.items()) doc[k] = v;
  }
  return doc;
}

namespace detail {

template <class T>
T field(const Json& doc, const std::string& key) {
  const Json& v = doc.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(key + " must be a number");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ConfigError(key + " must be finite");
      return x;
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x != std::floor(x)) throw ConfigError(key + " must be an integer");
      } else if (!v.is_number()) {
        throw ConfigError(key + " must be an integer");
      }
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && v.get<std::int64_t>() < 0)
          throw ConfigError(key + " must be >= 0");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + " must be true or false");
      return v.get<bool>();
    } else {
      if (!v.is_string()) throw ConfigError(key + " must be a string");
      return v.get<std::string>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace detail

/// Validates a merged document and applies defaults.
inline RunConfig parse_config(const Json& input) {
  using detail::field;
  using detail::require;
  if (!input.is_object()) throw ConfigError("configuration must be a JSON object");
  const Json& schema = config_schema();
  std::vector<std::string> unknown, missing;
  for (const auto& [k, _] : input.items())
    if (!schema.contains(k)) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  RunConfig c;
  Json doc = input;
  for (const auto& [k, def] : schema.items()) {
    if (doc.contains(k) && !doc.at(k).is_null()) continue;
    if (def.is_null()) {
      missing.push_back(k);
    } else {
      doc[k] = def;
      c.defaults_applied.push_back(k);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing required configuration keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }

  const std::string mode = field<std::string>(doc, "mode");
  if (mode == "spectrum") c.mode = RunMode::kSpectrum;
  else if (mode == "pulse") c.mode = RunMode::kPulse;
  else if (mode == "diagnostics") c.mode = RunMode::kDiagnostics;
  else throw ConfigError("mode must be one of spectrum, pulse, diagnostics (got '" + mode + "')");

  c.mc.seed = field<std::uint64_t>(doc, "seed");
  c.mc.samples = field<std::size_t>(doc, "samples");
  require(c.mc.samples >= 1, "samples must be >= 1");
  const auto order = field<std::int64_t>(doc, "max_order");
  require(order >= 1 && order <= 12, "max_order must lie in [1, 12]");
  c.mc.max_order = static_cast<int>(order);
  const auto workers = field<std::int64_t>(doc, "workers");
  require(workers >= 1 && workers <= 1024, "workers must lie in [1, 1024]");
  c.mc.workers = static_cast<unsigned>(workers);

  c.cloud.peak_density = field<double>(doc, "peak_density_per_cm3");
  require(c.cloud.peak_density >= 0.0, "peak_density_per_cm3 must be >= 0");
  c.cloud.gaussian_radius = field<double>(doc, "gaussian_radius_cm");
  require(c.cloud.gaussian_radius > 0.0, "gaussian_radius_cm must be > 0");
  const std::string conv = field<std::string>(doc, "density_convention");
  if (conv == "sigma") c.cloud.convention = GaussianConvention::kSigma;
  else if (conv == "e_fold") c.cloud.convention = GaussianConvention::kEFold;
  else throw ConfigError("density_convention must be 'sigma' or 'e_fold'");

  c.coupling.rabi_frequency = field<double>(doc, "rabi_frequency_over_gamma");
  require(c.coupling.rabi_frequency >= 0.0, "rabi_frequency_over_gamma must be >= 0");
  c.coupling.detuning = field<double>(doc, "control_detuning_over_gamma");

  const Json& ch = doc.at("channels");
  if (ch.is_string() && ch.get<std::string>() == "all") {
    for (const auto& x : all_channels()) c.channels.push_back(x);
  } else {
    require(ch.is_array() && !ch.empty(), "channels must be a non-empty list or \"all\"");
    for (const auto& x : ch) {
      require(x.is_string(), "channels entries must be strings");
      const auto p = parse_channel(x.get<std::string>());
      require(std::find(c.channels.begin(), c.channels.end(), p) == c.channels.end(),
              "channels: duplicate entry " + p.name());
      c.channels.push_back(p);
    }
  }

  c.delta_min = field<double>(doc, "delta_min_over_gamma");
  c.delta_max = field<double>(doc, "delta_max_over_gamma");
  c.delta_points = field<std::size_t>(doc, "delta_points");
  require(c.delta_points <= 100000, "delta_points must be <= 100000");
  require(c.delta_points < 2 || c.delta_max > c.delta_min,
          "delta_max_over_gamma must exceed delta_min_over_gamma");

  c.pulse.tau = field<double>(doc, "pulse_tau_over_gamma_inv");
  require(c.pulse.tau > 0.0, "pulse_tau_over_gamma_inv must be > 0");
  c.pulse.carrier_detuning = field<double>(doc, "carrier_detuning_over_gamma");
  c.omega_points = field<std::size_t>(doc, "omega_grid_points");
  c.omega_half_span = field<double>(doc, "omega_half_span_over_gamma");
  require(c.omega_half_span >= 0.0, "omega_half_span_over_gamma must be >= 0 (0 selects the default)");
  const auto pmo = field<std::int64_t>(doc, "pulse_max_order");
  require(pmo >= 1 && pmo <= 3, "pulse_max_order must lie in [1, 3]");
  c.pulse_max_order = static_cast<int>(pmo);

  const std::string hc = field<std::string>(doc, "helicity_convention");
  if (hc == "per_beam") c.mc.convention = HelicityConvention::kPerBeam;
  else if (hc == "lab") c.mc.convention = HelicityConvention::kLab;
  else throw ConfigError("helicity_convention must be 'per_beam' or 'lab'");
  c.mc.doppler_width = field<double>(doc, "doppler_width_over_gamma");
  require(c.mc.doppler_width >= 0.0, "doppler_width_over_gamma must be >= 0");
  c.per_order_columns = field<bool>(doc, "per_order_columns");
  const double ss = field<double>(doc, "sampling_cross_section_over_sigma0");
  require(ss >= 0.0, "sampling_cross_section_over_sigma0 must be >= 0 (0 selects automatically)");
  c.mc.sampling_cross_section = ss * resonant_cross_section(LevelScheme{});
  c.pair_separation = field<double>(doc, "pair_separation_cm");
  require(c.pair_separation > 0.0, "pair_separation_cm must be > 0");

  const std::string fmt = field<std::string>(doc, "format");
  if (fmt == "csv") c.format = OutputFormat::kCsv;
  else if (fmt == "json") c.format = OutputFormat::kJson;
  else throw ConfigError("format must be 'csv' or 'json'");
  c.output_dir = field<std::string>(doc, "output_dir");
  require(!c.output_dir.empty(), "output_dir must not be empty");

  if (c.mode == RunMode::kPulse) {
    require(c.mc.doppler_width == 0.0, "pulse mode requires doppler_width_over_gamma = 0");
    c.frequency_grid().validate(c.pulse);
  }
  c.mc.validate();
  c.resolved = doc;
  return c;
}

}  // namespace cbs
