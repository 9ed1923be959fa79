#pragma once

// Run configuration: JSON document, every key optional, unknown keys rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rfiqkd/error.hpp"
#include "rfiqkd/io.hpp"
#include "rfiqkd/qdsc.hpp"
#include "rfiqkd/receiver_sim.hpp"
#include "rfiqkd/security.hpp"

namespace rfiqkd::config {

using json = nlohmann::json;

enum class Preset { Ideal, PaperFig4 };

inline Preset preset_from_name(const std::string& s) {
  if (s == "ideal") return Preset::Ideal;
  if (s == "paper-fig4") return Preset::PaperFig4;
  fail(ErrorCode::ConfigError, "preset: unknown preset '" + s + "' (expected ideal or paper-fig4)");
}

inline std::string preset_name(Preset p) { return p == Preset::Ideal ? "ideal" : "paper-fig4"; }

struct AcquisitionConfig {
  std::size_t n_windows = 1800;
  double window_s = 2.0;
  double mean_detections = 240000.0;
  double peak_window_ps = 150.0;
  double jitter_fwhm_ps = 50.0;
  std::size_t event_windows = 1;
};

struct SecurityConfig {
  double epsilon = security::kDefaultEpsilon;
  bool finite_key = true;
  std::optional<double> e_zz_override;
  bool pin_alice_marginal = true;
  unsigned threads = 0;
};

struct QdscConfig {
  std::uint64_t min_counts = qdsc::kDefaultMinCounts;
  bool repair = true;
  double min_coverage_deg = qdsc::kMinCoverageDeg;
};

struct RunConfig {
  Preset preset = Preset::Ideal;
  sim::DeviceModel device{};
  sim::DriftProcess drift{};
  AcquisitionConfig acquisition{};
  QdscConfig qdsc{};
  SecurityConfig security{};
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> drift_seed;  ///< derived from `seed` when absent
  std::string out_dir = "out";

  sim::DriftProcess drift_process() const {
    sim::DriftProcess d = drift;
    d.seed = drift_seed.value_or(sim::detail::sub_seed(seed, 0xD41F7));
    return d;
  }

  sim::Acquisition acquisition_model() const {
    return {acquisition.mean_detections, acquisition.window_s, acquisition.peak_window_ps};
  }
  qdsc::QdscOptions qdsc_options() const {
    qdsc::QdscOptions o;
    o.min_counts = qdsc.min_counts;
    o.repair = qdsc.repair;
    o.min_coverage_deg = qdsc.min_coverage_deg;
    return o;
  }
  security::AnalysisConfig analysis() const {
    security::AnalysisConfig a;
    a.epsilon = security.epsilon;
    a.finite_key = security.finite_key;
    a.e_zz_override = security.e_zz_override;
    a.pin_alice_marginal = security.pin_alice_marginal;
    a.threads = security.threads;
    return a;
  }
};

/// Device and acquisition rate of a named preset.
inline void apply_preset(RunConfig& cfg, Preset p) {
  cfg.preset = p;
  if (p == Preset::Ideal) {
    cfg.device = sim::DeviceModel::ideal();
    cfg.acquisition.mean_detections = 240000.0;
  } else {
    cfg.device = sim::DeviceModel::paper_fig4();
    cfg.acquisition.mean_detections = 960000.0;
  }
}

namespace detail {

inline std::string path_of(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, (path.empty() ? "<root>" : path) + ": expected an object");
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(ErrorCode::ConfigError, path_of(path, it.key()) + ": unknown key");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(ErrorCode::ConfigError, path + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail(ErrorCode::ConfigError, path + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(ErrorCode::ConfigError, path + ": expected true or false");
  return j.get<bool>();
}

template <std::size_t N>
void array(const json& j, const std::string& path, std::array<double, N>& out) {
  if (!j.is_array() || j.size() != N) fail(ErrorCode::ConfigError, path + ": expected an array of " + std::to_string(N) + " numbers");
  for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], path + "[" + std::to_string(i) + "]");
}

template <typename F>
void opt(const json& j, const char* key, const std::string& parent, F&& f) {
  if (j.contains(key)) f(j.at(key), path_of(parent, key));
}

inline sim::DriftProcess::Kind drift_kind(const std::string& s, const std::string& path) {
  if (s == "wrapped-random-walk") return sim::DriftProcess::Kind::WrappedRandomWalk;
  if (s == "ornstein-uhlenbeck") return sim::DriftProcess::Kind::OrnsteinUhlenbeck;
  if (s == "uniform-grid") return sim::DriftProcess::Kind::UniformGrid;
  fail(ErrorCode::ConfigError, path + ": unknown drift kind '" + s + "'");
}

}  // namespace detail

inline std::string drift_kind_name(sim::DriftProcess::Kind k) {
  switch (k) {
    case sim::DriftProcess::Kind::WrappedRandomWalk: return "wrapped-random-walk";
    case sim::DriftProcess::Kind::OrnsteinUhlenbeck: return "ornstein-uhlenbeck";
    case sim::DriftProcess::Kind::UniformGrid: return "uniform-grid";
  }
  return "?";
}

inline void validate(const RunConfig& c) {
  try {
    c.device.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.message());
  }
  const auto& a = c.acquisition;
  if (a.n_windows < 1) fail(ErrorCode::ConfigError, "acquisition.n_windows: must be >= 1");
  if (!(a.window_s > 0.0)) fail(ErrorCode::ConfigError, "acquisition.window_s: must be > 0");
  if (!(a.mean_detections >= 0.0)) fail(ErrorCode::ConfigError, "acquisition.mean_detections: must be >= 0");
  if (!(a.peak_window_ps > 0.0)) fail(ErrorCode::ConfigError, "acquisition.peak_window_ps: must be > 0");
  if (!(a.peak_window_ps < c.device.umzi_delay_ns * 1000.0))
    fail(ErrorCode::ConfigError, "acquisition.peak_window_ps: " + io::fixed(a.peak_window_ps, 1) +
                                     " ps overlaps neighbouring peaks (delay " + io::fixed(c.device.umzi_delay_ns * 1000.0, 1) + " ps)");
  if (!(a.jitter_fwhm_ps >= 0.0)) fail(ErrorCode::ConfigError, "acquisition.jitter_fwhm_ps: must be >= 0");
  if (!(c.security.epsilon > 0.0 && c.security.epsilon < 1.0)) fail(ErrorCode::ConfigError, "security.epsilon: must lie in (0,1)");
  if (c.security.e_zz_override && !(*c.security.e_zz_override >= 0.0 && *c.security.e_zz_override <= 0.5))
    fail(ErrorCode::ConfigError, "security.e_zz_override: must lie in [0,0.5]");
  if (!(c.drift.step_std_rad_per_window >= 0.0)) fail(ErrorCode::ConfigError, "drift.step_std_rad_per_window: must be >= 0");
  if (!(c.qdsc.min_coverage_deg >= 0.0 && c.qdsc.min_coverage_deg <= 360.0))
    fail(ErrorCode::ConfigError, "qdsc.min_coverage_deg: must lie in [0,360]");
}

/// Defaults, then the preset (argument wins over the document's "preset"),
/// then explicit keys.
inline RunConfig parse_config_json(const json& root, std::optional<Preset> preset_override = std::nullopt) {
  using namespace detail;
  RunConfig c;
  if (!root.is_null()) require_object(root, "");
  const json j = root.is_null() ? json::object() : root;
  reject_unknown(j, "", {"preset", "device", "drift", "acquisition", "qdsc", "security", "seed", "output"});

  Preset p = Preset::Ideal;
  opt(j, "preset", "", [&](const json& v, const std::string& path) {
    if (!v.is_string()) fail(ErrorCode::ConfigError, path + ": expected a string");
    p = preset_from_name(v.get<std::string>());
  });
  if (preset_override) p = *preset_override;
  apply_preset(c, p);

  opt(j, "device", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"bs_ratio", "detector_efficiency", "dark_rate_hz", "hwp_error_deg", "qwp_error_deg",
                             "crosstalk", "visibility", "z_flip_probability", "umzi_delay_ns", "pulse_period_ns"});
    auto& m = c.device;
    opt(d, "bs_ratio", path, [&](const json& v, const std::string& q) { m.bs_ratio = number(v, q); });
    opt(d, "detector_efficiency", path, [&](const json& v, const std::string& q) { array(v, q, m.detector_efficiency); });
    opt(d, "dark_rate_hz", path, [&](const json& v, const std::string& q) { array(v, q, m.dark_rate_hz); });
    opt(d, "hwp_error_deg", path, [&](const json& v, const std::string& q) { m.hwp_error_deg = number(v, q); });
    opt(d, "qwp_error_deg", path, [&](const json& v, const std::string& q) { m.qwp_error_deg = number(v, q); });
    opt(d, "crosstalk", path, [&](const json& v, const std::string& q) { array(v, q, m.crosstalk); });
    opt(d, "visibility", path, [&](const json& v, const std::string& q) { m.visibility = number(v, q); });
    opt(d, "z_flip_probability", path, [&](const json& v, const std::string& q) { m.z_flip_probability = number(v, q); });
    opt(d, "umzi_delay_ns", path, [&](const json& v, const std::string& q) { m.umzi_delay_ns = number(v, q); });
    opt(d, "pulse_period_ns", path, [&](const json& v, const std::string& q) { m.pulse_period_ns = number(v, q); });
  });

  opt(j, "drift", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"kind", "step_std_rad_per_window", "mean_rate_rad_per_window", "reversion", "seed"});
    auto& dr = c.drift;
    opt(d, "kind", path, [&](const json& v, const std::string& q) {
      if (!v.is_string()) fail(ErrorCode::ConfigError, q + ": expected a string");
      dr.kind = drift_kind(v.get<std::string>(), q);
    });
    opt(d, "step_std_rad_per_window", path, [&](const json& v, const std::string& q) { dr.step_std_rad_per_window = number(v, q); });
    opt(d, "mean_rate_rad_per_window", path, [&](const json& v, const std::string& q) { dr.mean_rate_rad_per_window = number(v, q); });
    opt(d, "reversion", path, [&](const json& v, const std::string& q) { dr.reversion = number(v, q); });
    opt(d, "seed", path, [&](const json& v, const std::string& q) {
      if (v.is_null()) c.drift_seed.reset();
      else c.drift_seed = count(v, q);
    });
  });

  opt(j, "acquisition", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"n_windows", "window_s", "mean_detections", "peak_window_ps", "jitter_fwhm_ps", "event_windows"});
    auto& a = c.acquisition;
    opt(d, "n_windows", path, [&](const json& v, const std::string& q) { a.n_windows = count(v, q); });
    opt(d, "window_s", path, [&](const json& v, const std::string& q) { a.window_s = number(v, q); });
    opt(d, "mean_detections", path, [&](const json& v, const std::string& q) { a.mean_detections = number(v, q); });
    opt(d, "peak_window_ps", path, [&](const json& v, const std::string& q) { a.peak_window_ps = number(v, q); });
    opt(d, "jitter_fwhm_ps", path, [&](const json& v, const std::string& q) { a.jitter_fwhm_ps = number(v, q); });
    opt(d, "event_windows", path, [&](const json& v, const std::string& q) { a.event_windows = count(v, q); });
  });

  opt(j, "qdsc", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"min_counts", "repair", "min_coverage_deg"});
    opt(d, "min_counts", path, [&](const json& v, const std::string& q) { c.qdsc.min_counts = count(v, q); });
    opt(d, "repair", path, [&](const json& v, const std::string& q) { c.qdsc.repair = boolean(v, q); });
    opt(d, "min_coverage_deg", path, [&](const json& v, const std::string& q) { c.qdsc.min_coverage_deg = number(v, q); });
  });

  opt(j, "security", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"epsilon", "finite_key", "e_zz_override", "pin_alice_marginal", "threads"});
    auto& s = c.security;
    opt(d, "epsilon", path, [&](const json& v, const std::string& q) { s.epsilon = number(v, q); });
    opt(d, "finite_key", path, [&](const json& v, const std::string& q) { s.finite_key = boolean(v, q); });
    opt(d, "e_zz_override", path, [&](const json& v, const std::string& q) {
      if (v.is_null()) s.e_zz_override.reset();
      else s.e_zz_override = number(v, q);
    });
    opt(d, "pin_alice_marginal", path, [&](const json& v, const std::string& q) { s.pin_alice_marginal = boolean(v, q); });
    opt(d, "threads", path, [&](const json& v, const std::string& q) { s.threads = unsigned(count(v, q)); });
  });

  opt(j, "seed", "", [&](const json& v, const std::string& q) { c.seed = count(v, q); });
  opt(j, "output", "", [&](const json& d, const std::string& path) {
    require_object(d, path);
    reject_unknown(d, path, {"dir"});
    opt(d, "dir", path, [&](const json& v, const std::string& q) {
      if (!v.is_string()) fail(ErrorCode::ConfigError, q + ": expected a string");
      c.out_dir = v.get<std::string>();
    });
  });

  validate(c);
  return c;
}

inline RunConfig parse_config_text(const std::string& text, std::optional<Preset> preset_override = std::nullopt) {
  if (io::detail::trim(text).empty()) return parse_config_json(json(), preset_override);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("<root>: malformed JSON: ") + e.what());
  }
  return parse_config_json(j, preset_override);
}

inline RunConfig parse_config(const std::filesystem::path& path, std::optional<Preset> preset_override = std::nullopt) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    fail(ErrorCode::ConfigError, "cannot read config file " + path.string());
  }
  return parse_config_text(text, preset_override);
}

/// Fully resolved configuration, all keys present.
inline json to_json(const RunConfig& c) {
  json j;
  j["preset"] = preset_name(c.preset);
  const auto& m = c.device;
  j["device"] = {{"bs_ratio", m.bs_ratio},
                 {"detector_efficiency", m.detector_efficiency},
                 {"dark_rate_hz", m.dark_rate_hz},
                 {"hwp_error_deg", m.hwp_error_deg},
                 {"qwp_error_deg", m.qwp_error_deg},
                 {"crosstalk", m.crosstalk},
                 {"visibility", m.visibility},
                 {"z_flip_probability", m.z_flip_probability},
                 {"umzi_delay_ns", m.umzi_delay_ns},
                 {"pulse_period_ns", m.pulse_period_ns}};
  j["drift"] = {{"kind", drift_kind_name(c.drift.kind)},
                {"step_std_rad_per_window", c.drift.step_std_rad_per_window},
                {"mean_rate_rad_per_window", c.drift.mean_rate_rad_per_window},
                {"reversion", c.drift.reversion},
                {"seed", c.drift_seed ? json(*c.drift_seed) : json(nullptr)}};
  const auto& a = c.acquisition;
  j["acquisition"] = {{"n_windows", a.n_windows},       {"window_s", a.window_s},
                      {"mean_detections", a.mean_detections}, {"peak_window_ps", a.peak_window_ps},
                      {"jitter_fwhm_ps", a.jitter_fwhm_ps},   {"event_windows", a.event_windows}};
  j["qdsc"] = {{"min_counts", c.qdsc.min_counts}, {"repair", c.qdsc.repair}, {"min_coverage_deg", c.qdsc.min_coverage_deg}};
  j["security"] = {{"epsilon", c.security.epsilon},
                   {"finite_key", c.security.finite_key},
                   {"e_zz_override", c.security.e_zz_override ? json(*c.security.e_zz_override) : json(nullptr)},
                   {"pin_alice_marginal", c.security.pin_alice_marginal},
                   {"threads", c.security.threads}};
  j["seed"] = c.seed;
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

/// 64-bit FNV-1a of the canonical resolved JSON (output directory and thread
/// count excluded: they do not change results).
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("output");
  j["security"].erase("threads");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rfiqkd::config
