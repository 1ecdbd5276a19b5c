#pragma once

// Run configuration: one JSON document with units in the key names.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqscc/detection.hpp"
#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"
#include "iqscc/sca.hpp"
#include "iqscc/scenario.hpp"

namespace iqscc {

using json = nlohmann::json;

struct InterfererConfig {
  double angle_deg = 0.0;
  double gain_db = -65.0;  // |beta_i|^2
  double phase_deg = 0.0;
};

/// Scenario as written in the file (dB where the key says so).
struct ScenarioConfig {
  int n_tx = 16;
  int n_rx = 16;
  double bs_power_max_watt = 1.0;
  double ul_power_max_watt = 0.2;
  double noise_power_watt = 5e-12;
  double target_angle_deg = 0.0;
  double target_reflectivity_db = -110.0;
  double si_power_db = -115.0;
  double dl_angle_deg = 30.0;
  double dl_pathloss_db = -95.0;
  double ul_angle_deg = -30.0;
  double ul_pathloss_db = -95.0;
  std::vector<InterfererConfig> interferers;
};

struct DetectionConfig {
  Protocol protocol = Protocol::cs;
  double pd_min = 2.7e-3;
  double pf_max = 1e-6;
  int k = 1;
  double frequency_hz = 24e9;
  double temperature_k = 293.0;
  double transmissivity_db = -110.0;

  DetectionSpec spec() const {
    return {pd_min, pf_max, k, protocol, frequency_hz, temperature_k, db_to_linear(transmissivity_db)};
  }
};

/// Exactly one of the two is set.
struct RadarThresholdConfig {
  std::optional<double> rho_s_db;
  std::optional<DetectionConfig> detection;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct RunConfig {
  std::uint64_t seed = 1;
  ScenarioConfig scenario;
  RadarThresholdConfig conventional;
  RadarThresholdConfig iqscc;
  ScaOptions sca;
  OutputConfig output;

  const RadarThresholdConfig& radar(RadarMode m) const { return m == RadarMode::conventional ? conventional : iqscc; }
};

namespace config_detail {

inline std::string where(const std::string& path) { return path.empty() ? "<root>" : path; }

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where(path) + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError("unknown key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
    }
  }
}

inline const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double get_number(const json& obj, const std::string& path, const char* key, std::optional<double> def) {
  const json* v = find(obj, key);
  const std::string full = path + "." + key;
  if (!v) {
    if (def) return *def;
    throw ConfigError("missing required field '" + full + "'");
  }
  if (!v->is_number()) throw ConfigError("field '" + full + "' must be a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError("field '" + full + "' must be finite");
  return x;
}

inline std::int64_t get_integer(const json& obj, const std::string& path, const char* key,
                                std::optional<std::int64_t> def) {
  const json* v = find(obj, key);
  const std::string full = path + "." + key;
  if (!v) {
    if (def) return *def;
    throw ConfigError("missing required field '" + full + "'");
  }
  if (!v->is_number_integer()) throw ConfigError("field '" + full + "' must be an integer");
  return v->get<std::int64_t>();
}

inline std::string get_string(const json& obj, const std::string& path, const char* key,
                              std::optional<std::string> def) {
  const json* v = find(obj, key);
  const std::string full = path + "." + key;
  if (!v) {
    if (def) return *def;
    throw ConfigError("missing required field '" + full + "'");
  }
  if (!v->is_string()) throw ConfigError("field '" + full + "' must be a string");
  return v->get<std::string>();
}

inline ScenarioConfig parse_scenario(const json& j) {
  const std::string p = "scenario";
  check_keys(j, p,
             {"n_tx", "n_rx", "bs_power_max_watt", "ul_power_max_watt", "noise_power_watt", "target_angle_deg",
              "target_reflectivity_db", "si_power_db", "dl_angle_deg", "dl_pathloss_db", "ul_angle_deg",
              "ul_pathloss_db", "interferers"});
  ScenarioConfig s;
  const ScenarioConfig d;
  s.n_tx = static_cast<int>(get_integer(j, p, "n_tx", std::nullopt));
  s.n_rx = static_cast<int>(get_integer(j, p, "n_rx", std::nullopt));
  s.bs_power_max_watt = get_number(j, p, "bs_power_max_watt", std::nullopt);
  s.ul_power_max_watt = get_number(j, p, "ul_power_max_watt", std::nullopt);
  s.noise_power_watt = get_number(j, p, "noise_power_watt", std::nullopt);
  s.target_reflectivity_db = get_number(j, p, "target_reflectivity_db", std::nullopt);
  s.target_angle_deg = get_number(j, p, "target_angle_deg", d.target_angle_deg);
  s.si_power_db = get_number(j, p, "si_power_db", d.si_power_db);
  s.dl_angle_deg = get_number(j, p, "dl_angle_deg", d.dl_angle_deg);
  s.dl_pathloss_db = get_number(j, p, "dl_pathloss_db", d.dl_pathloss_db);
  s.ul_angle_deg = get_number(j, p, "ul_angle_deg", d.ul_angle_deg);
  s.ul_pathloss_db = get_number(j, p, "ul_pathloss_db", d.ul_pathloss_db);
  if (const json* arr = find(j, "interferers")) {
    if (!arr->is_array()) throw ConfigError("field 'scenario.interferers' must be an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string ip = p + ".interferers[" + std::to_string(i) + "]";
      const json& e = (*arr)[i];
      check_keys(e, ip, {"angle_deg", "gain_db", "phase_deg"});
      InterfererConfig it;
      it.angle_deg = get_number(e, ip, "angle_deg", std::nullopt);
      it.gain_db = get_number(e, ip, "gain_db", std::nullopt);
      it.phase_deg = get_number(e, ip, "phase_deg", 0.0);
      s.interferers.push_back(it);
    }
  }
  return s;
}

inline DetectionConfig parse_detection(const json& j, const std::string& p) {
  check_keys(j, p, {"protocol", "pd_min", "pf_max", "k", "frequency_hz", "temperature_k", "transmissivity_db"});
  DetectionConfig d;
  d.protocol = parse_protocol(get_string(j, p, "protocol", std::nullopt));
  d.pd_min = get_number(j, p, "pd_min", std::nullopt);
  d.pf_max = get_number(j, p, "pf_max", std::nullopt);
  d.k = static_cast<int>(get_integer(j, p, "k", std::nullopt));
  d.frequency_hz = get_number(j, p, "frequency_hz", d.frequency_hz);
  d.temperature_k = get_number(j, p, "temperature_k", d.temperature_k);
  d.transmissivity_db = get_number(j, p, "transmissivity_db", d.transmissivity_db);
  return d;
}

inline RadarThresholdConfig parse_threshold(const json& j, const std::string& p) {
  check_keys(j, p, {"rho_s_db", "detection"});
  RadarThresholdConfig r;
  const bool has_rho = find(j, "rho_s_db") != nullptr;
  const bool has_det = find(j, "detection") != nullptr;
  if (has_rho == has_det) throw ConfigError(p + ": exactly one of 'rho_s_db' or 'detection' must be given");
  if (has_rho) r.rho_s_db = get_number(j, p, "rho_s_db", std::nullopt);
  if (has_det) r.detection = parse_detection(j.at("detection"), p + ".detection");
  return r;
}

inline std::size_t offset_of(const std::string& msg) {
  // nlohmann messages carry "at byte N"
  const auto pos = msg.find("byte ");
  if (pos == std::string::npos) return 0;
  return static_cast<std::size_t>(std::strtoull(msg.c_str() + pos + 5, nullptr, 10));
}

}  // namespace config_detail

inline void validate(const RunConfig& c) {
  const auto& s = c.scenario;
  if (s.n_tx < 1) throw ConfigError("scenario.n_tx must be >= 1");
  if (s.n_rx < 1) throw ConfigError("scenario.n_rx must be >= 1");
  if (!(s.target_reflectivity_db < 0.0)) throw ConfigError("scenario.target_reflectivity_db must be < 0 dB");
  for (RadarMode m : {RadarMode::conventional, RadarMode::iqscc}) {
    const auto& r = c.radar(m);
    if (r.detection) r.detection->spec().validate();
  }
  if (c.sca.max_iters < 1) throw ConfigError("sca.max_iters must be >= 1");
  if (!(c.sca.rel_tol > 0.0)) throw ConfigError("sca.rel_tol must be > 0");
  if (!(c.sca.gap_tol > 0.0)) throw ConfigError("sca.gap_tol must be > 0");
  if (c.sca.max_restoration_iters < 1) throw ConfigError("sca.max_restoration_iters must be >= 1");
  for (const auto& f : c.output.formats) {
    if (f != "csv" && f != "json") throw ConfigError("output.formats: unknown format '" + f + "'");
  }
}

/// Physical scenario in linear units.
inline Scenario to_scenario(const RunConfig& c) {
  const auto& s = c.scenario;
  Scenario out;
  out.n_tx = s.n_tx;
  out.n_rx = s.n_rx;
  out.bs_power_max = s.bs_power_max_watt;
  out.ul_power_max = s.ul_power_max_watt;
  out.noise_power = s.noise_power_watt;
  out.target_angle_deg = s.target_angle_deg;
  out.target_reflectivity = db_to_linear(s.target_reflectivity_db);
  out.si_power = db_to_linear(s.si_power_db);
  out.dl_angle_deg = s.dl_angle_deg;
  out.dl_pathloss = db_to_linear(s.dl_pathloss_db);
  out.ul_angle_deg = s.ul_angle_deg;
  out.ul_pathloss = db_to_linear(s.ul_pathloss_db);
  out.rng_seed = c.seed;
  for (const auto& it : s.interferers) {
    out.interferers.push_back({it.angle_deg, std::polar(std::sqrt(db_to_linear(it.gain_db)), deg_to_rad(it.phase_deg))});
  }
  out.validate();
  return out;
}

/// Linear radar SINR threshold for a mode.
inline double rho_s(const RunConfig& c, RadarMode m) {
  const auto& r = c.radar(m);
  if (r.rho_s_db) return db_to_linear(*r.rho_s_db);
  return derive_rho_s(r.detection->spec());
}

inline RunConfig parse_config(const std::string& text) {
  using namespace config_detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t off = std::min<std::size_t>(offset_of(e.what()), text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < off; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + e.what());
  }
  check_keys(j, "", {"seed", "scenario", "radar", "sca", "output"});
  RunConfig c;
  const std::int64_t seed = get_integer(j, "", "seed", 1);
  if (seed < 0) throw ConfigError("field 'seed' must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  const json* sc = find(j, "scenario");
  if (!sc) throw ConfigError("missing required field 'scenario'");
  c.scenario = parse_scenario(*sc);

  const json* radar = find(j, "radar");
  if (!radar) throw ConfigError("missing required field 'radar'");
  check_keys(*radar, "radar", {"conventional", "iqscc"});
  for (const char* m : {"conventional", "iqscc"}) {
    const json* r = find(*radar, m);
    if (!r) throw ConfigError(std::string("missing required field 'radar.") + m + "'");
    (std::string(m) == "conventional" ? c.conventional : c.iqscc) = parse_threshold(*r, std::string("radar.") + m);
  }

  if (const json* s = find(j, "sca")) {
    check_keys(*s, "sca", {"max_iters", "rel_tol", "gap_tol", "max_restoration_iters"});
    const ScaOptions d;
    c.sca.max_iters = static_cast<int>(get_integer(*s, "sca", "max_iters", d.max_iters));
    c.sca.rel_tol = get_number(*s, "sca", "rel_tol", d.rel_tol);
    c.sca.gap_tol = get_number(*s, "sca", "gap_tol", d.gap_tol);
    c.sca.max_restoration_iters =
        static_cast<int>(get_integer(*s, "sca", "max_restoration_iters", d.max_restoration_iters));
  }
  if (const json* o = find(j, "output")) {
    check_keys(*o, "output", {"directory", "formats"});
    c.output.directory = get_string(*o, "output", "directory", c.output.directory);
    if (const json* f = find(*o, "formats")) {
      if (!f->is_array()) throw ConfigError("field 'output.formats' must be an array of strings");
      c.output.formats.clear();
      for (const auto& e : *f) {
        if (!e.is_string()) throw ConfigError("field 'output.formats' must be an array of strings");
        c.output.formats.push_back(e.get<std::string>());
      }
    }
  }
  validate(c);
  to_scenario(c);  // scenario invariants
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  const auto& s = c.scenario;
  json sc = {{"n_tx", s.n_tx},
             {"n_rx", s.n_rx},
             {"bs_power_max_watt", s.bs_power_max_watt},
             {"ul_power_max_watt", s.ul_power_max_watt},
             {"noise_power_watt", s.noise_power_watt},
             {"target_angle_deg", s.target_angle_deg},
             {"target_reflectivity_db", s.target_reflectivity_db},
             {"si_power_db", s.si_power_db},
             {"dl_angle_deg", s.dl_angle_deg},
             {"dl_pathloss_db", s.dl_pathloss_db},
             {"ul_angle_deg", s.ul_angle_deg},
             {"ul_pathloss_db", s.ul_pathloss_db}};
  sc["interferers"] = json::array();
  for (const auto& it : s.interferers) {
    sc["interferers"].push_back({{"angle_deg", it.angle_deg}, {"gain_db", it.gain_db}, {"phase_deg", it.phase_deg}});
  }
  j["scenario"] = sc;
  auto threshold = [](const RadarThresholdConfig& r) {
    if (r.rho_s_db) return json{{"rho_s_db", *r.rho_s_db}};
    const auto& d = *r.detection;
    return json{{"detection",
                 {{"protocol", to_string(d.protocol)},
                  {"pd_min", d.pd_min},
                  {"pf_max", d.pf_max},
                  {"k", d.k},
                  {"frequency_hz", d.frequency_hz},
                  {"temperature_k", d.temperature_k},
                  {"transmissivity_db", d.transmissivity_db}}}};
  };
  j["radar"] = {{"conventional", threshold(c.conventional)}, {"iqscc", threshold(c.iqscc)}};
  j["sca"] = {{"max_iters", c.sca.max_iters},
              {"rel_tol", c.sca.rel_tol},
              {"gap_tol", c.sca.gap_tol},
              {"max_restoration_iters", c.sca.max_restoration_iters}};
  j["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
  return j;
}

/// The simulation campaign: 16x16 array, 1 W / 0.2 W budgets, two -65 dB
/// interferers off the target, thresholds 2.9 dB (conventional) and -3.5 dB (IQSCC).
inline RunConfig paper_campaign_config() {
  RunConfig c;
  c.seed = 1;
  c.scenario.interferers = {{-50.0, -65.0, 0.0}, {40.0, -65.0, 0.0}};
  c.conventional.rho_s_db = 2.9;
  c.iqscc.rho_s_db = -3.5;
  return c;
}

/// Canonical text: sorted keys, two-space indent, trailing newline.
inline std::string canonical_text(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace iqscc
