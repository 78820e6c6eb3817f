#pragma once

// Scenario files: line-oriented INI with [section] headers and key = value
// pairs. '#' starts a comment. Vectors are written "x, y, z". Every key is
// optional and defaults to the preset vehicles and packs; unknown sections or
// keys are rejected with their line and column.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flybatt/aero.hpp"
#include "flybatt/control.hpp"
#include "flybatt/docking.hpp"
#include "flybatt/dynamics.hpp"
#include "flybatt/mission.hpp"
#include "flybatt/powertrain.hpp"

#ifndef FLYBATT_SCENARIO_DIR
#define FLYBATT_SCENARIO_DIR "scenarios"
#endif

namespace flybatt {

struct PackSpec {
  int cells = 3;
  double capacity = 2.2;  // Ah
  double mass = 0.190;    // kg
  double internal_resistance = 0.025;  // ohm, whole pack

  BatteryPack make(const std::string& name) const {
    return make_pack(name, cells, capacity, mass, internal_resistance);
  }
};

enum class FeedforwardMode { Model, None, File };

struct FeedforwardSettings {
  FeedforwardMode mode = FeedforwardMode::Model;
  std::string file;
  double lateral_max = 0.4;
  int lateral_bins = 9;
  double vertical_max = 1.0;
  int vertical_bins = 11;
  double dwell = 4.0;  // s per node when the map is measured in simulation
};

struct SimSettings {
  double dt = 0.001;
  std::uint64_t seed = 1;
  double duration = 7200.0;  // s, hard cap on simulated time
  int telemetry_decimation = 10;
};

struct Scenario {
  std::string name = "default";
  VehicleParams main = main_quad_preset();
  VehicleParams fb = flying_battery_preset();
  PackSpec primary{3, 2.2, 0.190, 0.025};
  PackSpec secondary{3, 1.5, 0.135, 0.035};
  PackSpec fb_flight{2, 0.8, 0.045, 0.050};
  SwitchCircuit circuit;
  DownwashModel downwash;
  ControlTuning control;
  FeedforwardSettings feedforward;
  DockingConfig docking;
  MissionConfig mission;
  double solo_flight_time = 0.0;  // s; > 0 calibrates main.k_p to this solo hover time
  SimSettings sim;
};

inline void validate(const Scenario& s) {
  validate(s.main);
  validate(s.fb);
  s.primary.make("primary");
  s.secondary.make("secondary");
  s.fb_flight.make("fb_flight");
  validate(s.circuit);
  validate(s.downwash);
  validate(s.docking);
  validate(s.mission);
  if (!(s.sim.dt > 0.0) || s.sim.dt > 0.01) throw ConfigError("sim.dt must be in (0, 0.01]");
  if (!(s.sim.duration > 0.0)) throw ConfigError("sim.duration must be > 0");
  if (s.sim.telemetry_decimation < 1) throw ConfigError("sim.telemetry_decimation must be >= 1");
  if (s.solo_flight_time < 0.0) throw ConfigError("calibration.solo_flight_time must be >= 0");
  if (s.feedforward.mode == FeedforwardMode::File && s.feedforward.file.empty())
    throw ConfigError("control.feedforward_file is required when control.feedforward = file");
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_double(const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty() || !std::isfinite(out))
    throw std::invalid_argument("expected a number, got '" + t + "'");
  return out;
}

inline long long parse_int(const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw std::invalid_argument("expected an integer, got '" + t + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + t + "'");
}

inline Vec3 parse_vec3(const std::string& v) {
  std::vector<double> xs;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) xs.push_back(parse_double(part));
  if (xs.size() != 3) throw std::invalid_argument("expected three comma-separated numbers");
  return Vec3(xs[0], xs[1], xs[2]);
}

using Setter = std::function<void(Scenario&, const std::string&)>;

inline void add_vehicle_keys(std::map<std::string, Setter>& r, const std::string& prefix,
                             VehicleParams Scenario::*member) {
  const std::string p = "vehicles." + prefix + ".";
  r[p + "mass"] = [member](Scenario& s, const std::string& v) { (s.*member).mass = parse_double(v); };
  r[p + "arm_length"] = [member](Scenario& s, const std::string& v) { (s.*member).arm_length = parse_double(v); };
  r[p + "prop_diameter"] = [member](Scenario& s, const std::string& v) { (s.*member).prop_diameter = parse_double(v); };
  r[p + "max_thrust"] = [member](Scenario& s, const std::string& v) { (s.*member).max_thrust = parse_double(v); };
  r[p + "inertia"] = [member](Scenario& s, const std::string& v) {
    (s.*member).inertia = parse_vec3(v).asDiagonal();
  };
  r[p + "k_p"] = [member](Scenario& s, const std::string& v) { (s.*member).k_p = parse_double(v); };
  r[p + "yaw_moment_coeff"] = [member](Scenario& s, const std::string& v) {
    (s.*member).yaw_moment_coeff = parse_double(v);
  };
  r[p + "drag_coefficient"] = [member](Scenario& s, const std::string& v) {
    (s.*member).drag_coefficient = parse_double(v);
  };
}

inline void add_pack_keys(std::map<std::string, Setter>& r, const std::string& prefix,
                          PackSpec Scenario::*member) {
  const std::string p = "batteries." + prefix + ".";
  r[p + "cells"] = [member](Scenario& s, const std::string& v) {
    (s.*member).cells = static_cast<int>(parse_int(v));
  };
  r[p + "capacity"] = [member](Scenario& s, const std::string& v) { (s.*member).capacity = parse_double(v); };
  r[p + "mass"] = [member](Scenario& s, const std::string& v) { (s.*member).mass = parse_double(v); };
  r[p + "internal_resistance"] = [member](Scenario& s, const std::string& v) {
    (s.*member).internal_resistance = parse_double(v);
  };
}

#define FLYBATT_DOUBLE_KEY(reg, key, field) \
  reg[key] = [](Scenario& s, const std::string& v) { s.field = parse_double(v); }

inline const std::map<std::string, Setter>& scenario_keys() {
  static const std::map<std::string, Setter> registry = [] {
    std::map<std::string, Setter> r;
    add_vehicle_keys(r, "main", &Scenario::main);
    add_vehicle_keys(r, "fb", &Scenario::fb);
    add_pack_keys(r, "primary", &Scenario::primary);
    add_pack_keys(r, "secondary", &Scenario::secondary);
    add_pack_keys(r, "fb_flight", &Scenario::fb_flight);

    FLYBATT_DOUBLE_KEY(r, "circuit.diode_drop", circuit.diode_drop);

    FLYBATT_DOUBLE_KEY(r, "downwash.peak_force_ratio", downwash.peak_force_ratio);
    FLYBATT_DOUBLE_KEY(r, "downwash.lateral_decay", downwash.lateral_decay);
    FLYBATT_DOUBLE_KEY(r, "downwash.vertical_decay", downwash.vertical_decay);
    FLYBATT_DOUBLE_KEY(r, "downwash.align_torque_gain", downwash.align_torque_gain);

    FLYBATT_DOUBLE_KEY(r, "control.position_natural_frequency", control.position_natural_frequency);
    FLYBATT_DOUBLE_KEY(r, "control.position_damping", control.position_damping);
    FLYBATT_DOUBLE_KEY(r, "control.position_integral_gain", control.position_integral_gain);
    FLYBATT_DOUBLE_KEY(r, "control.attitude_natural_frequency", control.attitude_natural_frequency);
    FLYBATT_DOUBLE_KEY(r, "control.attitude_damping", control.attitude_damping);
    FLYBATT_DOUBLE_KEY(r, "control.yaw_natural_frequency", control.yaw_natural_frequency);
    FLYBATT_DOUBLE_KEY(r, "control.yaw_integral_ratio", control.yaw_integral_ratio);
    FLYBATT_DOUBLE_KEY(r, "control.integrator_limit", control.integrator_limit);
    FLYBATT_DOUBLE_KEY(r, "control.max_tilt", control.max_tilt);
    r["control.feedforward"] = [](Scenario& s, const std::string& v) {
      const std::string t = trim(v);
      if (t == "model") s.feedforward.mode = FeedforwardMode::Model;
      else if (t == "none") s.feedforward.mode = FeedforwardMode::None;
      else if (t == "file") s.feedforward.mode = FeedforwardMode::File;
      else throw std::invalid_argument("expected model, none or file, got '" + t + "'");
    };
    r["control.feedforward_file"] = [](Scenario& s, const std::string& v) { s.feedforward.file = trim(v); };
    FLYBATT_DOUBLE_KEY(r, "control.ff_lateral_max", feedforward.lateral_max);
    FLYBATT_DOUBLE_KEY(r, "control.ff_vertical_max", feedforward.vertical_max);
    FLYBATT_DOUBLE_KEY(r, "control.ff_dwell", feedforward.dwell);
    r["control.ff_lateral_bins"] = [](Scenario& s, const std::string& v) {
      s.feedforward.lateral_bins = static_cast<int>(parse_int(v));
    };
    r["control.ff_vertical_bins"] = [](Scenario& s, const std::string& v) {
      s.feedforward.vertical_bins = static_cast<int>(parse_int(v));
    };

    FLYBATT_DOUBLE_KEY(r, "docking.hover_above_gap", docking.thresholds.hover_above_gap);
    FLYBATT_DOUBLE_KEY(r, "docking.lateral_capture_radius", docking.thresholds.lateral_capture_radius);
    FLYBATT_DOUBLE_KEY(r, "docking.drop_height", docking.thresholds.drop_height);
    FLYBATT_DOUBLE_KEY(r, "docking.descent_rate", docking.thresholds.descent_rate);
    FLYBATT_DOUBLE_KEY(r, "docking.gap_tolerance", docking.gap_tolerance);
    FLYBATT_DOUBLE_KEY(r, "docking.settle_speed", docking.settle_speed);
    FLYBATT_DOUBLE_KEY(r, "docking.approach_hold", docking.approach_hold);
    FLYBATT_DOUBLE_KEY(r, "docking.vertical_speed", docking.vertical_speed);
    FLYBATT_DOUBLE_KEY(r, "docking.approach_speed", docking.approach_speed);
    FLYBATT_DOUBLE_KEY(r, "docking.depart_speed", docking.depart_speed);
    FLYBATT_DOUBLE_KEY(r, "docking.pad_hover_height", docking.pad_hover_height);
    FLYBATT_DOUBLE_KEY(r, "docking.platform_height", docking.platform_height);
    FLYBATT_DOUBLE_KEY(r, "docking.leg_offset", docking.leg_offset);
    FLYBATT_DOUBLE_KEY(r, "docking.contact_failure_probability", docking.contact_failure_probability);
    FLYBATT_DOUBLE_KEY(r, "docking.friction_coefficient", docking.friction_coefficient);
    FLYBATT_DOUBLE_KEY(r, "docking.pad_distance", docking.pad_distance);

    r["mission.fleet_size"] = [](Scenario& s, const std::string& v) {
      s.mission.fleet_size = static_cast<int>(parse_int(v));
    };
    r["mission.ground_recharge"] = [](Scenario& s, const std::string& v) {
      s.mission.ground_recharge = parse_bool(v);
    };
    FLYBATT_DOUBLE_KEY(r, "mission.turnaround_delay", mission.turnaround_delay);
    r["mission.hover_position"] = [](Scenario& s, const std::string& v) {
      s.mission.hover_position = parse_vec3(v);
    };
    r["mission.termination"] = [](Scenario& s, const std::string& v) {
      const std::string t = trim(v);
      if (t == "primary_depleted") s.mission.termination = Termination::PrimaryDepleted;
      else if (t == "wall_clock") s.mission.termination = Termination::WallClock;
      else throw std::invalid_argument("expected primary_depleted or wall_clock, got '" + t + "'");
    };
    r["mission.dispatch"] = [](Scenario& s, const std::string& v) { s.mission.dispatch = parse_bool(v); };
    FLYBATT_DOUBLE_KEY(r, "mission.contact_confirm_delay", mission.contact_confirm_delay);
    FLYBATT_DOUBLE_KEY(r, "mission.min_flight_soc", mission.min_flight_soc);

    FLYBATT_DOUBLE_KEY(r, "calibration.solo_flight_time", solo_flight_time);

    FLYBATT_DOUBLE_KEY(r, "sim.dt", sim.dt);
    FLYBATT_DOUBLE_KEY(r, "sim.duration", sim.duration);
    r["sim.seed"] = [](Scenario& s, const std::string& v) {
      const long long seed = parse_int(v);
      if (seed < 0) throw std::invalid_argument("seed must be >= 0");
      s.sim.seed = static_cast<std::uint64_t>(seed);
    };
    r["sim.telemetry_decimation"] = [](Scenario& s, const std::string& v) {
      s.sim.telemetry_decimation = static_cast<int>(parse_int(v));
    };
    return r;
  }();
  return registry;
}

#undef FLYBATT_DOUBLE_KEY

}  // namespace detail

/// Every recognized key as "section.key".
inline std::vector<std::string> scenario_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::scenario_keys()) out.push_back(k);
  return out;
}

/// Resolves a parameter name for overrides: a full "section.key" or any
/// unambiguous suffix such as "turnaround_delay" or "main.mass".
inline std::string resolve_scenario_key(const std::string& name) {
  const auto& reg = detail::scenario_keys();
  if (reg.count(name)) return name;
  std::string found;
  for (const auto& [k, _] : reg) {
    if (k.size() > name.size() && k.compare(k.size() - name.size(), name.size(), name) == 0 &&
        k[k.size() - name.size() - 1] == '.') {
      if (!found.empty()) throw ConfigError("ambiguous parameter '" + name + "'");
      found = k;
    }
  }
  if (found.empty()) throw ConfigError("unknown parameter '" + name + "'");
  return found;
}

inline void set_scenario_value(Scenario& s, const std::string& name, const std::string& value) {
  const std::string key = resolve_scenario_key(name);
  try {
    detail::scenario_keys().at(key)(s, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline Scenario parse_scenario(std::istream& in, const std::string& name = "scenario") {
  Scenario s;
  s.name = name;
  const auto& reg = detail::scenario_keys();
  static const std::vector<std::string> sections{"vehicles", "batteries", "circuit", "downwash", "control",
                                                 "docking", "mission", "calibration", "sim"};
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const int indent = static_cast<int>(line.find_first_not_of(" \t")) + 1;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("unterminated section header", line_no, indent);
      section = detail::trim(body.substr(1, body.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError("unknown section '" + section + "'", line_no, indent + 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no, indent);
    if (section.empty()) throw ConfigError("key outside of any section", line_no, indent);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = line.substr(eq + 1);
    const std::string full = section + "." + key;
    const auto it = reg.find(full);
    if (it == reg.end())
      throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no, indent);
    const auto vpos = line.find_first_not_of(" \t", eq + 1);
    const int vcol = static_cast<int>(vpos == std::string::npos ? eq + 1 : vpos) + 1;
    try {
      it->second(s, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(full + ": " + e.what(), line_no, vcol);
    }
  }
  validate(s);
  return s;
}

inline Scenario parse_scenario_string(const std::string& text, const std::string& name = "scenario") {
  std::istringstream in(text);
  return parse_scenario(in, name);
}

/// A path that exists is used as is; a bare name is looked up among the
/// bundled scenarios (with or without the .scn extension).
inline std::filesystem::path resolve_scenario_path(const std::string& spec) {
  namespace fs = std::filesystem;
  if (fs::exists(spec)) return spec;
  if (spec.find('/') == std::string::npos) {
    const fs::path dir = FLYBATT_SCENARIO_DIR;
    for (const fs::path& p : {dir / spec, dir / (spec + ".scn")})
      if (fs::exists(p)) return p;
  }
  throw ConfigError("scenario not found: " + spec);
}

inline Scenario load_scenario(const std::string& spec) {
  const auto path = resolve_scenario_path(spec);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario: " + path.string());
  return parse_scenario(in, path.stem().string());
}

}  // namespace flybatt
