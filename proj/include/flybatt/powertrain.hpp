#pragma once

// Electrical side of the vehicles: LiPo packs with an energy-based state of
// charge, the rotor / hover power laws, and the primary/secondary switching
// circuit (diode OR-ing behind a normally closed relay on the primary leg).

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "flybatt/core.hpp"

namespace flybatt {

inline constexpr double kNominalCellVoltage = 3.7;  // V, used for pack energy
inline constexpr double kCellFull = 4.2;            // V
inline constexpr double kCellEmpty = 3.0;           // V

struct BatteryPack {
  std::string name;
  int cell_count = 3;
  double capacity = 1.0;            // Ah
  double initial_energy = 0.0;      // Wh
  double energy_remaining = 0.0;    // Wh
  double mass = 0.1;                // kg
  double internal_resistance = 0.025;  // ohm
  bool depleted = false;
};

inline BatteryPack make_pack(std::string name, int cells, double capacity_ah, double mass,
                             double internal_resistance = 0.025) {
  if (cells <= 0) throw ConfigError(name + ".cells must be > 0");
  if (!(capacity_ah > 0.0)) throw ConfigError(name + ".capacity must be > 0");
  if (!(mass > 0.0)) throw ConfigError(name + ".mass must be > 0");
  if (internal_resistance < 0.0) throw ConfigError(name + ".internal_resistance must be >= 0");
  BatteryPack p;
  p.name = std::move(name);
  p.cell_count = cells;
  p.capacity = capacity_ah;
  p.initial_energy = cells * kNominalCellVoltage * capacity_ah;
  p.energy_remaining = p.initial_energy;
  p.mass = mass;
  p.internal_resistance = internal_resistance;
  return p;
}

inline BatteryPack recharged(BatteryPack p) {
  p.energy_remaining = p.initial_energy;
  p.depleted = false;
  return p;
}

/// Energy-density of the pack as built (Wh/kg).
inline double energy_density(const BatteryPack& p) { return p.initial_energy / p.mass; }

inline double state_of_charge(const BatteryPack& p) {
  if (p.initial_energy <= 0.0) return 0.0;
  return std::clamp(p.energy_remaining / p.initial_energy, 0.0, 1.0);
}

/// Per-cell open-circuit voltage for a state of charge in [0, 1].
inline double cell_ocv(double soc) {
  static constexpr std::array<std::pair<double, double>, 5> knots{{
      {0.0, 3.00}, {0.05, 3.45}, {0.2, 3.70}, {0.9, 4.05}, {1.0, 4.20}}};
  soc = std::clamp(soc, 0.0, 1.0);
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (soc <= knots[i].first) {
      const auto [s0, v0] = knots[i - 1];
      const auto [s1, v1] = knots[i];
      return v0 + (v1 - v0) * (soc - s0) / (s1 - s0);
    }
  }
  return knots.back().second;
}

inline double ocv(const BatteryPack& p) { return p.cell_count * cell_ocv(state_of_charge(p)); }

// Rotor power law p = k f^{3/2}.
inline double rotor_power(double thrust_per_rotor, double k_thrust_power) {
  if (thrust_per_rotor < 0.0) throw ConfigError("rotor_power: thrust must be >= 0");
  return k_thrust_power * thrust_per_rotor * std::sqrt(thrust_per_rotor);
}

inline double hover_power(double total_mass, double k_p) {
  if (total_mass < 0.0) throw ConfigError("hover_power: mass must be >= 0");
  return k_p * total_mass * std::sqrt(total_mass);
}

/// Per-rotor coefficient k (W/N^1.5) consistent with a hover constant k_p for a
/// four-rotor vehicle: 4 k (m g / 4)^1.5 = k_p m^1.5.
inline double rotor_coefficient_from_kp(double k_p) {
  return 2.0 * k_p / (kGravity * std::sqrt(kGravity));
}

/// I^2 R loss inside the pack while it delivers `load_power` at its terminals.
inline double resistive_loss(const BatteryPack& p, double load_power) {
  const double v = ocv(p);
  if (v <= 0.0) return 0.0;
  const double i = load_power / v;
  return i * i * p.internal_resistance;
}

class PackDepleted : public std::runtime_error {
 public:
  explicit PackDepleted(const std::string& pack)
      : std::runtime_error("pack '" + pack + "' is depleted") {}
};

/// Removes load_power * dt plus the resistive loss. A pack that cannot cover
/// the step is clamped at zero and flagged depleted; loading an already
/// depleted pack throws.
inline BatteryPack discharge(BatteryPack pack, double load_power, double dt) {
  if (load_power < 0.0) throw ConfigError("discharge: load_power must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("discharge: dt must be > 0");
  if (load_power == 0.0) return pack;
  if (pack.depleted) throw PackDepleted(pack.name);
  const double used_wh = (load_power + resistive_loss(pack, load_power)) * dt / 3600.0;
  if (used_wh >= pack.energy_remaining) {
    pack.energy_remaining = 0.0;
    pack.depleted = true;
  } else {
    pack.energy_remaining -= used_wh;
  }
  return pack;
}

enum class SwitchTarget { UsePrimary, UseSecondary };
enum class ActiveSource { None, Primary, Secondary, Both };

inline const char* to_string(ActiveSource s) {
  switch (s) {
    case ActiveSource::Primary: return "primary";
    case ActiveSource::Secondary: return "secondary";
    case ActiveSource::Both: return "both";
    case ActiveSource::None: break;
  }
  return "none";
}

struct SwitchCircuit {
  bool relay_closed = true;  // normally closed
  double diode_drop = 0.05;  // V
  bool secondary_present = false;
  SwitchTarget switch_command = SwitchTarget::UsePrimary;
};

inline void validate(const SwitchCircuit& c) {
  if (!(c.diode_drop > 0.0) || c.diode_drop > 0.2)
    throw ConfigError("circuit.diode_drop must be in (0, 0.2] V");
  if (!c.relay_closed && !c.secondary_present)
    throw std::logic_error("relay open without a secondary pack");
}

class SwitchRejected : public std::runtime_error {
 public:
  SwitchRejected() : std::runtime_error("switch to secondary rejected: no secondary pack connected") {}
};

/// The relay coil is fed from the secondary leads, so the relay can only open
/// with a secondary connected.
inline SwitchCircuit command_switch(SwitchCircuit circuit, SwitchTarget target) {
  if (target == SwitchTarget::UseSecondary && !circuit.secondary_present) throw SwitchRejected();
  circuit.switch_command = target;
  circuit.relay_closed = target == SwitchTarget::UsePrimary;
  return circuit;
}

/// Removing the secondary de-energizes the coil and closes the relay.
inline SwitchCircuit set_secondary_present(SwitchCircuit circuit, bool present) {
  circuit.secondary_present = present;
  if (!present) {
    circuit.relay_closed = true;
    circuit.switch_command = SwitchTarget::UsePrimary;
  }
  return circuit;
}

struct BusSample {
  double bus_voltage = 0.0;
  double current_primary = 0.0;
  double current_secondary = 0.0;
  ActiveSource active_source = ActiveSource::None;
  double ocv_primary = 0.0;
  double ocv_secondary = 0.0;

  double current_total() const { return current_primary + current_secondary; }
  double power() const { return bus_voltage * current_total(); }
};

class BusCollapse : public std::runtime_error {
 public:
  BusCollapse() : std::runtime_error("bus collapse: no live source") {}
};

/// Parallel LiPo packs are only safe within 0.2 V per cell of each other.
inline constexpr double kParallelWindowPerCell = 0.2;

/// Ideal-diode OR-ing of the live sources. The highest (ocv - diode_drop) sets
/// the bus; any other source within one diode drop of it shares the current in
/// proportion to its surplus over (bus - diode_drop).
inline BusSample solve_bus(const SwitchCircuit& circuit, const BatteryPack& primary,
                           const BatteryPack* secondary, double load_power) {
  validate(circuit);
  if (load_power < 0.0) throw ConfigError("solve_bus: load_power must be >= 0");
  BusSample s;
  s.ocv_primary = ocv(primary);
  const bool primary_live = circuit.relay_closed && !primary.depleted;
  const bool secondary_live = circuit.secondary_present && secondary && !secondary->depleted;
  if (secondary) s.ocv_secondary = ocv(*secondary);
  if (!primary_live && !secondary_live) throw BusCollapse();

  const double vp = primary_live ? s.ocv_primary - circuit.diode_drop : -1.0;
  const double vs = secondary_live ? s.ocv_secondary - circuit.diode_drop : -1.0;
  const double bus = std::max(vp, vs);
  const double floor = bus - circuit.diode_drop;
  const double wp = primary_live ? std::max(0.0, vp - floor) : 0.0;
  const double ws = secondary_live ? std::max(0.0, vs - floor) : 0.0;

  s.bus_voltage = bus;
  const double total = bus > 0.0 ? load_power / bus : 0.0;
  s.current_primary = total * wp / (wp + ws);
  s.current_secondary = total * ws / (wp + ws);
  if (wp > 0.0 && ws > 0.0) {
    s.active_source = ActiveSource::Both;
    const int cells = std::max(primary.cell_count, secondary->cell_count);
    if (std::abs(s.ocv_primary - s.ocv_secondary) > kParallelWindowPerCell * cells)
      throw std::logic_error("parallel conduction outside the 0.2 V/cell window");
  } else {
    s.active_source = wp > 0.0 ? ActiveSource::Primary : ActiveSource::Secondary;
  }
  return s;
}

/// One step of load on the bus: solves the bus, charges each conducting pack
/// with its share of the load plus its diode loss, and discharges the packs.
/// A pack that cannot cover the whole step is marked depleted first and the bus
/// re-solved without it, so energy drawn always equals power * dt exactly.
/// A depleted secondary can no longer hold the relay coil, so the relay closes.
struct BusStep {
  BusSample sample;
  double load_power = 0.0;     // W delivered to the load
  double loss_power = 0.0;     // W dissipated in diodes and pack resistance
  double primary_draw = 0.0;   // Wh removed from the primary this step
  double secondary_draw = 0.0; // Wh removed from the secondary this step
  bool primary_depleted_now = false;
  bool secondary_depleted_now = false;
};

inline BusStep apply_bus_load(SwitchCircuit& circuit, BatteryPack& primary,
                              BatteryPack* secondary, double load_power, double dt) {
  BusStep out;
  out.load_power = load_power;
  for (int attempt = 0; attempt < 3; ++attempt) {
    out.sample = solve_bus(circuit, primary, secondary, load_power);
    const double ip = out.sample.current_primary;
    const double is = out.sample.current_secondary;
    const double tp = ip * out.sample.bus_voltage + ip * circuit.diode_drop;
    const double ts = is * out.sample.bus_voltage + is * circuit.diode_drop;
    const double need_p = (tp + resistive_loss(primary, tp)) * dt / 3600.0;
    const double need_s = secondary ? (ts + resistive_loss(*secondary, ts)) * dt / 3600.0 : 0.0;
    bool retry = false;
    if (tp > 0.0 && need_p >= primary.energy_remaining) {
      primary.depleted = true;
      out.primary_depleted_now = true;
      retry = true;
    }
    if (secondary && ts > 0.0 && need_s >= secondary->energy_remaining) {
      secondary->depleted = true;
      out.secondary_depleted_now = true;
      circuit.relay_closed = true;
      retry = true;
    }
    if (retry) continue;

    out.loss_power = (ip + is) * circuit.diode_drop;
    if (tp > 0.0) {
      out.loss_power += resistive_loss(primary, tp);
      const double before = primary.energy_remaining;
      primary = discharge(primary, tp, dt);
      out.primary_draw = before - primary.energy_remaining;
    }
    if (secondary && ts > 0.0) {
      out.loss_power += resistive_loss(*secondary, ts);
      const double before = secondary->energy_remaining;
      *secondary = discharge(*secondary, ts, dt);
      out.secondary_draw = before - secondary->energy_remaining;
    }
    return out;
  }
  throw BusCollapse();
}

/// Hover endurance of a vehicle of `mass` on a single pack behind the circuit,
/// stepping the same bus model the simulator uses.
inline double simulated_hover_time(double mass, double k_p, BatteryPack pack,
                                   const SwitchCircuit& circuit, double dt) {
  const double load = hover_power(mass, k_p);
  SwitchCircuit c = circuit;
  c.relay_closed = true;
  c.secondary_present = false;
  std::int64_t steps = 0;
  try {
    for (;;) {
      apply_bus_load(c, pack, nullptr, load, dt);
      ++steps;
    }
  } catch (const BusCollapse&) {
  }
  return steps * dt;
}

/// k_p for which `simulated_hover_time` equals `target_time` (bisection).
inline double calibrate_kp(double mass, const BatteryPack& pack, const SwitchCircuit& circuit,
                           double target_time, double dt) {
  if (!(target_time > 0.0)) throw ConfigError("calibration: solo_flight_time must be > 0");
  // Lossless estimate brackets the answer from above.
  double hi = pack.initial_energy * 3600.0 / target_time / (mass * std::sqrt(mass));
  double lo = 0.5 * hi;
  for (int i = 0; i < 60 && (hi - lo) > 1e-7 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (simulated_hover_time(mass, mid, pack, circuit, dt) > target_time)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace flybatt
