#pragma once

// Dock / switch / undock / repeat protocol over a fleet of flying batteries.
//
// The main vehicle hovers on its primary pack. A fresh flying battery is sent
// to dock; on electrical contact the main vehicle switches to the secondary.
// When the secondary is exhausted the main vehicle switches back, the flying
// battery undocks and lands, and the next fresh unit is sent at the same
// moment. A unit that docks without electrical contact is sent away and
// replaced. Landed units are refilled on the ground after a turnaround delay.
// The mission ends when the primary runs out with no secondary connected.

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flybatt/docking.hpp"
#include "flybatt/powertrain.hpp"

namespace flybatt {

enum class Termination { PrimaryDepleted, WallClock };

struct MissionConfig {
  int fleet_size = 1;
  bool ground_recharge = true;
  double turnaround_delay = 60.0;     // s on the ground before a unit is fresh again
  Vec3 hover_position = Vec3(0.0, 0.0, 1.5);
  Termination termination = Termination::PrimaryDepleted;
  bool dispatch = true;               // false: the main vehicle flies solo
  double contact_confirm_delay = 1.0; // s docked without contact before sending it away
  double min_flight_soc = 0.5;        // flight pack charge required for dispatch
};

inline void validate(const MissionConfig& m) {
  if (m.fleet_size < 1) throw ConfigError("mission.fleet_size must be >= 1");
  if (m.turnaround_delay < 0.0) throw ConfigError("mission.turnaround_delay must be >= 0");
  if (m.contact_confirm_delay < 0.0) throw ConfigError("mission.contact_confirm_delay must be >= 0");
  if (!m.hover_position.allFinite() || m.hover_position.z() <= 0.0)
    throw ConfigError("mission.hover_position must be finite and above ground");
}

enum class EventKind {
  MissionStart,
  DockCommand,
  PhaseChange,
  ElectricalContact,
  ContactFailure,
  SwitchToSecondary,
  SwitchToPrimary,
  SecondaryDepleted,
  UndockCommand,
  BounceOff,
  Landed,
  Recharged,
  PrimaryDepleted,
  MissionEnd,
  Warning
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::MissionStart: return "mission_start";
    case EventKind::DockCommand: return "dock_command";
    case EventKind::PhaseChange: return "phase";
    case EventKind::ElectricalContact: return "electrical_contact";
    case EventKind::ContactFailure: return "contact_failure";
    case EventKind::SwitchToSecondary: return "switch_secondary";
    case EventKind::SwitchToPrimary: return "switch_primary";
    case EventKind::SecondaryDepleted: return "secondary_depleted";
    case EventKind::UndockCommand: return "undock_command";
    case EventKind::BounceOff: return "bounce_off";
    case EventKind::Landed: return "landed";
    case EventKind::Recharged: return "recharged";
    case EventKind::PrimaryDepleted: return "primary_depleted";
    case EventKind::MissionEnd: return "mission_end";
    case EventKind::Warning: return "warning";
  }
  return "?";
}

struct MissionEvent {
  std::int64_t seq = 0;
  double t = 0.0;
  EventKind kind = EventKind::MissionStart;
  int fb = -1;
  std::string detail;

  std::string label() const {
    std::string s = to_string(kind);
    if (fb >= 0) s += ":fb" + std::to_string(fb);
    if (!detail.empty()) s += ":" + detail;
    return s;
  }
};

// Events carry a sequence number; several can share a timestamp.
class MissionLog {
 public:
  void add(double t, EventKind kind, int fb = -1, std::string detail = {}) {
    events_.push_back({static_cast<std::int64_t>(events_.size()), t, kind, fb, std::move(detail)});
  }
  void add_transition(double t, int fb, DockPhase from, DockPhase to) {
    transitions_.push_back({t, fb, from, to});
    add(t, EventKind::PhaseChange, fb, to_string(to));
  }
  const std::vector<MissionEvent>& events() const { return events_; }
  const std::vector<PhaseTransition>& transitions() const { return transitions_; }
  std::size_t count(EventKind k) const {
    return static_cast<std::size_t>(
        std::count_if(events_.begin(), events_.end(), [k](const auto& e) { return e.kind == k; }));
  }

 private:
  std::vector<MissionEvent> events_;
  std::vector<PhaseTransition> transitions_;
};

/// Ordering invariants: non-decreasing time, strictly increasing sequence, and
/// every switch to secondary preceded by an electrical contact not yet used.
inline bool log_is_well_ordered(const MissionLog& log, std::string* why = nullptr) {
  const auto& ev = log.events();
  int contacts_available = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (i > 0 && (ev[i].t < ev[i - 1].t || ev[i].seq <= ev[i - 1].seq)) {
      if (why) *why = "event " + std::to_string(i) + " out of order";
      return false;
    }
    if (ev[i].kind == EventKind::ElectricalContact) ++contacts_available;
    if (ev[i].kind == EventKind::SwitchToSecondary) {
      if (contacts_available == 0) {
        if (why) *why = "switch to secondary without electrical contact at event " + std::to_string(i);
        return false;
      }
      --contacts_available;
    }
  }
  return true;
}

struct FbStatus {
  DockPhase phase = DockPhase::Grounded;
  bool secondary_full = true;
  double flight_soc = 1.0;
};

struct MissionDirectives {
  std::vector<DockCommands> commands;
  std::optional<SwitchTarget> switch_to;
  std::vector<int> recharge;  // units whose packs are refilled now
};

class MissionOrchestrator {
 public:
  MissionOrchestrator() = default;
  MissionOrchestrator(MissionConfig config, MissionLog* log)
      : config_(std::move(config)), log_(log), units_(static_cast<std::size_t>(config_.fleet_size)) {
    want_dispatch_ = config_.dispatch;
  }

  int active() const { return active_; }

  void on_docked(double t, int fb, const ContactOutcome& outcome) {
    if (outcome.electrical_engaged) {
      log_->add(t, EventKind::ElectricalContact, fb);
      pending_switch_ = SwitchTarget::UseSecondary;
    } else {
      log_->add(t, EventKind::ContactFailure, fb);
      units_[fb].undock_at = t + config_.contact_confirm_delay;
    }
  }

  void on_secondary_depleted(double t, int fb) {
    log_->add(t, EventKind::SecondaryDepleted, fb);
    pending_switch_ = SwitchTarget::UsePrimary;
    units_[fb].undock_at = t;
  }

  MissionDirectives update(double t, const std::vector<FbStatus>& fleet) {
    MissionDirectives d;
    d.commands.assign(fleet.size(), DockCommands{});
    if (pending_switch_) {
      d.switch_to = pending_switch_;
      log_->add(t, *pending_switch_ == SwitchTarget::UseSecondary ? EventKind::SwitchToSecondary
                                                                  : EventKind::SwitchToPrimary);
      pending_switch_.reset();
    }

    for (std::size_t i = 0; i < fleet.size(); ++i) {
      auto& u = units_[i];
      const int id = static_cast<int>(i);
      // Undock requests (depletion or failed contact).
      if (u.undock_at && t >= *u.undock_at && fleet[i].phase == DockPhase::Docked) {
        d.commands[i].undock = true;
        u.undock_at.reset();
        log_->add(t, EventKind::UndockCommand, id);
        if (active_ == id) {
          active_ = -1;
          want_dispatch_ = config_.dispatch;
        }
      }
      // Landing bookkeeping.
      if (fleet[i].phase == DockPhase::Grounded && u.last_phase == DockPhase::Landing) {
        log_->add(t, EventKind::Landed, id);
        if (config_.ground_recharge) u.recharge_at = t + config_.turnaround_delay;
      }
      if (u.recharge_at && t >= *u.recharge_at) {
        d.recharge.push_back(id);
        u.recharge_at.reset();
        log_->add(t, EventKind::Recharged, id);
      }
      u.last_phase = fleet[i].phase;
    }

    if (want_dispatch_ && active_ < 0) {
      for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto& u = units_[i];
        const bool ready = fleet[i].phase == DockPhase::Grounded && !u.recharge_at &&
                           fleet[i].secondary_full && fleet[i].flight_soc >= config_.min_flight_soc;
        if (ready) {
          active_ = static_cast<int>(i);
          want_dispatch_ = false;
          d.commands[i].dock = true;
          log_->add(t, EventKind::DockCommand, active_);
          break;
        }
      }
    }

    // The platform must be free of every other unit before the active one approaches.
    bool clear = true;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      if (static_cast<int>(i) == active_) continue;
      const auto p = fleet[i].phase;
      if (p == DockPhase::Docked || p == DockPhase::UndockAscend || p == DockPhase::Descend ||
          p == DockPhase::FreeFall)
        clear = false;
    }
    for (auto& c : d.commands) c.platform_clear = clear;
    return d;
  }

 private:
  struct Unit {
    std::optional<double> undock_at;
    std::optional<double> recharge_at;
    DockPhase last_phase = DockPhase::Grounded;
  };

  MissionConfig config_;
  MissionLog* log_ = nullptr;
  std::vector<Unit> units_;
  int active_ = -1;
  bool want_dispatch_ = false;
  std::optional<SwitchTarget> pending_switch_;
};

struct MissionSummary {
  double total_time = 0.0;          // s airborne until termination
  double solo_time = 0.0;           // s, same vehicle hovering alone on the primary
  double extension_factor = 0.0;
  std::string termination;
  int switches = 0;                 // to secondary
  int switches_back = 0;            // to primary
  int secondary_depletions = 0;
  int contact_failures = 0;
  int bounces = 0;
  int replacements = 0;             // undocks after a failed contact
  double primary_energy = 0.0;      // Wh drawn
  std::vector<double> secondary_energy;  // Wh drawn per unit, all cycles
  std::vector<double> flight_pack_energy;  // Wh drawn per unit
  double time_on_primary = 0.0;     // s with only the primary conducting
  double time_on_secondary = 0.0;   // s with only the secondary conducting
  double time_on_both = 0.0;
  double load_energy = 0.0;         // Wh delivered to the main vehicle's load
  double loss_energy = 0.0;         // Wh lost in diodes and pack resistance
  double max_altitude_error = 0.0;  // m, main vehicle vs hover setpoint
  double min_docked_normal_force = 0.0;  // N
  std::optional<double> first_dock_time;
  std::optional<double> first_undock_time;
};

/// Counts derived from the event log; energy and timing fields are filled by
/// the simulator.
inline void summarize_events(const MissionLog& log, MissionSummary& s) {
  s.switches = static_cast<int>(log.count(EventKind::SwitchToSecondary));
  s.switches_back = static_cast<int>(log.count(EventKind::SwitchToPrimary));
  s.secondary_depletions = static_cast<int>(log.count(EventKind::SecondaryDepleted));
  s.contact_failures = static_cast<int>(log.count(EventKind::ContactFailure));
  s.bounces = static_cast<int>(log.count(EventKind::BounceOff));
  s.replacements = 0;
  for (const auto& e : log.events())
    if (e.kind == EventKind::UndockCommand) ++s.replacements;
  s.replacements -= s.secondary_depletions;
  const auto d = maneuver_durations(log.transitions(), 0);
  s.first_dock_time = d.dock_time;
  s.first_undock_time = d.undock_time;
}

inline void write_summary_table(std::ostream& os, const MissionSummary& s) {
  char buf[160];
  auto row = [&](const char* k, const char* fmt, double v) {
    std::snprintf(buf, sizeof buf, fmt, v);
    os << "  " << k;
    for (std::size_t n = std::char_traits<char>::length(k); n < 28; ++n) os << ' ';
    os << buf << '\n';
  };
  os << "mission summary (" << s.termination << ")\n";
  row("total hover time", "%.1f s", s.total_time);
  row("total hover time (min)", "%.2f", s.total_time / 60.0);
  row("solo hover time", "%.1f s", s.solo_time);
  row("extension factor", "%.3f", s.extension_factor);
  row("switches to secondary", "%.0f", s.switches);
  row("secondary depletions", "%.0f", s.secondary_depletions);
  row("contact failures", "%.0f", s.contact_failures);
  row("bounce-offs", "%.0f", s.bounces);
  row("time on primary", "%.1f s", s.time_on_primary);
  row("time on secondary", "%.1f s", s.time_on_secondary);
  row("primary energy", "%.3f Wh", s.primary_energy);
  for (std::size_t i = 0; i < s.secondary_energy.size(); ++i) {
    const std::string k = "secondary energy fb" + std::to_string(i);
    row(k.c_str(), "%.3f Wh", s.secondary_energy[i]);
  }
  row("load energy", "%.3f Wh", s.load_energy);
  row("loss energy", "%.3f Wh", s.loss_energy);
  row("max altitude error", "%.4f m", s.max_altitude_error);
  if (s.first_dock_time) row("first dock duration", "%.2f s", *s.first_dock_time);
  if (s.first_undock_time) row("first undock duration", "%.2f s", *s.first_undock_time);
}

inline void write_summary_csv(std::ostream& os, const MissionSummary& s) {
  os << "metric,value\n";
  char buf[64];
  auto row = [&](const std::string& k, double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    os << k << ',' << buf << '\n';
  };
  row("total_time", s.total_time);
  row("solo_time", s.solo_time);
  row("extension_factor", s.extension_factor);
  row("switches", s.switches);
  row("secondary_depletions", s.secondary_depletions);
  row("contact_failures", s.contact_failures);
  row("bounces", s.bounces);
  row("time_on_primary", s.time_on_primary);
  row("time_on_secondary", s.time_on_secondary);
  row("time_on_both", s.time_on_both);
  row("primary_energy_wh", s.primary_energy);
  for (std::size_t i = 0; i < s.secondary_energy.size(); ++i)
    row("secondary_energy_wh_fb" + std::to_string(i), s.secondary_energy[i]);
  for (std::size_t i = 0; i < s.flight_pack_energy.size(); ++i)
    row("flight_pack_energy_wh_fb" + std::to_string(i), s.flight_pack_energy[i]);
  row("load_energy_wh", s.load_energy);
  row("loss_energy_wh", s.loss_energy);
  row("max_altitude_error", s.max_altitude_error);
}

}  // namespace flybatt
