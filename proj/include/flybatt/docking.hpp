#pragma once

// Docking / undocking state machine for one flying battery.
//
//   Grounded -> Takeoff -> ApproachAbove -> Descend -> FreeFall -> Docked
//   Docked -> UndockAscend -> Depart -> Landing -> Grounded
//   FreeFall -> ApproachAbove (bounce-off: drifted out of the capture funnel)
//
// Geometry: the platform surface sits `platform_height` above the main
// vehicle's center of mass along its body z; the flying battery's leg bottoms
// sit `leg_offset` below its own center of mass. "Gap" is leg bottom minus
// platform surface, "lateral" the horizontal distance between centers.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flybatt/control.hpp"
#include "flybatt/core.hpp"

namespace flybatt {

enum class DockPhase {
  Grounded,
  Takeoff,
  ApproachAbove,
  Descend,
  FreeFall,
  Docked,
  UndockAscend,
  Depart,
  Landing
};

inline const char* to_string(DockPhase p) {
  switch (p) {
    case DockPhase::Grounded: return "Grounded";
    case DockPhase::Takeoff: return "Takeoff";
    case DockPhase::ApproachAbove: return "ApproachAbove";
    case DockPhase::Descend: return "Descend";
    case DockPhase::FreeFall: return "FreeFall";
    case DockPhase::Docked: return "Docked";
    case DockPhase::UndockAscend: return "UndockAscend";
    case DockPhase::Depart: return "Depart";
    case DockPhase::Landing: return "Landing";
  }
  return "?";
}

inline bool is_allowed_transition(DockPhase from, DockPhase to) {
  using P = DockPhase;
  switch (from) {
    case P::Grounded: return to == P::Takeoff;
    case P::Takeoff: return to == P::ApproachAbove;
    case P::ApproachAbove: return to == P::Descend;
    case P::Descend: return to == P::FreeFall;
    case P::FreeFall: return to == P::Docked || to == P::ApproachAbove;
    case P::Docked: return to == P::UndockAscend;
    case P::UndockAscend: return to == P::Depart;
    case P::Depart: return to == P::Landing;
    case P::Landing: return to == P::Grounded;
  }
  return false;
}

/// True while the vehicle's own rotors are producing thrust.
inline bool rotors_running(DockPhase p) {
  return p != DockPhase::Grounded && p != DockPhase::FreeFall && p != DockPhase::Docked;
}

struct DockThresholds {
  double hover_above_gap = 0.30;         // m, staging gap above the platform
  double lateral_capture_radius = 0.020; // m, capture funnel radius
  double drop_height = 0.050;            // m, gap at which thrust is cut
  double descent_rate = 0.15;            // m/s
};

struct DockingConfig {
  DockThresholds thresholds;
  double gap_tolerance = 0.02;     // m, staging-height acceptance
  double settle_speed = 0.10;      // m/s, staging-speed acceptance
  double approach_hold = 4.0;      // s settled above the platform before descending
  double vertical_speed = 0.5;     // m/s, takeoff / landing profile
  double approach_speed = 0.5;     // m/s, transit toward the platform
  double depart_speed = 0.6;       // m/s, transit back to the pad
  double pad_hover_height = 0.5;   // m, leg height above the pad before landing
  double platform_height = 0.10;   // m, platform surface above main center of mass
  double leg_offset = 0.05;        // m, leg bottoms below flying-battery center of mass
  double contact_failure_probability = 0.1;
  double friction_coefficient = 0.5;
  double pad_distance = 3.0;       // m, horizontal distance of pads from the hover point
};

inline void validate(const DockingConfig& c) {
  const auto& t = c.thresholds;
  if (!(t.hover_above_gap > 0.0) || !(t.lateral_capture_radius > 0.0) || !(t.drop_height > 0.0) ||
      !(t.descent_rate > 0.0))
    throw ConfigError("docking thresholds must be > 0");
  if (t.drop_height > t.hover_above_gap)
    throw ConfigError("docking.drop_height must not exceed docking.hover_above_gap");
  if (c.contact_failure_probability < 0.0 || c.contact_failure_probability > 1.0)
    throw ConfigError("docking.contact_failure_probability must be in [0, 1]");
  if (c.friction_coefficient < 0.0) throw ConfigError("docking.friction_coefficient must be >= 0");
  if (!(c.vertical_speed > 0.0) || !(c.approach_speed > 0.0) || !(c.depart_speed > 0.0))
    throw ConfigError("docking speeds must be > 0");
}

struct RelPose {
  double lateral = 0.0;       // m
  double vertical_gap = 0.0;  // m
};

struct DockCommands {
  bool dock = false;
  bool undock = false;
  bool platform_clear = true;
};

struct DockInputs {
  RelPose rel;
  DockCommands commands;
  Vec3 platform_center = Vec3::Zero();  // world, platform surface center
  Vec3 pad = Vec3::Zero();              // world, ground pad
  Vec3 position = Vec3::Zero();         // flying battery center of mass
  Vec3 velocity = Vec3::Zero();
  bool on_ground = false;
};

inline RelPose relative_pose(const Vec3& fb_position, const Vec3& platform_center, double leg_offset) {
  RelPose r;
  r.lateral = (fb_position - platform_center).head<2>().norm();
  r.vertical_gap = fb_position.z() - leg_offset - platform_center.z();
  return r;
}

struct ContactOutcome {
  bool mechanical_engaged = false;
  bool electrical_engaged = false;
  double draw = -1.0;  // uniform draw used for the electrical outcome
};

/// Evaluated once at free-fall impact. Inside the funnel the legs are guided
/// onto the connectors; electrical contact then fails with the given
/// probability. One draw is consumed per call.
inline ContactOutcome capture_check(double landing_lateral, const DockThresholds& t,
                                    double contact_failure_probability, SimRng& rng) {
  ContactOutcome c;
  c.draw = rng.uniform();
  c.mechanical_engaged = landing_lateral <= t.lateral_capture_radius;
  c.electrical_engaged = c.mechanical_engaged && c.draw >= contact_failure_probability;
  return c;
}

class DockingFsm {
 public:
  DockingFsm() = default;
  explicit DockingFsm(DockingConfig config, DockPhase initial = DockPhase::Grounded)
      : config_(std::move(config)), phase_(initial) {}

  DockPhase phase() const { return phase_; }
  double time_in_phase() const { return time_in_phase_; }
  const DockingConfig& config() const { return config_; }

  /// Transition taken during the most recent step / impact, if any.
  std::optional<std::pair<DockPhase, DockPhase>> last_transition() const { return last_; }
  bool bounced() const { return bounced_; }

  Setpoint step(const DockInputs& in, double dt) {
    last_.reset();
    bounced_ = false;
    time_in_phase_ += dt;
    const auto& th = config_.thresholds;
    const double leg = config_.leg_offset;
    const Vec3 staging = in.platform_center + Vec3(0.0, 0.0, leg + th.hover_above_gap);

    switch (phase_) {
      case DockPhase::Grounded: {
        if (in.commands.dock) {
          enter(DockPhase::Takeoff);
          track_ = in.position;
          break;
        }
        return off(in.position);
      }
      case DockPhase::Takeoff: {
        const Vec3 target(in.pad.x(), in.pad.y(), staging.z());
        const Vec3 vel = ramp_toward(target, config_.vertical_speed, dt);
        if (track_ == target && std::abs(in.position.z() - target.z()) <= config_.gap_tolerance) {
          enter(DockPhase::ApproachAbove);
          hold_ = 0.0;
          break;
        }
        return hold_at(track_, vel);
      }
      default:
        break;
    }

    // Phases whose setpoint is computed after a possible transition above.
    switch (phase_) {
      case DockPhase::Grounded:
        return off(in.position);
      case DockPhase::Takeoff:
        return hold_at(track_, Vec3::Zero());
      case DockPhase::ApproachAbove: {
        Vec3 vel = Vec3::Zero();
        if (in.commands.platform_clear) vel = ramp_toward(staging, config_.approach_speed, dt);
        const bool settled = in.rel.lateral <= th.lateral_capture_radius &&
                             std::abs(in.rel.vertical_gap - th.hover_above_gap) <= config_.gap_tolerance &&
                             in.velocity.norm() <= config_.settle_speed;
        hold_ = settled ? hold_ + dt : 0.0;
        if (hold_ >= config_.approach_hold) {
          enter(DockPhase::Descend);
          descent_gap_ = std::min(in.rel.vertical_gap, th.hover_above_gap);
          return descend_setpoint(in, dt);
        }
        return hold_at(track_, vel);
      }
      case DockPhase::Descend: {
        if (in.rel.lateral <= th.lateral_capture_radius && in.rel.vertical_gap <= th.drop_height) {
          enter(DockPhase::FreeFall);
          return off(in.position);
        }
        return descend_setpoint(in, dt);
      }
      case DockPhase::FreeFall: {
        if (in.rel.lateral > th.lateral_capture_radius) {
          bounce(in.position);
          return hold_at(track_, Vec3::Zero());
        }
        return off(in.position);
      }
      case DockPhase::Docked: {
        if (in.commands.undock) {
          enter(DockPhase::UndockAscend);
          track_ = staging;
          return hold_at(staging, Vec3::Zero());
        }
        return off(in.position);
      }
      case DockPhase::UndockAscend: {
        track_ = staging;
        if (in.rel.vertical_gap >= th.hover_above_gap - config_.gap_tolerance) {
          enter(DockPhase::Depart);
          track_ = staging;
          break;
        }
        return hold_at(staging, Vec3::Zero());
      }
      default:
        break;
    }

    switch (phase_) {
      case DockPhase::Depart: {
        const Vec3 target = in.pad + Vec3(0.0, 0.0, leg + config_.pad_hover_height);
        const Vec3 vel = ramp_toward(target, config_.depart_speed, dt);
        if (track_ == target && (in.position - target).norm() <= 0.05) {
          enter(DockPhase::Landing);
          return hold_at(track_, Vec3::Zero());
        }
        return hold_at(track_, vel);
      }
      case DockPhase::Landing: {
        if (in.on_ground) {
          enter(DockPhase::Grounded);
          return off(in.position);
        }
        const Vec3 target = in.pad + Vec3(0.0, 0.0, leg - 0.1);
        const Vec3 vel = ramp_toward(target, config_.vertical_speed, dt);
        return hold_at(track_, vel);
      }
      default:
        return off(in.position);
    }
  }

  /// Result of the platform impact that ends a free fall.
  void on_impact(const ContactOutcome& outcome, const Vec3& position) {
    last_.reset();
    bounced_ = false;
    if (phase_ != DockPhase::FreeFall) return;
    if (outcome.mechanical_engaged)
      enter(DockPhase::Docked);
    else
      bounce(position);
  }

 private:
  void enter(DockPhase next) {
    last_ = std::make_pair(phase_, next);
    phase_ = next;
    time_in_phase_ = 0.0;
  }

  void bounce(const Vec3& position) {
    enter(DockPhase::ApproachAbove);
    bounced_ = true;
    hold_ = 0.0;
    track_ = position;
  }

  // Moves the tracked setpoint toward `target` at `speed`; returns its velocity.
  Vec3 ramp_toward(const Vec3& target, double speed, double dt) {
    const Vec3 d = target - track_;
    const double dist = d.norm();
    const double stepd = speed * dt;
    if (dist <= stepd) {
      track_ = target;
      return Vec3::Zero();
    }
    track_ += d * (stepd / dist);
    return d * (speed / dist);
  }

  Setpoint descend_setpoint(const DockInputs& in, double dt) {
    const auto& th = config_.thresholds;
    const double floor = 0.8 * th.drop_height;
    Vec3 vel = Vec3::Zero();
    if (descent_gap_ > floor) {
      descent_gap_ = std::max(floor, descent_gap_ - th.descent_rate * dt);
      vel.z() = -th.descent_rate;
    }
    track_ = in.platform_center + Vec3(0.0, 0.0, config_.leg_offset + descent_gap_);
    return hold_at(track_, vel);
  }

  static Setpoint hold_at(const Vec3& p, const Vec3& v) {
    Setpoint sp;
    sp.position = p;
    sp.velocity = v;
    return sp;
  }

  static Setpoint off(const Vec3& p) {
    Setpoint sp;
    sp.position = p;
    sp.motors_off = true;
    return sp;
  }

  DockingConfig config_;
  DockPhase phase_ = DockPhase::Grounded;
  double time_in_phase_ = 0.0;
  double hold_ = 0.0;
  double descent_gap_ = 0.0;
  Vec3 track_ = Vec3::Zero();
  std::optional<std::pair<DockPhase, DockPhase>> last_;
  bool bounced_ = false;
};

struct PhaseTransition {
  double t = 0.0;
  int fb = 0;
  DockPhase from = DockPhase::Grounded;
  DockPhase to = DockPhase::Grounded;
};

struct ManeuverDurations {
  std::optional<double> dock_time;    // takeoff start to Docked
  std::optional<double> undock_time;  // undock command to Grounded
};

/// Durations of the first complete dock and undock cycle of `fb` in the trace.
inline ManeuverDurations maneuver_durations(const std::vector<PhaseTransition>& trace, int fb = 0) {
  ManeuverDurations d;
  std::optional<double> takeoff, undock;
  for (const auto& tr : trace) {
    if (tr.fb != fb) continue;
    if (tr.to == DockPhase::Takeoff && !d.dock_time) takeoff = tr.t;
    if (tr.to == DockPhase::Docked && takeoff && !d.dock_time) d.dock_time = tr.t - *takeoff;
    if (tr.to == DockPhase::UndockAscend && d.dock_time && !undock) undock = tr.t;
    if (tr.to == DockPhase::Grounded && undock && !d.undock_time) d.undock_time = tr.t - *undock;
  }
  return d;
}

}  // namespace flybatt
