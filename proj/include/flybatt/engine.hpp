#pragma once

// Fixed-step co-simulation of the main vehicle, its fleet of flying batteries,
// the switching circuit and the mission protocol on one deterministic
// timeline. Per step: orchestrator -> docking state machines -> controllers
// (with downwash feedforward) -> rotor mixing -> downwash and drag ->
// rigid-body integration (docked pair as one composite body) -> impacts and
// ground contact -> bus and pack update -> diagnostics -> telemetry.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flybatt/aero.hpp"
#include "flybatt/control.hpp"
#include "flybatt/docking.hpp"
#include "flybatt/dynamics.hpp"
#include "flybatt/mission.hpp"
#include "flybatt/powertrain.hpp"
#include "flybatt/scenario.hpp"
#include "flybatt/telemetry.hpp"

namespace flybatt {

struct SimClock {
  double dt = 0.001;
  std::int64_t step_index = 0;
  double t() const { return static_cast<double>(step_index) * dt; }
};

/// Position + attitude loops and mixer of one airframe.
struct VehicleControl {
  PositionController position;
  AttitudeController attitude;
  QuadMixer mixer;

  VehicleControl(const VehicleParams& p, const ControlTuning& tuning)
      : VehicleControl(p, derive_gains(p, tuning)) {}
  VehicleControl(const VehicleParams& p, const CascadedPidConfig& gains)
      : position(gains, p.mass), attitude(gains), mixer(p) {
    validate(gains, p);
  }

  void reset() {
    position.reset();
    attitude.reset();
  }
};

struct RotorOutput {
  std::array<double, 4> rotor{};  // N per rotor
  double thrust = 0.0;            // N, realized collective
  Vec3 torque = Vec3::Zero();     // N m, realized, body frame
};

inline RotorOutput control_step(VehicleControl& vc, const RigidBodyState& s, const Setpoint& sp,
                                double dt) {
  RotorOutput out;
  if (sp.motors_off) return out;
  const ThrustCommand cmd = vc.position.update(s, sp, dt);
  const Vec3 tau = vc.attitude.update(s, cmd.attitude, dt);
  out.rotor = vc.mixer.allocate(cmd.thrust, tau);
  const auto [thrust, torque] = vc.mixer.realize(out.rotor);
  out.thrust = thrust;
  out.torque = torque;
  return out;
}

inline double rotor_set_power(const std::array<double, 4>& rotor, double k_p) {
  const double k = rotor_coefficient_from_kp(k_p);
  double p = 0.0;
  for (double f : rotor) p += rotor_power(f, k);
  return p;
}

/// Copy of the scenario with derived quantities resolved (main k_p calibrated
/// against the requested solo hover time when one is given).
inline Scenario prepare_scenario(Scenario s) {
  validate(s);
  if (s.solo_flight_time > 0.0) {
    const double dt = std::max(s.sim.dt, 0.01);
    s.main.k_p = calibrate_kp(s.main.mass, s.primary.make("primary"), s.circuit, s.solo_flight_time, dt);
  }
  return s;
}

namespace detail {

// Main vehicle hovering at a fixed point under a prescribed upper vehicle.
// Shared by the feedforward measurement and the downwash hover check.
class HoverRig {
 public:
  HoverRig(const Scenario& s, FeedforwardMap ff)
      : s_(s), control_(s.main, s.control), ff_(std::move(ff)) {
    state_.position = s.mission.hover_position;
  }

  void step(const Vec3& upper_rel, double upper_thrust, double dt) {
    Setpoint sp;
    sp.position = s_.mission.hover_position;
    sp.feedforward_thrust = feedforward_lookup(ff_, upper_rel);
    const RotorOutput out = control_step(control_, state_, sp, dt);
    const Mat3 r = state_.attitude.toRotationMatrix();
    Wrench w;
    w.force = r * Vec3(0.0, 0.0, out.thrust) + body_drag(s_.main.drag_coefficient, state_.velocity) +
              downwash_force(s_.downwash, upper_rel, upper_thrust);
    w.torque = out.torque + r.transpose() * align_torque(s_.downwash, upper_rel);
    state_ = step_rigid_body(state_, s_.main, w, dt);
  }

  const RigidBodyState& state() const { return state_; }
  double integral_thrust() const { return control_.position.integral_thrust(); }

 private:
  const Scenario& s_;
  VehicleControl control_;
  FeedforwardMap ff_;
  RigidBodyState state_;
};

}  // namespace detail

/// Measures the feedforward map the way it is done in flight: the flying
/// battery holds each grid node above the hovering main vehicle and the
/// integral thrust the main vehicle settles on is recorded as a sample.
inline std::vector<FeedforwardSample> measure_ff_samples(const Scenario& s) {
  const auto& f = s.feedforward;
  const FeedforwardMap grid = make_ff_grid(f.lateral_max, static_cast<std::size_t>(f.lateral_bins),
                                           f.vertical_max, static_cast<std::size_t>(f.vertical_bins));
  detail::HoverRig rig(s, {});
  const double dt = s.sim.dt;
  const double upper_thrust = s.fb.mass * kGravity;
  const auto dwell_steps = static_cast<std::int64_t>(std::llround(f.dwell / dt));
  const auto avg_from = dwell_steps - dwell_steps / 4;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(2.0 / dt); ++k) rig.step(Vec3(10, 0, 10), 0.0, dt);

  std::vector<FeedforwardSample> samples;
  for (std::size_t iv = 0; iv < grid.vertical_nodes.size(); ++iv) {
    for (std::size_t j = 0; j < grid.lateral_nodes.size(); ++j) {
      // Serpentine order keeps consecutive nodes adjacent.
      const std::size_t il = iv % 2 == 0 ? j : grid.lateral_nodes.size() - 1 - j;
      const Vec3 rel(grid.lateral_nodes[il], 0.0, grid.vertical_nodes[iv]);
      double sum = 0.0;
      for (std::int64_t k = 0; k < dwell_steps; ++k) {
        rig.step(rel, upper_thrust, dt);
        if (k >= avg_from) sum += rig.integral_thrust();
      }
      samples.push_back({rel, sum / static_cast<double>(dwell_steps - avg_from)});
    }
  }
  return samples;
}

inline FeedforwardMap resolve_feedforward(const Scenario& s, std::vector<std::string>* warnings = nullptr) {
  const auto& f = s.feedforward;
  switch (f.mode) {
    case FeedforwardMode::None:
      return {};
    case FeedforwardMode::File: {
      std::ifstream in(f.file);
      if (!in) throw ConfigError("cannot read feedforward map: " + f.file);
      return read_ff_map_csv(in);
    }
    case FeedforwardMode::Model:
      break;
  }
  const FeedforwardMap grid = make_ff_grid(f.lateral_max, static_cast<std::size_t>(f.lateral_bins),
                                           f.vertical_max, static_cast<std::size_t>(f.vertical_bins));
  return build_ff_map(measure_ff_samples(s), grid, warnings);
}

struct DownwashHoverResult {
  double rms_altitude_error = 0.0;  // m
  double max_altitude_error = 0.0;  // m
};

/// Main vehicle holding its hover point while an upper vehicle wanders through
/// the region above it along a fixed path.
inline DownwashHoverResult run_downwash_hover(const Scenario& s, const FeedforwardMap& ff,
                                              double duration = 60.0) {
  detail::HoverRig rig(s, ff);
  const double dt = s.sim.dt;
  const double upper_thrust = s.fb.mass * kGravity;
  const auto steps = static_cast<std::int64_t>(std::llround(duration / dt));
  const auto skip = static_cast<std::int64_t>(std::llround(2.0 / dt));
  const double two_pi = 2.0 * M_PI;
  DownwashHoverResult r;
  double sq = 0.0;
  std::int64_t n = 0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec3 rel(0.12 + 0.12 * std::sin(two_pi * t / 7.3), 0.08 * std::sin(two_pi * t / 11.0),
                   0.5 + 0.35 * std::sin(two_pi * t / 5.1));
    rig.step(rel, upper_thrust, dt);
    if (k >= skip) {
      const double e = rig.state().position.z() - s.mission.hover_position.z();
      sq += e * e;
      ++n;
      r.max_altitude_error = std::max(r.max_altitude_error, std::abs(e));
    }
  }
  r.rms_altitude_error = n > 0 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
  return r;
}

struct ManeuverSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();  // composite center of mass
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  double thrust = 0.0;           // N, main rotors
  Vec3 drag = Vec3::Zero();      // N, world frame, on the main vehicle
  ContactSolution contact;
  bool retained = true;
};

struct ManeuverResult {
  std::vector<ManeuverSample> samples;
  double main_mass = 0.0;
  double fb_mass = 0.0;
  double mu = 0.0;
  double peak_friction = 0.0;       // N
  double peak_lateral_accel = 0.0;  // m/s^2, realized
  bool all_retained = true;
};

/// Docked pair flown along x = A sin(w t) with peak commanded acceleration
/// `peak_accel`; logs the contact demand at every step.
inline ManeuverResult run_lateral_oscillation(const Scenario& s, double peak_accel = 12.0,
                                              double period = 2.0, double duration = 10.0) {
  const Vec3 mount(0.0, 0.0, s.docking.platform_height + s.docking.leg_offset);
  const VehicleParams comp = composite_params(s.main, s.fb, mount);
  VehicleControl vc(s.main, derive_gains(comp, s.control));
  vc.position.set_mass(comp.mass);

  const double w = 2.0 * M_PI / period;
  const double amp = peak_accel / (w * w);
  RigidBodyState st;
  st.position = s.mission.hover_position;
  st.velocity = Vec3(amp * w, 0.0, 0.0);

  ManeuverResult r;
  r.main_mass = s.main.mass;
  r.fb_mass = s.fb.mass;
  r.mu = s.docking.friction_coefficient;
  const double dt = s.sim.dt;
  const auto steps = static_cast<std::int64_t>(std::llround(duration / dt));
  r.samples.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    Setpoint sp;
    sp.position = s.mission.hover_position + Vec3(amp * std::sin(w * t), 0.0, 0.0);
    sp.velocity = Vec3(amp * w * std::cos(w * t), 0.0, 0.0);
    sp.acceleration = Vec3(-peak_accel * std::sin(w * t), 0.0, 0.0);
    const RotorOutput out = control_step(vc, st, sp, dt);
    const Mat3 rot = st.attitude.toRotationMatrix();
    const Vec3 drag = body_drag(s.main.drag_coefficient, st.velocity);

    ManeuverSample m;
    m.t = t;
    m.position = st.position;
    m.velocity = st.velocity;
    m.attitude = st.attitude;
    m.thrust = out.thrust;
    m.drag = drag;
    m.contact = contact_forces(s.main.mass, s.fb.mass, out.thrust, Vec3(rot.transpose() * drag));
    m.retained = contact_retained(m.contact, r.mu);
    r.all_retained = r.all_retained && m.retained;
    r.peak_friction = std::max(r.peak_friction, m.contact.required_friction);
    r.samples.push_back(m);

    Wrench wr;
    wr.force = rot * Vec3(0.0, 0.0, out.thrust) + drag;
    wr.torque = out.torque;
    const Vec3 v0 = st.velocity;
    st = step_rigid_body(st, comp, wr, dt);
    r.peak_lateral_accel = std::max(r.peak_lateral_accel, std::abs((st.velocity.x() - v0.x()) / dt));
  }
  return r;
}

struct FlyingBattery {
  int id = 0;
  VehicleParams params;
  RigidBodyState state;
  DockingFsm fsm;
  VehicleControl control;
  BatteryPack flight;
  BatteryPack secondary;
  Vec3 pad = Vec3::Zero();
  RotorOutput rotors;
  bool on_ground = true;
  bool flight_pack_warned = false;
  bool freefall_accel_warned = false;
  double flight_energy_used = 0.0;     // Wh
  double secondary_energy_used = 0.0;  // Wh

  FlyingBattery(int id_, const Scenario& s, Vec3 pad_)
      : id(id_), params(s.fb), fsm(s.docking), control(s.fb, s.control),
        flight(s.fb_flight.make("fb" + std::to_string(id_) + "_flight")),
        secondary(s.secondary.make("fb" + std::to_string(id_) + "_secondary")), pad(pad_) {
    state.position = pad + Vec3(0.0, 0.0, s.docking.leg_offset);
  }
};

struct MissionResult {
  MissionSummary summary;
  MissionLog log;
  std::int64_t steps = 0;
  std::size_t telemetry_rows = 0;
  bool contact_always_retained = true;
};

class World {
 public:
  /// `scenario` should already be prepared (see prepare_scenario).
  World(Scenario scenario, FeedforwardMap ff, std::ostream* telemetry = nullptr)
      : s_(std::move(scenario)), main_control_(s_.main, s_.control), ff_(std::move(ff)),
        rng_(s_.sim.seed), orch_(s_.mission, &log_) {
    validate(s_);
    clock_.dt = s_.sim.dt;
    main_.position = s_.mission.hover_position;
    primary_ = s_.primary.make("primary");
    circuit_ = s_.circuit;
    mount_ = Vec3(0.0, 0.0, s_.docking.platform_height + s_.docking.leg_offset);
    const int n = s_.mission.fleet_size;
    for (int i = 0; i < n; ++i) {
      const double y = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * 0.6;
      const Vec3 pad(s_.mission.hover_position.x() + s_.docking.pad_distance,
                     s_.mission.hover_position.y() + y, 0.0);
      fleet_.emplace_back(i, s_, pad);
    }
    if (telemetry) writer_ = std::make_unique<TelemetryWriter>(*telemetry);
    log_.add(0.0, EventKind::MissionStart);
  }

  const Scenario& scenario() const { return s_; }
  const SimClock& clock() const { return clock_; }
  const RigidBodyState& main_state() const { return main_; }
  const std::vector<FlyingBattery>& fleet() const { return fleet_; }
  const BatteryPack& primary() const { return primary_; }
  const SwitchCircuit& circuit() const { return circuit_; }
  const MissionLog& log() const { return log_; }
  const BusStep& last_bus() const { return bus_; }
  int docked() const { return docked_; }
  bool finished() const { return finished_; }
  std::uint64_t rng_draws() const { return rng_.draws(); }

  /// Advances one step. Throws NumericError (with the step index) on any
  /// non-finite value.
  void step() {
    if (finished_) return;
    const std::int64_t k = clock_.step_index;
    try {
      step_impl();
    } catch (const NumericError& e) {
      if (e.step() >= 0) throw;
      throw NumericError(e.subsystem(), e.field(), k);
    }
    ++clock_.step_index;
    if (!finished_ && clock_.t() >= s_.sim.duration - 0.5 * clock_.dt)
      finish(s_.mission.termination == Termination::WallClock ? "wall_clock" : "duration_limit");
    emit_row();
  }

  /// Steps for `duration` seconds or until the mission ends.
  void run(double duration) {
    if (!(duration > 0.0)) throw ConfigError("run: duration must be > 0");
    const auto n = static_cast<std::int64_t>(std::llround(duration / clock_.dt));
    for (std::int64_t i = 0; i < n && !finished_; ++i) step();
    if (writer_) writer_->flush();
  }

  void run_to_end() {
    while (!finished_) step();
    if (writer_) writer_->flush();
  }

  MissionResult result() const {
    MissionResult r;
    r.summary = summary_;
    r.summary.total_time = finished_ ? end_time_ : clock_.t();
    r.summary.termination = finished_ ? termination_ : "running";
    r.summary.solo_time = simulated_hover_time(s_.main.mass, s_.main.k_p, s_.primary.make("primary"),
                                               s_.circuit, s_.sim.dt);
    r.summary.extension_factor = r.summary.total_time / r.summary.solo_time;
    r.summary.secondary_energy.clear();
    r.summary.flight_pack_energy.clear();
    for (const auto& fb : fleet_) {
      r.summary.secondary_energy.push_back(fb.secondary_energy_used);
      r.summary.flight_pack_energy.push_back(fb.flight_energy_used);
    }
    summarize_events(log_, r.summary);
    r.log = log_;
    r.steps = clock_.step_index;
    r.telemetry_rows = writer_ ? writer_->rows() : 0;
    r.contact_always_retained = contact_retained_;
    return r;
  }

 private:
  Vec3 platform_center() const {
    return main_.position + main_.attitude * Vec3(0.0, 0.0, s_.docking.platform_height);
  }

  void finish(const std::string& why) {
    if (finished_) return;
    finished_ = true;
    termination_ = why;
    end_time_ = clock_.t();
    log_.add(end_time_, EventKind::MissionEnd, -1, why);
  }

  std::vector<FbStatus> fleet_status() const {
    std::vector<FbStatus> st;
    st.reserve(fleet_.size());
    for (const auto& fb : fleet_)
      st.push_back({fb.fsm.phase(), fb.secondary.energy_remaining >= fb.secondary.initial_energy,
                    state_of_charge(fb.flight)});
    return st;
  }

  // Body-frame offsets of each vehicle's center of mass from the composite one.
  Vec3 main_offset() const { return -(fleet_[docked_].params.mass / composite_.mass) * mount_; }
  Vec3 fb_offset() const { return (s_.main.mass / composite_.mass) * mount_; }

  static RigidBodyState point_state(const RigidBodyState& com, const Vec3& offset_body) {
    RigidBodyState s = com;
    s.position = com.position + com.attitude * offset_body;
    s.velocity = com.velocity + com.attitude * com.angular_velocity.cross(offset_body);
    return s;
  }

  void sync_docked_states() {
    main_ = point_state(com_, main_offset());
    fleet_[docked_].state = point_state(com_, fb_offset());
  }

  void dock(int i, const ContactOutcome& outcome, double t) {
    auto& fb = fleet_[i];
    docked_ = i;
    composite_ = composite_params(s_.main, fb.params, mount_);
    const double mm = s_.main.mass, mf = fb.params.mass;
    const Vec3 fb_pos = main_.position + main_.attitude * mount_;
    com_ = main_;
    com_.position = (mm * main_.position + mf * fb_pos) / composite_.mass;
    com_.velocity = (mm * main_.velocity + mf * fb.state.velocity) / composite_.mass;
    sync_docked_states();
    fb.control.reset();
    fb.rotors = {};
    main_control_.position.set_mass(composite_.mass);
    electrical_ = outcome.electrical_engaged;
    if (electrical_) circuit_ = set_secondary_present(circuit_, true);
    orch_.on_docked(t, i, outcome);
  }

  void undock() {
    auto& fb = fleet_[docked_];
    sync_docked_states();
    fb.control.reset();
    fb.on_ground = false;
    circuit_ = set_secondary_present(circuit_, false);
    main_control_.position.set_mass(s_.main.mass);
    electrical_ = false;
    docked_ = -1;
  }

  void step_impl() {
    const double dt = clock_.dt;
    const double t = clock_.t();
    const double t_end = static_cast<double>(clock_.step_index + 1) * dt;
    const auto& dk = s_.docking;

    // Orchestrator.
    const MissionDirectives dir = orch_.update(t, fleet_status());
    if (dir.switch_to) circuit_ = command_switch(circuit_, *dir.switch_to);
    for (int id : dir.recharge) {
      fleet_[id].flight = recharged(fleet_[id].flight);
      fleet_[id].secondary = recharged(fleet_[id].secondary);
      fleet_[id].flight_pack_warned = false;
    }

    // Docking state machines.
    std::vector<Setpoint> fb_sp(fleet_.size());
    const Vec3 platform = platform_center();
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& fb = fleet_[i];
      DockInputs in;
      in.rel = relative_pose(fb.state.position, platform, dk.leg_offset);
      in.commands = dir.commands[i];
      in.platform_center = platform;
      in.pad = fb.pad;
      in.position = fb.state.position;
      in.velocity = fb.state.velocity;
      in.on_ground = fb.on_ground;
      fb_sp[i] = fb.fsm.step(in, dt);
      if (const auto tr = fb.fsm.last_transition()) {
        log_.add_transition(t, fb.id, tr->first, tr->second);
        if (fb.fsm.bounced()) log_.add(t, EventKind::BounceOff, fb.id);
        if (tr->second == DockPhase::Takeoff) fb.control.reset();
        if (tr->second == DockPhase::FreeFall) fb.freefall_accel_warned = false;
        if (tr->second == DockPhase::UndockAscend && docked_ == static_cast<int>(i)) undock();
      }
    }

    // Controllers.
    Setpoint main_sp;
    main_sp.position = s_.mission.hover_position;
    for (const auto& fb : fleet_)
      if (static_cast<int>(fb.id) != docked_ && fb.rotors.thrust > 0.0)
        main_sp.feedforward_thrust += feedforward_lookup(ff_, fb.state.position - main_.position);
    const RotorOutput main_out = control_step(main_control_, main_, main_sp, dt);
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& fb = fleet_[i];
      fb.rotors = static_cast<int>(i) == docked_ ? RotorOutput{} : control_step(fb.control, fb.state, fb_sp[i], dt);
    }

    // Forces: thrust, drag, downwash on whichever vehicle is lower.
    const Mat3 rm = main_.attitude.toRotationMatrix();
    const Vec3 main_drag = body_drag(s_.main.drag_coefficient, main_.velocity);
    Vec3 main_force = rm * Vec3(0.0, 0.0, main_out.thrust) + main_drag;
    Vec3 main_torque_world = rm * main_out.torque;
    std::vector<Wrench> fb_w(fleet_.size());
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& fb = fleet_[i];
      if (static_cast<int>(i) == docked_) continue;
      const Mat3 rf = fb.state.attitude.toRotationMatrix();
      fb_w[i].force = rf * Vec3(0.0, 0.0, fb.rotors.thrust) +
                      body_drag(fb.params.drag_coefficient, fb.state.velocity);
      Vec3 fb_torque_world = Vec3::Zero();
      const Vec3 rel = fb.state.position - main_.position;
      if (rel.z() >= 0.0) {
        main_force += downwash_force(s_.downwash, rel, fb.rotors.thrust);
        main_torque_world += align_torque(s_.downwash, rel);
      } else {
        fb_w[i].force += downwash_force(s_.downwash, -rel, main_out.thrust);
        fb_torque_world += align_torque(s_.downwash, -rel);
      }
      fb_w[i].torque = fb.rotors.torque + rf.transpose() * fb_torque_world;
    }
    if (!main_force.allFinite()) throw NumericError("aero", "main force");

    // Integration.
    const Vec3 main_v0 = main_.velocity;
    Wrench mw;
    mw.force = main_force;
    mw.torque = rm.transpose() * main_torque_world;
    try {
      if (docked_ >= 0) {
        com_ = step_rigid_body(com_, composite_, mw, dt);
        sync_docked_states();
      } else {
        main_ = step_rigid_body(main_, s_.main, mw, dt);
      }
    } catch (const NumericError& e) {
      throw NumericError("dynamics:main", e.field());
    }
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& fb = fleet_[i];
      if (static_cast<int>(i) == docked_) continue;
      if (fb.fsm.phase() == DockPhase::Grounded && fb.rotors.thrust == 0.0) continue;
      try {
        fb.state = step_rigid_body(fb.state, fb.params, fb_w[i], dt);
      } catch (const NumericError& e) {
        throw NumericError("dynamics:fb" + std::to_string(fb.id), e.field());
      }
      const double floor_z = fb.pad.z() + dk.leg_offset;
      fb.on_ground = fb.state.position.z() <= floor_z;
      if (fb.on_ground) {
        fb.state.position.z() = floor_z;
        fb.state.velocity.setZero();
        fb.state.angular_velocity.setZero();
        const Vec3 heading = fb.state.attitude * Vec3::UnitX();
        fb.state.attitude = Quat(Eigen::AngleAxisd(std::atan2(heading.y(), heading.x()), Vec3::UnitZ()));
      }
    }

    // Platform acceleration while a unit is falling onto it.
    const Vec3 main_accel = (main_.velocity - main_v0) / dt;
    for (auto& fb : fleet_) {
      if (fb.fsm.phase() == DockPhase::FreeFall && !fb.freefall_accel_warned && main_accel.norm() > 2.0) {
        fb.freefall_accel_warned = true;
        log_.add(t_end, EventKind::Warning, fb.id, "platform_accel_during_free_fall");
      }
    }

    // Impacts.
    const Vec3 platform_after = platform_center();
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& fb = fleet_[i];
      if (fb.fsm.phase() != DockPhase::FreeFall) continue;
      const RelPose rel = relative_pose(fb.state.position, platform_after, dk.leg_offset);
      if (rel.vertical_gap > 0.0) continue;
      const ContactOutcome outcome =
          capture_check(rel.lateral, dk.thresholds, dk.contact_failure_probability, rng_);
      fb.fsm.on_impact(outcome, fb.state.position);
      if (const auto tr = fb.fsm.last_transition()) log_.add_transition(t_end, fb.id, tr->first, tr->second);
      if (fb.fsm.bounced()) log_.add(t_end, EventKind::BounceOff, fb.id);
      if (outcome.mechanical_engaged) dock(static_cast<int>(i), outcome, t_end);
    }

    // Bus and packs.
    const double load = rotor_set_power(main_out.rotor, s_.main.k_p);
    if (!std::isfinite(load)) throw NumericError("powertrain", "load power");
    BatteryPack* secondary = docked_ >= 0 && electrical_ ? &fleet_[docked_].secondary : nullptr;
    try {
      bus_ = apply_bus_load(circuit_, primary_, secondary, load, dt);
    } catch (const BusCollapse&) {
      bus_ = BusStep{};
      bus_.sample.ocv_primary = ocv(primary_);
      log_.add(t, EventKind::PrimaryDepleted);
      finish("primary_depleted");
      return;
    }
    if (bus_.primary_depleted_now) log_.add(t_end, EventKind::Warning, -1, "primary_depleted_while_secondary_connected");
    if (bus_.secondary_depleted_now) orch_.on_secondary_depleted(t_end, docked_);
    summary_.primary_energy += bus_.primary_draw;
    if (secondary) fleet_[docked_].secondary_energy_used += bus_.secondary_draw;
    summary_.load_energy += bus_.load_power * dt / 3600.0;
    summary_.loss_energy += bus_.loss_power * dt / 3600.0;
    switch (bus_.sample.active_source) {
      case ActiveSource::Primary: summary_.time_on_primary += dt; break;
      case ActiveSource::Secondary: summary_.time_on_secondary += dt; break;
      case ActiveSource::Both: summary_.time_on_both += dt; break;
      case ActiveSource::None: break;
    }

    for (auto& fb : fleet_) {
      if (fb.rotors.thrust <= 0.0) continue;
      const double p = rotor_set_power(fb.rotors.rotor, fb.params.k_p);
      if (fb.flight.depleted) continue;
      const double before = fb.flight.energy_remaining;
      fb.flight = discharge(fb.flight, p, dt);
      fb.flight_energy_used += before - fb.flight.energy_remaining;
      if (fb.flight.depleted && !fb.flight_pack_warned) {
        fb.flight_pack_warned = true;
        log_.add(t_end, EventKind::Warning, fb.id, "flight_pack_depleted");
      }
    }

    // Diagnostics.
    contact_ = ContactSolution{0.0, 0.0, false};
    if (docked_ >= 0) {
      contact_ = contact_forces(s_.main.mass, fleet_[docked_].params.mass, main_out.thrust,
                                Vec3(rm.transpose() * main_drag));
      if (!contact_retained(contact_, dk.friction_coefficient)) contact_retained_ = false;
      if (!any_docked_step_ || contact_.normal_force < summary_.min_docked_normal_force)
        summary_.min_docked_normal_force = contact_.normal_force;
      any_docked_step_ = true;
    }
    summary_.max_altitude_error = std::max(
        summary_.max_altitude_error, std::abs(main_.position.z() - s_.mission.hover_position.z()));
  }

  void emit_row() {
    if (!writer_) return;
    if (clock_.step_index % s_.sim.telemetry_decimation != 0 && !finished_) return;
    TelemetryRow r;
    r.time = clock_.t();
    const auto& b = bus_.sample;
    r.bus_voltage = b.bus_voltage;
    r.current_total = b.current_total();
    r.current_primary = b.current_primary;
    r.current_secondary = b.current_secondary;
    r.power = b.power();
    r.loss_power = bus_.loss_power;
    r.active_source = to_string(b.active_source);
    r.primary_ocv = b.ocv_primary;
    r.secondary_ocv = b.ocv_secondary;
    r.main_position = main_.position;
    const int fb = docked_ >= 0 ? docked_ : orch_.active();
    r.fb_id = fb;
    if (fb >= 0) {
      r.fb_phase = to_string(fleet_[fb].fsm.phase());
      r.fb_position = fleet_[fb].state.position;
    } else {
      r.fb_phase = "none";
    }
    r.normal_force = contact_.normal_force;
    r.required_friction = contact_.required_friction;
    const auto& ev = log_.events();
    for (; next_event_ < ev.size(); ++next_event_) {
      if (!r.events.empty()) r.events += ';';
      r.events += ev[next_event_].label();
    }
    writer_->write(r);
  }

  Scenario s_;
  SimClock clock_;
  RigidBodyState main_;
  VehicleControl main_control_;
  std::vector<FlyingBattery> fleet_;
  BatteryPack primary_;
  SwitchCircuit circuit_;
  Vec3 mount_ = Vec3::Zero();
  int docked_ = -1;
  bool electrical_ = false;
  VehicleParams composite_;
  RigidBodyState com_;
  FeedforwardMap ff_;
  SimRng rng_;
  MissionLog log_;
  MissionOrchestrator orch_;
  MissionSummary summary_;
  BusStep bus_;
  ContactSolution contact_{0.0, 0.0, false};
  bool contact_retained_ = true;
  bool any_docked_step_ = false;
  std::unique_ptr<TelemetryWriter> writer_;
  std::size_t next_event_ = 0;
  bool finished_ = false;
  std::string termination_;
  double end_time_ = 0.0;
};

/// Prepares the scenario, resolves the feedforward map and flies the mission
/// to its end.
inline MissionResult run_mission(const Scenario& scenario, std::ostream* telemetry = nullptr,
                                 std::vector<std::string>* warnings = nullptr) {
  const Scenario s = prepare_scenario(scenario);
  World world(s, resolve_feedforward(s, warnings), telemetry);
  world.run_to_end();
  return world.result();
}

}  // namespace flybatt
