#pragma once

// Rigid-body vehicle dynamics: state integration, the docked composite body,
// rotor mixing for an X-configuration quadcopter, and the docked contact-force
// model (normal / friction demand for zero relative acceleration).

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "flybatt/core.hpp"

namespace flybatt {

struct RigidBodyState {
  Vec3 position = Vec3::Zero();          // m, world
  Vec3 velocity = Vec3::Zero();          // m/s, world
  Quat attitude = Quat::Identity();      // body -> world
  Vec3 angular_velocity = Vec3::Zero();  // rad/s, body
};

struct VehicleParams {
  std::string name;
  double mass = 1.0;           // kg
  double arm_length = 0.1;     // m, hub to rotor axis
  double prop_diameter = 0.1;  // m
  double max_thrust = 20.0;    // N, all four rotors
  Mat3 inertia = Mat3::Identity() * 0.01;  // kg m^2, body frame
  double k_p = 150.0;          // W / kg^1.5, hover power = k_p * mass^1.5
  double yaw_moment_coeff = 0.015;  // m, rotor drag torque per newton of thrust
  double drag_coefficient = 0.0;    // N s^2 / m^2, quadratic body drag
};

// force is world frame, torque is body frame.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct ContactSolution {
  double normal_force = 0.0;       // N, compressive along main body z
  double required_friction = 0.0;  // N, in the platform plane
  bool engaged = true;
};

/// Main quadcopter defaults: 820 g, 27 N max thrust, 203 mm props, 165 mm arms.
inline VehicleParams main_quad_preset() {
  VehicleParams p;
  p.name = "main";
  p.mass = 0.820;
  p.arm_length = 0.165;
  p.prop_diameter = 0.203;
  p.max_thrust = 27.0;
  p.inertia = Eigen::Vector3d(0.0070, 0.0070, 0.0120).asDiagonal();
  p.k_p = 164.4;
  p.yaw_moment_coeff = 0.016;
  p.drag_coefficient = 0.10;
  return p;
}

/// Flying battery defaults: 320 g all-up, 8 N max thrust, 76 mm props, 58 mm arms.
/// k_p scales the main vehicle's constant by the inverse prop-diameter ratio
/// (ideal induced power goes as 1/sqrt(disk area)).
inline VehicleParams flying_battery_preset() {
  VehicleParams p;
  p.name = "flying_battery";
  p.mass = 0.320;
  p.arm_length = 0.058;
  p.prop_diameter = 0.076;
  p.max_thrust = 8.0;
  p.inertia = Eigen::Vector3d(0.00045, 0.00045, 0.00080).asDiagonal();
  p.k_p = 164.4 * 0.203 / 0.076;
  p.yaw_moment_coeff = 0.008;
  p.drag_coefficient = 0.03;
  return p;
}

inline void validate(const VehicleParams& p) {
  const std::string who = p.name.empty() ? std::string("vehicle") : p.name;
  if (!(p.mass > 0.0) || !std::isfinite(p.mass)) throw ConfigError(who + ".mass must be > 0");
  if (!(p.max_thrust > p.mass * kGravity))
    throw ConfigError(who + ".max_thrust must exceed the vehicle weight");
  if (!(p.arm_length > 0.0)) throw ConfigError(who + ".arm_length must be > 0");
  if (!(p.prop_diameter > 0.0)) throw ConfigError(who + ".prop_diameter must be > 0");
  if (!(p.k_p > 0.0)) throw ConfigError(who + ".k_p must be > 0");
  if (!p.inertia.allFinite() || !p.inertia.isApprox(p.inertia.transpose(), 1e-12))
    throw ConfigError(who + ".inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(p.inertia);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError(who + ".inertia must be positive definite");
  if (p.drag_coefficient < 0.0) throw ConfigError(who + ".drag_coefficient must be >= 0");
}

inline void check_finite(const RigidBodyState& s, const std::string& subsystem = "dynamics") {
  if (!s.position.allFinite()) throw NumericError(subsystem, "position");
  if (!s.velocity.allFinite()) throw NumericError(subsystem, "velocity");
  if (!s.attitude.coeffs().allFinite()) throw NumericError(subsystem, "attitude");
  if (!s.angular_velocity.allFinite()) throw NumericError(subsystem, "angular_velocity");
}

namespace detail {

struct StateDerivative {
  Vec3 dpos;
  Vec3 dvel;
  Eigen::Vector4d datt;  // quaternion coeffs (x, y, z, w)
  Vec3 domega;
};

inline StateDerivative derivative(const RigidBodyState& s, const VehicleParams& p,
                                  const Mat3& inertia_inv, const Wrench& w) {
  StateDerivative d;
  d.dpos = s.velocity;
  d.dvel = w.force / p.mass + gravity_vector();
  const Quat omega(0.0, s.angular_velocity.x(), s.angular_velocity.y(), s.angular_velocity.z());
  Quat qdot = s.attitude * omega;
  d.datt = 0.5 * qdot.coeffs();
  const Vec3 h = p.inertia * s.angular_velocity;
  d.domega = inertia_inv * (w.torque - s.angular_velocity.cross(h));
  return d;
}

inline RigidBodyState advance(const RigidBodyState& s, const StateDerivative& d, double h) {
  RigidBodyState out;
  out.position = s.position + h * d.dpos;
  out.velocity = s.velocity + h * d.dvel;
  out.attitude.coeffs() = s.attitude.coeffs() + h * d.datt;
  out.angular_velocity = s.angular_velocity + h * d.domega;
  return out;
}

}  // namespace detail

/// Advances one fixed step with classical RK4. The wrench is held constant over
/// the step; the attitude quaternion is renormalized afterwards.
inline RigidBodyState step_rigid_body(const RigidBodyState& state, const VehicleParams& params,
                                      const Wrench& wrench, double dt) {
  if (!(dt > 0.0)) throw ConfigError("step_rigid_body: dt must be > 0");
  check_finite(state);
  if (!wrench.force.allFinite()) throw NumericError("dynamics", "wrench.force");
  if (!wrench.torque.allFinite()) throw NumericError("dynamics", "wrench.torque");

  const Mat3 inertia_inv = params.inertia.inverse();
  using detail::advance;
  using detail::derivative;
  const auto k1 = derivative(state, params, inertia_inv, wrench);
  const auto k2 = derivative(advance(state, k1, 0.5 * dt), params, inertia_inv, wrench);
  const auto k3 = derivative(advance(state, k2, 0.5 * dt), params, inertia_inv, wrench);
  const auto k4 = derivative(advance(state, k3, dt), params, inertia_inv, wrench);

  RigidBodyState out;
  const double w = dt / 6.0;
  out.position = state.position + w * (k1.dpos + 2.0 * k2.dpos + 2.0 * k3.dpos + k4.dpos);
  out.velocity = state.velocity + w * (k1.dvel + 2.0 * k2.dvel + 2.0 * k3.dvel + k4.dvel);
  out.attitude.coeffs() =
      state.attitude.coeffs() + w * (k1.datt + 2.0 * k2.datt + 2.0 * k3.datt + k4.datt);
  out.attitude.normalize();
  out.angular_velocity = state.angular_velocity +
                         w * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  check_finite(out);
  return out;
}

/// Docked pair as one rigid body. `mount_offset` is the flying battery's center
/// of mass relative to the main vehicle's, in the main body frame. Inertia is
/// taken about the combined center of mass (parallel-axis theorem with the
/// reduced mass); thrust limits, geometry and k_p stay those of the main vehicle.
inline VehicleParams composite_params(const VehicleParams& main, const VehicleParams& fb,
                                      const Vec3& mount_offset) {
  if (!(main.mass > 0.0)) throw ConfigError("composite_params: main mass must be > 0");
  if (fb.mass < 0.0) throw ConfigError("composite_params: flying battery mass must be >= 0");
  if (fb.mass == 0.0) return main;
  VehicleParams out = main;
  out.name = main.name + "+" + fb.name;
  const double total = main.mass + fb.mass;
  const double reduced = main.mass * fb.mass / total;
  const Vec3& d = mount_offset;
  const Mat3 shift = reduced * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
  out.mass = total;
  out.inertia = main.inertia + fb.inertia + shift;
  return out;
}

/// Contact demand between a docked flying battery and the platform when both
/// bodies share one acceleration. `thrust` is the main vehicle's total thrust
/// (along its body z, normal to the platform); `external_planar_force` is any
/// other force on the main vehicle lying in the platform plane (e.g. drag).
inline ContactSolution contact_forces(double main_mass, double fb_mass, double thrust,
                                      double external_planar_force) {
  if (!(main_mass > 0.0) || !(fb_mass > 0.0))
    throw ConfigError("contact_forces: masses must be > 0");
  const double share = fb_mass / (main_mass + fb_mass);
  ContactSolution c;
  c.normal_force = share * thrust;
  c.required_friction = share * std::abs(external_planar_force);
  c.engaged = c.normal_force >= 0.0;
  return c;
}

/// Same as above with an arbitrary external force on the main vehicle expressed
/// in its body frame; the body-z part adds to the normal load.
inline ContactSolution contact_forces(double main_mass, double fb_mass, double thrust,
                                      const Vec3& external_force_body) {
  ContactSolution c = contact_forces(main_mass, fb_mass, thrust + external_force_body.z(),
                                     external_force_body.head<2>().norm());
  return c;
}

inline bool contact_retained(const ContactSolution& contact, double mu) {
  if (mu < 0.0) throw ConfigError("contact_retained: mu must be >= 0");
  if (!contact.engaged) return false;
  return contact.required_friction <= mu * contact.normal_force;
}

/// X-configuration four-rotor mixer. Rotor i sits at 45 + 90 i degrees around
/// body z; rotors 0 and 2 spin counter-clockwise.
class QuadMixer {
 public:
  explicit QuadMixer(const VehicleParams& p)
      : per_rotor_max_(p.max_thrust / 4.0), yaw_coeff_(p.yaw_moment_coeff) {
    const double r = p.arm_length / std::sqrt(2.0);
    const std::array<double, 4> xs{r, -r, -r, r};
    const std::array<double, 4> ys{r, r, -r, -r};
    const std::array<double, 4> spin{1.0, -1.0, 1.0, -1.0};
    for (int i = 0; i < 4; ++i) {
      mix_(0, i) = 1.0;
      mix_(1, i) = ys[i];
      mix_(2, i) = -xs[i];
      mix_(3, i) = spin[i] * yaw_coeff_;
    }
    unmix_ = mix_.inverse();
  }

  /// Rotor thrusts realizing (thrust, torque) as closely as the per-rotor
  /// limits [0, max_thrust / 4] allow.
  std::array<double, 4> allocate(double thrust, const Vec3& torque_body) const {
    const Eigen::Vector4d cmd(thrust, torque_body.x(), torque_body.y(), torque_body.z());
    const Eigen::Vector4d f = unmix_ * cmd;
    std::array<double, 4> out{};
    for (int i = 0; i < 4; ++i) out[i] = std::clamp(f[i], 0.0, per_rotor_max_);
    return out;
  }

  /// Total thrust (N) and body torque (N m) produced by the given rotor thrusts.
  std::pair<double, Vec3> realize(const std::array<double, 4>& f) const {
    const Eigen::Vector4d fv(f[0], f[1], f[2], f[3]);
    const Eigen::Vector4d w = mix_ * fv;
    return {w[0], Vec3(w[1], w[2], w[3])};
  }

 private:
  double per_rotor_max_;
  double yaw_coeff_;
  Eigen::Matrix4d mix_;
  Eigen::Matrix4d unmix_;
};

}  // namespace flybatt
