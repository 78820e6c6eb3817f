#pragma once

// Rotor-downwash interaction between two vehicles stacked vertically.
//
// Only the lower vehicle is disturbed. The disturbance is a purely vertical
// downforce plus a torque that tilts the lower vehicle toward the upper one;
// planar forces are not modeled at all.

#include <cmath>

#include "flybatt/core.hpp"

namespace flybatt {

struct DownwashModel {
  double peak_force_ratio = 0.25;   // share of upper thrust felt at zero offset, zero gap
  double lateral_decay = 0.12;      // m, Gaussian width
  double vertical_decay = 0.5;      // m, exponential length
  double align_torque_gain = 0.05;  // N m per m of lateral offset
};

inline void validate(const DownwashModel& m) {
  if (!(m.peak_force_ratio > 0.0) || m.peak_force_ratio > 1.0)
    throw ConfigError("downwash.peak_force_ratio must be in (0, 1]");
  if (!(m.lateral_decay > 0.0)) throw ConfigError("downwash.lateral_decay must be > 0");
  if (!(m.vertical_decay > 0.0)) throw ConfigError("downwash.vertical_decay must be > 0");
  if (!(m.align_torque_gain > 0.0)) throw ConfigError("downwash.align_torque_gain must be > 0");
}

/// Envelope in [0, 1]; zero when the "upper" vehicle is actually below.
inline double downwash_envelope(const DownwashModel& m, const Vec3& rel_pos) {
  if (rel_pos.z() < 0.0) return 0.0;
  const double lateral = rel_pos.head<2>().norm() / m.lateral_decay;
  return std::exp(-lateral * lateral) * std::exp(-rel_pos.z() / m.vertical_decay);
}

/// Force on the lower vehicle (world frame). `rel_pos` points from the lower
/// vehicle to the upper one.
inline Vec3 downwash_force(const DownwashModel& m, const Vec3& rel_pos, double upper_thrust) {
  const double mag = m.peak_force_ratio * std::max(upper_thrust, 0.0) * downwash_envelope(m, rel_pos);
  return Vec3(0.0, 0.0, -mag);
}

/// Aligning torque on the lower vehicle (world frame). It rotates the lower
/// vehicle's thrust axis toward the upper vehicle: an offset along +x gives a
/// torque about +y.
inline Vec3 align_torque(const DownwashModel& m, const Vec3& rel_pos) {
  const Vec3 lateral(rel_pos.x(), rel_pos.y(), 0.0);
  return m.align_torque_gain * downwash_envelope(m, rel_pos) * Vec3::UnitZ().cross(lateral);
}

/// Quadratic body drag, world frame.
inline Vec3 body_drag(double coefficient, const Vec3& velocity) {
  return -coefficient * velocity.norm() * velocity;
}

}  // namespace flybatt
