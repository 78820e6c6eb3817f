#pragma once

// Shared vocabulary: vector types, physical constants and the error types
// used across the simulator.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace flybatt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// World frame is z-up.
inline constexpr double kGravity = 9.81;  // m/s^2

inline Vec3 gravity_vector() { return Vec3(0.0, 0.0, -kGravity); }

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

// Configuration / input validation failure. Carries an optional source location
// (1-based line and column) when it originates from a scenario file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }
  int line_;
  int column_;
};

// Non-finite value detected in the simulation. `subsystem` names where it was
// first observed; `step` is the world step index (-1 when not stepping).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& subsystem, const std::string& field, std::int64_t step = -1)
      : std::runtime_error(format(subsystem, field, step)),
        subsystem_(subsystem), field_(field), step_(step) {}

  const std::string& subsystem() const { return subsystem_; }
  const std::string& field() const { return field_; }
  std::int64_t step() const { return step_; }

 private:
  static std::string format(const std::string& subsystem, const std::string& field,
                            std::int64_t step) {
    std::string s = "non-finite value in " + subsystem + " (" + field + ")";
    if (step >= 0) s += " at step " + std::to_string(step);
    return s;
  }
  std::string subsystem_;
  std::string field_;
  std::int64_t step_;
};

// Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi].
inline Vec3 rotation_vector(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double s = q.vec().norm();
  if (s < 1e-12) return 2.0 * q.vec();
  const double angle = 2.0 * std::atan2(s, q.w());
  return q.vec() * (angle / s);
}

inline Quat quat_from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) return Quat(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()).normalized();
  return Quat(Eigen::AngleAxisd(angle, rv / angle));
}

/// Deterministic uniform stream (mt19937_64 bits mapped to [0, 1) by hand so the
/// sequence does not depend on the standard library's distributions).
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed = 1) : engine_(seed) {}
  double uniform() {
    ++draws_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace flybatt
