#pragma once

// Cascaded PID position / attitude control and the relative-position
// feedforward thrust map the main vehicle uses against downwash.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flybatt/core.hpp"
#include "flybatt/dynamics.hpp"

namespace flybatt {

struct CascadedPidConfig {
  Vec3 pos_kp = Vec3::Constant(4.0);   // 1/s^2
  Vec3 pos_ki = Vec3::Constant(1.5);   // 1/s^3
  Vec3 pos_kd = Vec3::Constant(3.2);   // 1/s
  Vec3 att_kp = Vec3::Constant(0.1);   // N m / rad
  Vec3 att_kd = Vec3::Constant(0.01);  // N m s / rad
  double yaw_ki = 0.0;                 // N m / (rad s)
  double integrator_limit = 3.0;       // m/s^2, per axis, on the integral term
  double yaw_integrator_limit = 0.05;  // N m
  double max_thrust = 20.0;            // N
  double max_tilt = 1.05;              // rad
};

/// Closed-loop targets used to derive gains by pole placement on double
/// integrators: position (natural frequency, damping), attitude likewise.
struct ControlTuning {
  double position_natural_frequency = 2.0;
  double position_damping = 0.8;
  double position_integral_gain = 1.5;
  double attitude_natural_frequency = 15.0;
  double attitude_damping = 0.8;
  double yaw_natural_frequency = 6.0;
  double yaw_integral_ratio = 0.5;  // yaw Ki = ratio * Jzz * w_yaw^3
  double integrator_limit = 3.0;
  double max_tilt = 1.05;
};

inline CascadedPidConfig derive_gains(const VehicleParams& v, const ControlTuning& t) {
  CascadedPidConfig c;
  const double wp = t.position_natural_frequency;
  c.pos_kp = Vec3::Constant(wp * wp);
  c.pos_kd = Vec3::Constant(2.0 * t.position_damping * wp);
  c.pos_ki = Vec3::Constant(t.position_integral_gain);
  const double wa = t.attitude_natural_frequency;
  const double wy = t.yaw_natural_frequency;
  const Vec3 j = v.inertia.diagonal();
  c.att_kp = Vec3(j.x() * wa * wa, j.y() * wa * wa, j.z() * wy * wy);
  c.att_kd = Vec3(j.x() * 2.0 * t.attitude_damping * wa, j.y() * 2.0 * t.attitude_damping * wa,
                  j.z() * 2.0 * t.attitude_damping * wy);
  c.yaw_ki = t.yaw_integral_ratio * j.z() * wy * wy * wy;
  c.integrator_limit = t.integrator_limit;
  c.yaw_integrator_limit = 0.2 * v.max_thrust * v.yaw_moment_coeff;
  c.max_thrust = v.max_thrust;
  c.max_tilt = t.max_tilt;
  return c;
}

inline void validate(const CascadedPidConfig& c, const VehicleParams& v) {
  auto nonneg = [](const Vec3& g) { return (g.array() >= 0.0).all(); };
  if (!nonneg(c.pos_kp) || !nonneg(c.pos_ki) || !nonneg(c.pos_kd) || !nonneg(c.att_kp) ||
      !nonneg(c.att_kd) || c.yaw_ki < 0.0)
    throw ConfigError("control gains must be >= 0");
  if (!(c.integrator_limit > 0.0) || !(c.yaw_integrator_limit > 0.0))
    throw ConfigError("control integrator limits must be > 0");
  if (c.max_thrust > v.max_thrust + 1e-12)
    throw ConfigError("control thrust limit exceeds " + v.name + " max_thrust");
}

struct Setpoint {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();      // feedforward
  Vec3 acceleration = Vec3::Zero();  // feedforward
  double yaw = 0.0;
  double feedforward_thrust = 0.0;   // N, added to the collective
  bool motors_off = false;
};

struct ThrustCommand {
  double thrust = 0.0;  // N
  Quat attitude = Quat::Identity();
  bool saturated = false;
};

class PositionController {
 public:
  PositionController() = default;
  PositionController(CascadedPidConfig config, double mass) : config_(std::move(config)), mass_(mass) {}

  void set_mass(double mass) { mass_ = mass; }
  double mass() const { return mass_; }
  const Vec3& integrator() const { return integral_; }
  const CascadedPidConfig& config() const { return config_; }
  void reset() { integral_.setZero(); }

  /// Collective thrust the integral term is currently adding (N).
  double integral_thrust() const { return mass_ * integral_.z(); }

  ThrustCommand update(const RigidBodyState& s, const Setpoint& sp, double dt) {
    if (!(dt > 0.0)) throw ConfigError("position_control: dt must be > 0");
    const Vec3 err = sp.position - s.position;
    const Vec3 derr = sp.velocity - s.velocity;
    const double lim = config_.integrator_limit;
    integral_ = (integral_ + config_.pos_ki.cwiseProduct(err) * dt).cwiseMax(-lim).cwiseMin(lim);

    Vec3 accel = config_.pos_kp.cwiseProduct(err) + config_.pos_kd.cwiseProduct(derr) + integral_ +
                 sp.acceleration;
    Vec3 lift = accel + Vec3(0.0, 0.0, kGravity);
    lift.z() = std::max(lift.z(), 0.2 * kGravity);
    const double lateral = lift.head<2>().norm();
    const double max_lateral = lift.z() * std::tan(config_.max_tilt);
    if (lateral > max_lateral) lift.head<2>() *= max_lateral / lateral;

    ThrustCommand cmd;
    const double raw = mass_ * lift.norm() + sp.feedforward_thrust;
    cmd.thrust = std::clamp(raw, 0.0, config_.max_thrust);
    cmd.saturated = cmd.thrust != raw;
    cmd.attitude = attitude_from_thrust_axis(lift.normalized(), sp.yaw);
    return cmd;
  }

  static Quat attitude_from_thrust_axis(const Vec3& b3, double yaw) {
    const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
    Vec3 b2 = b3.cross(heading);
    if (b2.norm() < 1e-9) b2 = Vec3::UnitY();
    b2.normalize();
    const Vec3 b1 = b2.cross(b3);
    Mat3 r;
    r.col(0) = b1;
    r.col(1) = b2;
    r.col(2) = b3;
    return Quat(r).normalized();
  }

 private:
  CascadedPidConfig config_;
  double mass_ = 1.0;
  Vec3 integral_ = Vec3::Zero();
};

/// PD on the error rotation (body axis-angle) with integral action on yaw.
class AttitudeController {
 public:
  AttitudeController() = default;
  explicit AttitudeController(CascadedPidConfig config) : config_(std::move(config)) {}

  void reset() { yaw_integral_ = 0.0; }
  double yaw_integral() const { return yaw_integral_; }

  Vec3 update(const RigidBodyState& s, const Quat& desired, double dt) {
    const Vec3 err = rotation_vector(s.attitude.conjugate() * desired);
    const double lim = config_.yaw_integrator_limit;
    yaw_integral_ = std::clamp(yaw_integral_ + config_.yaw_ki * err.z() * dt, -lim, lim);
    Vec3 torque = config_.att_kp.cwiseProduct(err) - config_.att_kd.cwiseProduct(s.angular_velocity);
    torque.z() += yaw_integral_;
    return torque;
  }

 private:
  CascadedPidConfig config_;
  double yaw_integral_ = 0.0;
};

// ---------------------------------------------------------------------------
// Feedforward thrust map keyed on (lateral distance, vertical gap) of the upper
// vehicle relative to the main vehicle.

struct FeedforwardMap {
  std::vector<double> lateral_nodes;   // m, ascending
  std::vector<double> vertical_nodes;  // m, ascending
  std::vector<double> values;          // N, row-major [vertical][lateral]

  double& at(std::size_t iv, std::size_t il) { return values[iv * lateral_nodes.size() + il]; }
  double at(std::size_t iv, std::size_t il) const { return values[iv * lateral_nodes.size() + il]; }
  bool empty() const { return values.empty(); }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

/// Zero map on a node grid: lateral 0..lateral_max with `lateral_bins` nodes,
/// vertical 0..vertical_max with `vertical_bins` nodes.
inline FeedforwardMap make_ff_grid(double lateral_max = 0.4, std::size_t lateral_bins = 9,
                                   double vertical_max = 1.0, std::size_t vertical_bins = 11) {
  if (lateral_bins < 2 || vertical_bins < 2 || !(lateral_max > 0.0) || !(vertical_max > 0.0))
    throw ConfigError("feedforward grid needs >= 2 nodes per axis and positive extent");
  FeedforwardMap m;
  m.lateral_nodes = linspace(0.0, lateral_max, lateral_bins);
  m.vertical_nodes = linspace(0.0, vertical_max, vertical_bins);
  m.values.assign(lateral_bins * vertical_bins, 0.0);
  return m;
}

namespace detail {
// Index i with nodes[i] <= x <= nodes[i+1] and the fractional position.
inline std::pair<std::size_t, double> bracket(const std::vector<double>& nodes, double x) {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  std::size_t i = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
  if (i >= nodes.size() - 1) i = nodes.size() - 2;
  return {i, (x - nodes[i]) / (nodes[i + 1] - nodes[i])};
}

inline std::size_t nearest(const std::vector<double>& nodes, double x) {
  const auto [i, f] = bracket(nodes, x);
  return f <= 0.5 ? i : i + 1;
}
}  // namespace detail

inline double feedforward_lookup(const FeedforwardMap& m, const Vec3& rel_pos) {
  if (m.empty()) return 0.0;
  const double lat = rel_pos.head<2>().norm();
  const double vert = rel_pos.z();
  if (lat < m.lateral_nodes.front() || lat > m.lateral_nodes.back()) return 0.0;
  if (vert < m.vertical_nodes.front() || vert > m.vertical_nodes.back()) return 0.0;
  const auto [il, fl] = detail::bracket(m.lateral_nodes, lat);
  const auto [iv, fv] = detail::bracket(m.vertical_nodes, vert);
  const double v00 = m.at(iv, il), v01 = m.at(iv, il + 1);
  const double v10 = m.at(iv + 1, il), v11 = m.at(iv + 1, il + 1);
  return (1.0 - fv) * ((1.0 - fl) * v00 + fl * v01) + fv * ((1.0 - fl) * v10 + fl * v11);
}

struct FeedforwardSample {
  Vec3 rel_pos;
  double integral_thrust_offset;  // N
};

/// Averages the samples falling nearest to each node; nodes without samples
/// stay zero. Samples outside the grid are ignored.
inline FeedforwardMap build_ff_map(const std::vector<FeedforwardSample>& samples,
                                   FeedforwardMap grid = make_ff_grid(),
                                   std::vector<std::string>* warnings = nullptr) {
  std::fill(grid.values.begin(), grid.values.end(), 0.0);
  std::vector<double> sum(grid.values.size(), 0.0);
  std::vector<int> count(grid.values.size(), 0);
  const std::size_t nl = grid.lateral_nodes.size();
  std::size_t used = 0;
  for (const auto& s : samples) {
    const double lat = s.rel_pos.head<2>().norm();
    const double vert = s.rel_pos.z();
    if (lat < grid.lateral_nodes.front() || lat > grid.lateral_nodes.back()) continue;
    if (vert < grid.vertical_nodes.front() || vert > grid.vertical_nodes.back()) continue;
    const std::size_t k = detail::nearest(grid.vertical_nodes, vert) * nl +
                          detail::nearest(grid.lateral_nodes, lat);
    sum[k] += s.integral_thrust_offset;
    ++count[k];
    ++used;
  }
  for (std::size_t k = 0; k < sum.size(); ++k)
    if (count[k] > 0) grid.values[k] = std::max(0.0, sum[k] / count[k]);
  if (used == 0 && warnings) warnings->push_back("feedforward map built from no samples; map is zero");
  return grid;
}

/// Tidy CSV: one `lateral,vertical,thrust` row per node.
inline void write_ff_map_csv(std::ostream& os, const FeedforwardMap& m) {
  os << "lateral,vertical,thrust\n";
  char buf[96];
  for (std::size_t iv = 0; iv < m.vertical_nodes.size(); ++iv)
    for (std::size_t il = 0; il < m.lateral_nodes.size(); ++il) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", m.lateral_nodes[il], m.vertical_nodes[iv],
                    m.at(iv, il));
      os << buf;
    }
}

inline FeedforwardMap read_ff_map_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("lateral,vertical,thrust", 0) != 0)
    throw ConfigError("feedforward map CSV: missing header", 1, 1);
  std::map<std::pair<double, double>, double> cells;
  std::vector<double> lat, vert;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double l, v, t;
    char c1, c2;
    if (!(ss >> l >> c1 >> v >> c2 >> t) || c1 != ',' || c2 != ',')
      throw ConfigError("feedforward map CSV: malformed row", lineno, 1);
    cells[{v, l}] = t;
    lat.push_back(l);
    vert.push_back(v);
  }
  auto uniq = [](std::vector<double> x) {
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end()), x.end());
    return x;
  };
  FeedforwardMap m;
  m.lateral_nodes = uniq(lat);
  m.vertical_nodes = uniq(vert);
  if (m.lateral_nodes.size() < 2 || m.vertical_nodes.size() < 2 ||
      cells.size() != m.lateral_nodes.size() * m.vertical_nodes.size())
    throw ConfigError("feedforward map CSV: rows do not form a full grid");
  m.values.reserve(cells.size());
  for (double v : m.vertical_nodes)
    for (double l : m.lateral_nodes) m.values.push_back(cells.at({v, l}));
  return m;
}

}  // namespace flybatt
