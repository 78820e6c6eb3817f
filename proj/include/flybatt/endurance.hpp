#pragma once

// Hover endurance as a function of battery mass fraction.
//
// With m0 the vehicle mass excluding the battery and phi the battery's share of
// the total mass, hover power k_p (m0 / (1 - phi))^1.5 and battery energy
// gamma * phi / (1 - phi) * m0 give a flight time proportional to
// phi * sqrt(1 - phi) / sqrt(m0), which peaks at phi = 2/3 regardless of
// gamma, k_p and m0.

#include <cmath>
#include <vector>

#include "flybatt/core.hpp"

namespace flybatt {

struct EnduranceInputs {
  double m0 = 0.63;        // kg, everything but the battery
  double phi = 0.0;        // battery mass / total mass
  double gamma = 128.5;    // Wh/kg
  double k_p = 164.4;      // W/kg^1.5
};

struct EnduranceReport {
  double flight_time = 0.0;   // s
  double total_mass = 0.0;    // kg
  double battery_mass = 0.0;  // kg
  double hover_power = 0.0;   // W
  double normalized_time = 0.0;
};

inline constexpr double kOptimalPhi = 2.0 / 3.0;

/// Shape of the flight-time curve, phi * sqrt(1 - phi).
inline double endurance_shape(double phi) { return phi * std::sqrt(1.0 - phi); }

inline double normalized_time(double phi) {
  return endurance_shape(phi) / endurance_shape(kOptimalPhi);
}

inline double optimal_phi() { return kOptimalPhi; }

inline void validate(const EnduranceInputs& in) {
  if (!(in.m0 > 0.0)) throw ConfigError("m0 must be > 0");
  if (!(in.phi >= 0.0) || !(in.phi < 1.0)) throw ConfigError("phi must be in [0, 1)");
  if (!(in.gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(in.k_p > 0.0)) throw ConfigError("k_p must be > 0");
}

inline EnduranceReport flight_time(const EnduranceInputs& in) {
  validate(in);
  EnduranceReport r;
  r.battery_mass = in.phi / (1.0 - in.phi) * in.m0;
  r.total_mass = in.m0 / (1.0 - in.phi);
  r.hover_power = in.k_p * std::pow(r.total_mass, 1.5);
  r.flight_time = in.gamma * r.battery_mass * 3600.0 / r.hover_power;
  r.normalized_time = normalized_time(in.phi);
  return r;
}

struct CurvePoint {
  double phi;
  double normalized_time;
};

/// Default grid: 512 evenly spaced values on [0, 0.999].
inline std::vector<double> default_phi_grid(std::size_t n = 512, double hi = 0.999) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = hi * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

inline std::vector<CurvePoint> normalized_curve(const std::vector<double>& phi_grid) {
  std::vector<CurvePoint> out;
  out.reserve(phi_grid.size());
  for (double phi : phi_grid) {
    if (!(phi >= 0.0) || !(phi < 1.0)) throw ConfigError("phi must be in [0, 1)");
    out.push_back({phi, normalized_time(phi)});
  }
  return out;
}

// Only the product gamma / k_p is identifiable from one observed flight time.
struct DesignComparison {
  double calibrated_gamma_over_kp = 0.0;  // Wh kg^0.5 / W
  double observed_time = 0.0;             // s
  double observed_normalized = 0.0;
  double optimal_phi = kOptimalPhi;
  double optimal_time = 0.0;          // s
  double optimal_battery_mass = 0.0;  // kg
  double optimal_total_mass = 0.0;    // kg
};

inline DesignComparison design_comparison(const EnduranceInputs& solo, double solo_observed_time) {
  if (!(solo_observed_time > 0.0)) throw ConfigError("observed flight time must be > 0");
  if (!(solo.m0 > 0.0)) throw ConfigError("m0 must be > 0");
  if (!(solo.phi > 0.0) || !(solo.phi < 1.0)) throw ConfigError("phi must be in (0, 1)");
  DesignComparison d;
  d.observed_time = solo_observed_time;
  d.observed_normalized = normalized_time(solo.phi);
  // T = (gamma/k_p) * 3600 * phi sqrt(1 - phi) / sqrt(m0)
  d.calibrated_gamma_over_kp =
      solo_observed_time * std::sqrt(solo.m0) / (3600.0 * endurance_shape(solo.phi));
  d.optimal_time = solo_observed_time / d.observed_normalized;
  d.optimal_battery_mass = kOptimalPhi / (1.0 - kOptimalPhi) * solo.m0;
  d.optimal_total_mass = solo.m0 / (1.0 - kOptimalPhi);
  return d;
}

}  // namespace flybatt
