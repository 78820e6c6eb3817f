#pragma once

// Shared fixtures: prepared bundled scenarios and their feedforward maps,
// cached per process because calibration and map measurement take ~1 s each.

#include <map>
#include <string>

#include "flybatt/flybatt.hpp"

namespace flybatt::testing {

inline const Scenario& prepared(const std::string& name) {
  static std::map<std::string, Scenario> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, prepare_scenario(load_scenario(name))).first;
  return it->second;
}

inline const FeedforwardMap& feedforward_for(const std::string& name) {
  static std::map<std::string, FeedforwardMap> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, resolve_feedforward(prepared(name))).first;
  return it->second;
}

/// paper_demo with a tiny secondary and an oversized primary so that one
/// flying battery cycles dock / drain / undock / land / recharge quickly.
inline Scenario cycling_scenario(double duration) {
  Scenario s = prepared("paper_demo");
  s.name = "cycling";
  s.secondary.capacity = 0.002;
  s.primary.capacity = 100.0;
  s.docking.contact_failure_probability = 0.0;
  s.mission.turnaround_delay = 0.0;
  s.mission.termination = Termination::WallClock;
  s.solo_flight_time = 0.0;
  s.sim.duration = duration;
  return s;
}

inline MissionResult run_world(const Scenario& s, const FeedforwardMap& ff, std::ostream* telemetry = nullptr) {
  World w(s, ff, telemetry);
  w.run_to_end();
  return w.result();
}

}  // namespace flybatt::testing
