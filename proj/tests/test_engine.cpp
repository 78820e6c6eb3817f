#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace flybatt;
using flybatt::testing::feedforward_for;
using flybatt::testing::prepared;

namespace {

std::string telemetry_of(Scenario s, double duration) {
  s.sim.duration = duration;
  std::stringstream ss;
  World w(s, feedforward_for("paper_demo"), &ss);
  w.run_to_end();
  return ss.str();
}

}  // namespace

TEST(SimClock, IntegerScaledTime) {
  SimClock c;
  c.dt = 0.001;
  c.step_index = 123457;
  EXPECT_EQ(c.t(), 123457 * 0.001);
}

TEST(World, HoverStepsAreSteady) {
  Scenario s = prepared("solo_hover");
  s.sim.telemetry_decimation = 1;
  std::stringstream ss;
  World w(s, {}, &ss);
  w.step();
  w.step();
  const auto rows = read_telemetry(ss);
  ASSERT_EQ(rows.size(), 2u);
  const auto &a = rows[0], &b = rows[1];
  EXPECT_EQ(b.time - a.time, 0.001);
  EXPECT_EQ(a.main_position, b.main_position);
  EXPECT_EQ(a.power, b.power);
  EXPECT_EQ(a.active_source, b.active_source);
  EXPECT_EQ(a.fb_phase, b.fb_phase);
  EXPECT_EQ(a.normal_force, b.normal_force);
  // The pack discharges by ~1e-5 V per step; nothing else moves.
  EXPECT_NEAR(a.bus_voltage, b.bus_voltage, 1e-4);
  EXPECT_NEAR(a.current_total, b.current_total, 1e-4);
  EXPECT_LE(b.primary_ocv, a.primary_ocv);
}

TEST(World, OneSecondIsOneThousandRows) {
  Scenario s = prepared("solo_hover");
  s.sim.telemetry_decimation = 1;
  std::stringstream ss;
  World w(s, {}, &ss);
  w.run(1.0);
  EXPECT_EQ(w.result().telemetry_rows, 1000u);
  const auto rows = read_telemetry(ss);
  ASSERT_EQ(rows.size(), 1000u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].time, canonical(static_cast<double>(i + 1) * 0.001));
}

TEST(World, SameSeedSameBytes) {
  Scenario s = prepared("paper_demo");
  s.docking.contact_failure_probability = 0.5;
  const std::string a = telemetry_of(s, 90.0);
  const std::string b = telemetry_of(s, 90.0);
  EXPECT_EQ(a, b);
  EXPECT_GT(a.size(), 100000u);
}

TEST(World, RngOnlyDrawnAtImpact) {
  Scenario s = prepared("paper_demo");
  s.sim.duration = 120.0;
  World w(s, feedforward_for("paper_demo"));
  w.run_to_end();
  const auto& log = w.log();
  const auto impacts = log.count(EventKind::ElectricalContact) + log.count(EventKind::ContactFailure) +
                       log.count(EventKind::BounceOff);
  EXPECT_EQ(w.rng_draws(), impacts);
  EXPECT_GT(impacts, 0u);
}

TEST(World, SoloHoverMeanPowerMatchesModel) {
  const Scenario& s = prepared("solo_hover");
  World w(s, {});
  double sum = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    w.step();
    sum += w.last_bus().load_power;
  }
  EXPECT_NEAR(sum / n, hover_power(s.main.mass, s.main.k_p), 0.01 * hover_power(s.main.mass, s.main.k_p));
}

TEST(World, DockedMeanPowerMatchesCombinedMass) {
  const Scenario& s = prepared("paper_demo");
  World w(s, feedforward_for("paper_demo"));
  while (w.log().count(EventKind::SwitchToSecondary) == 0) w.step();
  for (int k = 0; k < 5000; ++k) w.step();
  double sum = 0.0;
  const int n = 30000;
  for (int k = 0; k < n; ++k) {
    w.step();
    ASSERT_GE(w.docked(), 0);
    sum += w.last_bus().load_power;
  }
  const double oracle = hover_power(s.main.mass + s.fb.mass, s.main.k_p);
  EXPECT_NEAR(sum / n, oracle, 0.01 * oracle);
}

TEST(World, SoloEnergyAudit) {
  Scenario s = prepared("solo_hover");
  std::stringstream ss;
  World w(s, {}, &ss);
  w.run_to_end();
  const auto r = w.result();
  const auto rows = read_telemetry(ss);
  EXPECT_EQ(r.summary.termination, "primary_depleted");
  EXPECT_NEAR(integrate_source_energy(rows), r.summary.primary_energy, 1e-3 * r.summary.primary_energy);
  EXPECT_NEAR(r.summary.total_time, 720.0, 0.02 * 720.0);
}

TEST(World, NonFiniteHaltsWithStepIndex) {
  Scenario s = prepared("solo_hover");
  s.control.position_natural_frequency = 1e200;
  World w(s, {});
  try {
    w.run(1.0);
    FAIL() << "expected a numeric failure";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_NE(std::string(e.what()).find("at step 0"), std::string::npos);
    EXPECT_FALSE(e.subsystem().empty());
  }
}

TEST(World, TelemetryWriterRejectsNonFinite) {
  std::stringstream ss;
  TelemetryWriter tw(ss);
  TelemetryRow r;
  r.power = std::nan("");
  EXPECT_THROW(tw.write(r), NumericError);
}

TEST(Feedforward, MeasuredMapIsNonNegativeAndPeaksNearAxis) {
  const auto& m = feedforward_for("paper_demo");
  ASSERT_FALSE(m.empty());
  EXPECT_TRUE(std::all_of(m.values.begin(), m.values.end(), [](double v) { return v >= 0.0; }));
  // Measured offset at the closest on-axis node is near the model downforce.
  const Scenario& s = prepared("paper_demo");
  const double model = downwash_force(s.downwash, Vec3(0, 0, m.vertical_nodes[1]), s.fb.mass * kGravity).norm();
  EXPECT_NEAR(m.at(1, 0), model, 0.1 * model);
  EXPECT_GT(m.at(1, 0), m.at(1, m.lateral_nodes.size() - 1));
}

TEST(Feedforward, MapCutsHoverError) {
  const Scenario& s = prepared("paper_demo");
  const double with = run_downwash_hover(s, feedforward_for("paper_demo")).rms_altitude_error;
  const double without = run_downwash_hover(s, FeedforwardMap{}).rms_altitude_error;
  EXPECT_GT(without, 0.0);
  EXPECT_GE(without / with, 5.0);
}

TEST(Maneuver, LateralOscillationRetainsContact) {
  const auto r = run_lateral_oscillation(prepared("paper_demo"));
  EXPECT_TRUE(r.all_retained);
  EXPECT_GE(r.peak_lateral_accel, 11.0);
  for (const auto& smp : r.samples) EXPECT_GE(smp.contact.normal_force, 0.0);
}
