#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace flybatt;

namespace {

DockInputs at_rest(double lateral, double gap) {
  DockInputs in;
  in.rel = {lateral, gap};
  in.platform_center = Vec3(0, 0, 1.6);
  in.position = in.platform_center + Vec3(lateral, 0, 0.05 + gap);
  return in;
}

}  // namespace

TEST(DockingFsm, DescendWithinThresholdsFreeFalls) {
  DockingFsm fsm(DockingConfig{}, DockPhase::Descend);
  const Setpoint sp = fsm.step(at_rest(0.015, 0.04), 0.001);
  EXPECT_EQ(fsm.phase(), DockPhase::FreeFall);
  EXPECT_TRUE(sp.motors_off);
}

TEST(DockingFsm, DescendNeedsBothThresholds) {
  for (auto [lat, gap] : {std::pair{0.025, 0.04}, std::pair{0.015, 0.06}}) {
    DockingFsm fsm(DockingConfig{}, DockPhase::Descend);
    fsm.step(at_rest(lat, gap), 0.001);
    EXPECT_EQ(fsm.phase(), DockPhase::Descend);
  }
}

TEST(DockingFsm, GroundedWithoutCommandStays) {
  DockingFsm fsm;
  const Setpoint sp = fsm.step(at_rest(3.0, -1.6), 0.001);
  EXPECT_EQ(fsm.phase(), DockPhase::Grounded);
  EXPECT_FALSE(fsm.last_transition().has_value());
  EXPECT_TRUE(sp.motors_off);
}

TEST(DockingFsm, UndockTargetsThirtyCentimetres) {
  DockingConfig cfg;
  DockingFsm fsm(cfg, DockPhase::Docked);
  DockInputs in = at_rest(0.0, 0.0);
  in.commands.undock = true;
  const Setpoint sp = fsm.step(in, 0.001);
  EXPECT_EQ(fsm.phase(), DockPhase::UndockAscend);
  EXPECT_FALSE(sp.motors_off);
  EXPECT_NEAR(sp.position.z() - cfg.leg_offset - in.platform_center.z(), 0.30, 1e-12);
  EXPECT_NEAR((sp.position - in.platform_center).head<2>().norm(), 0.0, 1e-12);
}

TEST(DockingFsm, BounceWhenDriftingOutOfFunnel) {
  DockingFsm fsm(DockingConfig{}, DockPhase::FreeFall);
  fsm.step(at_rest(0.03, 0.02), 0.001);
  EXPECT_EQ(fsm.phase(), DockPhase::ApproachAbove);
  EXPECT_TRUE(fsm.bounced());
}

TEST(DockingFsm, ImpactOutcomes) {
  DockingFsm a(DockingConfig{}, DockPhase::FreeFall);
  a.on_impact({true, false, 0.0}, Vec3::Zero());
  EXPECT_EQ(a.phase(), DockPhase::Docked);
  DockingFsm b(DockingConfig{}, DockPhase::FreeFall);
  b.on_impact({false, false, 0.0}, Vec3::Zero());
  EXPECT_EQ(b.phase(), DockPhase::ApproachAbove);
  EXPECT_TRUE(b.bounced());
}

TEST(CaptureCheck, InsideFunnelEngagesBoth) {
  SimRng rng(3);
  const auto c = capture_check(0.019, DockThresholds{}, 0.0, rng);
  EXPECT_TRUE(c.mechanical_engaged);
  EXPECT_TRUE(c.electrical_engaged);
}

TEST(CaptureCheck, OutsideFunnelEngagesNothing) {
  SimRng rng(3);
  const auto c = capture_check(0.025, DockThresholds{}, 0.0, rng);
  EXPECT_FALSE(c.mechanical_engaged);
  EXPECT_FALSE(c.electrical_engaged);
}

TEST(CaptureCheck, CertainFailureIsMechanicalOnly) {
  SimRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto c = capture_check(0.0, DockThresholds{}, 1.0, rng);
    EXPECT_TRUE(c.mechanical_engaged);
    EXPECT_FALSE(c.electrical_engaged);
  }
}

TEST(CaptureCheck, ElectricalImpliesMechanicalProperty) {
  SimRng rng(11);
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> lat(0.0, 0.05), p(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const auto c = capture_check(lat(gen), DockThresholds{}, p(gen), rng);
    if (c.electrical_engaged) {
      EXPECT_TRUE(c.mechanical_engaged);
    }
  }
  EXPECT_EQ(rng.draws(), 100000u);
}

TEST(DockingFsm, RandomFuzzStaysOnGraph) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> lat(0.0, 0.4), gap(-0.1, 0.5), u(0.0, 1.0);
  SimRng rng(22);
  for (int run = 0; run < 200; ++run) {
    DockingFsm fsm(DockingConfig{}, static_cast<DockPhase>(run % 9));
    for (int k = 0; k < 2000; ++k) {
      DockInputs in;
      in.rel = {u(gen) < 0.3 ? 0.01 * u(gen) : lat(gen), u(gen) < 0.3 ? 0.3 + 0.01 * (u(gen) - 0.5) : gap(gen)};
      in.commands.dock = u(gen) < 0.2;
      in.commands.undock = u(gen) < 0.2;
      in.commands.platform_clear = u(gen) < 0.8;
      in.platform_center = Vec3(0, 0, 1.6);
      in.pad = Vec3(3, 0, 0);
      in.position = Vec3(u(gen), u(gen), 2.0 * u(gen));
      in.velocity = Vec3::Constant(0.05 * u(gen));
      in.on_ground = u(gen) < 0.2;
      const DockPhase before = fsm.phase();
      const bool both_hold = in.rel.lateral <= 0.020 && in.rel.vertical_gap <= 0.050;
      fsm.step(in, 0.01 + 2.0 * u(gen));
      if (const auto tr = fsm.last_transition()) {
        EXPECT_EQ(tr->first, before);
        EXPECT_TRUE(is_allowed_transition(tr->first, tr->second))
            << to_string(tr->first) << " -> " << to_string(tr->second);
        if (tr->second == DockPhase::FreeFall) {
          EXPECT_TRUE(both_hold);
        }
      } else {
        EXPECT_EQ(fsm.phase(), before);
      }
      if (fsm.phase() == DockPhase::FreeFall && u(gen) < 0.5) {
        fsm.on_impact(capture_check(0.03 * u(gen), DockThresholds{}, 0.1, rng), in.position);
        if (const auto tr = fsm.last_transition()) {
          EXPECT_EQ(tr->first, DockPhase::FreeFall);
          EXPECT_TRUE(is_allowed_transition(tr->first, tr->second));
        }
      }
    }
  }
}

TEST(ManeuverDurations, EmptyTraceIsAbsent) {
  const auto d = maneuver_durations({});
  EXPECT_FALSE(d.dock_time.has_value());
  EXPECT_FALSE(d.undock_time.has_value());
}

TEST(ManeuverDurations, IncompleteCycleFlagsUndock) {
  using P = DockPhase;
  const std::vector<PhaseTransition> trace{{1.0, 0, P::Grounded, P::Takeoff}, {21.0, 0, P::FreeFall, P::Docked},
                                           {30.0, 0, P::Docked, P::UndockAscend}};
  const auto d = maneuver_durations(trace);
  ASSERT_TRUE(d.dock_time.has_value());
  EXPECT_DOUBLE_EQ(*d.dock_time, 20.0);
  EXPECT_FALSE(d.undock_time.has_value());
}

TEST(DockingSim, DefaultCycleDurationsInBand) {
  const Scenario s = flybatt::testing::cycling_scenario(120.0);
  World w(s, flybatt::testing::feedforward_for("paper_demo"));
  w.run_to_end();
  const auto d = maneuver_durations(w.log().transitions());
  ASSERT_TRUE(d.dock_time.has_value());
  ASSERT_TRUE(d.undock_time.has_value());
  EXPECT_GE(*d.dock_time, 15.0);
  EXPECT_LE(*d.dock_time, 30.0);
  EXPECT_GE(*d.undock_time, 5.0);
  EXPECT_LE(*d.undock_time, 12.0);
}

TEST(DockingSim, HundredConsecutiveDockCyclesMakeContact) {
  const Scenario s = flybatt::testing::cycling_scenario(6000.0);
  World w(s, flybatt::testing::feedforward_for("paper_demo"));
  int contacts = 0;
  std::size_t seen = 0;
  while (!w.finished() && contacts < 100) {
    w.step();
    const auto& ev = w.log().events();
    for (; seen < ev.size(); ++seen) contacts += ev[seen].kind == EventKind::ElectricalContact;
  }
  const auto r = w.result();
  EXPECT_EQ(contacts, 100);
  EXPECT_EQ(r.summary.bounces, 0);
  EXPECT_EQ(r.summary.contact_failures, 0);
  EXPECT_EQ(w.log().count(EventKind::DockCommand), 100u);
}
