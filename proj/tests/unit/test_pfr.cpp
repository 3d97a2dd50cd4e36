#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "loadclust/pfr.hpp"

namespace lc = loadclust;

namespace {

lc::CompositeLoadModel sample_model(double p = 0.55) {
  lc::CompositeLoadModel m;
  m.dyn_proportion = p;
  m.active_static = {0.25, 0.35, 0.40};
  m.reactive_static = {0.45, 0.25, 0.30};
  m.motor.x_open = 2.6;
  m.motor.x_transient = 0.21;
  m.motor.t_open = 1.1;
  m.motor.inertia = 3.2;
  m.motor.torque_mech = 0.0;
  m.motor.torque_mech = 0.4 * lc::motor_pullout_torque(m.motor, 1.0);
  m.nominal_p = 0.75;
  m.nominal_q = 0.3;
  return m;
}

lc::FaultScenario dip(double depth, const char* label = "dip") {
  lc::FaultScenario sc;
  sc.label = label;
  sc.fault_depth = depth;
  return sc;
}

}  // namespace

TEST(VoltageTemplate, PlateauAndRecovery) {
  const auto sc = dip(0.3);
  EXPECT_EQ(lc::voltage_at(sc, 0.2), 1.0);
  EXPECT_EQ(lc::voltage_at(sc, 0.55), 0.3);
  EXPECT_EQ(lc::voltage_at(sc, sc.t_fault_on), 0.3);
  EXPECT_NEAR(lc::voltage_at(sc, sc.t_clear + sc.recovery_time_constant), 1.0 - 0.7 * std::exp(-1.0),
              1e-15);
  EXPECT_NEAR(lc::voltage_at(sc, sc.t_clear + sc.recovery_time_constant), 0.7425, 5e-5);
  EXPECT_DOUBLE_EQ(lc::voltage_at(sc, sc.t_clear), 0.3);  // recovery starts at the plateau
}

TEST(Validate, RejectsBadScenariosAndConfigs) {
  auto sc = dip(0.3);
  sc.fault_depth = 1.0;
  EXPECT_THROW(lc::validate(sc), lc::InvalidArgument);
  sc = dip(0.3);
  sc.t_clear = sc.t_fault_on;
  EXPECT_THROW(lc::validate(sc), lc::InvalidArgument);
  lc::SimConfig cfg;
  cfg.horizon = 1.0;  // shorter than t_clear + 1 s
  EXPECT_THROW(lc::validate(cfg, dip(0.3)), lc::InvalidArgument);
  cfg = {};
  cfg.dt = 0.0;
  EXPECT_THROW(lc::validate(cfg), lc::InvalidArgument);
}

TEST(SimulatePfr, GridAndNominalStart) {
  const lc::SimConfig cfg;
  const auto c = lc::simulate_pfr(sample_model(), dip(0.45), cfg);
  ASSERT_EQ(c.size(), 501u);
  EXPECT_EQ(c.p_values.size(), c.size());
  for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(c.times[k], 0.01 * k, 1e-12);
  EXPECT_NEAR(c.p_values[0], 0.75, 1e-12);
  EXPECT_NEAR(c.q_values[0], 0.3, 1e-12);
}

TEST(SimulatePfr, FlatBeforeTheFault) {
  const auto c = lc::simulate_pfr(sample_model(), dip(0.45), {});
  for (std::size_t k = 0; c.times[k] < 0.5 - 1e-9; ++k) {
    EXPECT_NEAR(c.p_values[k], 0.75, 1e-6);
    EXPECT_NEAR(c.q_values[k], 0.3, 1e-6);
  }
}

TEST(SimulatePfr, StaticLimitIsClosedFormZip) {
  const auto m = sample_model(0.0);
  const lc::SimConfig cfg;
  for (const auto& sc : lc::standard_fault_suite()) {
    const auto c = lc::simulate_pfr(m, sc, cfg);
    for (std::size_t k = 0; k < c.size(); ++k) {
      // Sample times sitting on an event belong to the segment starting there.
      const double u =
          lc::voltage_on_segment(sc, lc::segment_at(sc, c.times[k], 1e-9 * cfg.dt), c.times[k]);
      EXPECT_EQ(c.p_values[k], m.nominal_p * lc::zip_power(m.active_static, u));
      EXPECT_EQ(c.q_values[k], m.nominal_q * lc::zip_power(m.reactive_static, u));
    }
  }
}

TEST(SimulatePfr, ShallowDipBarelyMovesTheCurve) {
  auto sc = dip(0.999);
  const auto c = lc::simulate_pfr(sample_model(), sc, {});
  for (std::size_t k = 0; k < c.size(); ++k) {
    EXPECT_LT(std::abs(c.p_values[k] - 0.75), 0.01 * 0.75);
    EXPECT_LT(std::abs(c.q_values[k] - 0.3), 0.01 * 0.75);
  }
}

TEST(SimulatePfr, HalvingTheStepChangesSamplesLittle) {
  lc::SimConfig coarse;
  lc::SimConfig fine;
  fine.dt = 0.005;
  for (const auto& sc : lc::standard_fault_suite()) {
    const auto a = lc::simulate_pfr(sample_model(), sc, coarse);
    const auto b = lc::simulate_pfr(sample_model(), sc, fine);
    ASSERT_EQ(b.size(), 2 * a.size() - 1);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      worst = std::max(worst, std::abs(a.p_values[k] - b.p_values[2 * k]));
      worst = std::max(worst, std::abs(a.q_values[k] - b.q_values[2 * k]));
    }
    EXPECT_LT(worst, 1e-4) << sc.label;
  }
}

TEST(SimulatePfr, BitIdenticalOnRepeat) {
  const auto a = lc::simulate_pfr(sample_model(), dip(0.2), {});
  const auto b = lc::simulate_pfr(sample_model(), dip(0.2), {});
  EXPECT_EQ(a, b);
}

TEST(SimulatePfr, StallingMotorDiverges) {
  auto m = sample_model(1.0);
  m.motor.torque_mech = 0.95 * lc::motor_pullout_torque(m.motor, 1.0);
  m.motor.inertia = 0.3;
  auto sc = dip(0.1);
  sc.t_clear = 1.5;
  lc::SimConfig cfg;
  cfg.horizon = 3.0;
  EXPECT_THROW(lc::simulate_pfr(m, sc, cfg), lc::Diverged);
}

TEST(SimulatePfr, OverloadedMotorHasNoEquilibrium) {
  auto m = sample_model();
  m.motor.torque_mech = 2.0 * lc::motor_pullout_torque(m.motor, 1.0);
  EXPECT_THROW(lc::simulate_pfr(m, dip(0.3), {}), lc::NoEquilibrium);
}

TEST(SimulatePfr, TheveninStartsAtNominalAndFeedsBack) {
  lc::SimConfig cfg;
  cfg.excitation_mode = lc::ExcitationMode::thevenin;
  const auto m = sample_model();
  const auto sc = dip(0.5);
  const auto c = lc::simulate_pfr(m, sc, cfg);
  const auto playback = lc::simulate_pfr(m, sc, {});
  EXPECT_NEAR(c.p_values[0], m.nominal_p, 1e-8);
  EXPECT_NEAR(c.q_values[0], m.nominal_q, 1e-8);
  // The feedback makes the responses differ from pure playback.
  double diff = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) diff = std::max(diff, std::abs(c.p_values[k] - playback.p_values[k]));
  EXPECT_GT(diff, 1e-3);
}

TEST(SimulateBundle, OneScenarioMatchesSingleCurve) {
  const std::vector<lc::FaultScenario> suite{dip(0.45)};
  const auto b = lc::simulate_bundle(sample_model(), suite, {});
  ASSERT_EQ(b.fault_count(), 1u);
  EXPECT_EQ(b.curves[0], lc::simulate_pfr(sample_model(), dip(0.45), {}));
}

TEST(SimulateBundle, PermutingTheSuitePermutesCurves) {
  auto suite = lc::standard_fault_suite();
  const auto b = lc::simulate_bundle(sample_model(), suite, {});
  std::reverse(suite.begin(), suite.end());
  const auto r = lc::simulate_bundle(sample_model(), suite, {});
  ASSERT_EQ(b.fault_count(), 3u);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(b.curves[s], r.curves[2 - s]);
}

TEST(SimulateBundle, ErrorsCarryTheScenarioLabel) {
  auto m = sample_model(1.0);
  m.motor.torque_mech = 0.95 * lc::motor_pullout_torque(m.motor, 1.0);
  m.motor.inertia = 0.3;
  auto sc = dip(0.1, "deep-long");
  sc.t_clear = 1.5;
  lc::SimConfig cfg;
  cfg.horizon = 3.0;
  const std::vector<lc::FaultScenario> suite{sc};
  try {
    lc::simulate_bundle(m, suite, cfg);
    FAIL() << "expected Diverged";
  } catch (const lc::Diverged& e) {
    EXPECT_NE(std::string(e.what()).find("deep-long"), std::string::npos);
  }
}

TEST(StaticOnly, ConstantPowerActiveComponentIsFlat) {
  const auto b = lc::static_only_bundle({0.0, 0.0, 1.0}, lc::StaticComponent::active,
                                        lc::standard_fault_suite(), {});
  for (const auto& c : b.curves) {
    for (double p : c.p_values) EXPECT_EQ(p, 1.0);
  }
}

TEST(StaticOnly, HeldComponentStaysAtNominal) {
  const auto b = lc::static_only_bundle({0.6, 0.2, 0.2}, lc::StaticComponent::reactive,
                                        lc::standard_fault_suite(), {});
  for (const auto& c : b.curves) {
    for (double p : c.p_values) EXPECT_EQ(p, 1.0);
  }
}

TEST(StaticOnly, ImpedanceVersusConstantPowerPlateauGap) {
  const std::vector<lc::FaultScenario> suite{dip(0.3)};
  const auto z = lc::static_only_bundle({1.0, 0.0, 0.0}, lc::StaticComponent::active, suite, {});
  const auto p = lc::static_only_bundle({0.0, 0.0, 1.0}, lc::StaticComponent::active, suite, {});
  const std::size_t mid = 55;  // t = 0.55 s, on the plateau
  EXPECT_NEAR(p.curves[0].p_values[mid] - z.curves[0].p_values[mid], 0.91, 1e-12);
}

TEST(DynamicOnly, MatchesCompositeWithFullProportion) {
  const auto m = sample_model(1.0);
  const auto suite = lc::standard_fault_suite();
  auto unit = m;
  unit.nominal_p = 1.0;
  unit.nominal_q = 1.0;
  EXPECT_EQ(lc::dynamic_only_bundle(m.motor, suite, {}), lc::simulate_bundle(unit, suite, {}));
}

TEST(DynamicOnly, HeavierRotorPeaksLater) {
  auto light = sample_model(1.0).motor;
  auto heavy = light;
  heavy.inertia = 2.0 * light.inertia;
  const std::vector<lc::FaultScenario> suite{dip(0.45)};
  // Slip is internal to the simulator, so peak times come from an explicit
  // Euler trace at a much finer step.
  const auto trace_peak = [&](const lc::MotorParams& mp) {
    lc::CompositeLoadModel m;
    m.dyn_proportion = 1.0;
    m.motor = mp;
    const auto op = lc::initialize(m, 1.0);
    lc::MotorState st = op.motor;
    const double h = 1e-4;
    double best_s = st.slip;
    double best_t = 0.0;
    for (int k = 0; k < 30000; ++k) {
      const double t = k * h;
      const double u = lc::voltage_at(suite[0], t);
      const auto d = lc::motor_derivatives(st, mp, u, 0.0);
      st = {st.e_d + h * d.e_d, st.e_q + h * d.e_q, st.slip + h * d.slip};
      if (st.slip > best_s) {
        best_s = st.slip;
        best_t = t;
      }
    }
    return best_t;
  };
  EXPECT_GT(trace_peak(heavy), trace_peak(light));
  EXPECT_NE(lc::dynamic_only_bundle(light, suite, {}), lc::dynamic_only_bundle(heavy, suite, {}));
}

TEST(StandardSuite, ThreeIncreasingValidDips) {
  const auto suite = lc::standard_fault_suite();
  ASSERT_EQ(suite.size(), 3u);
  EXPECT_LT(suite[0].fault_depth, suite[1].fault_depth);
  EXPECT_LT(suite[1].fault_depth, suite[2].fault_depth);
  const lc::SimConfig cfg;
  for (const auto& sc : suite) EXPECT_NO_THROW(lc::validate(cfg, sc));
}
