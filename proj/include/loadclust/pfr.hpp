#pragma once

// Post-fault response (PFR) generation. A load model is connected to a test
// bus whose voltage follows a dip/recovery template (playback mode) or is
// solved each step from a source behind a reactance (thevenin mode), and the
// motor states are integrated with fixed-step classical RK4.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "loadclust/errors.hpp"
#include "loadclust/load_model.hpp"

namespace loadclust {

struct FaultScenario {
  std::string label = "fault";
  double pre_fault_voltage = 1.0;
  double fault_depth = 0.5;  // voltage magnitude held during the fault
  double t_fault_on = 0.5;
  double t_clear = 0.6;
  double recovery_time_constant = 0.05;

  bool operator==(const FaultScenario&) const = default;
};

enum class ExcitationMode { playback, thevenin };

struct SimConfig {
  double dt = 0.01;
  double horizon = 5.0;
  double base_mva = 100.0;
  ExcitationMode excitation_mode = ExcitationMode::playback;
  /// Source reactance in thevenin mode, pu on the system base.
  double thevenin_reactance = 0.1;
};

struct PfrCurve {
  std::vector<double> times;
  std::vector<double> p_values;
  std::vector<double> q_values;

  std::size_t size() const { return times.size(); }
  bool operator==(const PfrCurve&) const = default;
};

struct PfrBundle {
  std::vector<PfrCurve> curves;

  std::size_t fault_count() const { return curves.size(); }
  bool operator==(const PfrBundle&) const = default;
};

inline void validate(const FaultScenario& sc) {
  const auto fail = [&](const char* msg) {
    throw InvalidArgument("fault scenario '" + sc.label + "': " + msg);
  };
  if (!(sc.pre_fault_voltage > 0.0)) fail("pre_fault_voltage must be > 0");
  if (!(sc.fault_depth >= 0.0 && sc.fault_depth < sc.pre_fault_voltage)) {
    fail("requires 0 <= fault_depth < pre_fault_voltage");
  }
  if (!(sc.t_fault_on >= 0.0 && sc.t_fault_on < sc.t_clear)) {
    fail("requires 0 <= t_fault_on < t_clear");
  }
  if (!(sc.recovery_time_constant > 0.0)) fail("recovery_time_constant must be > 0");
}

inline void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("sim config: dt must be > 0");
  if (!(cfg.horizon > 0.0)) throw InvalidArgument("sim config: horizon must be > 0");
  if (!(cfg.thevenin_reactance >= 0.0)) {
    throw InvalidArgument("sim config: thevenin_reactance must be >= 0");
  }
}

inline void validate(const SimConfig& cfg, const FaultScenario& sc) {
  validate(cfg);
  validate(sc);
  if (cfg.horizon < sc.t_clear + 1.0) {
    throw InvalidArgument("sim config: horizon shorter than t_clear + 1 s for '" +
                          sc.label + "'");
  }
}

// ---------------------------------------------------------------------------
// Voltage template

enum class FaultSegment { pre_fault, on_fault, recovery };

/// Template evaluated on a fixed segment. Integrator stages that touch a
/// segment boundary use the one-sided limit of the segment they belong to.
inline double voltage_on_segment(const FaultScenario& sc, FaultSegment seg, double t) {
  switch (seg) {
    case FaultSegment::pre_fault:
      return sc.pre_fault_voltage;
    case FaultSegment::on_fault:
      return sc.fault_depth;
    case FaultSegment::recovery:
      break;
  }
  return sc.pre_fault_voltage - (sc.pre_fault_voltage - sc.fault_depth) *
                                    std::exp(-(t - sc.t_clear) / sc.recovery_time_constant);
}

inline FaultSegment segment_at(const FaultScenario& sc, double t, double eps = 0.0) {
  if (t < sc.t_fault_on - eps) return FaultSegment::pre_fault;
  if (t < sc.t_clear - eps) return FaultSegment::on_fault;
  return FaultSegment::recovery;
}

inline double voltage_at(const FaultScenario& sc, double t) {
  return voltage_on_segment(sc, segment_at(sc, t), t);
}

// ---------------------------------------------------------------------------
// Simulation

namespace detail {

inline constexpr double kMaxEmf = 10.0;
inline constexpr double kMinSlip = -0.5;
inline constexpr double kMaxSlip = 1.5;
inline constexpr double kTheveninTol = 1e-8;
inline constexpr int kTheveninMaxIter = 2000;
inline constexpr double kMinRelax = 1.0 / 64.0;

class BusSolver {
 public:
  BusSolver(const CompositeLoadModel& model, const OperatingPoint& op,
            const FaultScenario& sc, const SimConfig& cfg)
      : model_(model), op_(op), sc_(sc), thevenin_(cfg.excitation_mode == ExcitationMode::thevenin),
        x_th_(cfg.thevenin_reactance) {
    const double u0 = sc.pre_fault_voltage;
    // Source EMF that holds the bus at u0 with the nominal load attached.
    source0_ = {u0 + x_th_ * model.nominal_q / u0, x_th_ * model.nominal_p / u0};
    last_ = {u0, 0.0};
  }

  std::complex<double> voltage(const MotorState& st, FaultSegment seg, double t) {
    const double v = voltage_on_segment(sc_, seg, t);
    if (!thevenin_) return {v, 0.0};
    const std::complex<double> source = source0_ * (v / sc_.pre_fault_voltage);
    const std::complex<double> jx{0.0, x_th_};
    // Fixed-point iteration on U = E - jX conj(S(U)/U), under-relaxed
    // whenever the update stops contracting.
    std::complex<double> u = last_;
    double relax = 1.0;
    double prev_step = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kTheveninMaxIter; ++it) {
      const PowerPair s = composite_power(model_, op_, st, u.real(), u.imag());
      const std::complex<double> current = std::conj(std::complex<double>{s.p, s.q} / u);
      const std::complex<double> target = source - jx * current;
      if (!std::isfinite(target.real()) || !std::isfinite(target.imag())) break;
      const double step = std::abs(target - u);
      if (step < kTheveninTol) {
        last_ = target;
        return target;
      }
      if (step >= prev_step && relax > kMinRelax) relax *= 0.5;
      prev_step = step;
      u += relax * (target - u);
      if (std::abs(u) < 1e-6) break;
    }
    std::ostringstream os;
    os << "scenario '" << sc_.label << "': thevenin voltage solve failed at t=" << t;
    throw Diverged(t, os.str());
  }

 private:
  const CompositeLoadModel& model_;
  const OperatingPoint& op_;
  const FaultScenario& sc_;
  bool thevenin_;
  double x_th_;
  std::complex<double> source0_;
  std::complex<double> last_;
};

inline MotorState axpy(const MotorState& y, double h, const MotorState& k) {
  return {y.e_d + h * k.e_d, y.e_q + h * k.e_q, y.slip + h * k.slip};
}

inline void check_bounds(const MotorState& st, const FaultScenario& sc, double t) {
  const double emf = std::hypot(st.e_d, st.e_q);
  if (!(emf <= kMaxEmf) || !(st.slip >= kMinSlip && st.slip <= kMaxSlip)) {
    std::ostringstream os;
    os << "scenario '" << sc.label << "': motor state left the sanity region at t=" << t
       << " (|E|=" << emf << ", s=" << st.slip << ")";
    throw Diverged(t, os.str());
  }
}

}  // namespace detail

inline PfrCurve simulate_pfr(const CompositeLoadModel& model, const FaultScenario& sc,
                             const SimConfig& cfg) {
  validate(cfg, sc);
  const OperatingPoint op = initialize(model, sc.pre_fault_voltage);
  detail::BusSolver bus(model, op, sc, cfg);

  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
  const double eps = 1e-9 * cfg.dt;
  PfrCurve curve;
  curve.times.reserve(steps + 1);
  curve.p_values.reserve(steps + 1);
  curve.q_values.reserve(steps + 1);

  MotorState st = op.motor;
  const auto record = [&](double t) {
    const auto u = bus.voltage(st, segment_at(sc, t, eps), t);
    const PowerPair s = composite_power(model, op, st, u.real(), u.imag());
    if (!std::isfinite(s.p) || !std::isfinite(s.q)) {
      throw Diverged(t, "scenario '" + sc.label + "': non-finite power");
    }
    curve.times.push_back(t);
    curve.p_values.push_back(s.p);
    curve.q_values.push_back(s.q);
  };

  const auto rhs = [&](FaultSegment seg, double t, const MotorState& y) {
    const auto u = bus.voltage(y, seg, t);
    return motor_derivatives(y, model.motor, u.real(), u.imag());
  };

  const auto rk4 = [&](double ta, double tb) {
    const double h = tb - ta;
    const FaultSegment seg = segment_at(sc, 0.5 * (ta + tb));
    const MotorState k1 = rhs(seg, ta, st);
    const MotorState k2 = rhs(seg, ta + 0.5 * h, detail::axpy(st, 0.5 * h, k1));
    const MotorState k3 = rhs(seg, ta + 0.5 * h, detail::axpy(st, 0.5 * h, k2));
    const MotorState k4 = rhs(seg, tb, detail::axpy(st, h, k3));
    st.e_d += h / 6.0 * (k1.e_d + 2.0 * k2.e_d + 2.0 * k3.e_d + k4.e_d);
    st.e_q += h / 6.0 * (k1.e_q + 2.0 * k2.e_q + 2.0 * k3.e_q + k4.e_q);
    st.slip += h / 6.0 * (k1.slip + 2.0 * k2.slip + 2.0 * k3.slip + k4.slip);
  };

  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double ta = static_cast<double>(k) * cfg.dt;
    const double tb = static_cast<double>(k + 1) * cfg.dt;
    if (op.has_motor) {
      // Split the step at fault events that fall strictly inside it.
      double start = ta;
      for (double event : {sc.t_fault_on, sc.t_clear}) {
        if (event > start + eps && event < tb - eps) {
          rk4(start, event);
          start = event;
        }
      }
      rk4(start, tb);
      detail::check_bounds(st, sc, tb);
    }
    record(tb);
  }
  return curve;
}

namespace detail {

template <typename Fn>
PfrBundle bundle_over(std::span<const FaultScenario> suite, Fn&& simulate_one) {
  if (suite.empty()) throw InvalidArgument("fault suite is empty");
  PfrBundle bundle;
  bundle.curves.reserve(suite.size());
  for (const FaultScenario& sc : suite) {
    try {
      bundle.curves.push_back(simulate_one(sc));
    } catch (const NoEquilibrium& e) {
      throw NoEquilibrium(e.torque_gap(), "[" + sc.label + "] " + e.what());
    } catch (const Diverged& e) {
      throw Diverged(e.time(), "[" + sc.label + "] " + e.what());
    }
  }
  return bundle;
}

}  // namespace detail

inline PfrBundle simulate_bundle(const CompositeLoadModel& model,
                                 std::span<const FaultScenario> suite, const SimConfig& cfg) {
  return detail::bundle_over(suite, [&](const FaultScenario& sc) {
    return simulate_pfr(model, sc, cfg);
  });
}

enum class StaticComponent {
  active,    // P follows the ZIP law, Q held at its nominal value
  reactive,  // Q follows the ZIP law, P held at its nominal value
};

/// Unit-nominal static load used to compare ZIP coefficient sets in isolation.
inline CompositeLoadModel static_test_load(const ZipParams& zip, StaticComponent which) {
  CompositeLoadModel m;
  m.dyn_proportion = 0.0;
  m.nominal_p = 1.0;
  m.nominal_q = 1.0;
  const ZipParams constant_power{0.0, 0.0, 1.0};
  m.active_static = which == StaticComponent::active ? zip : constant_power;
  m.reactive_static = which == StaticComponent::reactive ? zip : constant_power;
  return m;
}

/// Unit-nominal pure motor load.
inline CompositeLoadModel dynamic_test_load(const MotorParams& mp) {
  CompositeLoadModel m;
  m.dyn_proportion = 1.0;
  m.nominal_p = 1.0;
  m.nominal_q = 1.0;
  m.active_static = {0.0, 0.0, 1.0};
  m.reactive_static = {0.0, 0.0, 1.0};
  m.motor = mp;
  return m;
}

inline PfrBundle static_only_bundle(const ZipParams& zip, StaticComponent which,
                                    std::span<const FaultScenario> suite, const SimConfig& cfg) {
  return simulate_bundle(static_test_load(zip, which), suite, cfg);
}

inline PfrBundle dynamic_only_bundle(const MotorParams& mp, std::span<const FaultScenario> suite,
                                     const SimConfig& cfg) {
  return simulate_bundle(dynamic_test_load(mp), suite, cfg);
}

/// Three dips of increasing retained voltage, 100 ms fault, 50 ms recovery.
inline std::vector<FaultScenario> standard_fault_suite() {
  std::vector<FaultScenario> suite;
  for (const auto& [label, depth] : {std::pair{"dip020", 0.20}, std::pair{"dip045", 0.45},
                                     std::pair{"dip070", 0.70}}) {
    FaultScenario sc;
    sc.label = label;
    sc.pre_fault_voltage = 1.0;
    sc.fault_depth = depth;
    sc.t_fault_on = 0.5;
    sc.t_clear = 0.6;
    sc.recovery_time_constant = 0.05;
    suite.push_back(sc);
  }
  return suite;
}

/// Held-out disturbance used by validation; not part of the clustering suite.
inline FaultScenario default_validation_fault() {
  FaultScenario sc;
  sc.label = "validation";
  sc.pre_fault_voltage = 1.0;
  sc.fault_depth = 0.5;
  sc.t_fault_on = 0.5;
  sc.t_clear = 0.62;
  sc.recovery_time_constant = 0.08;
  return sc;
}

}  // namespace loadclust
