#pragma once

// Composite load model: a ZIP static part in parallel with a third-order
// induction motor, mixed by the dynamic proportion p.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "loadclust/errors.hpp"

namespace loadclust {

inline constexpr double kDefaultOmegaSync = 2.0 * std::numbers::pi * 60.0;
inline constexpr double kZipSumTolerance = 1e-9;

/// Static coefficients of one power component (P or Q):
/// S(U) = z U^2 + i U + p. The coefficients sum to 1.
struct ZipParams {
  double z_coeff = 0.0;
  double i_coeff = 0.0;
  double p_coeff = 1.0;

  double sum() const { return z_coeff + i_coeff + p_coeff; }
  bool operator==(const ZipParams&) const = default;
};

struct MotorParams {
  double x_open = 3.0;       // X
  double x_transient = 0.2;  // X'
  double t_open = 1.0;       // T_d0, s
  double inertia = 3.0;      // H_2, s
  double torque_mech = 1.0;  // T_m
  double omega_sync = kDefaultOmegaSync;

  bool operator==(const MotorParams&) const = default;
};

struct MotorState {
  double e_d = 0.0;
  double e_q = 0.0;
  double slip = 0.0;

  bool operator==(const MotorState&) const = default;
};

struct CompositeLoadModel {
  double dyn_proportion = 0.5;
  ZipParams active_static;
  ZipParams reactive_static;
  MotorParams motor;
  double nominal_p = 1.0;
  double nominal_q = 0.5;

  bool operator==(const CompositeLoadModel&) const = default;
};

struct PowerPair {
  double p = 0.0;
  double q = 0.0;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const ZipParams& zip, const char* what = "zip") {
  if (!(zip.z_coeff >= 0.0 && zip.i_coeff >= 0.0 && zip.p_coeff >= 0.0)) {
    throw InvalidArgument(std::string(what) + ": negative ZIP coefficient");
  }
  if (std::abs(zip.sum() - 1.0) > kZipSumTolerance) {
    std::ostringstream os;
    os << what << ": ZIP coefficients sum to " << zip.sum() << ", expected 1";
    throw InvalidArgument(os.str());
  }
}

inline void validate(const MotorParams& mp) {
  if (!(mp.x_transient > 0.0 && mp.x_open > mp.x_transient)) {
    throw InvalidArgument("motor: requires x_open > x_transient > 0");
  }
  if (!(mp.t_open > 0.0 && mp.inertia > 0.0 && mp.omega_sync > 0.0)) {
    throw InvalidArgument("motor: t_open, inertia and omega_sync must be > 0");
  }
  if (!(mp.torque_mech >= 0.0)) {
    throw InvalidArgument("motor: torque_mech must be >= 0");
  }
}

inline void validate(const CompositeLoadModel& m) {
  if (!(m.dyn_proportion >= 0.0 && m.dyn_proportion <= 1.0)) {
    throw InvalidArgument("model: dyn_proportion outside [0, 1]");
  }
  if (!(m.nominal_p > 0.0)) throw InvalidArgument("model: nominal_p must be > 0");
  if (!std::isfinite(m.nominal_q)) throw InvalidArgument("model: nominal_q not finite");
  validate(m.active_static, "active_static");
  validate(m.reactive_static, "reactive_static");
  validate(m.motor);
}

/// Result of rescaling raw ZIP coefficients so they sum to one.
struct NormalizedZip {
  ZipParams zip;
  double raw_sum = 1.0;

  bool deviated(double tol = 1e-6) const { return std::abs(raw_sum - 1.0) > tol; }
};

inline NormalizedZip normalize_zip(const ZipParams& raw) {
  const double s = raw.sum();
  if (!(s > 0.0)) throw InvalidArgument("zip: coefficients sum to a non-positive value");
  return {{raw.z_coeff / s, raw.i_coeff / s, raw.p_coeff / s}, s};
}

// ---------------------------------------------------------------------------
// Static part

inline double zip_power(const ZipParams& zip, double u) {
  return zip.z_coeff * u * u + zip.i_coeff * u + zip.p_coeff;
}

// ---------------------------------------------------------------------------
// Induction motor

namespace detail {

// Coefficients of the linear EMF equations: dE/dt = -a E + rotation + b U.
struct MotorCoeffs {
  double a;
  double b;
};

inline MotorCoeffs motor_coeffs(const MotorParams& mp) {
  const double ratio = mp.x_open / mp.x_transient;
  return {ratio / mp.t_open, (ratio - 1.0) / mp.t_open};
}

}  // namespace detail

inline MotorState motor_derivatives(const MotorState& st, const MotorParams& mp,
                                    double u_d, double u_q) {
  const auto [a, b] = detail::motor_coeffs(mp);
  const double w = st.slip * mp.omega_sync;
  const double torque_e = (st.e_d * u_q - st.e_q * u_d) / mp.x_transient;
  return {
      -a * st.e_d + w * st.e_q + b * u_d,
      -a * st.e_q - w * st.e_d + b * u_q,
      (mp.torque_mech - torque_e) / mp.inertia,
  };
}

inline PowerPair motor_output(const MotorState& st, const MotorParams& mp,
                              double u_d, double u_q) {
  return {
      (st.e_d * u_q - st.e_q * u_d) / mp.x_transient,
      (u_d * u_d + u_q * u_q - u_d * st.e_d - u_q * st.e_q) / mp.x_transient,
  };
}

/// Steady-state electrical torque at slip s and terminal voltage magnitude u.
inline double motor_steady_torque(const MotorParams& mp, double slip, double u) {
  const auto [a, b] = detail::motor_coeffs(mp);
  const double w = slip * mp.omega_sync;
  return b * w * u * u / ((a * a + w * w) * mp.x_transient);
}

/// Slip at which the steady-state torque peaks.
inline double motor_peak_slip(const MotorParams& mp) {
  return detail::motor_coeffs(mp).a / mp.omega_sync;
}

/// Maximum (pull-out) steady-state electrical torque at voltage u.
inline double motor_pullout_torque(const MotorParams& mp, double u) {
  const auto [a, b] = detail::motor_coeffs(mp);
  return b * u * u / (2.0 * a * mp.x_transient);
}

/// Equilibrium EMF for a given slip with the voltage (u_d, u_q) applied.
inline MotorState motor_state_at_slip(const MotorParams& mp, double slip,
                                      double u_d, double u_q) {
  const auto [a, b] = detail::motor_coeffs(mp);
  const double w = slip * mp.omega_sync;
  const double det = a * a + w * w;
  return {b * (a * u_d + w * u_q) / det, b * (a * u_q - w * u_d) / det, slip};
}

/// Motoring equilibrium at voltage magnitude u, placed on the d-axis.
/// Of the two roots of T_e(s) = T_m the lower-slip (stable) one is returned.
inline MotorState motor_init_steady_state(const MotorParams& mp, double u) {
  validate(mp);
  if (!(u > 0.0)) throw InvalidArgument("motor_init_steady_state: voltage must be > 0");
  const double tm = mp.torque_mech;
  if (tm == 0.0) return motor_state_at_slip(mp, 0.0, u, 0.0);

  const double t_max = motor_pullout_torque(mp, u);
  if (tm > t_max) {
    std::ostringstream os;
    os << "no motoring equilibrium: T_m=" << tm << " exceeds pull-out torque "
       << t_max << " at U=" << u << " (gap " << tm - t_max << ")";
    throw NoEquilibrium(tm - t_max, os.str());
  }
  // T_m X' w0^2 s^2 - b w0 U^2 s + T_m X' a^2 = 0, lower root in the
  // cancellation-free form.
  const auto [a, b] = detail::motor_coeffs(mp);
  const double w0 = mp.omega_sync;
  const double lin = b * w0 * u * u;
  const double quad = tm * mp.x_transient * w0 * w0;
  const double cst = tm * mp.x_transient * a * a;
  const double disc = std::max(0.0, lin * lin - 4.0 * quad * cst);
  const double slip = 2.0 * cst / (lin + std::sqrt(disc));
  return motor_state_at_slip(mp, slip, u, 0.0);
}

// ---------------------------------------------------------------------------
// Composite model

/// Pre-fault operating point of a composite load. Both parts are expressed as
/// shapes normalized to 1 here and scaled by p and (1-p) of the nominal power.
struct OperatingPoint {
  double voltage = 1.0;
  MotorState motor;
  PowerPair motor_power{1.0, 1.0};
  PowerPair static_power{1.0, 1.0};
  bool has_motor = false;
};

inline OperatingPoint initialize(const CompositeLoadModel& model, double u0) {
  validate(model);
  if (!(u0 > 0.0)) throw InvalidArgument("initialize: voltage must be > 0");
  OperatingPoint op;
  op.voltage = u0;
  // zip_power(., 1) == 1 by the coefficient invariant.
  if (u0 != 1.0) {
    op.static_power = {zip_power(model.active_static, u0),
                       zip_power(model.reactive_static, u0)};
  }
  if (model.dyn_proportion > 0.0) {
    op.motor = motor_init_steady_state(model.motor, u0);
    op.motor_power = motor_output(op.motor, model.motor, u0, 0.0);
    op.has_motor = true;
    if (!(op.motor_power.p > 0.0) || !(op.motor_power.q > 0.0)) {
      throw InvalidArgument(
          "initialize: motor draws no power at the operating point (T_m must be > 0)");
    }
  }
  return op;
}

inline PowerPair composite_power(const CompositeLoadModel& model, const OperatingPoint& op,
                                 const MotorState& st, double u_d, double u_q) {
  const double p = model.dyn_proportion;
  const double u = std::hypot(u_d, u_q);
  PowerPair out{
      (1.0 - p) * model.nominal_p * (zip_power(model.active_static, u) / op.static_power.p),
      (1.0 - p) * model.nominal_q * (zip_power(model.reactive_static, u) / op.static_power.q),
  };
  if (op.has_motor) {
    const PowerPair dyn = motor_output(st, model.motor, u_d, u_q);
    out.p += p * model.nominal_p * (dyn.p / op.motor_power.p);
    out.q += p * model.nominal_q * (dyn.q / op.motor_power.q);
  }
  return out;
}

/// Raw identified parameters [p, Pas, Prs, Pd] used by parameter-based
/// clustering.
inline std::array<double, 12> parameter_vector(const CompositeLoadModel& m) {
  return {m.dyn_proportion,
          m.active_static.z_coeff,   m.active_static.i_coeff,   m.active_static.p_coeff,
          m.reactive_static.z_coeff, m.reactive_static.i_coeff, m.reactive_static.p_coeff,
          m.motor.x_open,            m.motor.x_transient,       m.motor.t_open,
          m.motor.inertia,           m.motor.torque_mech};
}

}  // namespace loadclust
