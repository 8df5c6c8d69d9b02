#pragma once

#include <array>
#include <cmath>

#include "susp/errors.hpp"

namespace susp {

enum class ForceMode {
  // f_a = (k_b + k_a) * x_b + (c_b + c_a) * v_b, absolute coordinates.
  PaperLiteral,
  // f_a = -k_a * (x_b - x_w) - c_a * (v_b - v_w); the active element adds
  // stiffness/damping on top of the passive suspension. Default.
  Augmented,
};

struct QuarterCarParams {
  double m_b = 450.0;     // sprung (body) mass [kg]
  double m_w = 45.0;      // unsprung (wheel) mass [kg]
  double k_b = 15000.0;   // suspension stiffness [N/m]
  double c_b = 1500.0;    // suspension damping [Ns/m]
  double k_w = 150000.0;  // tire stiffness [N/m]
  double c_w = 0.0;       // tire damping [Ns/m]
  ForceMode force_mode = ForceMode::Augmented;

  void validate() const {
    if (!(m_b > 0.0) || !(m_w > 0.0)) {
      throw SpecError("quarter-car masses must be positive");
    }
    if (k_b < 0.0 || c_b < 0.0 || k_w < 0.0 || c_w < 0.0) {
      throw SpecError("quarter-car stiffness/damping must be non-negative");
    }
  }
};

struct VehicleState {
  double x_b = 0.0;  // body displacement [m]
  double v_b = 0.0;  // body velocity [m/s]
  double x_w = 0.0;  // wheel displacement [m]
  double v_w = 0.0;  // wheel velocity [m/s]

  bool finite() const {
    return std::isfinite(x_b) && std::isfinite(v_b) && std::isfinite(x_w) &&
           std::isfinite(v_w);
  }
};

struct ActiveAction {
  double k_a = 0.0;  // active stiffness [N/m]
  double c_a = 0.0;  // active damping [Ns/m]
};

// Physical bounds of the controllable coefficients.
inline constexpr double kMinActiveStiffness = -2500.0;
inline constexpr double kMaxActiveStiffness = 5000.0;
inline constexpr double kMinActiveDamping = -600.0;
inline constexpr double kMaxActiveDamping = 600.0;

inline bool action_in_bounds(const ActiveAction& a) {
  return a.k_a >= kMinActiveStiffness && a.k_a <= kMaxActiveStiffness &&
         a.c_a >= kMinActiveDamping && a.c_a <= kMaxActiveDamping;
}

struct RoadInput {
  double x_r = 0.0;  // road elevation [m]
  double v_r = 0.0;  // elevation rate [m/s]
};

struct OutputVector {
  double rattle_space = 0.0;  // x_b - x_w [m]
  double body_accel = 0.0;    // second derivative of x_b [m/s^2]
};

struct StateDerivative {
  double d_x_b = 0.0;
  double d_v_b = 0.0;
  double d_x_w = 0.0;
  double d_v_w = 0.0;
};

// Force produced by the active element for the given state and action.
inline double active_force(const VehicleState& s, const ActiveAction& a,
                           const QuarterCarParams& p) {
  switch (p.force_mode) {
    case ForceMode::PaperLiteral:
      return (p.k_b + a.k_a) * s.x_b + (p.c_b + a.c_a) * s.v_b;
    case ForceMode::Augmented:
      return -a.k_a * (s.x_b - s.x_w) - a.c_a * (s.v_b - s.v_w);
  }
  return 0.0;
}

// Newton-form equations of motion of the 2-DOF quarter car. The active force
// acts between body and wheel, so it enters the wheel equation with an
// opposite sign.
inline StateDerivative derivative(const VehicleState& s, const RoadInput& road,
                                  double f_a, const QuarterCarParams& p) {
  const double susp_force =
      -p.k_b * (s.x_b - s.x_w) - p.c_b * (s.v_b - s.v_w);
  const double tire_force =
      -p.k_w * (s.x_w - road.x_r) - p.c_w * (s.v_w - road.v_r);
  StateDerivative d;
  d.d_x_b = s.v_b;
  d.d_v_b = (susp_force + f_a) / p.m_b;
  d.d_x_w = s.v_w;
  d.d_v_w = (-susp_force + tire_force - f_a) / p.m_w;
  return d;
}

inline OutputVector outputs(const VehicleState& s, const RoadInput& road,
                            double f_a, const QuarterCarParams& p) {
  return {s.x_b - s.x_w, derivative(s, road, f_a, p).d_v_b};
}

inline constexpr double kDivergenceLimit = 1e6;

namespace detail {

inline VehicleState axpy(const VehicleState& s, double h,
                         const StateDerivative& d) {
  return {s.x_b + h * d.d_x_b, s.v_b + h * d.d_v_b, s.x_w + h * d.d_x_w,
          s.v_w + h * d.d_v_w};
}

}  // namespace detail

// Classical fixed-step RK4 advance by dt with the action held constant.
// RoadFn: double t -> RoadInput, evaluated at t, t+dt/2, t+dt.
template <typename RoadFn>
VehicleState step_rk4(const VehicleState& s, RoadFn&& road_fn,
                      const ActiveAction& action, const QuarterCarParams& p,
                      double t, double dt) {
  const RoadInput r0 = road_fn(t);
  const RoadInput rm = road_fn(t + 0.5 * dt);
  const RoadInput r1 = road_fn(t + dt);

  const auto f = [&](const VehicleState& st, const RoadInput& road) {
    return derivative(st, road, active_force(st, action, p), p);
  };

  const StateDerivative k1 = f(s, r0);
  const StateDerivative k2 = f(detail::axpy(s, 0.5 * dt, k1), rm);
  const StateDerivative k3 = f(detail::axpy(s, 0.5 * dt, k2), rm);
  const StateDerivative k4 = f(detail::axpy(s, dt, k3), r1);

  VehicleState out;
  out.x_b = s.x_b + dt / 6.0 * (k1.d_x_b + 2.0 * k2.d_x_b + 2.0 * k3.d_x_b + k4.d_x_b);
  out.v_b = s.v_b + dt / 6.0 * (k1.d_v_b + 2.0 * k2.d_v_b + 2.0 * k3.d_v_b + k4.d_v_b);
  out.x_w = s.x_w + dt / 6.0 * (k1.d_x_w + 2.0 * k2.d_x_w + 2.0 * k3.d_x_w + k4.d_x_w);
  out.v_w = s.v_w + dt / 6.0 * (k1.d_v_w + 2.0 * k2.d_v_w + 2.0 * k3.d_v_w + k4.d_v_w);

  if (!out.finite() || std::fabs(out.x_b) > kDivergenceLimit ||
      std::fabs(out.v_b) > kDivergenceLimit ||
      std::fabs(out.x_w) > kDivergenceLimit ||
      std::fabs(out.v_w) > kDivergenceLimit) {
    throw NumericalDivergence("vehicle state diverged during RK4 step");
  }
  return out;
}

}  // namespace susp
