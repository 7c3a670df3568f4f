#pragma once

#include <Eigen/Core>
#include <cmath>

#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"

namespace gpsobol {

/// sin(x1) + 7 sin(x2)^2 + 0.1 x3^4 sin(x1) on [-pi, pi]^3.
/// First-order indices (0.314, 0.442, 0).
template <class Derived>
double ishigami(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != 3) throw input_error("ishigami expects 3 inputs");
  const double s1 = std::sin(x[0]);
  const double s2 = std::sin(x[1]);
  return s1 + 7.0 * s2 * s2 + 0.1 * std::pow(x[2], 4) * s1;
}

inline InputDistribution ishigami_distribution() {
  const double pi = 3.14159265358979323846;
  InputDistribution d;
  d.lower = Eigen::VectorXd::Constant(3, -pi);
  d.upper = Eigen::VectorXd::Constant(3, pi);
  return d;
}

/// Tank inputs: x = (P, R_int, T_shell, T_cap, E_shell, E_cap,
/// sigma_y_shell, sigma_y_cap) in the physical units below.
inline InputDistribution tank_distribution() {
  InputDistribution d;
  d.lower.resize(8);
  d.upper.resize(8);
  d.lower << 30, 1500, 300, 100, 63, 189, 200, 400;
  d.upper << 50, 2500, 500, 300, 77, 231, 300, 800;
  return d;
}

/// Von Mises stress (MPa) of the perfect spherical shell, the cheap
/// 1D stand-in: (3/2) (R+T)^3 / ((R+T)^3 - R^3) * P with R = R_int,
/// T = T_shell. Only P, R_int, T_shell enter.
template <class Derived>
double tank_cheap(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != 8) throw input_error("tank_cheap expects 8 inputs");
  const double P = x[0], R = x[1], T = x[2];
  const double rt3 = std::pow(R + T, 3);
  return 1.5 * rt3 / (rt3 - R * R * R) * P;
}

/// Configuration of the analytic expensive-level stand-in.
struct TankStubConfig {
  double rho = 0.92;         // level correlation factor
  double bias_scale = 12.0;  // MPa; 0 gives rho * tank_cheap exactly
};

/// Analytic high-fidelity stand-in with a known relation to the cheap
/// level:
///   z2(x) = rho * tank_cheap(x)
///         + bias_scale * (1 + sin(pi * t_cap)) * (0.5 + e_cap^2)
/// where t_cap, e_cap are T_cap and E_cap scaled to [0, 1]. The bias is
/// smooth, depends only on T_cap and E_cap, and vanishes when
/// bias_scale = 0.
template <class Derived>
double tank_expensive_stub(const Eigen::MatrixBase<Derived>& x,
                           const TankStubConfig& cfg = {}) {
  if (x.size() != 8) throw input_error("tank_expensive_stub expects 8 inputs");
  const double pi = 3.14159265358979323846;
  const double t_cap = (x[3] - 100.0) / 200.0;
  const double e_cap = (x[5] - 189.0) / 42.0;
  const double bias = cfg.bias_scale * (1.0 + std::sin(pi * t_cap)) *
                      (0.5 + e_cap * e_cap);
  return cfg.rho * tank_cheap(x) + bias;
}

}  // namespace gpsobol
