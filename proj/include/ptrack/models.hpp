#pragma once

#include "ptrack/types.hpp"

#include <numbers>

namespace ptrack {

/// Bearing sensor: Gaussian noise, detection probability and Poisson clutter
/// spread uniformly over (-pi, pi].
struct SensorModel {
  double sigma_phi = std::numbers::pi / 180.0;  // rad
  double p_detect = 0.95;
  double clutter_rate = 1.0;  // expected false alarms per step

  static constexpr double clutter_density = 1.0 / (2.0 * std::numbers::pi);
};

/// Radial lattice of agent moves: lambda * radial_step in direction
/// kappa * 2 pi / n_theta, lambda in [0, n_radial], kappa in [1, n_theta].
struct AgentMotionModel {
  double radial_step = 5.0;  // m
  int n_radial = 4;
  int n_theta = 15;
  double altitude = 40.0;  // m
};

}  // namespace ptrack
