#pragma once

#include "ptrack/models.hpp"
#include "ptrack/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace ptrack {

/// Bearings received on one target's channel in one step. is_clutter is
/// ground truth kept for logs; filters only read `bearings`.
struct MeasurementSet {
  std::vector<double> bearings;  // rad, each in (-pi, pi]
  std::vector<bool> is_clutter;

  std::size_t size() const { return bearings.size(); }
  bool empty() const { return bearings.empty(); }
};

/// Map to (-pi, pi]; -pi goes to pi.
double wrap_angle(double a);

/// atan2(dx, dy) of target minus agent in the ground plane, in (-pi, pi].
/// Zero is due +y, pi/2 due +x. Throws DegenerateGeometry when the planar
/// positions coincide.
double true_bearing(const Vec3& target_pos, const Vec3& agent_pos);

using Rng = std::mt19937_64;

/// Detection with probability p_detect (true bearing plus N(0, sigma^2)
/// noise, then wrapped) and Poisson(clutter_rate) uniform false alarms,
/// shuffled.
MeasurementSet generate_measurements(const Vec6& target, const Vec3& agent_pos,
                                     const SensorModel& model, Rng& rng);

/// Independent random streams, one per (trial seed, step, target, purpose).
enum class StreamPurpose : std::uint64_t {
  TruthInit = 1,
  TruthNoise,
  FilterInit,
  FilterPredict,
  FilterResample,
  Measurement,
  AgentInit,
  Jitter,
};

std::uint64_t splitmix64(std::uint64_t x);
Rng make_stream(std::uint64_t seed, std::uint64_t step, std::uint64_t target, StreamPurpose purpose);

}  // namespace ptrack
