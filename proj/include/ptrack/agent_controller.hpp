#pragma once

#include "ptrack/models.hpp"
#include "ptrack/particle_filter.hpp"
#include "ptrack/scenario.hpp"

#include <span>
#include <vector>

namespace ptrack {

/// Candidate next positions: hover first, then lambda = 1..n_radial outer
/// loop and kappa = 1..n_theta inner loop. Duplicates (to 1e-9 m) and
/// points outside the environment's ground footprint are dropped; z is
/// always the configured altitude.
std::vector<Vec3> admissible_states(const Vec3& s, const AgentMotionModel& m, const Box3& environment);

/// Noise-free bearing of a predicted target position seen from a candidate.
double ideal_measurement(const Vec3& pred_pos, const Vec3& candidate);

/// Trace of the covariance after reweighting a copy of `predicted` by
/// N(z; l(x, candidate), sigma^2). Returns the prior trace when every
/// weight underflows.
double pseudo_posterior_trace(const ParticleBelief& predicted, const Vec3& candidate, double z,
                              const SensorModel& model, TraceBlock block = TraceBlock::Full);

/// Trace of the weighted covariance of a belief.
double belief_trace(const ParticleBelief& b, TraceBlock block = TraceBlock::Full);

struct ControllerDecision {
  Vec3 chosen = Vec3::Zero();
  std::size_t index = 0;             // position in the candidate list
  std::size_t candidates = 0;
  double best_sum = 0.0;
  std::vector<double> per_target;    // traces at the chosen candidate
  std::vector<double> sums;          // one per candidate, NaN if skipped
  int skipped = 0;                   // candidates dropped for degenerate geometry
};

/// Scores every admissible candidate by the summed pseudo-posterior trace
/// over all targets and returns the argmin. Ties keep the earlier
/// candidate, so hover wins a full tie. With no usable candidate the agent
/// stays at `s`.
ControllerDecision select_next_state(std::span<const ParticleBelief> beliefs, const Vec3& s,
                                     const AgentMotionModel& motion, const Box3& environment,
                                     const SensorModel& sensor, TraceBlock block = TraceBlock::Full);

}  // namespace ptrack
