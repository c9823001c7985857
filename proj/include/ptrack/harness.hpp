#pragma once

#include "ptrack/agent_controller.hpp"
#include "ptrack/guidance.hpp"
#include "ptrack/particle_filter.hpp"
#include "ptrack/scenario.hpp"
#include "ptrack/sensing.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptrack {

/// How the monitoring side observes the targets.
enum class AgentMode {
  Controller,  // one moving agent choosing positions by trace minimization
  Stationary,  // the same agent never moving
  Baseline,    // fixed direction finders, certain detection, no clutter
};

const char* to_string(AgentMode m);

/// Ground-truth target paths. They depend only on the scenario and the
/// trial seed, so every agent mode of one seed shares them.
struct TruthTrajectory {
  std::uint64_t seed = 0;
  std::vector<Vec6> initial;                  // per target
  std::vector<std::vector<Vec6>> states;      // [step][target], after that step's motion
  std::vector<std::vector<char>> plan_ok;     // [step][target], truth plan feasible
  // Summary of the truth plan made at each step, [step][target].
  std::vector<std::vector<Vec3>> plan_terminal;    // last planned mean position
  std::vector<std::vector<double>> plan_clearance; // min_clearance at the bare margin
  std::vector<std::vector<double>> plan_max_u;     // largest control component
};

struct StepRecord {
  int step = 0;
  Vec3 agent = Vec3::Zero();
  std::vector<Vec6> truth;
  std::vector<Vec6> estimate;
  std::vector<double> cov_trace;
  std::vector<double> ess;
  std::vector<char> resampled;
  std::vector<char> degenerate;
  std::vector<MeasurementSet> measurements;
  std::vector<char> plan_ok;  // planner on the monitoring side found a feasible plan
  double best_trace_sum = 0.0;
  std::size_t candidates = 0;
  std::vector<double> chosen_traces;
};

struct TrialLog {
  std::uint64_t seed = 0;
  AgentMode mode = AgentMode::Controller;
  double clutter_rate = 0.0;
  Vec3 agent_initial = Vec3::Zero();
  std::vector<StepRecord> steps;
  double wall_seconds = 0.0;  // informational; never written to files
};

/// Error raised inside an episode, tagged with the step it happened in.
class TrialError : public std::runtime_error {
public:
  TrialError(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

TruthTrajectory simulate_truth(const ScenarioConfig& config, std::uint64_t seed);

/// One episode. `truth` may be passed in to reuse a trajectory computed for
/// the same seed; it is recomputed otherwise.
TrialLog run_trial(const ScenarioConfig& config, std::uint64_t seed, AgentMode mode = AgentMode::Controller,
                   const TruthTrajectory* truth = nullptr);

TrialLog run_baseline_trial(const ScenarioConfig& config, std::uint64_t seed,
                            const TruthTrajectory* truth = nullptr);

/// Planar position error of every target at every step.
std::vector<std::vector<double>> position_errors(const TrialLog& log);

/// Mean over steps >= first_step of the target-averaged planar error.
double trial_score(const TrialLog& log, int first_step = 20);

struct RmseSeries {
  int trials = 0;
  std::vector<std::vector<double>> per_target;  // [step][target]
  std::vector<double> mean;                     // [step], average over targets
};

/// eps_t = sqrt(mean over trials of |estimate - truth|^2), planar, per
/// target and step.
RmseSeries compute_rmse(const std::vector<TrialLog>& logs);

struct MonteCarloResult {
  std::vector<std::uint64_t> seeds;
  std::vector<TrialLog> logs;  // by trial index
  RmseSeries rmse;
};

/// Trials base_seed, base_seed + 1, ... run on `workers` threads; results
/// are ordered by trial index regardless of scheduling.
MonteCarloResult run_monte_carlo(const ScenarioConfig& config, int n_trials, std::uint64_t base_seed,
                                 int workers = 1, AgentMode mode = AgentMode::Controller);

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace ptrack
