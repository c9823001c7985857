#pragma once

#include "ptrack/models.hpp"
#include "ptrack/world_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ptrack {

struct TargetSpec {
  Vec6 mean = Vec6::Zero();  // mu_0
  Mat6 cov = Mat6::Zero();   // Sigma_0
  GoalRegion goal;
};

struct PlannerParams {
  int horizon = 50;
  double u_max = 6000.0;     // N, per planar axis
  double speed_max = 16.0;   // m/s ground speed
  double big_m = 1e4;        // kept for reference; fixed-face QPs do not use it
  double margin = 0.5;       // m, strict-inequality slack on every face constraint
  double clearance = 0.0;    // m, extra clearance from the second horizon step on
  int max_outer = 12;
  double qp_tol = 1e-9;
  int qp_max_iter = 2000;
};

/// Which block of the covariance scores agent candidates.
enum class TraceBlock { Full, Position };

struct FilterParams {
  int particles = 2000;
  double ess_threshold = 0.5;  // fraction of N
  double jitter = 0.0;         // m, optional roughening std after resampling
  TraceBlock trace_block = TraceBlock::Full;
};

struct AgentParams {
  AgentMotionModel motion;
  Vec3 initial = Vec3(150.0, 200.0, 40.0);
  bool randomize_initial = false;
};

struct EpisodeParams {
  int steps = 120;
  std::uint64_t seed = 0;  // fixes ground-truth initial states
};

struct ScenarioConfig {
  Box3 environment;
  DynamicsModel dynamics;
  std::vector<TargetSpec> targets;
  std::vector<Cuboid> obstacles;
  SensorModel sensor;
  std::vector<Vec2> baseline_sensors;  // fixed direction finders for the comparison tracker
  AgentParams agent;
  PlannerParams planner;
  FilterParams filter;
  EpisodeParams episode;
};

/// Parses and validates a scenario document (JSON, comments allowed).
/// Throws ConfigError with the line/column on parse failures and the field
/// path on validation failures.
ScenarioConfig load_scenario(std::string_view document);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

/// Re-checks every invariant. Called by the loader; call again after
/// editing a config in code.
void validate_scenario(const ScenarioConfig& config);

/// Canonical JSON rendering, stable for identical configs. Obstacles are
/// written in face form.
std::string scenario_to_json(const ScenarioConfig& config);

/// FNV-1a over scenario_to_json(), as 16 hex digits.
std::string scenario_hash(const ScenarioConfig& config);

}  // namespace ptrack
