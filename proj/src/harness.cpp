#include "ptrack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace ptrack {

namespace {

using Clock = std::chrono::steady_clock;

/// Receding-horizon planner state for one target: the last plan and the
/// last plan that was feasible.
struct PlanSlot {
  PlanningProblem problem;
  GuidancePlan current;
  bool have_feasible = false;
  GuidancePlan last_feasible;

  /// Replans from `belief`; an infeasible result is replaced by the last
  /// feasible plan advanced one step. Returns whether the new plan was
  /// feasible.
  bool replan(const GaussianBelief& belief) {
    const GuidancePlan* prev = current.controls.empty() ? nullptr : &current;
    GuidancePlan p = plan_trajectory(problem, belief, prev);
    if (p.feasible) {
      current = p;
      last_feasible = std::move(p);
      have_feasible = true;
      return true;
    }
    if (have_feasible) {
      last_feasible = shift_plan(problem, last_feasible, belief);
      current = last_feasible;
    } else {
      current = std::move(p);
    }
    return false;
  }

  Vec3 control() const { return current.controls.front(); }
};

Vec6 draw_noise(const Mat6& q, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(q);
  const Vec6 sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec6 xi;
  for (int d = 0; d < 6; ++d) xi[d] = nd(rng);
  return es.eigenvectors() * sd.cwiseProduct(xi);
}

Vec6 draw_gaussian(const Vec6& mu, const Mat6& cov, Rng& rng) { return mu + draw_noise(cov, rng); }

std::vector<PlanSlot> make_slots(const ScenarioConfig& config) {
  std::vector<PlanSlot> slots(config.targets.size());
  for (std::size_t j = 0; j < slots.size(); ++j) slots[j].problem = make_problem(config, j);
  return slots;
}

void record_truth_plan(TruthTrajectory& tr, const std::vector<PlanSlot>& slots) {
  std::vector<Vec3> term;
  std::vector<double> clear, umax;
  for (const PlanSlot& s : slots) {
    term.push_back(position_of(s.current.means.back()));
    clear.push_back(min_clearance(s.problem, s.current.means, 2));
    double u = 0.0;
    for (const Vec3& c : s.current.controls) u = std::max(u, c.cwiseAbs().maxCoeff());
    umax.push_back(u);
  }
  tr.plan_terminal.push_back(std::move(term));
  tr.plan_clearance.push_back(std::move(clear));
  tr.plan_max_u.push_back(std::move(umax));
}

Vec3 initial_agent(const ScenarioConfig& config, std::uint64_t seed) {
  const AgentParams& a = config.agent;
  if (!a.randomize_initial) return Vec3(a.initial.x(), a.initial.y(), a.motion.altitude);
  Rng rng = make_stream(seed, 0, 0, StreamPurpose::AgentInit);
  const Box3& env = config.environment;
  std::uniform_real_distribution<double> ux(env.lo.x(), env.hi.x());
  std::uniform_real_distribution<double> uy(env.lo.y(), env.hi.y());
  const double x = ux(rng);
  const double y = uy(rng);
  return Vec3(x, y, a.motion.altitude);
}

double planar_error(const Vec6& est, const Vec6& truth) { return (est.head<2>() - truth.head<2>()).norm(); }

}  // namespace

const char* to_string(AgentMode m) {
  switch (m) {
    case AgentMode::Controller: return "controller";
    case AgentMode::Stationary: return "stationary";
    case AgentMode::Baseline: return "baseline";
  }
  return "?";
}

TruthTrajectory simulate_truth(const ScenarioConfig& config, std::uint64_t seed) {
  TruthTrajectory tr;
  tr.seed = seed;
  const std::size_t m = config.targets.size();
  std::vector<PlanSlot> slots = make_slots(config);
  std::vector<Vec6> x(m);
  for (std::size_t j = 0; j < m; ++j) {
    // Initial truth depends on the episode seed only, so all trials of a
    // scenario start from the same target states.
    Rng rng = make_stream(config.episode.seed, 0, j, StreamPurpose::TruthInit);
    x[j] = draw_gaussian(config.targets[j].mean, config.targets[j].cov, rng);
    slots[j].replan(GaussianBelief{x[j], Mat6::Zero()});
  }
  tr.initial = x;
  record_truth_plan(tr, slots);
  for (int k = 0; k < config.episode.steps; ++k) {
    std::vector<char> ok(m);
    for (std::size_t j = 0; j < m; ++j) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(k), j, StreamPurpose::TruthNoise);
      x[j] = propagate_state(config.dynamics, x[j], slots[j].control(), draw_noise(config.dynamics.Q, rng));
      try {
        ok[j] = slots[j].replan(GaussianBelief{x[j], Mat6::Zero()});
      } catch (const std::exception& e) {
        throw TrialError(k, std::string("truth planner: ") + e.what());
      }
    }
    tr.states.push_back(x);
    tr.plan_ok.push_back(std::move(ok));
    record_truth_plan(tr, slots);
  }
  return tr;
}

TrialLog run_trial(const ScenarioConfig& config, std::uint64_t seed, AgentMode mode, const TruthTrajectory* truth) {
  const auto t_start = Clock::now();
  TruthTrajectory own;
  if (!truth || truth->seed != seed || static_cast<int>(truth->states.size()) != config.episode.steps) {
    own = simulate_truth(config, seed);
    truth = &own;
  }
  TrialLog log;
  log.seed = seed;
  log.mode = mode;
  log.clutter_rate = mode == AgentMode::Baseline ? 0.0 : config.sensor.clutter_rate;
  const std::size_t m = config.targets.size();
  const std::size_t n_particles = static_cast<std::size_t>(config.filter.particles);

  std::vector<ParticleBelief> beliefs;
  std::vector<PlanSlot> slots = make_slots(config);
  for (std::size_t j = 0; j < m; ++j) {
    Rng rng = make_stream(seed, 0, j, StreamPurpose::FilterInit);
    beliefs.push_back(init_belief(config.targets[j].mean, config.targets[j].cov, n_particles, rng));
    slots[j].replan(belief_moments(beliefs[j]));
  }
  Vec3 agent = initial_agent(config, seed);
  log.agent_initial = agent;

  std::vector<Vec3> sensors;
  for (const Vec2& s : config.baseline_sensors) sensors.emplace_back(s.x(), s.y(), config.agent.motion.altitude);
  SensorModel baseline_sensor = config.sensor;
  baseline_sensor.p_detect = 1.0;
  baseline_sensor.clutter_rate = 0.0;

  for (int k = 0; k < config.episode.steps; ++k) {
    const auto step = static_cast<std::uint64_t>(k);
    StepRecord rec;
    rec.step = k;
    rec.truth = truth->states[static_cast<std::size_t>(k)];
    try {
      // Prediction with the controls the monitoring side expects each
      // target to apply.
      for (std::size_t j = 0; j < m; ++j) {
        Rng rng = make_stream(seed, step, j, StreamPurpose::FilterPredict);
        pf_predict(beliefs[j], config.dynamics, slots[j].control(), rng);
      }
      if (mode == AgentMode::Controller) {
        const ControllerDecision d = select_next_state(beliefs, agent, config.agent.motion, config.environment,
                                                       config.sensor, config.filter.trace_block);
        agent = d.chosen;
        rec.best_trace_sum = d.best_sum;
        rec.candidates = d.candidates;
        rec.chosen_traces = d.per_target;
      }
      rec.agent = agent;
      for (std::size_t j = 0; j < m; ++j) {
        Rng meas_rng = make_stream(seed, step, j, StreamPurpose::Measurement);
        Rng resample_rng = make_stream(seed, step, j, StreamPurpose::FilterResample);
        UpdateInfo info;
        if (mode == AgentMode::Baseline) {
          MeasurementSet ms;
          std::vector<double> bearings;
          for (const Vec3& s : sensors) {
            const MeasurementSet one = generate_measurements(rec.truth[j], s, baseline_sensor, meas_rng);
            bearings.push_back(one.bearings.front());
            ms.bearings.push_back(one.bearings.front());
            ms.is_clutter.push_back(false);
          }
          info = pf_update_multi(beliefs[j], bearings, sensors, config.sensor.sigma_phi,
                                 config.filter.ess_threshold, resample_rng);
          rec.measurements.push_back(std::move(ms));
        } else {
          MeasurementSet ms = generate_measurements(rec.truth[j], agent, config.sensor, meas_rng);
          info = pf_update(beliefs[j], ms, agent, config.sensor, config.filter.ess_threshold, resample_rng);
          rec.measurements.push_back(std::move(ms));
        }
        if (info.resampled && config.filter.jitter > 0.0) {
          Rng jr = make_stream(seed, step, j, StreamPurpose::Jitter);
          jitter_particles(beliefs[j], config.filter.jitter, jr);
        }
        const GaussianBelief g = belief_moments(beliefs[j]);
        rec.estimate.push_back(g.mean);
        rec.cov_trace.push_back(g.cov.trace());
        rec.ess.push_back(beliefs[j].ess);
        rec.resampled.push_back(info.resampled);
        rec.degenerate.push_back(info.degenerate);
        rec.plan_ok.push_back(slots[j].replan(g));
      }
    } catch (const TrialError&) {
      throw;
    } catch (const std::exception& e) {
      throw TrialError(k, e.what());
    }
    log.steps.push_back(std::move(rec));
  }
  log.wall_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
  return log;
}

TrialLog run_baseline_trial(const ScenarioConfig& config, std::uint64_t seed, const TruthTrajectory* truth) {
  return run_trial(config, seed, AgentMode::Baseline, truth);
}

std::vector<std::vector<double>> position_errors(const TrialLog& log) {
  std::vector<std::vector<double>> out;
  out.reserve(log.steps.size());
  for (const StepRecord& r : log.steps) {
    std::vector<double> e(r.truth.size());
    for (std::size_t j = 0; j < e.size(); ++j) e[j] = planar_error(r.estimate[j], r.truth[j]);
    out.push_back(std::move(e));
  }
  return out;
}

double trial_score(const TrialLog& log, int first_step) {
  const auto err = position_errors(log);
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = static_cast<std::size_t>(std::max(first_step, 0)); k < err.size(); ++k) {
    double s = 0.0;
    for (double e : err[k]) s += e;
    sum += err[k].empty() ? 0.0 : s / static_cast<double>(err[k].size());
    ++count;
  }
  return count ? sum / count : 0.0;
}

RmseSeries compute_rmse(const std::vector<TrialLog>& logs) {
  RmseSeries out;
  out.trials = static_cast<int>(logs.size());
  if (logs.empty()) return out;
  const std::size_t steps = logs.front().steps.size();
  const std::size_t m = steps ? logs.front().steps.front().truth.size() : 0;
  out.per_target.assign(steps, std::vector<double>(m, 0.0));
  out.mean.assign(steps, 0.0);
  for (const TrialLog& log : logs) {
    if (log.steps.size() != steps) throw std::invalid_argument("compute_rmse: trials differ in length");
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t j = 0; j < m; ++j) {
        const double e = planar_error(log.steps[k].estimate[j], log.steps[k].truth[j]);
        out.per_target[k][j] += e * e;
      }
  }
  for (std::size_t k = 0; k < steps; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      out.per_target[k][j] = std::sqrt(out.per_target[k][j] / static_cast<double>(logs.size()));
      s += out.per_target[k][j];
    }
    out.mean[k] = m ? s / static_cast<double>(m) : 0.0;
  }
  return out;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& config, int n_trials, std::uint64_t base_seed, int workers,
                                 AgentMode mode) {
  if (n_trials < 1) throw std::invalid_argument("run_monte_carlo: need at least one trial");
  MonteCarloResult res;
  res.logs.resize(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) res.seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
  parallel_for(n_trials, workers, [&](int i) {
    res.logs[static_cast<std::size_t>(i)] = run_trial(config, res.seeds[static_cast<std::size_t>(i)], mode);
  });
  res.rmse = compute_rmse(res.logs);
  return res;
}

}  // namespace ptrack
