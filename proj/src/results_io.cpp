#include "ptrack/results_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#ifndef PTRACK_VERSION
#define PTRACK_VERSION "unknown"
#endif

namespace ptrack {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

const char* code_version() { return PTRACK_VERSION; }

void write_measurements_csv(std::ostream& os, const TrialLog& log) {
  os << "step,target,bearing,is_clutter\n";
  for (const StepRecord& r : log.steps)
    for (std::size_t j = 0; j < r.measurements.size(); ++j) {
      const MeasurementSet& m = r.measurements[j];
      for (std::size_t i = 0; i < m.size(); ++i)
        os << r.step << ',' << j << ',' << num(m.bearings[i]) << ',' << (m.is_clutter[i] ? 1 : 0) << '\n';
    }
}

void write_estimates_csv(std::ostream& os, const TrialLog& log) {
  os << "step,target,est_x,est_y,cov_trace,ess,resampled\n";
  for (const StepRecord& r : log.steps)
    for (std::size_t j = 0; j < r.estimate.size(); ++j)
      os << r.step << ',' << j << ',' << num(r.estimate[j].x()) << ',' << num(r.estimate[j].y()) << ','
         << num(r.cov_trace[j]) << ',' << num(r.ess[j]) << ',' << (r.resampled[j] ? 1 : 0) << '\n';
}

void write_controller_csv(std::ostream& os, const TrialLog& log) {
  const std::size_t m = log.steps.empty() ? 0 : log.steps.front().truth.size();
  os << "step,chosen_x,chosen_y,best_trace_sum,candidates";
  for (std::size_t j = 0; j < m; ++j) os << ",trace_" << j;
  os << '\n';
  for (const StepRecord& r : log.steps) {
    os << r.step << ',' << num(r.agent.x()) << ',' << num(r.agent.y()) << ',' << num(r.best_trace_sum) << ','
       << r.candidates;
    for (std::size_t j = 0; j < m; ++j) os << ',' << (j < r.chosen_traces.size() ? num(r.chosen_traces[j]) : "");
    os << '\n';
  }
}

void write_truth_csv(std::ostream& os, const TrialLog& log) {
  os << "step,target,x,y,vx,vy,plan_feasible\n";
  for (const StepRecord& r : log.steps)
    for (std::size_t j = 0; j < r.truth.size(); ++j)
      os << r.step << ',' << j << ',' << num(r.truth[j][0]) << ',' << num(r.truth[j][1]) << ','
         << num(r.truth[j][3]) << ',' << num(r.truth[j][4]) << ',' << (r.plan_ok[j] ? 1 : 0) << '\n';
}

void write_rmse_csv(std::ostream& os, const RmseSeries& series) {
  os << "step,target,rmse\n";
  for (std::size_t k = 0; k < series.mean.size(); ++k) {
    for (std::size_t j = 0; j < series.per_target[k].size(); ++j)
      os << k << ',' << j << ',' << num(series.per_target[k][j]) << '\n';
    os << k << ",mean," << num(series.mean[k]) << '\n';
  }
}

void write_trials_csv(std::ostream& os, const std::vector<TrialLog>& logs, int first_step) {
  os << "trial,seed,score\n";
  for (std::size_t i = 0; i < logs.size(); ++i)
    os << i << ',' << logs[i].seed << ',' << num(trial_score(logs[i], first_step)) << '\n';
}

void write_plan_csv(std::ostream& os, const std::vector<GuidancePlan>& plans) {
  const int n_obs = plans.empty() ? 0 : plans.front().faces.obstacles();
  os << "target,tau,x,y,z,vx,vy,cov_trace,ux,uy,feasible";
  for (int n = 0; n < n_obs; ++n) os << ",face_" << n;
  os << '\n';
  for (std::size_t j = 0; j < plans.size(); ++j) {
    const GuidancePlan& p = plans[j];
    for (std::size_t tau = 0; tau < p.means.size(); ++tau) {
      const Vec6& m = p.means[tau];
      os << j << ',' << tau << ',' << num(m[0]) << ',' << num(m[1]) << ',' << num(m[2]) << ',' << num(m[3]) << ','
         << num(m[4]) << ',' << num(p.covs[tau].trace()) << ',' << num(p.controls[tau].x()) << ','
         << num(p.controls[tau].y()) << ',' << (p.feasible ? 1 : 0);
      for (int n = 0; n < n_obs; ++n) os << ',' << p.faces.at(static_cast<int>(tau), n);
      os << '\n';
    }
  }
}

std::string summary_json(const ScenarioConfig& config, const std::string& command, const std::vector<TrialLog>& logs,
                         const RmseSeries* rmse, int first_step) {
  nlohmann::ordered_json j;
  j["schema"] = kSummarySchema;
  j["code_version"] = code_version();
  j["command"] = command;
  j["config_hash"] = scenario_hash(config);
  j["mode"] = logs.empty() ? "none" : to_string(logs.front().mode);
  j["clutter_rate"] = logs.empty() ? config.sensor.clutter_rate : logs.front().clutter_rate;
  j["particles"] = config.filter.particles;
  j["horizon"] = config.planner.horizon;
  j["steps"] = config.episode.steps;
  j["episode_seed"] = config.episode.seed;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  int infeasible = 0;
  for (const TrialLog& log : logs) {
    seeds.push_back(log.seed);
    scores.push_back(num(trial_score(log, first_step)));
    for (const StepRecord& r : log.steps)
      for (char ok : r.plan_ok) infeasible += ok ? 0 : 1;
  }
  j["seeds"] = seeds;
  j["score_first_step"] = first_step;
  j["trial_scores"] = scores;
  j["infeasible_plan_steps"] = infeasible;
  if (rmse) {
    double mean = 0.0;
    int count = 0;
    for (std::size_t k = static_cast<std::size_t>(first_step); k < rmse->mean.size(); ++k, ++count) mean += rmse->mean[k];
    j["rmse_trials"] = rmse->trials;
    j["rmse_mean_after_first_step"] = num(count ? mean / count : 0.0);
  }
  return j.dump(2) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.parent_path(), ec.message());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  f << content;
  if (!f) throw IoError(path, "write failed");
}

void emit_trial(const std::filesystem::path& dir, const ScenarioConfig& config, const std::string& command,
                const TrialLog& log, bool csv) {
  if (csv) {
    auto dump = [&](const char* name, auto&& writer) {
      std::ostringstream os;
      writer(os, log);
      write_file(dir / name, os.str());
    };
    dump("measurements.csv", write_measurements_csv);
    dump("estimates.csv", write_estimates_csv);
    dump("controller.csv", write_controller_csv);
    dump("truth.csv", write_truth_csv);
  }
  write_file(dir / "summary.json", summary_json(config, command, {log}, nullptr));
}

void emit_monte_carlo(const std::filesystem::path& dir, const ScenarioConfig& config, const std::string& command,
                      const MonteCarloResult& result, bool csv) {
  if (csv) {
    std::ostringstream r, t;
    write_rmse_csv(r, result.rmse);
    write_trials_csv(t, result.logs, 20);
    write_file(dir / "rmse.csv", r.str());
    write_file(dir / "trials.csv", t.str());
  }
  write_file(dir / "summary.json", summary_json(config, command, result.logs, &result.rmse));
}

}  // namespace ptrack
