// ptrack: command-line front end for planning, single episodes and
// Monte-Carlo studies. Exit codes: 0 ok, 2 configuration or usage error,
// 3 runtime failure.

#include "ptrack/guidance.hpp"
#include "ptrack/harness.hpp"
#include "ptrack/kernels/kernels.hpp"
#include "ptrack/results_io.hpp"
#include "ptrack/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace ptrack;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string scenario;
  std::optional<double> lambda;
  std::optional<int> particles;
  std::optional<int> horizon;
  std::optional<int> steps;
  std::string out = "ptrack_out";
  std::string format = "csv";
  std::string kernels = "auto";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("scenario", c.scenario, "scenario file")->required();
  app->add_option("--lambda", c.lambda, "override the clutter rate");
  app->add_option("--particles", c.particles, "override the particle count");
  app->add_option("--horizon", c.horizon, "override the planning horizon");
  app->add_option("--steps", c.steps, "override the episode length");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--format", c.format, "csv or summary")->check(CLI::IsMember({"csv", "summary"}));
  app->add_option("--kernels", c.kernels, "auto, scalar or avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_scenario_file(c.scenario);
  if (c.lambda) cfg.sensor.clutter_rate = *c.lambda;
  if (c.particles) cfg.filter.particles = *c.particles;
  if (c.horizon) cfg.planner.horizon = *c.horizon;
  if (c.steps) cfg.episode.steps = *c.steps;
  validate_scenario(cfg);
  if (!kernels::select(c.kernels)) throw ConfigError("--kernels", "variant not available on this machine");
  return cfg;
}

int cmd_plan(const Common& c, bool dump_qp) {
  const ScenarioConfig cfg = load(c);
  std::vector<GuidancePlan> plans;
  nlohmann::ordered_json summary;
  summary["schema"] = kSummarySchema;
  summary["code_version"] = code_version();
  summary["command"] = "plan";
  summary["config_hash"] = scenario_hash(cfg);
  nlohmann::ordered_json targets = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < cfg.targets.size(); ++j) {
    const PlanningProblem pr = make_problem(cfg, j);
    const GaussianBelief b{cfg.targets[j].mean, cfg.targets[j].cov};
    plans.push_back(plan_trajectory(pr, b));
    const GuidancePlan& p = plans.back();
    char obj[40];
    std::snprintf(obj, sizeof obj, "%.12g", p.objective);
    targets.push_back({{"target", j}, {"feasible", p.feasible}, {"objective", obj},
                       {"margin_stage", p.margin_stage}, {"outer_iterations", p.iterations}});
    if (dump_qp)
      write_file(std::filesystem::path(c.out) / ("qp_target" + std::to_string(j) + ".txt"),
                 dump_qp_text(build_restricted_qp(pr, b, p.faces, p.margin_stage)));
  }
  summary["targets"] = targets;
  if (c.format == "csv") {
    std::ostringstream os;
    write_plan_csv(os, plans);
    write_file(std::filesystem::path(c.out) / "plan.csv", os.str());
  }
  write_file(std::filesystem::path(c.out) / "summary.json", summary.dump(2) + "\n");
  for (const GuidancePlan& p : plans)
    if (!p.feasible) return kExitRuntime;
  return 0;
}

int cmd_simulate(const Common& c, std::uint64_t seed) {
  const ScenarioConfig cfg = load(c);
  const TrialLog log = run_trial(cfg, seed, AgentMode::Controller);
  emit_trial(c.out, cfg, "simulate", log, c.format == "csv");
  return 0;
}

int cmd_montecarlo(const Common& c, int trials, std::uint64_t base_seed, int workers) {
  const ScenarioConfig cfg = load(c);
  const MonteCarloResult res = run_monte_carlo(cfg, trials, base_seed, workers, AgentMode::Controller);
  emit_monte_carlo(c.out, cfg, "montecarlo", res, c.format == "csv");
  return 0;
}

int cmd_baseline(const Common& c, int trials, std::uint64_t base_seed, int workers) {
  const ScenarioConfig cfg = load(c);
  std::vector<TrialLog> agent(static_cast<std::size_t>(trials)), fixed(static_cast<std::size_t>(trials));
  parallel_for(trials, workers, [&](int i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    const TruthTrajectory truth = simulate_truth(cfg, seed);
    agent[static_cast<std::size_t>(i)] = run_trial(cfg, seed, AgentMode::Controller, &truth);
    fixed[static_cast<std::size_t>(i)] = run_baseline_trial(cfg, seed, &truth);
  });
  const RmseSeries ra = compute_rmse(agent);
  const RmseSeries rb = compute_rmse(fixed);
  const std::filesystem::path dir(c.out);
  if (c.format == "csv") {
    std::ostringstream a, b, t;
    write_rmse_csv(a, ra);
    write_rmse_csv(b, rb);
    t << "trial,seed,agent_score,baseline_score\n";
    for (int i = 0; i < trials; ++i) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%d,%llu,%.12g,%.12g\n", i,
                    static_cast<unsigned long long>(base_seed + static_cast<std::uint64_t>(i)),
                    trial_score(agent[static_cast<std::size_t>(i)]), trial_score(fixed[static_cast<std::size_t>(i)]));
      t << buf;
    }
    write_file(dir / "rmse_agent.csv", a.str());
    write_file(dir / "rmse_baseline.csv", b.str());
    write_file(dir / "trials.csv", t.str());
  }
  write_file(dir / "summary.json", summary_json(cfg, "baseline", fixed, &rb));
  write_file(dir / "summary_agent.json", summary_json(cfg, "baseline", agent, &ra));
  return 0;
}

int cmd_validate(const Common& c) {
  const ScenarioConfig cfg = load(c);
  std::cout << "ok " << scenario_hash(cfg) << " targets=" << cfg.targets.size()
            << " obstacles=" << cfg.obstacles.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target guidance, bearings-only tracking and agent control simulator"};
  app.require_subcommand(1);

  Common plan_c, sim_c, mc_c, base_c, val_c;
  bool dump_qp = false;
  std::uint64_t seed = 0;
  int trials = 20;
  std::uint64_t base_seed = 0;
  int workers = 1;

  CLI::App* plan = app.add_subcommand("plan", "plan every target's trajectory from its prior");
  add_common(plan, plan_c);
  plan->add_flag("--dump-qp", dump_qp, "write the final restricted QP of each target");

  CLI::App* sim = app.add_subcommand("simulate", "run one episode with full logs");
  add_common(sim, sim_c);
  sim->add_option("--seed", seed, "trial seed");

  CLI::App* mc = app.add_subcommand("montecarlo", "run seeded trials and report RMSE");
  add_common(mc, mc_c);
  mc->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  mc->add_option("--base-seed", base_seed, "seed of trial 0; trial k uses base + k");
  mc->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* base = app.add_subcommand("baseline", "compare the agent with three fixed sensors");
  add_common(base, base_c);
  base->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  base->add_option("--base-seed", base_seed, "seed of trial 0");
  base->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* val = app.add_subcommand("validate", "check a scenario file");
  add_common(val, val_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (plan->parsed()) return cmd_plan(plan_c, dump_qp);
    if (sim->parsed()) return cmd_simulate(sim_c, seed);
    if (mc->parsed()) return cmd_montecarlo(mc_c, trials, base_seed, workers);
    if (base->parsed()) return cmd_baseline(base_c, trials, base_seed, workers);
    if (val->parsed()) return cmd_validate(val_c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
