#include "guidance_cases.hpp"
#include "ptrack/guidance.hpp"
#include "ptrack/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

using namespace ptrack;

namespace {

std::string scenario_path() {
  const char* dir = std::getenv("PTRACK_SCENARIO_DIR");
  return std::string(dir ? dir : "scenarios") + "/scenario_v1.example";
}

PlanningProblem open_problem(int horizon, const Vec3& goal) {
  PlanningProblem p;
  p.dynamics = cases::standard_dynamics();
  p.horizon = horizon;
  p.params.horizon = horizon;
  p.goal = goal;
  return p;
}

// Feasibility as the planner defines it, checked from scratch.
void expect_plan_invariants(const PlanningProblem& pr, const GaussianBelief& b, const GuidancePlan& plan) {
  ASSERT_EQ(static_cast<int>(plan.controls.size()), pr.horizon);
  ASSERT_EQ(plan.means.size(), plan.controls.size());
  const auto means = rollout_mean(pr.dynamics, b.mean, plan.controls);
  for (std::size_t t = 0; t < means.size(); ++t)
    EXPECT_LE((means[t] - plan.means[t]).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + means[t].cwiseAbs().maxCoeff()));
  const auto covs = rollout_cov(pr.dynamics, b.cov, pr.horizon);
  for (std::size_t t = 0; t < covs.size(); ++t) EXPECT_EQ(plan.covs[t], covs[t]);
  for (const Vec3& u : plan.controls) {
    EXPECT_LE(std::abs(u.x()), pr.params.u_max + 1e-9);
    EXPECT_LE(std::abs(u.y()), pr.params.u_max + 1e-9);
    EXPECT_EQ(u.z(), 0.0);
  }
  for (std::size_t t = 1; t < plan.incumbent_history.size(); ++t)
    EXPECT_LE(plan.incumbent_history[t], plan.incumbent_history[t - 1] + 1e-9);
  if (!plan.feasible) return;
  for (std::size_t t = 0; t < plan.means.size(); ++t) {
    for (const Cuboid& c : pr.obstacles) {
      double best = -1e300;
      for (std::size_t f = 0; f < Cuboid::kFaces; ++f) best = std::max(best, face_slack(c, position_of(plan.means[t]), f));
      EXPECT_GE(best, pr.params.margin - 1e-6) << "tau " << t;
    }
    const Vec3 v = velocity_of(plan.means[t]);
    EXPECT_LE(std::hypot(v.x(), v.y()), pr.params.speed_max + 1e-6);
  }
  EXPECT_NEAR(plan.objective, p1_objective(plan.means, plan.controls, pr.goal),
              1e-6 * (1.0 + std::abs(plan.objective)));
}

}  // namespace

TEST(Objective, ZeroAtGoalWithConstantControls) {
  const Vec3 goal(10, 20, 0);
  std::vector<Vec6> means(3, Vec6::Zero());
  means.back().head<3>() = goal;
  const std::vector<Vec3> u(3, Vec3(100, -50, 0));
  EXPECT_EQ(p1_objective(means, u, goal), 0.0);
}

TEST(Objective, SingleStepDistance) {
  const Vec3 goal(10, 20, 0);
  std::vector<Vec6> means(1, Vec6::Zero());
  means[0].head<3>() = goal + Vec3(3, 0, 0);
  EXPECT_DOUBLE_EQ(p1_objective(means, std::vector<Vec3>{Vec3(5, 5, 0)}, goal), 9.0);
}

TEST(Objective, QuadraticFormMatchesDirect) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd(0.0, 2000.0), pos(0.0, 300.0);
  for (int h : {1, 4, 50}) {
    PlanningProblem p = open_problem(h, Vec3(500, 150, 0));
    Vec6 mu = Vec6::Zero();
    mu << pos(rng), pos(rng), 0, 5, -3, 0;
    const QuadraticForm f = p1_quadratic_form(p, mu);
    EXPECT_LE((f.P - f.P.transpose()).cwiseAbs().maxCoeff(), 1e-9 * f.P.cwiseAbs().maxCoeff());
    for (int trial = 0; trial < 50; ++trial) {
      VecX u(2 * h);
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = nd(rng);
      const auto c = controls_from_vector(u);
      const double direct = p1_objective(rollout_mean(p.dynamics, mu, c), c, p.goal);
      const double form = 0.5 * u.dot(f.P * u) + f.q.dot(u) + f.constant;
      EXPECT_NEAR(form, direct, 1e-9 * std::abs(direct)) << "h " << h;
    }
  }
}

TEST(RestrictedQp, ObstacleFreeHasOnlySpeedAndBoxRows) {
  const PlanningProblem p = open_problem(2, Vec3(100, 0, 0));
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  std::vector<RowKey> keys;
  const QuadraticProgram qp = build_restricted_qp(p, b, FaceAssignment(2, 0), 0, &keys);
  EXPECT_EQ(qp.q.size(), 4);
  ASSERT_EQ(keys.size(), static_cast<std::size_t>(qp.G.rows()));
  EXPECT_EQ(qp.G.rows(), 16);  // 8 facets per step
  for (const RowKey& k : keys) EXPECT_EQ(k.kind, RowKey::Speed);
  EXPECT_TRUE((qp.upper.array() == p.params.u_max).all());
  EXPECT_TRUE((qp.lower.array() == -p.params.u_max).all());
}

TEST(RestrictedQp, AssignedFaceHoldsEveryStep) {
  // Heading toward -x through a cube; holding the +x face keeps the path
  // on the near side.
  PlanningProblem p = open_problem(6, Vec3(-100, 0, 0));
  p.obstacles.push_back(Cuboid::axis_aligned(Vec3(40, -10, -10), Vec3(60, 10, 60)));
  Vec6 mu = Vec6::Zero();
  mu << 80, 0, 0, -8, 0, 0;
  const GaussianBelief b{mu, cases::standard_prior()};
  FaceAssignment faces(6, 1);
  for (int t = 0; t < 6; ++t) faces.set(t, 0, 0);
  const QuadraticProgram qp = build_restricted_qp(p, b, faces, 2);
  const QpSolution sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  const auto means = rollout_mean(p.dynamics, mu, controls_from_vector(sol.x));
  for (const Vec6& m : means) {
    EXPECT_GE(m[0], 60.0 + p.params.margin - 1e-6);
    EXPECT_GT(face_slack(p.obstacles[0], position_of(m), 0), 0.0);
  }
  // Without the row the optimum crosses the face.
  const QpSolution free_sol = solve_qp(build_restricted_qp(p, b, FaceAssignment(6, 1), 2));
  ASSERT_EQ(free_sol.status, QpStatus::Optimal);
  EXPECT_LT(rollout_mean(p.dynamics, mu, controls_from_vector(free_sol.x)).back()[0], 60.0);
}

TEST(FaceMargin, Stages) {
  PlannerParams pp;
  pp.margin = 0.5;
  pp.clearance = 25.0;
  EXPECT_EQ(face_margin(pp, 0, 0), 0.5);
  EXPECT_EQ(face_margin(pp, 3, 0), 25.5);
  EXPECT_EQ(face_margin(pp, 3, 2), 0.5);
  EXPECT_LT(face_margin(pp, 1, 1), face_margin(pp, 2, 1));
  EXPECT_EQ(face_margin(pp, 20, 1), 25.5);
}

TEST(AssignFaces, ClearPathUnconstrained) {
  const std::vector<Cuboid> obs{Cuboid::axis_aligned(Vec3::Zero(), Vec3::Ones())};
  std::vector<Vec6> means(3, Vec6::Zero());
  for (int t = 0; t < 3; ++t) means[static_cast<std::size_t>(t)].head<3>() = Vec3(5.0 + t, 5.0, 0.5);
  const FaceAssignment f = assign_faces(means, obs, 0.5);
  EXPECT_EQ(f.assigned_count(), 0);
}

TEST(AssignFaces, CentreAndNearFace) {
  const std::vector<Cuboid> obs{Cuboid::axis_aligned(Vec3::Zero(), Vec3::Ones())};
  std::vector<Vec6> means(2, Vec6::Zero());
  means[0].head<3>() = Vec3(0.5, 0.5, 0.5);
  means[1].head<3>() = Vec3(0.5, 0.95, 0.5);
  const FaceAssignment f = assign_faces(means, obs, 0.1);
  EXPECT_EQ(f.at(0, 0), 0);
  EXPECT_EQ(f.at(1, 0), 2);
}

TEST(FaceAssignmentType, Shifted) {
  FaceAssignment f(3, 2);
  f.set(0, 0, 1);
  f.set(1, 1, 4);
  f.set(2, 0, 5);
  const FaceAssignment s = f.shifted();
  EXPECT_EQ(s.at(0, 1), 4);
  EXPECT_EQ(s.at(1, 0), 5);
  EXPECT_EQ(s.at(2, 0), 5);
  EXPECT_EQ(s.at(0, 0), FaceAssignment::kUnconstrained);
  EXPECT_EQ(f.assigned_count(), 3);
}

TEST(Plan, NoObstaclesBeatsZeroControls) {
  const PlanningProblem p = open_problem(20, Vec3(200, 0, 0));
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  const GuidancePlan plan = plan_trajectory(p, b);
  ASSERT_TRUE(plan.feasible);
  expect_plan_invariants(p, b, plan);
  const std::vector<Vec3> zero(20, Vec3::Zero());
  EXPECT_LT(plan.objective, p1_objective(rollout_mean(p.dynamics, b.mean, zero), zero, p.goal));
  // Heading settles: the late controls point along +x.
  EXPECT_GT(plan.means.back()[0], 100.0);
  EXPECT_LT(std::abs(plan.means.back()[1]), 1e-6);
}

TEST(Plan, AtGoalAtRest) {
  const PlanningProblem p = open_problem(10, Vec3(50, 50, 0));
  Vec6 mu = Vec6::Zero();
  mu.head<3>() = p.goal;
  const GaussianBelief b{mu, cases::standard_prior()};
  const GuidancePlan plan = plan_trajectory(p, b);
  ASSERT_TRUE(plan.feasible);
  EXPECT_NEAR(plan.objective, 0.0, 1e-9);
  for (const Vec3& u : plan.controls) EXPECT_LE(u.norm(), 1e-6);
}

TEST(Plan, GoalInsideObstacleStaysFeasible) {
  PlanningProblem p = open_problem(8, Vec3(60, 0, 0));
  p.obstacles.push_back(Cuboid::axis_aligned(Vec3(40, -20, -10), Vec3(80, 20, 60)));
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  const GuidancePlan plan = plan_trajectory(p, b);
  EXPECT_TRUE(plan.feasible);
  expect_plan_invariants(p, b, plan);
  EXPECT_GT(plan.objective, 0.0);
}

TEST(Plan, ExhaustiveMatchesWithoutObstacles) {
  const PlanningProblem p = open_problem(4, Vec3(80, 30, 0));
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  const GuidancePlan h = plan_trajectory(p, b);
  const GuidancePlan e = exhaustive_plan(p, b);
  ASSERT_TRUE(h.feasible && e.feasible);
  EXPECT_NEAR(h.objective, e.objective, 1e-9 * (1.0 + e.objective));
  for (std::size_t t = 0; t < h.controls.size(); ++t)
    EXPECT_LE((h.controls[t] - e.controls[t]).norm(), 1e-6 * (1.0 + e.controls[t].norm()));
}

TEST(Plan, ExhaustiveRefusesLargeInstances) {
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  EXPECT_THROW(exhaustive_plan(open_problem(7, Vec3(1, 0, 0)), b), std::invalid_argument);
  PlanningProblem p = open_problem(3, Vec3(1, 0, 0));
  for (int i = 0; i < 3; ++i)
    p.obstacles.push_back(Cuboid::axis_aligned(Vec3(100.0 * i + 50, 0, 0), Vec3(100.0 * i + 60, 10, 10)));
  EXPECT_THROW(exhaustive_plan(p, b), std::invalid_argument);
}

TEST(Plan, HeuristicNearExhaustiveOnSmallCases) {
  int compared = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const cases::SmallCase c = cases::small_case(seed);
    const GuidancePlan e = exhaustive_plan(c.problem, c.belief);
    const GuidancePlan h = plan_trajectory(c.problem, c.belief);
    expect_plan_invariants(c.problem, c.belief, h);
    if (!e.feasible) continue;
    ++compared;
    ASSERT_TRUE(h.feasible) << "seed " << seed;
    // The oracle is a lower bound on every feasible assignment.
    EXPECT_GE(h.objective, e.objective - 1e-6 * (1.0 + e.objective)) << "seed " << seed;
    EXPECT_LE(h.objective, 1.05 * e.objective + 1e-9) << "seed " << seed;
  }
  EXPECT_GE(compared, 5);
}

TEST(Plan, ScenarioPlansSatisfyInvariants) {
  const ScenarioConfig cfg = load_scenario_file(scenario_path());
  for (std::size_t j = 0; j < cfg.targets.size(); ++j) {
    const PlanningProblem p = make_problem(cfg, j);
    const GaussianBelief b{cfg.targets[j].mean, cfg.targets[j].cov};
    const GuidancePlan plan = plan_trajectory(p, b);
    EXPECT_TRUE(plan.feasible) << "target " << j;
    expect_plan_invariants(p, b, plan);
    // Carried forward one step the plan still starts from a valid state.
    const GuidancePlan next = plan_trajectory(p, GaussianBelief{plan.means[0], b.cov}, &plan);
    EXPECT_TRUE(next.feasible) << "target " << j;
    expect_plan_invariants(p, GaussianBelief{plan.means[0], b.cov}, next);
  }
}

TEST(Plan, ShiftKeepsTail) {
  const PlanningProblem p = open_problem(5, Vec3(100, 0, 0));
  const GaussianBelief b{Vec6::Zero(), cases::standard_prior()};
  const GuidancePlan plan = plan_trajectory(p, b);
  const GaussianBelief next{plan.means[0], b.cov};
  const GuidancePlan s = shift_plan(p, plan, next);
  for (std::size_t t = 0; t + 1 < plan.controls.size(); ++t) EXPECT_EQ(s.controls[t], plan.controls[t + 1]);
  EXPECT_EQ(s.controls.back(), plan.controls.back());
  EXPECT_LE((s.means[0] - plan.means[1]).norm(), 1e-9 * (1.0 + plan.means[1].norm()));
}
