#include "ptrack/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ptrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kRampSteps = 5;
constexpr int kSpeedFacets = 8;
// Slack below the required margin that still counts as clear; covers QP
// rounding on active face rows.
constexpr double kClearTol = 1e-6;
// QP solves spent on local improvement after a branching episode.
constexpr int kLocalSearchBudget = 60;
// A plan held against obstacle faces is compared with a search from an
// empty assignment at least this often, so carried-over faces cannot pin a
// target behind an obstacle forever.
constexpr int kExploreEvery = 10;

/// Affine maps from the planar control vector to predicted positions and
/// velocities: pos(tau) = fp[tau] + gp[tau] u, vel(tau) = fv[tau] + gv[tau] u.
struct Linearization {
  int horizon = 0;
  std::vector<Vec3> fp, fv;
  std::vector<MatX> gp, gv;  // 3 x 2T each

  Linearization(const DynamicsModel& model, const Vec6& mu, int t) : horizon(t) {
    const std::vector<Mat6> pw = matrix_powers(model.A, t);
    std::vector<Mat63> ab(static_cast<std::size_t>(t));
    for (int j = 0; j < t; ++j) ab[static_cast<std::size_t>(j)] = pw[static_cast<std::size_t>(j)] * model.B;
    fp.resize(static_cast<std::size_t>(t));
    fv.resize(static_cast<std::size_t>(t));
    gp.assign(static_cast<std::size_t>(t), MatX::Zero(3, 2 * t));
    gv.assign(static_cast<std::size_t>(t), MatX::Zero(3, 2 * t));
    for (int tau = 0; tau < t; ++tau) {
      const auto s = static_cast<std::size_t>(tau);
      const Vec6 free = pw[s + 1] * mu;
      fp[s] = free.head<3>();
      fv[s] = free.tail<3>();
      for (int k = 0; k <= tau; ++k) {
        const Mat63& m = ab[static_cast<std::size_t>(tau - k)];
        gp[s].block(0, 2 * k, 3, 2) = m.block(0, 0, 3, 2);
        gv[s].block(0, 2 * k, 3, 2) = m.block(3, 0, 3, 2);
      }
    }
  }
};

Vec2 speed_normal(int k) {
  const double a = k * std::numbers::pi / 4.0 + std::numbers::pi / 8.0;
  return Vec2(std::cos(a), std::sin(a));
}

bool face_controllable(const Linearization& lin, const Cuboid& c, int tau, int face) {
  const Vec3& a = c.face(static_cast<std::size_t>(face)).normal;
  return (a.transpose() * lin.gp[static_cast<std::size_t>(tau)]).norm() > 1e-12;
}

struct Attempt {
  FaceAssignment faces;
  bool ok = false;
  VecX u;
  double objective = kInf;
  std::vector<Vec6> means;
  std::vector<RowKey> active;
  std::vector<RowKey> active_faces;  // face rows with a positive multiplier
};

struct Penetration {
  int tau = -1;
  int obstacle = -1;
  bool uncontrollable = false;  // a pair that no control can clear
};

class Planner {
public:
  Planner(const PlanningProblem& problem, const GaussianBelief& belief)
      : pr_(problem), belief_(belief), lin_(problem.dynamics, belief.mean, problem.horizon),
        form_(p1_quadratic_form(problem, belief.mean)) {
    if (problem.horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");
  }

  int solves() const { return solves_; }
  int horizon() const { return pr_.horizon; }
  int obstacle_count() const { return static_cast<int>(pr_.obstacles.size()); }
  FaceAssignment empty() const { return FaceAssignment(pr_.horizon, obstacle_count()); }

  Attempt solve(const FaceAssignment& faces, int stage, const VecX* x0,
                const std::vector<RowKey>& warm_keys) {
    ++solves_;
    std::vector<RowKey> keys;
    const QuadraticProgram qp = build(faces, stage, keys);
    QpOptions opt;
    opt.tol = pr_.params.qp_tol;
    opt.max_iter = pr_.params.qp_max_iter;
    if (x0 && x0->size() == qp.num_vars()) opt.x0 = x0->cwiseMax(qp.lower).cwiseMin(qp.upper);
    opt.working_set = map_keys(warm_keys, keys, qp);
    const QpSolution sol = solve_qp(qp, opt);
    Attempt a;
    a.faces = faces;
    if (sol.status != QpStatus::Optimal) return a;
    a.ok = true;
    a.u = sol.x;
    a.objective = sol.objective + form_.constant;
    const std::vector<Vec3> controls = controls_from_vector(sol.x);
    a.means = rollout_mean(pr_.dynamics, belief_.mean, controls);
    const Eigen::Index m = qp.num_rows();
    const Eigen::Index n = qp.num_vars();
    for (int id : sol.active_set) {
      if (id < m) {
        a.active.push_back(keys[static_cast<std::size_t>(id)]);
        if (keys[static_cast<std::size_t>(id)].kind == RowKey::Face && sol.duals[id] > 1e-9)
          a.active_faces.push_back(keys[static_cast<std::size_t>(id)]);
      } else if (id < m + n) {
        a.active.push_back({RowKey::Upper, static_cast<int>((id - m) / 2), static_cast<int>((id - m) % 2)});
      } else {
        a.active.push_back({RowKey::Lower, static_cast<int>((id - m - n) / 2), static_cast<int>((id - m - n) % 2)});
      }
    }
    return a;
  }

  QuadraticProgram build(const FaceAssignment& faces, int stage, std::vector<RowKey>& keys) const {
    const int t = pr_.horizon;
    const int nv = 2 * t;
    std::vector<std::pair<VecX, double>> rows;
    keys.clear();
    const double vcap = pr_.params.speed_max * std::cos(std::numbers::pi / 8.0);
    for (int tau = 0; tau < t; ++tau) {
      const auto s = static_cast<std::size_t>(tau);
      for (int k = 0; k < kSpeedFacets; ++k) {
        const Vec2 nk = speed_normal(k);
        VecX row = nk.transpose() * lin_.gv[s].topRows(2);
        rows.emplace_back(std::move(row), vcap - nk.dot(lin_.fv[s].head<2>()));
        keys.push_back({RowKey::Speed, tau, k});
      }
    }
    for (int tau = 0; tau < t; ++tau) {
      const auto s = static_cast<std::size_t>(tau);
      for (int n = 0; n < obstacle_count(); ++n) {
        const int f = faces.at(tau, n);
        if (f == FaceAssignment::kUnconstrained) continue;
        const Face& face = pr_.obstacles[static_cast<std::size_t>(n)].face(static_cast<std::size_t>(f));
        VecX row = -(face.normal.transpose() * lin_.gp[s]).transpose();
        // Rows with no control dependence are constants; the planner checks
        // them itself.
        if (row.norm() <= 1e-12) continue;
        const double rhs = face.normal.dot(lin_.fp[s]) - face.offset - face_margin(pr_.params, tau, stage);
        rows.emplace_back(std::move(row), rhs);
        keys.push_back({RowKey::Face, tau, n});
      }
    }
    QuadraticProgram qp;
    qp.P = form_.P;
    qp.q = form_.q;
    qp.G.resize(static_cast<Eigen::Index>(rows.size()), nv);
    qp.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      qp.G.row(static_cast<Eigen::Index>(i)) = rows[i].first.transpose();
      qp.h[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
    qp.lower = VecX::Constant(nv, -pr_.params.u_max);
    qp.upper = VecX::Constant(nv, pr_.params.u_max);
    return qp;
  }

  /// First (tau, obstacle) in step order whose mean is not clear and that a
  /// new face could fix. Pairs at tau = 0 cannot be moved by the controls
  /// and only set `uncontrollable`.
  Penetration first_penetration(const Attempt& a, int stage) const {
    Penetration p;
    for (int tau = 0; tau < pr_.horizon; ++tau) {
      const Vec3 pos = position_of(a.means[static_cast<std::size_t>(tau)]);
      const double need = face_margin(pr_.params, tau, stage) - kClearTol;
      for (int n = 0; n < obstacle_count(); ++n) {
        if (clear(pos, n, a.faces.at(tau, n), need)) continue;
        if (!any_controllable(tau, n) || a.faces.at(tau, n) != FaceAssignment::kUnconstrained) {
          p.uncontrollable = true;
          continue;
        }
        if (p.tau < 0) {
          p.tau = tau;
          p.obstacle = n;
        }
      }
    }
    return p;
  }

  bool is_clear(const Attempt& a, int stage) const {
    const Penetration p = first_penetration(a, stage);
    return p.tau < 0 && !p.uncontrollable;
  }

  /// Steps tau0, tau0 + 1, ... for obstacle n that are unassigned and not
  /// clear.
  std::vector<int> penetration_run(const Attempt& a, int stage, int tau0, int n) const {
    std::vector<int> run;
    for (int tau = tau0; tau < pr_.horizon; ++tau) {
      if (a.faces.at(tau, n) != FaceAssignment::kUnconstrained) break;
      const Vec3 pos = position_of(a.means[static_cast<std::size_t>(tau)]);
      if (clear(pos, n, FaceAssignment::kUnconstrained, face_margin(pr_.params, tau, stage) - kClearTol))
        break;
      run.push_back(tau);
    }
    return run;
  }

  /// Faces worth trying for a set of steps: those with a control-dependent
  /// row at some step, or already satisfied where they are not.
  std::vector<int> candidate_faces(const Attempt& a, int stage, const std::vector<int>& run, int n) const {
    std::vector<int> out;
    const Cuboid& c = pr_.obstacles[static_cast<std::size_t>(n)];
    for (int f = 0; f < static_cast<int>(Cuboid::kFaces); ++f) {
      bool usable = true;
      for (int tau : run) {
        if (face_controllable(lin_, c, tau, f)) continue;
        const double s = face_slack(c, position_of(a.means[static_cast<std::size_t>(tau)]), static_cast<std::size_t>(f));
        if (s < face_margin(pr_.params, tau, stage) - kClearTol) {
          usable = false;
          break;
        }
      }
      if (usable) out.push_back(f);
    }
    return out;
  }

  double clearance(const Attempt& a, int stage) const {
    return min_clearance(pr_, a.means, stage);
  }

  const PlanningProblem& problem() const { return pr_; }
  const GaussianBelief& belief() const { return belief_; }

private:
  bool clear(const Vec3& pos, int n, int face, double need) const {
    const Cuboid& c = pr_.obstacles[static_cast<std::size_t>(n)];
    if (face != FaceAssignment::kUnconstrained) return face_slack(c, pos, static_cast<std::size_t>(face)) >= need;
    for (std::size_t i = 0; i < Cuboid::kFaces; ++i)
      if (face_slack(c, pos, i) >= need) return true;
    return false;
  }

  bool any_controllable(int tau, int n) const {
    const Cuboid& c = pr_.obstacles[static_cast<std::size_t>(n)];
    for (int f = 0; f < static_cast<int>(Cuboid::kFaces); ++f)
      if (face_controllable(lin_, c, tau, f)) return true;
    return false;
  }

  std::vector<int> map_keys(const std::vector<RowKey>& want, const std::vector<RowKey>& keys,
                            const QuadraticProgram& qp) const {
    std::vector<int> ids;
    const int m = static_cast<int>(qp.num_rows());
    const int n = static_cast<int>(qp.num_vars());
    for (const RowKey& k : want) {
      if (k.tau < 0 || k.tau >= pr_.horizon) continue;
      switch (k.kind) {
        case RowKey::Upper: ids.push_back(m + 2 * k.tau + k.index); break;
        case RowKey::Lower: ids.push_back(m + n + 2 * k.tau + k.index); break;
        case RowKey::Speed: ids.push_back(kSpeedFacets * k.tau + k.index); break;
        case RowKey::Face: {
          for (std::size_t i = static_cast<std::size_t>(kSpeedFacets * pr_.horizon); i < keys.size(); ++i)
            if (keys[i] == k) {
              ids.push_back(static_cast<int>(i));
              break;
            }
          break;
        }
      }
    }
    return ids;
  }

  const PlanningProblem& pr_;
  GaussianBelief belief_;
  Linearization lin_;
  QuadraticForm form_;
  int solves_ = 0;
};

std::vector<RowKey> face_keys(const std::vector<int>& run, int n) {
  std::vector<RowKey> out;
  for (int tau : run) out.push_back({RowKey::Face, tau, n});
  return out;
}

std::vector<RowKey> concat(std::vector<RowKey> a, const std::vector<RowKey>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Greedy descent from `start`: branch on the first penetrating run, keep
/// the cheapest feasible child, stop when clear. Returns a clear attempt or
/// one with ok == false.
Attempt greedy(Planner& pl, Attempt att, int stage, int max_outer, int& iterations, bool& branched) {
  for (int it = 0; it < max_outer; ++it) {
    ++iterations;
    const Penetration pen = pl.first_penetration(att, stage);
    if (pen.tau < 0) {
      if (pen.uncontrollable) att.ok = false;
      return att;
    }
    branched = true;
    const std::vector<int> run = pl.penetration_run(att, stage, pen.tau, pen.obstacle);
    Attempt best;
    for (int f : pl.candidate_faces(att, stage, run, pen.obstacle)) {
      FaceAssignment child = att.faces;
      for (int tau : run) child.set(tau, pen.obstacle, f);
      Attempt c = pl.solve(child, stage, &att.u, concat(att.active, face_keys(run, pen.obstacle)));
      if (c.ok && c.objective < best.objective) best = std::move(c);
    }
    if (!best.ok) return best;
    att = std::move(best);
  }
  Attempt fail;
  fail.faces = att.faces;
  return fail;
}

/// Tries a different face for each active face row of a clear plan and
/// keeps any clear completion that lowers the objective.
Attempt local_search(Planner& pl, Attempt inc, int stage, int max_outer, int& iterations,
                     std::vector<double>& history) {
  const int budget_end = pl.solves() + kLocalSearchBudget;
  bool improved = true;
  while (improved && pl.solves() < budget_end) {
    improved = false;
    for (const RowKey& k : inc.active_faces) {
      const int cur = inc.faces.at(k.tau, k.index);
      for (int f : pl.candidate_faces(inc, stage, {k.tau}, k.index)) {
        if (f == cur || pl.solves() >= budget_end) continue;
        FaceAssignment child = inc.faces;
        child.set(k.tau, k.index, f);
        Attempt c = pl.solve(child, stage, &inc.u, inc.active);
        if (!c.ok || c.objective >= inc.objective) continue;
        bool branched = false;
        c = greedy(pl, std::move(c), stage, max_outer, iterations, branched);
        if (c.ok && c.objective < inc.objective * (1.0 - 1e-9) - 1e-12) {
          inc = std::move(c);
          history.push_back(inc.objective);
          improved = true;
          break;
        }
      }
      if (improved) break;
    }
  }
  return inc;
}

GuidancePlan to_plan(const Planner& pl, const Attempt& a, bool feasible, int stage) {
  GuidancePlan plan;
  plan.controls = controls_from_vector(a.u);
  plan.means = a.means;
  plan.covs = rollout_cov(pl.problem().dynamics, pl.belief().cov, pl.horizon());
  plan.faces = a.faces;
  plan.objective = a.objective;
  plan.feasible = feasible;
  plan.margin_stage = stage;
  plan.active = a.active;
  plan.qp_solves = pl.solves();
  return plan;
}

std::vector<int> margin_stages(const PlannerParams& p) {
  if (p.clearance > 0.0) return {0, 1, 2};
  return {0};
}

}  // namespace

int FaceAssignment::assigned_count() const {
  return static_cast<int>(std::count_if(face_.begin(), face_.end(), [](int f) { return f != kUnconstrained; }));
}

FaceAssignment FaceAssignment::shifted() const {
  FaceAssignment out(horizon_, obstacles_);
  for (int tau = 0; tau < horizon_; ++tau)
    for (int n = 0; n < obstacles_; ++n) out.set(tau, n, at(std::min(tau + 1, horizon_ - 1), n));
  return out;
}

PlanningProblem make_problem(const ScenarioConfig& config, std::size_t target, int horizon) {
  PlanningProblem p;
  p.dynamics = config.dynamics;
  p.obstacles = config.obstacles;
  p.goal = config.targets.at(target).goal.center;
  p.params = config.planner;
  p.horizon = horizon > 0 ? horizon : config.planner.horizon;
  return p;
}

double p1_objective(std::span<const Vec6> means, std::span<const Vec3> controls, const Vec3& goal) {
  if (means.empty()) return 0.0;
  double v = (position_of(means.back()) - goal).squaredNorm();
  for (std::size_t tau = 1; tau < controls.size(); ++tau) v += (controls[tau] - controls[tau - 1]).squaredNorm();
  return v;
}

QuadraticForm p1_quadratic_form(const PlanningProblem& problem, const Vec6& mean) {
  const int t = problem.horizon;
  const Linearization lin(problem.dynamics, mean, t);
  const MatX& phi = lin.gp[static_cast<std::size_t>(t - 1)];
  const Vec3 r = lin.fp[static_cast<std::size_t>(t - 1)] - problem.goal;
  MatX dtd = MatX::Zero(2 * t, 2 * t);
  for (int tau = 1; tau < t; ++tau)
    for (int a = 0; a < 2; ++a) {
      const int i = 2 * tau + a;
      const int j = 2 * (tau - 1) + a;
      dtd(i, i) += 1.0;
      dtd(j, j) += 1.0;
      dtd(i, j) -= 1.0;
      dtd(j, i) -= 1.0;
    }
  QuadraticForm f;
  f.P = 2.0 * (phi.transpose() * phi + dtd);
  f.q = 2.0 * phi.transpose() * r;
  f.constant = r.squaredNorm();
  return f;
}

std::vector<Vec3> controls_from_vector(const VecX& u) {
  std::vector<Vec3> out(static_cast<std::size_t>(u.size() / 2));
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = Vec3(u[static_cast<Eigen::Index>(2 * k)], u[static_cast<Eigen::Index>(2 * k + 1)], 0.0);
  return out;
}

double face_margin(const PlannerParams& params, int tau, int margin_stage) {
  if (tau == 0 || margin_stage >= 2) return params.margin;
  if (margin_stage == 1)
    return params.margin + params.clearance * std::min(1.0, static_cast<double>(tau) / kRampSteps);
  return params.margin + params.clearance;
}

QuadraticProgram build_restricted_qp(const PlanningProblem& problem, const GaussianBelief& belief,
                                     const FaceAssignment& faces, int margin_stage,
                                     std::vector<RowKey>* keys) {
  if (faces.horizon() != problem.horizon || faces.obstacles() != static_cast<int>(problem.obstacles.size()))
    throw std::invalid_argument("build_restricted_qp: face assignment does not match the problem");
  const Planner pl(problem, belief);
  std::vector<RowKey> k;
  QuadraticProgram qp = pl.build(faces, margin_stage, k);
  if (keys) *keys = std::move(k);
  return qp;
}

FaceAssignment assign_faces(std::span<const Vec6> means, std::span<const Cuboid> obstacles, double margin) {
  FaceAssignment out(static_cast<int>(means.size()), static_cast<int>(obstacles.size()));
  for (std::size_t tau = 0; tau < means.size(); ++tau) {
    const Vec3 p = position_of(means[tau]);
    for (std::size_t n = 0; n < obstacles.size(); ++n) {
      const std::size_t f = max_slack_face(obstacles[n], p);
      if (face_slack(obstacles[n], p, f) < margin)
        out.set(static_cast<int>(tau), static_cast<int>(n), static_cast<int>(f));
    }
  }
  return out;
}

double min_clearance(const PlanningProblem& problem, std::span<const Vec6> means, int margin_stage) {
  double worst = kInf;
  for (std::size_t tau = 0; tau < means.size(); ++tau) {
    const Vec3 p = position_of(means[tau]);
    const double need = face_margin(problem.params, static_cast<int>(tau), margin_stage);
    for (const Cuboid& c : problem.obstacles) {
      const std::size_t f = max_slack_face(c, p);
      worst = std::min(worst, face_slack(c, p, f) - need);
    }
  }
  return worst;
}

GuidancePlan plan_trajectory(const PlanningProblem& problem, const GaussianBelief& belief,
                             const GuidancePlan* previous) {
  Planner pl(problem, belief);
  const int t = problem.horizon;
  const bool usable_prev = previous && previous->faces.horizon() == t &&
                           previous->faces.obstacles() == pl.obstacle_count() &&
                           static_cast<int>(previous->controls.size()) == t;
  VecX x0;
  std::vector<RowKey> warm;
  FaceAssignment hint = pl.empty();
  if (usable_prev) {
    x0.resize(2 * t);
    for (int tau = 0; tau < t; ++tau) {
      const Vec3& u = previous->controls[static_cast<std::size_t>(std::min(tau + 1, t - 1))];
      x0[2 * tau] = u.x();
      x0[2 * tau + 1] = u.y();
    }
    for (RowKey k : previous->active) {
      --k.tau;
      if (k.tau >= 0) warm.push_back(k);
    }
    hint = previous->faces.shifted();
  }

  int iterations = 0;
  std::vector<double> history;
  Attempt fallback;
  double fallback_clear = -kInf;
  int fallback_stage = 0;
  for (int stage : margin_stages(problem.params)) {
    Attempt att = pl.solve(hint, stage, usable_prev ? &x0 : nullptr, warm);
    if (!att.ok && hint.assigned_count() > 0) att = pl.solve(pl.empty(), stage, usable_prev ? &x0 : nullptr, warm);
    if (!att.ok) continue;
    bool branched = false;
    Attempt start = att;
    Attempt res = greedy(pl, std::move(att), stage, problem.params.max_outer, iterations, branched);
    if (!res.ok && hint.assigned_count() > 0) {
      // The carried-over faces may be what blocks progress; retry without them.
      Attempt fresh = pl.solve(pl.empty(), stage, usable_prev ? &x0 : nullptr, warm);
      if (fresh.ok) {
        start = fresh;
        res = greedy(pl, std::move(fresh), stage, problem.params.max_outer, iterations, branched);
      }
    }
    if (res.ok) {
      history.push_back(res.objective);
      if (branched) res = local_search(pl, std::move(res), stage, problem.params.max_outer, iterations, history);
      int since = usable_prev ? previous->since_explore + 1 : 0;
      if (usable_prev && hint.assigned_count() > 0 && !res.active_faces.empty() && since >= kExploreEvery) {
        since = 0;
        Attempt fresh = pl.solve(pl.empty(), stage, &x0, warm);
        bool fb = false;
        if (fresh.ok) fresh = greedy(pl, std::move(fresh), stage, problem.params.max_outer, iterations, fb);
        if (fresh.ok && fb) fresh = local_search(pl, std::move(fresh), stage, problem.params.max_outer, iterations, history);
        if (fresh.ok && fresh.objective < res.objective) {
          res = std::move(fresh);
          history.push_back(res.objective);
        }
      }
      GuidancePlan plan = to_plan(pl, res, true, stage);
      plan.iterations = iterations;
      plan.incumbent_history = std::move(history);
      plan.since_explore = since;
      return plan;
    }
    const double cl = pl.clearance(start, stage);
    if (!fallback.ok || cl > fallback_clear) {
      fallback = start;
      fallback_clear = cl;
      fallback_stage = stage;
    }
  }
  if (!fallback.ok) {
    // Even the obstacle-free restriction failed (speed or control bounds);
    // report the shifted previous controls or zeros.
    fallback.faces = pl.empty();
    fallback.u = usable_prev ? x0 : VecX(VecX::Zero(2 * t));
    fallback.means = rollout_mean(problem.dynamics, belief.mean, controls_from_vector(fallback.u));
    fallback.objective = p1_objective(fallback.means, controls_from_vector(fallback.u), problem.goal);
  }
  GuidancePlan plan = to_plan(pl, fallback, false, fallback_stage);
  plan.iterations = iterations;
  plan.incumbent_history = std::move(history);
  return plan;
}

GuidancePlan exhaustive_plan(const PlanningProblem& problem, const GaussianBelief& belief) {
  if (problem.horizon > 6 || problem.obstacles.size() > 2)
    throw std::invalid_argument("exhaustive_plan: instance too large (horizon <= 6, obstacles <= 2)");
  Planner pl(problem, belief);
  Attempt best;
  int nodes = 0;
  std::vector<double> history;

  auto recurse = [&](auto&& self, const FaceAssignment& faces, const Attempt* parent) -> void {
    ++nodes;
    Attempt a = pl.solve(faces, 0, parent ? &parent->u : nullptr, parent ? parent->active : std::vector<RowKey>{});
    // Adding rows never lowers the optimum, so a node no better than the
    // incumbent cannot lead to a better leaf.
    if (!a.ok || a.objective >= best.objective) return;
    const Penetration pen = pl.first_penetration(a, 0);
    if (pen.tau < 0) {
      if (pen.uncontrollable) return;
      best = a;
      history.push_back(a.objective);
      return;
    }
    for (int f : pl.candidate_faces(a, 0, {pen.tau}, pen.obstacle)) {
      FaceAssignment child = faces;
      child.set(pen.tau, pen.obstacle, f);
      self(self, child, &a);
    }
  };
  recurse(recurse, pl.empty(), nullptr);

  if (!best.ok) {
    GuidancePlan plan;
    plan.faces = pl.empty();
    plan.feasible = false;
    plan.objective = kInf;
    plan.iterations = nodes;
    plan.qp_solves = pl.solves();
    return plan;
  }
  GuidancePlan plan = to_plan(pl, best, true, 0);
  plan.iterations = nodes;
  plan.incumbent_history = std::move(history);
  return plan;
}

GuidancePlan shift_plan(const PlanningProblem& problem, const GuidancePlan& plan, const GaussianBelief& belief) {
  GuidancePlan out = plan;
  const std::size_t t = plan.controls.size();
  if (t == 0) return out;
  for (std::size_t tau = 0; tau + 1 < t; ++tau) out.controls[tau] = plan.controls[tau + 1];
  out.means = rollout_mean(problem.dynamics, belief.mean, out.controls);
  out.covs = rollout_cov(problem.dynamics, belief.cov, static_cast<int>(t));
  out.faces = plan.faces.shifted();
  out.objective = p1_objective(out.means, out.controls, problem.goal);
  for (RowKey& k : out.active) --k.tau;
  std::erase_if(out.active, [](const RowKey& k) { return k.tau < 0; });
  return out;
}

}  // namespace ptrack
