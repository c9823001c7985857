#pragma once

#include "ptrack/prediction.hpp"
#include "ptrack/qp.hpp"
#include "ptrack/scenario.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ptrack {

/// Per (horizon step, obstacle) choice of the enforced face. Faces are
/// 0-based in Cuboid order; kUnconstrained leaves the pair free.
class FaceAssignment {
public:
  static constexpr int kUnconstrained = -1;

  FaceAssignment() = default;
  FaceAssignment(int horizon, int obstacles)
      : horizon_(horizon), obstacles_(obstacles),
        face_(static_cast<std::size_t>(horizon * obstacles), kUnconstrained) {}

  int horizon() const { return horizon_; }
  int obstacles() const { return obstacles_; }
  int at(int tau, int n) const { return face_[index(tau, n)]; }
  void set(int tau, int n, int face) { face_[index(tau, n)] = face; }
  int assigned_count() const;

  /// Assignment for the next step: entry tau takes entry tau + 1 and the
  /// last step repeats.
  FaceAssignment shifted() const;

  bool operator==(const FaceAssignment&) const = default;

private:
  std::size_t index(int tau, int n) const { return static_cast<std::size_t>(tau * obstacles_ + n); }
  int horizon_ = 0;
  int obstacles_ = 0;
  std::vector<int> face_;
};

/// One target's planning problem, independent of the belief.
struct PlanningProblem {
  DynamicsModel dynamics;
  std::vector<Cuboid> obstacles;
  Vec3 goal = Vec3::Zero();
  PlannerParams params;
  int horizon = 50;
};

/// Problem for target `target` of a scenario; horizon <= 0 keeps the
/// configured one.
PlanningProblem make_problem(const ScenarioConfig& config, std::size_t target, int horizon = 0);

/// Identifies a QP row across consecutive plans so an active set can be
/// carried forward.
struct RowKey {
  enum Kind : int { Speed, Face, Upper, Lower } kind = Speed;
  int tau = 0;
  int index = 0;  // speed facet, obstacle, or control axis
  bool operator==(const RowKey&) const = default;
};

struct GuidancePlan {
  std::vector<Vec3> controls;
  std::vector<Vec6> means;
  std::vector<Mat6> covs;
  FaceAssignment faces;
  double objective = 0.0;
  bool feasible = false;
  int iterations = 0;   // outer iterations
  int qp_solves = 0;
  int margin_stage = 0; // 0 full clearance, 1 ramped, 2 margin only
  std::vector<double> incumbent_history;
  std::vector<RowKey> active;  // active rows of the final QP
  int since_explore = 0;       // replans since the last search from an empty assignment
};

/// Terminal goal distance plus control smoothness evaluated directly:
/// |pos(T-1) - goal|^2 + sum_{tau>=1} |u_tau - u_{tau-1}|^2.
double p1_objective(std::span<const Vec6> means, std::span<const Vec3> controls, const Vec3& goal);

/// The same objective as 1/2 u'Pu + q'u + constant over the planar control
/// vector u = [ux_0, uy_0, ux_1, ...].
struct QuadraticForm {
  MatX P;
  VecX q;
  double constant = 0.0;
};
QuadraticForm p1_quadratic_form(const PlanningProblem& problem, const Vec6& mean);

/// Controls from a planar variable vector (z component zero).
std::vector<Vec3> controls_from_vector(const VecX& u);

/// Restricted QP for a fixed face assignment: box bounds on every control,
/// an octagon speed bound on every predicted velocity and, for each
/// assigned pair, face_slack >= margin(tau). `keys` receives one entry per
/// row of G.
QuadraticProgram build_restricted_qp(const PlanningProblem& problem, const GaussianBelief& belief,
                                     const FaceAssignment& faces, int margin_stage = 0,
                                     std::vector<RowKey>* keys = nullptr);

/// Required face slack at step tau for a margin stage.
double face_margin(const PlannerParams& params, int tau, int margin_stage);

/// For every pair whose position is inside the obstacle or within the
/// margin of it, the face of largest slack (lowest index on ties).
FaceAssignment assign_faces(std::span<const Vec6> means, std::span<const Cuboid> obstacles,
                            double margin);

/// Heuristic planner: solve the restricted QP, pick a face for the first
/// penetrating run of steps by trying every face, repeat until the means
/// are clear. A previous plan seeds the face assignment and the QP start.
GuidancePlan plan_trajectory(const PlanningProblem& problem, const GaussianBelief& belief,
                             const GuidancePlan* previous = nullptr);

/// Exact optimum over face assignments by branch and bound. Refuses
/// horizons above 6 or more than 2 obstacles with std::invalid_argument.
GuidancePlan exhaustive_plan(const PlanningProblem& problem, const GaussianBelief& belief);

/// Smallest face_slack - margin over all steps and obstacles, using the
/// best face of each pair. Non-negative means clear.
double min_clearance(const PlanningProblem& problem, std::span<const Vec6> means, int margin_stage = 0);

/// A plan advanced by one step: controls and means shifted, last control
/// repeated and means re-rolled from the given belief.
GuidancePlan shift_plan(const PlanningProblem& problem, const GuidancePlan& plan, const GaussianBelief& belief);

}  // namespace ptrack
