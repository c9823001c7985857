#pragma once

#include "ptrack/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ptrack {

/// minimize 1/2 x'Px + q'x  subject to  Gx <= h,  lower <= x <= upper.
/// Infinite bounds are allowed.
struct QuadraticProgram {
  MatX P;
  VecX q;
  MatX G;
  VecX h;
  VecX lower;
  VecX upper;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_rows() const { return h.size(); }

  /// Variables with infinite bounds and no inequality rows.
  static QuadraticProgram unconstrained(MatX p, VecX q);
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

const char* to_string(QpStatus s);

/// Constraint ids used in active sets and certificates: [0, m) are rows of
/// G, m + j is the upper bound of x_j and m + n + j its lower bound.
struct QpSolution {
  VecX x;
  VecX duals;        // m row multipliers, >= 0 at optimum
  VecX upper_duals;  // n
  VecX lower_duals;  // n
  QpStatus status = QpStatus::MaxIter;
  double objective = 0.0;
  std::vector<int> active_set;
  std::vector<int> certificate;  // conflicting constraints when Infeasible
  int iterations = 0;
};

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 1000;
  std::optional<VecX> x0;              // feasible (or nearly) starting point
  std::vector<int> working_set;        // warm-start guess of the optimal active set
};

/// Thrown when P is not positive semidefinite (Cholesky fails even after
/// the 1e-9 regularization) or the problem dimensions disagree.
class QpError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dense primal active-set solver. Equality subproblems are solved in the
/// range space of a Cholesky factor of P; a proximal phase-1 problem finds
/// the first feasible point or proves infeasibility.
QpSolution solve_qp(const QuadraticProgram& prob, const QpOptions& options);
QpSolution solve_qp(const QuadraticProgram& prob, double tol = 1e-9, int max_iter = 1000);

/// Largest of stationarity, primal violation, dual negativity and
/// complementarity, all in absolute terms.
double kkt_residual(const QuadraticProgram& prob, const QpSolution& sol);

double qp_objective(const QuadraticProgram& prob, const VecX& x);

/// Plain-text matrix dump of (P, q, G, h, lower, upper) for external
/// cross-checking; one "name rows cols" header followed by rows.
std::string dump_qp_text(const QuadraticProgram& prob);

}  // namespace ptrack
