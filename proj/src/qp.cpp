#include "ptrack/qp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ptrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VecX& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

void check_dimensions(const QuadraticProgram& p) {
  const Eigen::Index n = p.q.size();
  const Eigen::Index m = p.h.size();
  if (n == 0) throw QpError("qp: no variables");
  if (p.P.rows() != n || p.P.cols() != n) throw QpError("qp: P must be n x n");
  if (p.G.rows() != m || (m > 0 && p.G.cols() != n)) throw QpError("qp: G must be m x n");
  if (p.lower.size() != n || p.upper.size() != n) throw QpError("qp: bounds must have n entries");
  if ((p.lower.array() > p.upper.array()).any()) throw QpError("qp: lower > upper");
  if (!p.P.allFinite() || !p.q.allFinite() || !p.G.allFinite() || !p.h.allFinite())
    throw QpError("qp: non-finite data");
  const double scale = std::max(1.0, p.P.cwiseAbs().maxCoeff());
  if ((p.P - p.P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw QpError("qp: P is not symmetric");
}

/// Uniform view over the rows of G and the finite bounds.
struct Constraints {
  const QuadraticProgram& prob;
  Eigen::Index n;
  Eigen::Index m;

  explicit Constraints(const QuadraticProgram& p) : prob(p), n(p.q.size()), m(p.h.size()) {}

  int count() const { return static_cast<int>(m + 2 * n); }

  bool present(int id) const {
    if (id < m) return true;
    if (id < m + n) return std::isfinite(prob.upper[id - m]);
    return std::isfinite(prob.lower[id - m - n]);
  }

  double dot(int id, const VecX& v) const {
    if (id < m) return prob.G.row(id).dot(v);
    if (id < m + n) return v[id - m];
    return -v[id - m - n];
  }

  double rhs(int id) const {
    if (id < m) return prob.h[id];
    if (id < m + n) return prob.upper[id - m];
    return -prob.lower[id - m - n];
  }

  double row_norm(int id) const { return id < m ? prob.G.row(id).norm() : 1.0; }

  VecX row(int id) const {
    if (id < m) return prob.G.row(id).transpose();
    VecX e = VecX::Zero(n);
    if (id < m + n)
      e[id - m] = 1.0;
    else
      e[id - m - n] = -1.0;
    return e;
  }
};

double max_violation(const Constraints& c, const VecX& x) {
  double v = 0.0;
  for (int id = 0; id < c.count(); ++id) {
    if (!c.present(id)) continue;
    v = std::max(v, c.dot(id, x) - c.rhs(id));
  }
  return v;
}

/// Active-set iterations on a problem with a fixed Cholesky factor.
class ActiveSet {
public:
  ActiveSet(const QuadraticProgram& prob, const Eigen::LLT<MatX>& chol, const MatX& p_used,
            double tol)
      : c_(prob), prob_(prob), chol_(chol), p_used_(p_used), tol_(tol) {
    row_norms_.resize(static_cast<std::size_t>(c_.count()));
    for (int id = 0; id < c_.count(); ++id) row_norms_[static_cast<std::size_t>(id)] = c_.row_norm(id);
  }

  /// Adds `id` to the working set if it is linearly independent of it.
  bool add(int id) {
    VecX y = chol_.matrixL().solve(c_.row(id));
    const Eigen::Index k = static_cast<Eigen::Index>(w_.size());
    const double diag = y.squaredNorm();
    VecX l;
    double d2 = diag;
    if (k > 0) {
      // Row of the Gram factor for the new constraint; d2 is its Schur
      // complement against the current working set.
      l = Y_.leftCols(k).transpose() * y;
      L_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(l);
      d2 = diag - l.squaredNorm();
    }
    if (!(d2 > 1e-12 * diag) || !(diag > 0.0)) return false;
    if (Y_.cols() <= k) {
      const Eigen::Index cap = std::max<Eigen::Index>(8, 2 * (k + 1));
      MatX ny(c_.n, cap);
      MatX nl = MatX::Zero(cap, cap);
      if (k > 0) {
        ny.leftCols(k) = Y_.leftCols(k);
        nl.topLeftCorner(k, k) = L_.topLeftCorner(k, k);
      }
      Y_.swap(ny);
      L_.swap(nl);
    }
    Y_.col(k) = y;
    if (k > 0) L_.block(k, 0, 1, k) = l.transpose();
    L_.row(k).tail(L_.cols() - k).setZero();
    L_(k, k) = std::sqrt(d2);
    w_.push_back(id);
    return true;
  }

  void remove_at(std::size_t pos) {
    const Eigen::Index k = static_cast<Eigen::Index>(w_.size());
    const Eigen::Index p = static_cast<Eigen::Index>(pos);
    for (Eigen::Index j = p; j + 1 < k; ++j) Y_.col(j) = Y_.col(j + 1);
    // Drop row and column p of the factor; the trailing block absorbs the
    // dropped column as a rank-one update.
    VecX v = L_.block(p + 1, p, k - p - 1, 1);
    for (Eigen::Index r = p + 1; r < k; ++r) L_.block(r - 1, 0, 1, p) = L_.block(r, 0, 1, p);
    for (Eigen::Index r = p + 1; r < k; ++r)
      for (Eigen::Index c = p + 1; c <= r; ++c) L_(r - 1, c - 1) = L_(r, c);
    const Eigen::Index t = k - p - 1;
    for (Eigen::Index j = 0; j < t; ++j) {
      const Eigen::Index jj = p + j;
      const double ljj = L_(jj, jj);
      const double r = std::hypot(ljj, v[j]);
      const double c = r / ljj;
      const double s = v[j] / ljj;
      L_(jj, jj) = r;
      for (Eigen::Index i = j + 1; i < t; ++i) {
        const Eigen::Index ii = p + i;
        L_(ii, jj) = (L_(ii, jj) + s * v[i]) / c;
        v[i] = c * v[i] - s * L_(ii, jj);
      }
    }
    L_.row(k - 1).setZero();
    w_.erase(w_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  /// Solves (Y'Y) z = b with the maintained factor.
  VecX gram_solve(VecX b) const {
    const Eigen::Index k = static_cast<Eigen::Index>(w_.size());
    const auto lk = L_.topLeftCorner(k, k).triangularView<Eigen::Lower>();
    lk.solveInPlace(b);
    lk.transpose().solveInPlace(b);
    return b;
  }

  /// Multipliers of the equality-constrained step from x (stored in lambda_),
  /// returns the step p.
  VecX step(const VecX& x) {
    const VecX g = p_used_ * x + prob_.q;
    VecX r = chol_.matrixL().solve(g);
    const Eigen::Index k = static_cast<Eigen::Index>(w_.size());
    if (k > 0) {
      lambda_ = -gram_solve(Y_.leftCols(k).transpose() * r);
      r += Y_.leftCols(k) * lambda_;
    } else {
      lambda_.resize(0);
    }
    return -chol_.matrixU().solve(r);
  }

  /// Equality-constrained minimizer with the working set held at equality.
  VecX eqp_point() {
    const Eigen::Index k = static_cast<Eigen::Index>(w_.size());
    VecX rq = chol_.matrixL().solve(prob_.q);
    if (k > 0) {
      VecX d(k);
      for (Eigen::Index i = 0; i < k; ++i) d[i] = c_.rhs(w_[static_cast<std::size_t>(i)]);
      const VecX lam = gram_solve(-d - Y_.leftCols(k).transpose() * rq);
      rq += Y_.leftCols(k) * lam;
    }
    return -chol_.matrixU().solve(rq);
  }

  /// Runs from a feasible x. Returns true on convergence.
  bool run(VecX& x, int max_iter, int& iterations) {
    std::vector<char> in_w(static_cast<std::size_t>(c_.count()), 0);
    for (int id : w_) in_w[static_cast<std::size_t>(id)] = 1;
    // After an unblocked full step x minimizes over the working set, so the
    // next step is zero up to rounding.
    bool at_subspace_min = false;
    for (; iterations < max_iter; ++iterations) {
      const VecX p = step(x);
      const double pscale = 1.0 + inf_norm(x);
      if (at_subspace_min || inf_norm(p) <= 1e-11 * pscale) {
        at_subspace_min = false;
        if (lambda_.size() == 0) {
          ++iterations;
          return true;
        }
        Eigen::Index jmin = 0;
        const double lmin = lambda_.minCoeff(&jmin);
        const double gscale = 1.0 + inf_norm(p_used_ * x + prob_.q);
        if (lmin >= -tol_ * gscale) {
          ++iterations;
          return true;
        }
        in_w[static_cast<std::size_t>(w_[static_cast<std::size_t>(jmin)])] = 0;
        remove_at(static_cast<std::size_t>(jmin));
        continue;
      }
      double alpha = 1.0;
      int blocking = -1;
      const double pnorm = p.norm();
      if (c_.m > 0) {
        gp_.noalias() = prob_.G * p;
        gx_.noalias() = prob_.G * x;
      }
      for (int id = 0; id < c_.count(); ++id) {
        if (in_w[static_cast<std::size_t>(id)] || !c_.present(id)) continue;
        double cp, cx;
        if (id < c_.m) {
          cp = gp_[id];
          cx = gx_[id];
        } else {
          cp = c_.dot(id, p);
          cx = c_.dot(id, x);
        }
        if (cp <= 1e-14 * row_norms_[static_cast<std::size_t>(id)] * pnorm) continue;
        const double slack = std::max(0.0, c_.rhs(id) - cx);
        const double a = slack / cp;
        if (a < alpha) {
          alpha = a;
          blocking = id;
        }
      }
      x += alpha * p;
      if (blocking >= 0) {
        if (add(blocking)) in_w[static_cast<std::size_t>(blocking)] = 1;
      } else {
        at_subspace_min = true;
      }
    }
    return false;
  }

  const std::vector<int>& working() const { return w_; }
  const VecX& lambda() const { return lambda_; }
  void clear() {
    w_.clear();
  }

private:
  Constraints c_;
  const QuadraticProgram& prob_;
  const Eigen::LLT<MatX>& chol_;
  const MatX& p_used_;
  double tol_;
  std::vector<int> w_;
  MatX Y_;
  MatX L_;  // lower Cholesky factor of Y'Y over the working set
  VecX lambda_;
  std::vector<double> row_norms_;
  VecX gp_, gx_;
};

struct Factor {
  Eigen::LLT<MatX> llt;
  MatX p_used;
  double reg = 0.0;
};

Factor factorize(const MatX& p) {
  Factor f;
  const Eigen::Index n = p.rows();
  const double scale = std::max(1.0, p.diagonal().cwiseAbs().maxCoeff());
  f.p_used = p;
  f.llt.compute(f.p_used);
  auto ok = [&]() {
    if (f.llt.info() != Eigen::Success) return false;
    const VecX d = f.llt.matrixLLT().diagonal();
    return (d.array() * d.array() > 1e-13 * scale).all();
  };
  if (n == 0 || ok()) return f;
  f.reg = 1e-9 * scale;
  f.p_used = p + f.reg * MatX::Identity(n, n);
  f.llt.compute(f.p_used);
  if (f.llt.info() != Eigen::Success) throw QpError("qp: P is not positive semidefinite");
  return f;
}

void fill_duals(const QuadraticProgram& prob, const std::vector<int>& w, const VecX& lambda,
                QpSolution& sol) {
  const Eigen::Index n = prob.q.size();
  const Eigen::Index m = prob.h.size();
  sol.duals = VecX::Zero(m);
  sol.upper_duals = VecX::Zero(n);
  sol.lower_duals = VecX::Zero(n);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int id = w[i];
    const double l = i < static_cast<std::size_t>(lambda.size()) ? lambda[static_cast<Eigen::Index>(i)] : 0.0;
    if (id < m)
      sol.duals[id] = l;
    else if (id < m + n)
      sol.upper_duals[id - m] = l;
    else
      sol.lower_duals[id - m - n] = l;
  }
  sol.active_set = w;
  std::sort(sol.active_set.begin(), sol.active_set.end());
}

/// Exact KKT solve on the working set with the unregularized P; used to
/// clean up after a regularized run.
bool polish(const QuadraticProgram& prob, const std::vector<int>& w, double tol, VecX& x,
            VecX& lambda) {
  const Constraints c(prob);
  const Eigen::Index n = prob.q.size();
  const Eigen::Index k = static_cast<Eigen::Index>(w.size());
  MatX kkt = MatX::Zero(n + k, n + k);
  VecX rhs(n + k);
  kkt.topLeftCorner(n, n) = prob.P;
  rhs.head(n) = -prob.q;
  for (Eigen::Index i = 0; i < k; ++i) {
    const VecX r = c.row(w[static_cast<std::size_t>(i)]);
    kkt.block(0, n + i, n, 1) = r;
    kkt.block(n + i, 0, 1, n) = r.transpose();
    rhs[n + i] = c.rhs(w[static_cast<std::size_t>(i)]);
  }
  const VecX sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  if (!sol.allFinite()) return false;
  const VecX nx = sol.head(n);
  const VecX nl = sol.tail(k);
  if (max_violation(c, nx) > tol * (1.0 + inf_norm(prob.h))) return false;
  if (k > 0 && nl.minCoeff() < -tol) return false;
  x = nx;
  lambda = nl;
  return true;
}

struct Phase1Result {
  bool feasible = false;
  VecX x;
  std::vector<int> certificate;
  int iterations = 0;
};

/// Proximal phase 1: minimize t + rho/2 |x - x_ref|^2 with G x - t <= h,
/// box bounds on x and t >= 0, recentering x_ref until t reaches zero or
/// stops decreasing.
Phase1Result phase1(const QuadraticProgram& prob, const VecX& x_ref_in, double tol, int max_iter) {
  const Eigen::Index n = prob.q.size();
  const Eigen::Index m = prob.h.size();
  Phase1Result out;
  VecX x_ref = x_ref_in.cwiseMax(prob.lower).cwiseMin(prob.upper);
  if (m == 0) {
    out.feasible = true;
    out.x = x_ref;
    return out;
  }
  double row_scale = 0.0;
  double row_l1 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    row_scale = std::max(row_scale, prob.G.row(i).squaredNorm());
    row_l1 = std::max(row_l1, prob.G.row(i).lpNorm<1>());
  }
  const double rho = 1e-2 * std::max(1e-12, row_scale);
  const double feas_tol = tol * (1.0 + inf_norm(prob.h));

  QuadraticProgram aug;
  aug.P = rho * MatX::Identity(n + 1, n + 1);
  aug.q = VecX::Zero(n + 1);
  aug.q[n] = 1.0;
  aug.G.resize(m, n + 1);
  aug.G.leftCols(n) = prob.G;
  aug.G.col(n).setConstant(-1.0);
  aug.h = prob.h;
  aug.lower.resize(n + 1);
  aug.upper.resize(n + 1);
  aug.lower.head(n) = prob.lower;
  aug.upper.head(n) = prob.upper;
  aug.lower[n] = 0.0;
  aug.upper[n] = kInf;
  Eigen::LLT<MatX> llt(aug.P);

  double prev_t = kInf;
  VecX z(n + 1);
  z.head(n) = x_ref;
  z[n] = std::max(0.0, (prob.G * x_ref - prob.h).maxCoeff());
  std::vector<int> last_w;
  VecX last_lambda;
  // The working set stays valid across rounds: only q moves, and z stays
  // on every working constraint.
  ActiveSet as(aug, llt, aug.P, 1e-12);
  bool restarted = false;
  for (int round = 0; round < 40; ++round) {
    aug.q.head(n) = -rho * z.head(n);
    int it = 0;
    as.run(z, max_iter, it);
    out.iterations += it;
    last_w = as.working();
    last_lambda = as.lambda();
    const double t = z[n];
    if (t <= feas_tol) {
      out.feasible = true;
      out.x = z.head(n);
      return out;
    }
    if (!(t < prev_t * (1.0 - 1e-6))) {
      // Stalled at the rounding level of G x: accept.
      const double noise = 1e-10 * (1.0 + inf_norm(prob.h) + row_l1 * inf_norm(z.head(n)));
      if (t <= noise) {
        out.feasible = true;
        out.x = z.head(n);
        return out;
      }
      // A carried-over working set can stall on rounding; one fresh round
      // decides.
      if (restarted) break;
      restarted = true;
      as.clear();
      continue;
    }
    restarted = false;
    prev_t = t;
  }
  // Map the phase-1 working set back onto original constraint ids.
  const Eigen::Index n1 = n + 1;
  for (std::size_t i = 0; i < last_w.size(); ++i) {
    const int id = last_w[i];
    const double l = i < static_cast<std::size_t>(last_lambda.size()) ? last_lambda[static_cast<Eigen::Index>(i)] : 0.0;
    if (l <= 0.0) continue;
    if (id < m) {
      out.certificate.push_back(id);
    } else if (id < m + n1) {
      const Eigen::Index j = id - m;
      if (j < n) out.certificate.push_back(static_cast<int>(m + j));
    } else {
      const Eigen::Index j = id - m - n1;
      if (j < n) out.certificate.push_back(static_cast<int>(m + n + j));
    }
  }
  std::sort(out.certificate.begin(), out.certificate.end());
  out.x = z.head(n);
  return out;
}

}  // namespace

QuadraticProgram QuadraticProgram::unconstrained(MatX p, VecX q) {
  QuadraticProgram out;
  const Eigen::Index n = q.size();
  out.P = std::move(p);
  out.q = std::move(q);
  out.G.resize(0, n);
  out.h.resize(0);
  out.lower = VecX::Constant(n, -kInf);
  out.upper = VecX::Constant(n, kInf);
  return out;
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

double qp_objective(const QuadraticProgram& prob, const VecX& x) {
  return 0.5 * x.dot(prob.P * x) + prob.q.dot(x);
}

QpSolution solve_qp(const QuadraticProgram& prob, double tol, int max_iter) {
  QpOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_qp(prob, o);
}

QpSolution solve_qp(const QuadraticProgram& prob, const QpOptions& options) {
  check_dimensions(prob);
  const Eigen::Index n = prob.q.size();
  const Factor f = factorize(prob.P);
  const Constraints cons(prob);
  const double feas_tol = options.tol * (1.0 + inf_norm(prob.h));

  QpSolution sol;
  ActiveSet as(prob, f.llt, f.p_used, options.tol);
  VecX x;
  bool started = false;

  // Warm start: treat the guessed working set as equalities and accept the
  // resulting point if it is feasible.
  if (!options.working_set.empty()) {
    for (int id : options.working_set) {
      if (id < 0 || id >= cons.count() || !cons.present(id)) continue;
      if (std::find(as.working().begin(), as.working().end(), id) != as.working().end()) continue;
      as.add(id);
    }
    if (!as.working().empty()) {
      VecX cand = as.eqp_point();
      if (cand.allFinite() && max_violation(cons, cand) <= feas_tol) {
        x = cand;
        started = true;
      }
    }
    if (!started) as.clear();
  }
  if (!started && options.x0 && options.x0->size() == n &&
      max_violation(cons, *options.x0) <= feas_tol) {
    x = *options.x0;
    started = true;
  }
  if (!started) {
    VecX ref = options.x0 && options.x0->size() == n ? *options.x0 : VecX(VecX::Zero(n));
    if (cons.m == 0) {
      x = ref.cwiseMax(prob.lower).cwiseMin(prob.upper);
    } else {
      Phase1Result p1 = phase1(prob, ref, options.tol, options.max_iter);
      sol.iterations += p1.iterations;
      if (!p1.feasible) {
        sol.status = QpStatus::Infeasible;
        sol.x = p1.x;
        sol.certificate = std::move(p1.certificate);
        sol.objective = qp_objective(prob, sol.x);
        fill_duals(prob, {}, VecX(), sol);
        return sol;
      }
      x = p1.x;
    }
  }

  int it = 0;
  const bool converged = as.run(x, options.max_iter, it);
  sol.iterations += it;
  if (converged) {
    // Replace the accumulated iterate by a direct solve on the final
    // working set; this removes drift from the sequence of partial steps.
    const VecX xr = as.eqp_point();
    if (xr.allFinite() && max_violation(cons, xr) <= max_violation(cons, x) + feas_tol) x = xr;
  }
  as.step(x);
  VecX lambda = as.lambda();
  const std::vector<int> w = as.working();
  if (converged && f.reg > 0.0) polish(prob, w, options.tol, x, lambda);
  sol.x = x;
  sol.status = converged ? QpStatus::Optimal : QpStatus::MaxIter;
  sol.objective = qp_objective(prob, x);
  fill_duals(prob, w, lambda, sol);
  return sol;
}

double kkt_residual(const QuadraticProgram& prob, const QpSolution& sol) {
  const Eigen::Index n = prob.q.size();
  const Eigen::Index m = prob.h.size();
  const VecX& x = sol.x;
  VecX grad = prob.P * x + prob.q;
  if (m > 0) grad += prob.G.transpose() * sol.duals;
  grad += sol.upper_duals - sol.lower_duals;
  double res = inf_norm(grad);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = prob.G.row(i).dot(x) - prob.h[i];
    res = std::max({res, s, -sol.duals[i], std::abs(sol.duals[i] * s)});
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double su = std::isfinite(prob.upper[j]) ? x[j] - prob.upper[j] : -kInf;
    const double sl = std::isfinite(prob.lower[j]) ? prob.lower[j] - x[j] : -kInf;
    res = std::max({res, su, sl, -sol.upper_duals[j], -sol.lower_duals[j]});
    if (sol.upper_duals[j] != 0.0) res = std::max(res, std::abs(sol.upper_duals[j] * su));
    if (sol.lower_duals[j] != 0.0) res = std::max(res, std::abs(sol.lower_duals[j] * sl));
  }
  return std::max(res, 0.0);
}

std::string dump_qp_text(const QuadraticProgram& prob) {
  std::ostringstream out;
  out << std::setprecision(17);
  auto emit = [&](const char* name, const MatX& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  };
  emit("P", prob.P);
  emit("q", prob.q);
  emit("G", prob.G);
  emit("h", prob.h);
  emit("lower", prob.lower);
  emit("upper", prob.upper);
  return out.str();
}

}  // namespace ptrack
