#pragma once
// Test-only reference implementations. Nothing here calls into the code
// paths it is used to check.

#include "ptrack/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ptrack::oracle {

/// Random strictly feasible QP with positive definite P.
inline QuadraticProgram random_qp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  QuadraticProgram p;
  std::uniform_int_distribution<int> rank_d(1, n);
  const int r = rank_d(rng);
  MatX mm(r, n);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < n; ++j) mm(i, j) = nd(rng);
  p.P = mm.transpose() * mm + (0.05 + 0.5 * ud(rng)) * MatX::Identity(n, n);
  p.q.resize(n);
  for (int j = 0; j < n; ++j) p.q[j] = 3.0 * nd(rng);
  VecX xf(n);
  for (int j = 0; j < n; ++j) xf[j] = nd(rng);
  p.G.resize(m, n);
  p.h.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) p.G(i, j) = nd(rng);
    p.h[i] = p.G.row(i).dot(xf) + 0.1 + ud(rng);
  }
  p.lower.resize(n);
  p.upper.resize(n);
  const double inf = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    p.lower[j] = ud(rng) < 0.2 ? -inf : xf[j] - 0.5 - 2.5 * ud(rng);
    p.upper[j] = ud(rng) < 0.2 ? inf : xf[j] + 0.5 + 2.5 * ud(rng);
  }
  return p;
}

struct DualResult {
  double dual_value = -std::numeric_limits<double>::infinity();  // lower bound on the optimum
  VecX x;                                                         // primal recovered from the best multipliers
  int iterations = 0;
};

/// Accelerated projected gradient ascent on the Lagrangian dual (projection
/// onto lambda >= 0), with gradient restarts. Requires P positive definite.
inline DualResult dual_projected_gradient(const QuadraticProgram& p, int max_iter = 2000000,
                                          double feas_tol = 1e-10, double stop_gap = 1e-11) {
  const Eigen::Index n = p.q.size();
  // Stack G and the finite bounds into C x <= d.
  std::vector<VecX> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < p.G.rows(); ++i) {
    rows.push_back(p.G.row(i).transpose());
    rhs.push_back(p.h[i]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.upper[j])) {
      VecX e = VecX::Zero(n);
      e[j] = 1.0;
      rows.push_back(e);
      rhs.push_back(p.upper[j]);
    }
    if (std::isfinite(p.lower[j])) {
      VecX e = VecX::Zero(n);
      e[j] = -1.0;
      rows.push_back(e);
      rhs.push_back(-p.lower[j]);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
  MatX c(k, n);
  VecX d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    c.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    d[i] = rhs[static_cast<std::size_t>(i)];
  }
  // The dual is the concave quadratic g(l) = -1/2 l'Hl + b'l + c0 with
  // H = C P^-1 C', b = -C P^-1 q - d.
  const MatX pinv = p.P.inverse();
  const MatX hess = c * pinv * c.transpose();
  const VecX b = -c * (pinv * p.q) - d;
  const double c0 = -0.5 * p.q.dot(pinv * p.q);
  const double lip =
      k > 0 ? std::max(1e-12, Eigen::SelfAdjointEigenSolver<MatX>(hess).eigenvalues().maxCoeff()) : 1.0;
  auto dual = [&](const VecX& lam) { return -0.5 * lam.dot(hess * lam) + b.dot(lam) + c0; };

  DualResult out;
  VecX lam = VecX::Zero(k);
  VecX y = lam;
  VecX grad(k), next(k);
  double t = 1.0;
  double prev = dual(lam);
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    // Stop once x(lam) is feasible and the Lagrangian matches its primal
    // objective; the dual is often degenerate, so lam itself may still drift.
    grad.noalias() = b - hess * lam;  // equals C x(lam) - d
    if (k == 0 || (grad.maxCoeff() <= feas_tol && std::abs(lam.dot(grad)) <= stop_gap)) break;
    grad.noalias() = b - hess * y;
    next = (y + grad / lip).cwiseMax(0.0);
    const double val = dual(next);
    if (val < prev && t > 1.0) {
      // Restart momentum from the last accepted point. A plain projected
      // step (t == 1) is always taken; it only loses to rounding.
      t = 1.0;
      y = lam;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - lam);
    t = t_next;
    lam = next;
    prev = val;
  }
  out.dual_value = dual(lam);
  out.x = -pinv * (p.q + c.transpose() * lam);
  return out;
}

}  // namespace ptrack::oracle
