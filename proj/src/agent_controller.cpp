#include "ptrack/agent_controller.hpp"

#include "ptrack/kernels/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ptrack {

namespace {

double trace_of(const double* cov, TraceBlock block) {
  const int dims = block == TraceBlock::Full ? 6 : 3;
  double t = 0.0;
  for (int d = 0; d < dims; ++d) t += cov[d * 6 + d];
  return t;
}

double diag_trace(const ParticleBelief& b, const double* w, TraceBlock block) {
  const double* cols[6];
  for (std::size_t d = 0; d < 6; ++d) cols[d] = b.x[d].data();
  double mean[6], cov[36];
  kernels::active().weighted_moments(cols, 6, w, b.size(), false, mean, cov);
  return trace_of(cov, block);
}

}  // namespace

std::vector<Vec3> admissible_states(const Vec3& s, const AgentMotionModel& m, const Box3& environment) {
  std::vector<Vec3> out;
  const double dtheta = 2.0 * std::numbers::pi / m.n_theta;
  auto push = [&](const Vec3& p) {
    if (!environment.contains_planar(p.x(), p.y())) return;
    for (const Vec3& q : out)
      if ((q - p).head<2>().norm() <= 1e-9) return;
    out.push_back(p);
  };
  push(Vec3(s.x(), s.y(), m.altitude));
  for (int lam = 1; lam <= m.n_radial; ++lam)
    for (int kap = 1; kap <= m.n_theta; ++kap) {
      const double r = lam * m.radial_step;
      const double a = kap * dtheta;
      push(Vec3(s.x() + r * std::cos(a), s.y() + r * std::sin(a), m.altitude));
    }
  return out;
}

double ideal_measurement(const Vec3& pred_pos, const Vec3& candidate) {
  return true_bearing(pred_pos, candidate);
}

double belief_trace(const ParticleBelief& b, TraceBlock block) {
  return diag_trace(b, b.w.data(), block);
}

double pseudo_posterior_trace(const ParticleBelief& predicted, const Vec3& candidate, double z,
                              const SensorModel& model, TraceBlock block) {
  const std::size_t n = predicted.size();
  const kernels::KernelTable& k = kernels::active();
  thread_local std::vector<double> bearing, ll, w;
  bearing.resize(n);
  ll.resize(n);
  w.resize(n);
  k.bearings(predicted.x[0].data(), predicted.x[1].data(), n, candidate.x(), candidate.y(), bearing.data());
  k.gaussian_residual_loglik(bearing.data(), n, z, 1.0 / model.sigma_phi, ll.data());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (predicted.w[i] > 0.0) mx = std::max(mx, ll[i]);
  if (!std::isfinite(mx)) return belief_trace(predicted, block);
  k.exp_shifted(ll.data(), n, mx, w.data());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] *= predicted.w[i];
    sum += w[i];
  }
  if (!(sum > std::numeric_limits<double>::min())) return belief_trace(predicted, block);
  return diag_trace(predicted, w.data(), block);
}

ControllerDecision select_next_state(std::span<const ParticleBelief> beliefs, const Vec3& s,
                                     const AgentMotionModel& motion, const Box3& environment,
                                     const SensorModel& sensor, TraceBlock block) {
  ControllerDecision d;
  const std::vector<Vec3> cand = admissible_states(s, motion, environment);
  d.candidates = cand.size();
  d.chosen = Vec3(s.x(), s.y(), motion.altitude);
  d.sums.assign(cand.size(), std::numeric_limits<double>::quiet_NaN());

  std::vector<Vec3> mean_pos;
  mean_pos.reserve(beliefs.size());
  for (const ParticleBelief& b : beliefs) mean_pos.push_back(position_of(belief_mean(b)));

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> traces(beliefs.size());
  for (std::size_t c = 0; c < cand.size(); ++c) {
    double sum = 0.0;
    bool ok = true;
    for (std::size_t j = 0; j < beliefs.size() && ok; ++j) {
      try {
        const double z = ideal_measurement(mean_pos[j], cand[c]);
        traces[j] = pseudo_posterior_trace(beliefs[j], cand[c], z, sensor, block);
        sum += traces[j];
      } catch (const DegenerateGeometry&) {
        ok = false;
      }
    }
    if (!ok) {
      ++d.skipped;
      continue;
    }
    d.sums[c] = sum;
    if (sum < best) {
      best = sum;
      d.index = c;
      d.chosen = cand[c];
      d.per_target = traces;
    }
  }
  d.best_sum = std::isfinite(best) ? best : 0.0;
  return d;
}

}  // namespace ptrack
