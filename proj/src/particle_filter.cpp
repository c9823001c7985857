#include "ptrack/particle_filter.hpp"

#include "ptrack/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ptrack {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Matrix square root S with S S^T = m, for a PSD m.
Mat6 psd_sqrt(const Mat6& m) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(m);
  const Vec6 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

void normalize(ParticleBelief& b, double sum) {
  const double inv = 1.0 / sum;
  for (double& w : b.w) w *= inv;
}

void reset_uniform(ParticleBelief& b) {
  std::fill(b.w.begin(), b.w.end(), 1.0 / static_cast<double>(b.size()));
}

double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Renormalizes from log weights; false if every entry is -inf.
bool normalize_from_logs(ParticleBelief& b, std::vector<double>& logw) {
  double mx = kNegInf;
  for (double x : logw) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return false;
  const double sum = kernels::active().exp_shifted(logw.data(), logw.size(), mx, b.w.data());
  if (!(sum > 0.0)) return false;
  normalize(b, sum);
  return true;
}

/// Shared tail of both update flavors: w already holds the unnormalized
/// posterior weights.
void finish_update(ParticleBelief& b, double ess_fraction, Rng& rng, UpdateInfo& info) {
  b.ess = effective_sample_size(b.w);
  if (b.ess < ess_fraction * static_cast<double>(b.size())) {
    systematic_resample(b, rng);
    info.resampled = true;
  }
}

}  // namespace

Vec6 ParticleBelief::particle(std::size_t i) const {
  Vec6 v;
  for (int d = 0; d < 6; ++d) v[d] = x[static_cast<std::size_t>(d)][i];
  return v;
}

void ParticleBelief::set_particle(std::size_t i, const Vec6& v) {
  for (int d = 0; d < 6; ++d) x[static_cast<std::size_t>(d)][i] = v[d];
}

void ParticleBelief::resize(std::size_t n) {
  for (auto& col : x) col.assign(n, 0.0);
  w.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  ess = static_cast<double>(n);
}

ParticleBelief init_belief(const Vec6& mu0, const Mat6& sigma0, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("init_belief: need at least one particle");
  if (!is_psd(sigma0)) throw NotPsdError("init_belief: sigma0 is not symmetric PSD");
  const Mat6 s = psd_sqrt(sigma0);
  ParticleBelief b;
  b.resize(n);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec6 xi;
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 6; ++d) xi[d] = nd(rng);
    b.set_particle(i, mu0 + s * xi);
  }
  return b;
}

void pf_predict(ParticleBelief& b, const DynamicsModel& model, const Vec3& u, Rng& rng) {
  const Mat6 s = psd_sqrt(model.Q);
  const Vec6 bu = model.B * u;
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec6 xi;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int d = 0; d < 6; ++d) xi[d] = nd(rng);
    b.set_particle(i, model.A * b.particle(i) + bu + s * xi);
  }
}

double measurement_weight(const MeasurementSet& meas, const Vec6& particle, const Vec3& agent_pos,
                          const SensorModel& model) {
  if (meas.empty()) return 1.0 - model.p_detect;
  const double l = true_bearing(position_of(particle), agent_pos);
  const double norm = 1.0 / (model.sigma_phi * std::sqrt(2.0 * kPi));
  double s = 0.0;
  for (double phi : meas.bearings) {
    const double r = wrap_angle(phi - l) / model.sigma_phi;
    s += norm * std::exp(-0.5 * r * r);
  }
  return (1.0 - model.p_detect) * model.clutter_rate * SensorModel::clutter_density + model.p_detect * s;
}

double direct_log_likelihood(const MeasurementSet& meas, const Vec6& particle, const Vec3& agent_pos,
                             const SensorModel& model) {
  const double n = static_cast<double>(meas.size());
  const double lam = model.clutter_rate;
  const double log_pt = std::log(SensorModel::clutter_density);
  // log of the Poisson pmf; 0 * log(0) is taken as 0.
  auto log_poisson = [&](double k) {
    const double klog = k == 0.0 ? 0.0 : k * std::log(lam);
    return -lam + klog - std::lgamma(k + 1.0);
  };
  double terms[2] = {kNegInf, kNegInf};
  // No detection: n false alarms in any of n! orders.
  if (model.p_detect < 1.0)
    terms[0] = std::log1p(-model.p_detect) + std::lgamma(n + 1.0) + log_poisson(n) + n * log_pt;
  if (meas.size() > 0 && model.p_detect > 0.0) {
    // One detection, n - 1 false alarms.
    const double l = true_bearing(position_of(particle), agent_pos);
    std::vector<double> logc;
    logc.reserve(meas.size());
    for (double phi : meas.bearings) {
      const double r = wrap_angle(phi - l) / model.sigma_phi;
      logc.push_back(-0.5 * r * r - std::log(model.sigma_phi * std::sqrt(2.0 * kPi)));
    }
    terms[1] = std::lgamma(n) + log_poisson(n - 1.0) + std::log(model.p_detect) + log_sum_exp(logc) +
               (n - 1.0) * log_pt;
  }
  return log_sum_exp(terms);
}

UpdateInfo pf_update(ParticleBelief& b, const MeasurementSet& meas, const Vec3& agent_pos,
                     const SensorModel& model, double ess_fraction, Rng& rng) {
  UpdateInfo info;
  const std::size_t n = b.size();
  if (meas.empty()) {
    // Constant factor (1 - p_D): only normalization changes.
    if (model.p_detect >= 1.0) {
      info.degenerate = true;
      reset_uniform(b);
    }
  } else {
    const kernels::KernelTable& k = kernels::active();
    thread_local std::vector<double> bearing, factor, prior;
    bearing.resize(n);
    factor.resize(n);
    prior.assign(b.w.begin(), b.w.end());
    k.bearings(b.x[0].data(), b.x[1].data(), n, agent_pos.x(), agent_pos.y(), bearing.data());
    const double floor = (1.0 - model.p_detect) * model.clutter_rate * SensorModel::clutter_density;
    const double scale = model.p_detect / (model.sigma_phi * std::sqrt(2.0 * kPi));
    const double inv_sigma = 1.0 / model.sigma_phi;
    k.clutter_mixture_weight(bearing.data(), n, meas.bearings.data(), meas.size(), floor, scale,
                             inv_sigma, factor.data());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      b.w[i] *= factor[i];
      sum += b.w[i];
    }
    if (sum > std::numeric_limits<double>::min() && std::isfinite(sum)) {
      normalize(b, sum);
    } else {
      // Every linear weight underflowed: redo the product in logs.
      info.log_domain = true;
      const double log_scale = std::log(scale);
      std::vector<double> logw(n), parts;
      parts.reserve(meas.size() + 1);
      for (std::size_t i = 0; i < n; ++i) {
        parts.clear();
        if (floor > 0.0) parts.push_back(std::log(floor));
        for (double phi : meas.bearings) {
          const double r = wrap_angle(phi - bearing[i]) * inv_sigma;
          parts.push_back(log_scale - 0.5 * r * r);
        }
        logw[i] = std::log(prior[i]) + log_sum_exp(parts);
      }
      if (!normalize_from_logs(b, logw)) {
        info.degenerate = true;
        reset_uniform(b);
      }
    }
  }
  double sum = 0.0;
  for (double w : b.w) sum += w;
  if (sum > 0.0 && std::abs(sum - 1.0) > 1e-12) normalize(b, sum);
  finish_update(b, ess_fraction, rng, info);
  return info;
}

UpdateInfo pf_update_multi(ParticleBelief& b, std::span<const double> bearings,
                           std::span<const Vec3> sensors, double sigma_phi, double ess_fraction,
                           Rng& rng) {
  if (bearings.size() != sensors.size())
    throw std::invalid_argument("pf_update_multi: one bearing per sensor expected");
  UpdateInfo info;
  const std::size_t n = b.size();
  const kernels::KernelTable& k = kernels::active();
  const double inv_sigma = 1.0 / sigma_phi;
  std::vector<double> logw(n), bearing(n), ll(n);
  for (std::size_t i = 0; i < n; ++i) logw[i] = std::log(b.w[i]);
  for (std::size_t j = 0; j < sensors.size(); ++j) {
    k.bearings(b.x[0].data(), b.x[1].data(), n, sensors[j].x(), sensors[j].y(), bearing.data());
    k.gaussian_residual_loglik(bearing.data(), n, bearings[j], inv_sigma, ll.data());
    for (std::size_t i = 0; i < n; ++i) logw[i] += ll[i];
  }
  if (!normalize_from_logs(b, logw)) {
    info.degenerate = true;
    reset_uniform(b);
  }
  finish_update(b, ess_fraction, rng, info);
  return info;
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  if (!(s2 > 0.0)) return 0.0;
  // Scale-free form; equals 1 / sum w^2 for normalized weights.
  return s * s / s2;
}

void systematic_resample(ParticleBelief& b, Rng& rng) {
  const std::size_t n = b.size();
  if (n == 0) return;
  double total = 0.0;
  for (double w : b.w) total += w;
  const double step = total / static_cast<double>(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u0 = unit(rng) * step;
  std::vector<std::size_t> idx(n);
  double cum = b.w[0];
  std::size_t src = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double u = u0 + static_cast<double>(j) * step;
    while (u >= cum && src + 1 < n) cum += b.w[++src];
    idx[j] = src;
  }
  for (auto& col : b.x) {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = col[idx[j]];
    col.swap(out);
  }
  std::fill(b.w.begin(), b.w.end(), 1.0 / static_cast<double>(n));
  b.ess = static_cast<double>(n);
}

void jitter_particles(ParticleBelief& b, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> nd(0.0, sigma);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (auto& col : b.x) col[i] += nd(rng);
}

GaussianBelief belief_moments(const ParticleBelief& b) {
  const double* cols[6];
  for (std::size_t d = 0; d < 6; ++d) cols[d] = b.x[d].data();
  double mean[6], cov[36];
  kernels::active().weighted_moments(cols, 6, b.w.data(), b.size(), true, mean, cov);
  GaussianBelief g;
  for (int a = 0; a < 6; ++a) {
    g.mean[a] = mean[a];
    for (int c = 0; c < 6; ++c) g.cov(a, c) = cov[a * 6 + c];
  }
  symmetrize(g.cov);
  return g;
}

Vec6 belief_mean(const ParticleBelief& b) {
  Vec6 m = Vec6::Zero();
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    s += b.w[i];
    for (int d = 0; d < 6; ++d) m[d] += b.w[i] * b.x[static_cast<std::size_t>(d)][i];
  }
  return m / s;
}

}  // namespace ptrack
