#pragma once

#include "ptrack/prediction.hpp"
#include "ptrack/sensing.hpp"
#include "ptrack/world_model.hpp"

#include <array>
#include <span>
#include <vector>

namespace ptrack {

/// Weighted particle set, stored column-wise: x[d][i] is state component d
/// of particle i.
struct ParticleBelief {
  std::array<std::vector<double>, 6> x;
  std::vector<double> w;
  double ess = 0.0;

  std::size_t size() const { return w.size(); }
  Vec6 particle(std::size_t i) const;
  void set_particle(std::size_t i, const Vec6& v);
  void resize(std::size_t n);
};

/// N draws from N(mu0, sigma0) with weights 1/N. Throws NotPsdError for a
/// non-PSD sigma0 and std::invalid_argument for n < 1.
ParticleBelief init_belief(const Vec6& mu0, const Mat6& sigma0, std::size_t n, Rng& rng);

/// Propagates every particle through x' = A x + B u + noise, noise ~ N(0, Q).
/// Weights are untouched.
void pf_predict(ParticleBelief& b, const DynamicsModel& model, const Vec3& u, Rng& rng);

/// Particle-dependent factor of the clutter likelihood:
///   (1 - p_D) lambda / (2 pi) + p_D sum_phi N(wrap(phi - l(x, s)); 0, sigma^2)
/// and (1 - p_D) for an empty set.
double measurement_weight(const MeasurementSet& meas, const Vec6& particle, const Vec3& agent_pos,
                          const SensorModel& model);

/// Full likelihood with the Poisson pmf and factorial terms, evaluated in
/// log space so large sets do not overflow. Returns the log.
double direct_log_likelihood(const MeasurementSet& meas, const Vec6& particle, const Vec3& agent_pos,
                             const SensorModel& model);

struct UpdateInfo {
  bool resampled = false;
  bool degenerate = false;  // all weights vanished; reset to uniform
  bool log_domain = false;  // linear weights underflowed, recomputed in logs
};

/// Multiplies weights by measurement_weight, renormalizes and resamples
/// when ess < ess_fraction * N.
UpdateInfo pf_update(ParticleBelief& b, const MeasurementSet& meas, const Vec3& agent_pos,
                     const SensorModel& model, double ess_fraction, Rng& rng);

/// Update with one detection-only bearing from each fixed sensor (no
/// clutter, certain detection); the per-sensor Gaussian likelihoods are
/// multiplied.
UpdateInfo pf_update_multi(ParticleBelief& b, std::span<const double> bearings,
                           std::span<const Vec3> sensors, double sigma_phi, double ess_fraction,
                           Rng& rng);

double effective_sample_size(std::span<const double> weights);

/// Systematic resampling to uniform weights.
void systematic_resample(ParticleBelief& b, Rng& rng);

/// Gaussian roughening of positions and velocities after resampling.
void jitter_particles(ParticleBelief& b, double sigma, Rng& rng);

GaussianBelief belief_moments(const ParticleBelief& b);

/// Weighted mean of the particles.
Vec6 belief_mean(const ParticleBelief& b);

}  // namespace ptrack
