#pragma once

#include "ptrack/world_model.hpp"

#include <span>
#include <vector>

namespace ptrack {

struct GaussianBelief {
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Zero();
};

/// Predicted means over the horizon: element tau is
/// A^(tau+1) mu + sum_{k<=tau} A^(tau-k) B u_k.
/// Throws std::invalid_argument on an empty control list.
std::vector<Vec6> rollout_mean(const DynamicsModel& model, const Vec6& mu,
                               std::span<const Vec3> controls);

/// Predicted covariances over the horizon: element tau is
/// A^(tau+1) S (A^T)^(tau+1) + sum_{k<=tau} A^(tau-k) Q (A^T)^(tau-k).
/// Independent of the controls. Throws NotPsdError for a non-PSD sigma.
std::vector<Mat6> rollout_cov(const DynamicsModel& model, const Mat6& sigma, int horizon);

GaussianBelief one_step_predict(const DynamicsModel& model, const GaussianBelief& belief,
                                const Vec3& u);

/// Powers A^0 .. A^n, by repeated multiplication.
std::vector<Mat6> matrix_powers(const Mat6& a, int n);

}  // namespace ptrack
