#include "ptrack/prediction.hpp"

#include <stdexcept>

namespace ptrack {

std::vector<Mat6> matrix_powers(const Mat6& a, int n) {
  std::vector<Mat6> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(Mat6::Identity());
  for (int i = 1; i <= n; ++i) out.push_back(a * out.back());
  return out;
}

std::vector<Vec6> rollout_mean(const DynamicsModel& model, const Vec6& mu,
                               std::span<const Vec3> controls) {
  if (controls.empty()) throw std::invalid_argument("rollout_mean: empty control list");
  const int horizon = static_cast<int>(controls.size());
  const std::vector<Mat6> pw = matrix_powers(model.A, horizon);
  std::vector<Vec6> out;
  out.reserve(controls.size());
  // Forced response accumulated from the closed form, one column of terms per step.
  for (int tau = 0; tau < horizon; ++tau) {
    Vec6 m = pw[static_cast<std::size_t>(tau) + 1] * mu;
    for (int k = 0; k <= tau; ++k)
      m += pw[static_cast<std::size_t>(tau - k)] * (model.B * controls[static_cast<std::size_t>(k)]);
    out.push_back(m);
  }
  return out;
}

std::vector<Mat6> rollout_cov(const DynamicsModel& model, const Mat6& sigma, int horizon) {
  if (horizon < 1) throw std::invalid_argument("rollout_cov: horizon must be >= 1");
  if (!is_psd(sigma)) throw NotPsdError("rollout_cov: sigma is not symmetric PSD");
  std::vector<Mat6> out;
  out.reserve(static_cast<std::size_t>(horizon));
  Mat6 a_pow = Mat6::Identity();       // A^tau
  Mat6 noise_sum = Mat6::Zero();       // sum_{j<=tau} A^j Q (A^T)^j
  for (int tau = 0; tau < horizon; ++tau) {
    noise_sum += a_pow * model.Q * a_pow.transpose();
    a_pow = model.A * a_pow;
    Mat6 s = a_pow * sigma * a_pow.transpose() + noise_sum;
    symmetrize(s);
    out.push_back(s);
  }
  return out;
}

GaussianBelief one_step_predict(const DynamicsModel& model, const GaussianBelief& belief,
                                const Vec3& u) {
  GaussianBelief out;
  out.mean = model.A * belief.mean + model.B * u;
  out.cov = model.A * belief.cov * model.A.transpose() + model.Q;
  symmetrize(out.cov);
  return out;
}

}  // namespace ptrack
