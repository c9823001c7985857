#include "ptrack/kernels/kernels.hpp"

#include <cmath>
#include <numbers>

namespace ptrack::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

inline double wrap_residual(double r) {
  // r is a difference of two angles in (-pi, pi].
  if (r > kPi) return r - 2.0 * kPi;
  if (r <= -kPi) return r + 2.0 * kPi;
  return r;
}

void bearings(const double* px, const double* py, std::size_t n, double sx, double sy, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::atan2(px[i] - sx, py[i] - sy);
    out[i] = a == -kPi ? kPi : a;
  }
}

void gaussian_residual_loglik(const double* bearing, std::size_t n, double z, double inv_sigma,
                              double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double r = wrap_residual(z - bearing[i]) * inv_sigma;
    out[i] = -0.5 * r * r;
  }
}

void clutter_mixture_weight(const double* bearing, std::size_t n, const double* phi,
                            std::size_t n_phi, double floor, double scale, double inv_sigma,
                            double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_phi; ++k) {
      const double r = wrap_residual(phi[k] - bearing[i]) * inv_sigma;
      const double e = -0.5 * r * r;
      s += e < -708.0 ? 0.0 : std::exp(e);
    }
    out[i] = floor + scale * s;
  }
}

double exp_shifted(const double* in, std::size_t n, double shift, double* out) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = in[i] - shift;
    out[i] = e < -708.0 ? 0.0 : std::exp(e);
    sum += out[i];
  }
  return sum;
}

double weighted_moments(const double* const* cols, std::size_t dims, const double* w, std::size_t n,
                        bool full, double* mean, double* cov) {
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += w[i];
  for (std::size_t d = 0; d < dims; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * cols[d][i];
    mean[d] = wsum > 0.0 ? s / wsum : 0.0;
  }
  for (std::size_t a = 0; a < dims; ++a) {
    for (std::size_t b = a; b < (full ? dims : a + 1); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * (cols[a][i] - mean[a]) * (cols[b][i] - mean[b]);
      const double v = wsum > 0.0 ? s / wsum : 0.0;
      cov[a * dims + b] = v;
      cov[b * dims + a] = v;
    }
  }
  return wsum;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", bearings, gaussian_residual_loglik, clutter_mixture_weight,
                                 exp_shifted, weighted_moments};
  return table;
}

}  // namespace ptrack::kernels
