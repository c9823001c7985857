#pragma once
// Particle-filter inner loops. Every kernel has a scalar reference and, on
// x86-64, an AVX2+FMA variant picked at runtime. PTRACK_KERNELS=scalar|avx2
// forces a choice (an unavailable avx2 request falls back to scalar).

#include <cstddef>
#include <string_view>

namespace ptrack::kernels {

struct KernelTable {
  const char* name;

  /// out[i] = atan2(px[i] - sx, py[i] - sy), with -pi mapped to pi.
  void (*bearings)(const double* px, const double* py, std::size_t n, double sx, double sy,
                   double* out);

  /// out[i] = -0.5 * (wrap(z - bearing[i]) * inv_sigma)^2. Inputs in (-pi, pi].
  void (*gaussian_residual_loglik)(const double* bearing, std::size_t n, double z, double inv_sigma,
                                   double* out);

  /// out[i] = floor + scale * sum_k exp(-0.5 * (wrap(phi[k] - bearing[i]) * inv_sigma)^2).
  void (*clutter_mixture_weight)(const double* bearing, std::size_t n, const double* phi,
                                 std::size_t n_phi, double floor, double scale, double inv_sigma,
                                 double* out);

  /// out[i] = exp(in[i] - shift); returns the sum of out. exp of anything
  /// below -708 is 0.
  double (*exp_shifted)(const double* in, std::size_t n, double shift, double* out);

  /// Weighted mean and centered covariance of `dims` columns (dims <= 6),
  /// normalized by the weight sum. cov is dims x dims row-major; with
  /// full == false only its diagonal is written. Returns the weight sum.
  double (*weighted_moments)(const double* const* cols, std::size_t dims, const double* w,
                             std::size_t n, bool full, double* mean, double* cov);
};

const KernelTable& scalar_table();

/// Null when AVX2 was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// Table in use. Chosen once from the environment on first call.
const KernelTable& active();

/// Override the selection ("scalar", "avx2" or "auto"). Returns false and
/// leaves the selection unchanged for an unknown or unavailable name.
bool select(std::string_view name);

}  // namespace ptrack::kernels
