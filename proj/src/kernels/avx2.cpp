// Compiled with -mavx2 -mfma; only reached through avx2_table() after a
// CPU feature check.
#include "ptrack/kernels/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <numbers>

namespace ptrack::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

// Cephes atan coefficients, used on [0, 0.66] after range reduction.
constexpr double kAtanP[5] = {-8.750608600031904122785e-1, -1.615753718733365076637e1,
                              -7.500855792314704667340e1, -1.228866684490136173410e2,
                              -6.485021904942025371773e1};
constexpr double kAtanQ[5] = {2.485846490142306297962e1, 1.650270098316988542046e2,
                              4.328810604912902668951e2, 4.853903996359136964868e2,
                              1.945506571482613964425e2};
constexpr double kMoreBits = 6.123233995736765886130e-17;

// Cephes exp: Pade form on [-ln2/2, ln2/2].
constexpr double kExpP[3] = {1.26177193074810590878e-4, 3.02994407707441961300e-2,
                             9.99999999999999999910e-1};
constexpr double kExpQ[4] = {3.00198505138664455042e-6, 2.52448340349684104192e-3,
                             2.27265548208155028766e-1, 2.00000000000000000009e0};
constexpr double kExpC1 = 6.93145751953125e-1;
constexpr double kExpC2 = 1.42860682030941723212e-6;
constexpr double kLog2e = 1.4426950408889634073599;

inline __m256d set1(double v) { return _mm256_set1_pd(v); }

/// atan on r in [0, 1].
inline __m256d atan_unit(__m256d r) {
  const __m256d one = set1(1.0);
  const __m256d big = _mm256_cmp_pd(r, set1(0.66), _CMP_GT_OQ);
  const __m256d reduced = _mm256_div_pd(_mm256_sub_pd(r, one), _mm256_add_pd(r, one));
  const __m256d x = _mm256_blendv_pd(r, reduced, big);
  const __m256d z = _mm256_mul_pd(x, x);
  __m256d num = set1(kAtanP[0]);
  for (int i = 1; i < 5; ++i) num = _mm256_fmadd_pd(num, z, set1(kAtanP[i]));
  __m256d den = _mm256_add_pd(z, set1(kAtanQ[0]));
  for (int i = 1; i < 5; ++i) den = _mm256_fmadd_pd(den, z, set1(kAtanQ[i]));
  const __m256d zz = _mm256_div_pd(_mm256_mul_pd(z, num), den);
  __m256d res = _mm256_fmadd_pd(x, zz, x);
  const __m256d base = _mm256_and_pd(big, set1(kPi / 4.0));
  const __m256d extra = _mm256_and_pd(big, set1(0.5 * kMoreBits));
  res = _mm256_add_pd(res, extra);
  return _mm256_add_pd(base, res);
}

/// atan2(a, b) with -pi mapped to pi.
inline __m256d atan2_pd(__m256d a, __m256d b) {
  const __m256d sign = set1(-0.0);
  const __m256d aa = _mm256_andnot_pd(sign, a);
  const __m256d ab = _mm256_andnot_pd(sign, b);
  const __m256d mx = _mm256_max_pd(aa, ab);
  const __m256d mn = _mm256_min_pd(aa, ab);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d nz = _mm256_cmp_pd(mx, zero, _CMP_GT_OQ);
  const __m256d r = _mm256_and_pd(nz, _mm256_div_pd(mn, _mm256_blendv_pd(set1(1.0), mx, nz)));
  __m256d t = atan_unit(r);
  t = _mm256_blendv_pd(t, _mm256_sub_pd(set1(kPi / 2.0), t), _mm256_cmp_pd(aa, ab, _CMP_GT_OQ));
  t = _mm256_blendv_pd(t, _mm256_sub_pd(set1(kPi), t), _mm256_cmp_pd(b, zero, _CMP_LT_OQ));
  t = _mm256_or_pd(t, _mm256_and_pd(sign, a));
  return _mm256_blendv_pd(t, set1(kPi), _mm256_cmp_pd(t, set1(-kPi), _CMP_EQ_OQ));
}

/// exp(x); 0 below -708.
inline __m256d exp_pd(__m256d x) {
  const __m256d tiny = _mm256_cmp_pd(x, set1(-708.0), _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, set1(-708.0)), set1(709.0));
  const __m256d px = _mm256_floor_pd(_mm256_fmadd_pd(x, set1(kLog2e), set1(0.5)));
  x = _mm256_fnmadd_pd(px, set1(kExpC1), x);
  x = _mm256_fnmadd_pd(px, set1(kExpC2), x);
  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_fmadd_pd(set1(kExpP[0]), xx, set1(kExpP[1]));
  p = _mm256_fmadd_pd(p, xx, set1(kExpP[2]));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_fmadd_pd(set1(kExpQ[0]), xx, set1(kExpQ[1]));
  q = _mm256_fmadd_pd(q, xx, set1(kExpQ[2]));
  q = _mm256_fmadd_pd(q, xx, set1(kExpQ[3]));
  const __m256d e = _mm256_fmadd_pd(set1(2.0), _mm256_div_pd(p, _mm256_sub_pd(q, p)), set1(1.0));
  // 2^px from the exponent field: px + 1023 lands in the low mantissa bits
  // of (px + 1023 + 2^52), then moves up into the exponent.
  const __m256d biased = _mm256_add_pd(px, set1(1023.0 + 4503599627370496.0));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_castpd_si256(biased), 52));
  return _mm256_andnot_pd(tiny, _mm256_mul_pd(e, scale));
}

inline __m256d wrap_pd(__m256d r) {
  const __m256d two_pi = set1(2.0 * kPi);
  r = _mm256_sub_pd(r, _mm256_and_pd(_mm256_cmp_pd(r, set1(kPi), _CMP_GT_OQ), two_pi));
  return _mm256_add_pd(r, _mm256_and_pd(_mm256_cmp_pd(r, set1(-kPi), _CMP_LE_OQ), two_pi));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Elementwise kernels run their tail through a padded 4-lane block so every
// element goes through the same vector arithmetic.
template <typename F>
void tail_block(std::size_t rem, F&& body) {
  if (rem > 0) body(rem);
}

void bearings(const double* px, const double* py, std::size_t n, double sx, double sy, double* out) {
  const __m256d vx = set1(sx), vy = set1(sy);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(px + i), vx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(py + i), vy);
    _mm256_storeu_pd(out + i, atan2_pd(dx, dy));
  }
  tail_block(n - i, [&](std::size_t rem) {
    alignas(32) double bx[4] = {sx + 1.0, sx + 1.0, sx + 1.0, sx + 1.0};
    alignas(32) double by[4] = {sy, sy, sy, sy};
    alignas(32) double bo[4];
    std::copy_n(px + i, rem, bx);
    std::copy_n(py + i, rem, by);
    const __m256d dx = _mm256_sub_pd(_mm256_load_pd(bx), vx);
    const __m256d dy = _mm256_sub_pd(_mm256_load_pd(by), vy);
    _mm256_store_pd(bo, atan2_pd(dx, dy));
    std::copy_n(bo, rem, out + i);
  });
}

void gaussian_residual_loglik(const double* bearing, std::size_t n, double z, double inv_sigma,
                              double* out) {
  const __m256d vz = set1(z), vs = set1(inv_sigma), half = set1(-0.5);
  auto kernel = [&](__m256d b) {
    const __m256d r = _mm256_mul_pd(wrap_pd(_mm256_sub_pd(vz, b)), vs);
    return _mm256_mul_pd(half, _mm256_mul_pd(r, r));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, kernel(_mm256_loadu_pd(bearing + i)));
  tail_block(n - i, [&](std::size_t rem) {
    alignas(32) double b[4] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double o[4];
    std::copy_n(bearing + i, rem, b);
    _mm256_store_pd(o, kernel(_mm256_load_pd(b)));
    std::copy_n(o, rem, out + i);
  });
}

void clutter_mixture_weight(const double* bearing, std::size_t n, const double* phi,
                            std::size_t n_phi, double floor, double scale, double inv_sigma,
                            double* out) {
  const __m256d vs = set1(inv_sigma), half = set1(-0.5), vf = set1(floor), vsc = set1(scale);
  auto kernel = [&](__m256d b) {
    __m256d s = _mm256_setzero_pd();
    for (std::size_t k = 0; k < n_phi; ++k) {
      const __m256d r = _mm256_mul_pd(wrap_pd(_mm256_sub_pd(set1(phi[k]), b)), vs);
      s = _mm256_add_pd(s, exp_pd(_mm256_mul_pd(half, _mm256_mul_pd(r, r))));
    }
    return _mm256_fmadd_pd(vsc, s, vf);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, kernel(_mm256_loadu_pd(bearing + i)));
  tail_block(n - i, [&](std::size_t rem) {
    alignas(32) double b[4] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double o[4];
    std::copy_n(bearing + i, rem, b);
    _mm256_store_pd(o, kernel(_mm256_load_pd(b)));
    std::copy_n(o, rem, out + i);
  });
}

double exp_shifted(const double* in, std::size_t n, double shift, double* out) {
  const __m256d vs = set1(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(in + i), vs));
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  tail_block(n - i, [&](std::size_t rem) {
    alignas(32) double b[4] = {-1e300, -1e300, -1e300, -1e300};
    alignas(32) double o[4];
    std::copy_n(in + i, rem, b);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_load_pd(b), vs));
    _mm256_store_pd(o, e);
    acc = _mm256_add_pd(acc, e);
    std::copy_n(o, rem, out + i);
  });
  return hsum(acc);
}

double weighted_moments(const double* const* cols, std::size_t dims, const double* w, std::size_t n,
                        bool full, double* mean, double* cov) {
  constexpr std::size_t kMax = 6;
  const std::size_t body = n & ~std::size_t{3};
  const std::size_t rem = n - body;
  alignas(32) double tw[4] = {0.0, 0.0, 0.0, 0.0};
  alignas(32) double tc[kMax][4] = {};
  std::copy_n(w + body, rem, tw);
  for (std::size_t d = 0; d < dims; ++d) std::copy_n(cols[d] + body, rem, tc[d]);

  __m256d wacc = _mm256_setzero_pd();
  __m256d macc[kMax];
  for (std::size_t d = 0; d < dims; ++d) macc[d] = _mm256_setzero_pd();
  auto first = [&](const double* wp, auto col) {
    const __m256d vw = _mm256_loadu_pd(wp);
    wacc = _mm256_add_pd(wacc, vw);
    for (std::size_t d = 0; d < dims; ++d) macc[d] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(col(d)), macc[d]);
  };
  for (std::size_t i = 0; i < body; i += 4) first(w + i, [&](std::size_t d) { return cols[d] + i; });
  if (rem) first(tw, [&](std::size_t d) { return static_cast<const double*>(tc[d]); });
  const double wsum = hsum(wacc);
  for (std::size_t d = 0; d < dims; ++d) mean[d] = wsum > 0.0 ? hsum(macc[d]) / wsum : 0.0;

  __m256d vm[kMax];
  for (std::size_t d = 0; d < dims; ++d) vm[d] = set1(mean[d]);
  __m256d cacc[kMax * kMax];
  for (std::size_t k = 0; k < dims * dims; ++k) cacc[k] = _mm256_setzero_pd();
  auto second = [&](const double* wp, auto col) {
    const __m256d vw = _mm256_loadu_pd(wp);
    __m256d c[kMax];
    for (std::size_t d = 0; d < dims; ++d) c[d] = _mm256_sub_pd(_mm256_loadu_pd(col(d)), vm[d]);
    for (std::size_t a = 0; a < dims; ++a) {
      const __m256d wa = _mm256_mul_pd(vw, c[a]);
      const std::size_t end = full ? dims : a + 1;
      for (std::size_t b = a; b < end; ++b) cacc[a * dims + b] = _mm256_fmadd_pd(wa, c[b], cacc[a * dims + b]);
    }
  };
  for (std::size_t i = 0; i < body; i += 4) second(w + i, [&](std::size_t d) { return cols[d] + i; });
  if (rem) second(tw, [&](std::size_t d) { return static_cast<const double*>(tc[d]); });
  for (std::size_t a = 0; a < dims; ++a) {
    const std::size_t end = full ? dims : a + 1;
    for (std::size_t b = a; b < end; ++b) {
      const double v = wsum > 0.0 ? hsum(cacc[a * dims + b]) / wsum : 0.0;
      cov[a * dims + b] = v;
      cov[b * dims + a] = v;
    }
  }
  return wsum;
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{"avx2", bearings, gaussian_residual_loglik, clutter_mixture_weight,
                                 exp_shifted, weighted_moments};
  return table;
}

}  // namespace ptrack::kernels
