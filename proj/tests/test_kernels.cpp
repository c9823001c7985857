#include "ptrack/kernels/kernels.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace ptrack;
using kernels::KernelTable;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<const KernelTable*> tables() {
  std::vector<const KernelTable*> out{&kernels::scalar_table()};
  if (const KernelTable* t = kernels::avx2_table()) out.push_back(t);
  return out;
}

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_STREQ(kernels::scalar_table().name, "scalar");
  EXPECT_TRUE(kernels::select("scalar"));
  EXPECT_STREQ(kernels::active().name, "scalar");
  EXPECT_FALSE(kernels::select("neon"));
  EXPECT_STREQ(kernels::active().name, "scalar");
  EXPECT_TRUE(kernels::select("auto"));
}

TEST(Kernels, BearingsKnownValues) {
  for (const KernelTable* t : tables()) {
    const double px[5] = {100.0, 0.0, -100.0, -100.0, 3.0};
    const double py[5] = {0.0, 100.0, -100.0, 0.0, 4.0};
    double out[5];
    t->bearings(px, py, 5, 0.0, 0.0, out);
    EXPECT_NEAR(out[0], kPi / 2.0, 1e-15) << t->name;
    EXPECT_NEAR(out[1], 0.0, 1e-15) << t->name;
    EXPECT_NEAR(out[2], -3.0 * kPi / 4.0, 1e-15) << t->name;
    EXPECT_NEAR(out[3], -kPi / 2.0, 1e-15) << t->name;
    EXPECT_NEAR(out[4], std::atan2(3.0, 4.0), 1e-15) << t->name;
  }
}

TEST(Kernels, BearingDueSouthIsPlusPi) {
  for (const KernelTable* t : tables()) {
    const double px[2] = {0.0, -0.0};
    const double py[2] = {-5.0, -5.0};
    double out[2];
    t->bearings(px, py, 2, 0.0, 0.0, out);
    EXPECT_EQ(out[0], kPi) << t->name;
    EXPECT_EQ(out[1], kPi) << t->name;
  }
}

TEST(Kernels, BearingsMatchStdAtan2) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 1001u}) {
    const auto px = uniform(rng, n, -1000.0, 1000.0);
    const auto py = uniform(rng, n, -1000.0, 1000.0);
    for (const KernelTable* t : tables()) {
      std::vector<double> out(n);
      t->bearings(px.data(), py.data(), n, 12.5, -7.0, out.data());
      for (std::size_t i = 0; i < n; ++i) {
        const double ref = std::atan2(px[i] - 12.5, py[i] + 7.0);
        EXPECT_NEAR(out[i], ref, 4e-16 * kPi) << t->name << " i=" << i;
        EXPECT_GT(out[i], -kPi);
        EXPECT_LE(out[i], kPi);
      }
    }
  }
}

TEST(Kernels, BearingsAcrossScales) {
  // Ratios spanning many orders of magnitude hit every reduction branch.
  std::vector<double> px, py;
  for (int e = -8; e <= 8; ++e)
    for (double s : {-1.0, 1.0})
      for (double f : {0.3, 0.65, 0.67, 1.0, 1.5, 2.4, 2.5, 7.0}) {
        px.push_back(s * f * std::pow(10.0, e));
        py.push_back(1.0);
        px.push_back(1.0);
        py.push_back(s * f * std::pow(10.0, e));
      }
  for (const KernelTable* t : tables()) {
    std::vector<double> out(px.size());
    t->bearings(px.data(), py.data(), px.size(), 0.0, 0.0, out.data());
    for (std::size_t i = 0; i < px.size(); ++i)
      EXPECT_NEAR(out[i], std::atan2(px[i], py[i]), 4e-16 * kPi) << t->name << " " << px[i] << "," << py[i];
  }
}

TEST(Kernels, ExpMatchesStdExp) {
  std::mt19937_64 rng(3);
  const auto in = uniform(rng, 4003, -720.0, 5.0);
  for (const KernelTable* t : tables()) {
    std::vector<double> out(in.size());
    const double sum = t->exp_shifted(in.data(), in.size(), 2.0, out.data());
    double ref_sum = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double e = in[i] - 2.0;
      const double ref = e < -708.0 ? 0.0 : std::exp(e);
      ref_sum += ref;
      EXPECT_NEAR(out[i], ref, 4e-16 * ref) << t->name << " x=" << e;
    }
    EXPECT_NEAR(sum, ref_sum, 1e-14 * ref_sum) << t->name;
  }
}

TEST(Kernels, ExpEdgeValues) {
  for (const KernelTable* t : tables()) {
    const double in[6] = {0.0, -708.5, -1e308, 1.0, -707.9, -0.5 * std::log(2.0)};
    double out[6];
    t->exp_shifted(in, 6, 0.0, out);
    EXPECT_EQ(out[0], 1.0) << t->name;
    EXPECT_EQ(out[1], 0.0) << t->name;
    EXPECT_EQ(out[2], 0.0) << t->name;
    EXPECT_NEAR(out[3], std::exp(1.0), 4e-16 * std::exp(1.0)) << t->name;
    EXPECT_NEAR(out[4], std::exp(-707.9), 4e-16 * std::exp(-707.9)) << t->name;
    EXPECT_NEAR(out[5], std::sqrt(0.5), 4e-16) << t->name;
  }
}

TEST(Kernels, LoglikWrapsNearPi) {
  const double inv_sigma = 180.0 / kPi;
  for (const KernelTable* t : tables()) {
    // Measurement just below +pi, particle bearing just above -pi: the
    // wrapped residual is 0.02 rad, not 2 pi - 0.02.
    const double b[1] = {-kPi + 0.01};
    double out[1];
    t->gaussian_residual_loglik(b, 1, kPi - 0.01, inv_sigma, out);
    EXPECT_NEAR(out[0], -0.5 * std::pow(0.02 * inv_sigma, 2), 1e-9) << t->name;
  }
}

TEST(Kernels, ElementwiseKernelsAgree) {
  const KernelTable* v = kernels::avx2_table();
  if (!v) GTEST_SKIP() << "no AVX2 on this machine";
  const KernelTable& s = kernels::scalar_table();
  std::mt19937_64 rng(17);
  const double inv_sigma = 180.0 / kPi;
  for (std::size_t n : {1u, 2u, 3u, 4u, 6u, 13u, 2000u}) {
    auto b = uniform(rng, n, -kPi, kPi);
    b[0] = kPi;
    const auto phi = uniform(rng, 5, -kPi, kPi);
    std::vector<double> o1(n), o2(n);
    s.gaussian_residual_loglik(b.data(), n, phi[0], inv_sigma, o1.data());
    v->gaussian_residual_loglik(b.data(), n, phi[0], inv_sigma, o2.data());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], 1e-12 * (1.0 + std::abs(o1[i])));
    // Put a few particles right on a measurement so the Gaussian term matters.
    for (std::size_t i = 0; i < n; i += 3) b[i] = phi[i % 5] + 0.004 * (static_cast<double>(i % 7) - 3.0) / 3.0;
    for (std::size_t i = 0; i < n; ++i) b[i] = b[i] > kPi ? b[i] - 2 * kPi : (b[i] <= -kPi ? b[i] + 2 * kPi : b[i]);
    s.clutter_mixture_weight(b.data(), n, phi.data(), phi.size(), 0.05 / (2 * kPi), 21.7, inv_sigma, o1.data());
    v->clutter_mixture_weight(b.data(), n, phi.data(), phi.size(), 0.05 / (2 * kPi), 21.7, inv_sigma, o2.data());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], 1e-13 * o1[i]) << i;
  }
}

TEST(Kernels, WeightedMomentsMatchReference) {
  std::mt19937_64 rng(23);
  for (std::size_t n : {1u, 3u, 4u, 5u, 11u, 2000u}) {
    std::vector<std::vector<double>> cols(6);
    for (std::size_t d = 0; d < 6; ++d) cols[d] = uniform(rng, n, -100.0 * (d + 1), 50.0);
    const auto w = uniform(rng, n, 0.0, 1.0);
    const double* ptrs[6];
    for (std::size_t d = 0; d < 6; ++d) ptrs[d] = cols[d].data();

    // Reference through Eigen, normalized weights, two-pass.
    Eigen::MatrixXd x(n, 6);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < 6; ++d) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = cols[d][i];
    Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(n));
    const double wsum = wv.sum();
    const Eigen::VectorXd mu = x.transpose() * wv / wsum;
    const Eigen::MatrixXd xc = x.rowwise() - mu.transpose();
    const Eigen::MatrixXd cov = xc.transpose() * wv.asDiagonal() * xc / wsum;

    for (const KernelTable* t : tables()) {
      double mean[6], c[36];
      const double ws = t->weighted_moments(ptrs, 6, w.data(), n, true, mean, c);
      EXPECT_NEAR(ws, wsum, 1e-12 * wsum);
      for (int a = 0; a < 6; ++a) {
        EXPECT_NEAR(mean[a], mu[a], 1e-11 * (1.0 + std::abs(mu[a]))) << t->name;
        for (int b = 0; b < 6; ++b) EXPECT_NEAR(c[a * 6 + b], cov(a, b), 1e-10 * (1.0 + std::abs(cov(a, b)))) << t->name;
      }
      double dmean[6], dc[36];
      t->weighted_moments(ptrs, 6, w.data(), n, false, dmean, dc);
      for (int a = 0; a < 6; ++a) EXPECT_EQ(dc[a * 6 + a], c[a * 6 + a]) << t->name;
    }
  }
}

TEST(Kernels, MomentsOfTwoPoints) {
  const double x0[2] = {1.0, -1.0};
  const double x1[2] = {0.0, 0.0};
  const double* cols[2] = {x0, x1};
  const double w[2] = {0.5, 0.5};
  for (const KernelTable* t : tables()) {
    double mean[2], cov[4];
    t->weighted_moments(cols, 2, w, 2, true, mean, cov);
    EXPECT_DOUBLE_EQ(mean[0], 0.0);
    EXPECT_DOUBLE_EQ(cov[0], 1.0);
    EXPECT_DOUBLE_EQ(cov[1], 0.0);
    EXPECT_DOUBLE_EQ(cov[3], 0.0);
  }
}
