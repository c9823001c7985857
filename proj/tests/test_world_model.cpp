#include "ptrack/world_model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ptrack;

namespace {

Cuboid unit_cube() { return Cuboid::axis_aligned(Vec3::Zero(), Vec3::Ones()); }

DynamicsModel standard_model() {
  Vec6 q;
  q << 30, 30, 1e-10, 3, 3, 1e-10;
  return build_dynamics(1.0, 0.2, 1300.0, q);
}

}  // namespace

TEST(Dynamics, FullFrictionZeroesVelocityBlock) {
  const DynamicsModel m = build_dynamics(1.0, 1.0, 1.0, Vec6(Vec6::Zero()));
  EXPECT_EQ((m.A.block<3, 3>(3, 3)), (Mat3::Zero()));
  EXPECT_EQ((m.A.block<3, 3>(0, 3)), (Mat3::Identity()));
}

TEST(Dynamics, HalfStepBlocks) {
  const DynamicsModel m = build_dynamics(0.5, 0.0, 2.0, Vec6(Vec6::Zero()));
  EXPECT_TRUE((m.A.block<3, 3>(0, 3)).isApprox(0.5 * Mat3::Identity(), 1e-15));
  EXPECT_TRUE((m.B.block<3, 3>(3, 0)).isApprox(0.25 * Mat3::Identity(), 1e-15));
  EXPECT_EQ((m.B.block<3, 3>(0, 0)), (Mat3::Zero()));
  EXPECT_EQ((m.A.block<3, 3>(3, 3)), (Mat3::Identity()));
}

TEST(Dynamics, RoundTripParameters) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double dt = u(rng) * 3.0, fr = u(rng), mass = 100.0 * u(rng) + 1.0;
    const DynamicsModel m = build_dynamics(dt, fr, mass, Vec6(Vec6::Ones()));
    EXPECT_NEAR(m.A(0, 3), dt, 1e-12);
    EXPECT_NEAR(1.0 - m.A(3, 3), fr, 1e-12);
    EXPECT_NEAR(dt / m.B(3, 0), mass, 1e-12 * mass);
  }
}

TEST(Dynamics, RejectsBadParameters) {
  EXPECT_THROW(build_dynamics(0.0, 0.2, 1.0, Vec6(Vec6::Zero())), ConfigError);
  EXPECT_THROW(build_dynamics(1.0, 1.5, 1.0, Vec6(Vec6::Zero())), ConfigError);
  EXPECT_THROW(build_dynamics(1.0, -0.1, 1.0, Vec6(Vec6::Zero())), ConfigError);
  EXPECT_THROW(build_dynamics(1.0, 0.2, 0.0, Vec6(Vec6::Zero())), ConfigError);
  Vec6 q = Vec6::Ones();
  q[2] = -1.0;
  EXPECT_THROW(build_dynamics(1.0, 0.2, 1.0, q), ConfigError);
  Mat6 full = Mat6::Identity();
  full(0, 1) = 5.0;  // asymmetric
  EXPECT_THROW(build_dynamics(1.0, 0.2, 1.0, full), ConfigError);
  try {
    build_dynamics(1.0, 1.5, 1.0, Vec6(Vec6::Zero()));
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dynamics.friction");
  }
}

TEST(Dynamics, PropagateHandCases) {
  const DynamicsModel m = standard_model();
  EXPECT_EQ(propagate_state(m, Vec6::Zero(), Vec3::Zero(), Vec6(Vec6::Zero())), Vec6(Vec6::Zero()));
  Vec6 x = Vec6::Zero();
  x[3] = 1.0;
  Vec6 want = Vec6::Zero();
  want[0] = 1.0;
  want[3] = 0.8;
  EXPECT_TRUE(propagate_state(m, x, Vec3::Zero(), Vec6(Vec6::Zero())).isApprox(want, 1e-15));
  Vec6 pushed = Vec6::Zero();
  pushed[3] = 1.0;
  EXPECT_TRUE(propagate_state(m, Vec6::Zero(), Vec3(1300.0, 0.0, 0.0), Vec6(Vec6::Zero())).isApprox(pushed, 1e-15));
}

TEST(Dynamics, PropagateIsLinear) {
  const DynamicsModel m = standard_model();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 100.0);
  auto v6 = [&] {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = nd(rng);
    return v;
  };
  for (int i = 0; i < 50; ++i) {
    const Vec6 x1 = v6(), x2 = v6(), n1 = v6(), n2 = v6();
    const Vec3 u1 = v6().head<3>() * 10.0, u2 = v6().head<3>() * 10.0;
    const Vec6 lhs = propagate_state(m, x1 + x2, u1 + u2, n1 + n2);
    const Vec6 rhs = propagate_state(m, x1, u1, n1) + propagate_state(m, x2, u2, n2) -
                     propagate_state(m, Vec6::Zero(), Vec3::Zero(), Vec6(Vec6::Zero()));
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + lhs.cwiseAbs().maxCoeff()));
  }
}

TEST(Cuboid, ContainsHandCases) {
  const Cuboid c = unit_cube();
  EXPECT_TRUE(contains(c, Vec3(0.5, 0.5, 0.5)));
  EXPECT_FALSE(contains(c, Vec3(2.0, 0.5, 0.5)));
  EXPECT_TRUE(contains(c, Vec3(1.0, 1.0, 1.0)));
}

TEST(Cuboid, FaceSlackHandCases) {
  const Cuboid c = unit_cube();
  EXPECT_DOUBLE_EQ(face_slack(c, Vec3(2.0, 0.5, 0.5), 0), 1.0);
  for (std::size_t i = 0; i < Cuboid::kFaces; ++i) EXPECT_DOUBLE_EQ(face_slack(c, Vec3(0.5, 0.5, 0.5), i), -0.5);
  EXPECT_DOUBLE_EQ(face_slack(c, Vec3(1.0, 0.3, 0.7), 0), 0.0);
  EXPECT_THROW(face_slack(c, Vec3::Zero(), 6), std::out_of_range);
}

TEST(Cuboid, FaceOrderAndTies) {
  const Cuboid c = unit_cube();
  EXPECT_EQ(c.face(0).normal, Vec3::UnitX());
  EXPECT_EQ(c.face(3).normal, -Vec3::UnitY());
  EXPECT_EQ(max_slack_face(c, Vec3(0.5, 0.5, 0.5)), 0u);
  EXPECT_EQ(max_slack_face(c, Vec3(0.5, 0.99, 0.5)), 2u);
  EXPECT_TRUE(c.centroid().isApprox(Vec3::Constant(0.5), 1e-15));
}

TEST(Cuboid, ContainsIffNoPositiveSlack) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  // A rotated box in face form.
  const Vec3 a = Vec3(1, 1, 0).normalized(), b = Vec3(-1, 1, 0).normalized(), z = Vec3::UnitZ();
  const Cuboid rot = Cuboid::from_faces({Face{a, 1.0}, Face{-a, 0.0}, Face{b, 0.5}, Face{-b, 0.5},
                                         Face{z, 1.0}, Face{-z, 0.0}});
  for (const Cuboid& c : {unit_cube(), rot}) {
    for (int i = 0; i < 2000; ++i) {
      const Vec3 p(u(rng), u(rng), u(rng));
      bool all_nonpositive = true;
      for (std::size_t f = 0; f < Cuboid::kFaces; ++f) all_nonpositive &= face_slack(c, p, f) <= 0.0;
      EXPECT_EQ(contains(c, p), all_nonpositive);
    }
  }
}

TEST(Cuboid, RejectsMalformedFaces) {
  EXPECT_THROW(Cuboid::axis_aligned(Vec3::Ones(), Vec3::Zero()), ConfigError);
  const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
  // Not unit length.
  EXPECT_THROW(Cuboid::from_faces({Face{2 * x, 1}, Face{-x, 0}, Face{y, 1}, Face{-y, 0}, Face{z, 1}, Face{-z, 0}}),
               ConfigError);
  // Pair not anti-parallel.
  EXPECT_THROW(Cuboid::from_faces({Face{x, 1}, Face{y, 0}, Face{y, 1}, Face{-y, 0}, Face{z, 1}, Face{-z, 0}}),
               ConfigError);
  // Empty interior.
  EXPECT_THROW(Cuboid::from_faces({Face{x, -1}, Face{-x, 0}, Face{y, 1}, Face{-y, 0}, Face{z, 1}, Face{-z, 0}}),
               ConfigError);
}

TEST(Goal, PlanarContainment) {
  GoalRegion g{Vec3(500, 150, 0), Vec2(75, 50)};
  EXPECT_TRUE(g.contains(Vec3(500, 150, 30)));
  EXPECT_TRUE(g.contains(Vec3(575, 200, 0)));
  EXPECT_FALSE(g.contains(Vec3(576, 150, 0)));
}

TEST(Psd, Checks) {
  EXPECT_TRUE(is_psd(Mat6::Identity()));
  EXPECT_TRUE(is_psd(Mat6::Zero()));
  Mat6 neg = Mat6::Identity();
  neg(2, 2) = -1e-3;
  EXPECT_FALSE(is_psd(neg));
}
