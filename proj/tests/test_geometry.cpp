#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "trackbench/geometry.hpp"

using namespace trackbench;

namespace {

const CameraIntrinsics K{100, 100, 400, 300, 800, 600};

RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return {q, Eigen::Vector3d(n(rng), n(rng), n(rng)) * 3.0};
}

void expect_near(const Point3& a, const Point3& b, double tol) {
  EXPECT_NEAR(a.x(), b.x(), tol);
  EXPECT_NEAR(a.y(), b.y(), tol);
  EXPECT_NEAR(a.z(), b.z(), tol);
}

}  // namespace

TEST(Project, PrincipalPoint) {
  const Pixel p = project(K, {0, 0, 1});
  EXPECT_DOUBLE_EQ(p.u, 400);
  EXPECT_DOUBLE_EQ(p.v, 300);
}

TEST(Project, DirectFormula) {
  const Pixel p = project(K, {1, 2, 10});
  EXPECT_DOUBLE_EQ(p.u, 410);
  EXPECT_DOUBLE_EQ(p.v, 320);
}

TEST(Project, BehindCameraThrows) {
  EXPECT_THROW(project(K, {0, 0, -1}), NonPositiveDepth);
  EXPECT_THROW(project(K, {0, 0, 0}), NonPositiveDepth);
  EXPECT_THROW(project(K, {0, 0, 1e-10}), NonPositiveDepth);
}

TEST(Backproject, Examples) {
  expect_near(backproject(K, {400, 300}, 5), {0, 0, 5}, 0);
  expect_near(backproject(K, {410, 320}, 10), {1, 2, 10}, 1e-12);
  EXPECT_THROW(backproject(K, {410, 320}, 0), NonPositiveDepth);
  EXPECT_THROW(backproject(K, {410, 320}, -2), NonPositiveDepth);
}

TEST(Backproject, RoundTripRandom) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-200, 1000), z(0.01, 100);
  for (int i = 0; i < 10000; ++i) {
    const Pixel p{u(rng), u(rng)};
    const Pixel q = project(K, backproject(K, p, z(rng)));
    ASSERT_NEAR(q.u, p.u, 1e-9);
    ASSERT_NEAR(q.v, p.v, 1e-9);
  }
}

TEST(Intrinsics, Validity) {
  EXPECT_TRUE(K.valid());
  EXPECT_FALSE((CameraIntrinsics{0, 100, 1, 1, 10, 10}.valid()));
  EXPECT_FALSE((CameraIntrinsics{100, 100, 10, 1, 10, 10}.valid()));
  EXPECT_FALSE((CameraIntrinsics{100, 100, -1, 1, 10, 10}.valid()));
}

TEST(Transform, Examples) {
  expect_near(transform(RigidPose::identity(), {1, 2, 3}), {1, 2, 3}, 0);
  expect_near(transform(RigidPose::from_translation({0, 0, 5}), {1, 2, 3}), {1, 2, 8}, 0);
  const RigidPose quarter = RigidPose::from_axis_angle({0, 0, 1}, std::numbers::pi / 2);
  expect_near(transform(quarter, {1, 0, 0}), {0, 1, 0}, 1e-15);
}

TEST(Compose, IdentityElement) {
  std::mt19937_64 rng(2);
  const RigidPose P = random_pose(rng);
  const RigidPose Q = compose(P, RigidPose::identity());
  EXPECT_TRUE(Q.rotation().isApprox(P.rotation(), 1e-15));
  EXPECT_TRUE(Q.translation().isApprox(P.translation(), 1e-15));
  const RigidPose I = inverse(RigidPose::identity());
  EXPECT_DOUBLE_EQ(I.rotation().w(), 1.0);
  EXPECT_EQ(I.translation(), Eigen::Vector3d::Zero());
}

TEST(Inverse, QuarterTurnExample) {
  const RigidPose P = RigidPose::from_axis_angle({0, 0, 1}, std::numbers::pi / 2, {1, 0, 0});
  // P maps (0,0,0) to (1,0,0), so its inverse maps (1,0,0) back to the origin
  expect_near(transform(inverse(P), {1, 0, 0}), {0, 0, 0}, 1e-15);
}

TEST(Inverse, RoundTripRandom) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 5);
  for (int i = 0; i < 100; ++i) {
    const RigidPose P = random_pose(rng);
    const Point3 X(n(rng), n(rng), n(rng));
    expect_near(transform(inverse(P), transform(P, X)), X, 1e-9);
    const RigidPose I = compose(P, inverse(P));
    EXPECT_NEAR(std::abs(I.rotation().w()), 1.0, 1e-9);
    EXPECT_LT(I.translation().norm(), 1e-9);
  }
}

TEST(Compose, MatchesSequentialTransform) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 5);
  for (int i = 0; i < 100; ++i) {
    const RigidPose A = random_pose(rng), B = random_pose(rng);
    const Point3 X(n(rng), n(rng), n(rng));
    expect_near(transform(compose(A, B), X), transform(A, transform(B, X)), 1e-9);
  }
}

TEST(Quaternion, NormalizedOnConstruction) {
  const RigidPose P(Eigen::Quaterniond(2, 0, 0, 0), Eigen::Vector3d::Zero());
  EXPECT_NEAR(P.rotation().norm(), 1.0, 1e-15);
}

TEST(Quaternion, LongCompositionStaysUnit) {
  std::mt19937_64 rng(5);
  RigidPose acc;
  for (int i = 0; i < 10000; ++i) acc = compose(acc, random_pose(rng));
  EXPECT_NEAR(acc.rotation().norm(), 1.0, 1e-6);
}

TEST(Slerp, HalfwayQuarterTurn) {
  const Eigen::Quaterniond a = Eigen::Quaterniond::Identity();
  const Eigen::Quaterniond b(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()));
  const Eigen::AngleAxisd half(slerp(a, b, 0.5));
  EXPECT_NEAR(half.angle(), std::numbers::pi / 4, 1e-12);
  EXPECT_NEAR(half.axis().z(), 1.0, 1e-12);
}

TEST(Pixel, Arithmetic) {
  const Pixel a{412, 318}, b{410, 320};
  const Vec2 d = a - b;
  EXPECT_EQ(d, Vec2(2, -2));
  EXPECT_DOUBLE_EQ(distance(a, b), std::sqrt(8.0));
}
