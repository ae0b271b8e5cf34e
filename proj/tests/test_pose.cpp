#include <gtest/gtest.h>

#include <set>

#include "posekit/pose.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

namespace {

Pose make_pose(std::initializer_list<Keypoint> kps) {
  Pose p;
  p.keypoints = kps;
  return p;
}

SkeletonSpec spec_k(int k) {
  SkeletonSpec s;
  s.k = k;
  s.joint_names.resize(static_cast<size_t>(k), "j");
  s.sigmas.assign(static_cast<size_t>(k), 0.1);
  s.template_points.resize(static_cast<size_t>(k), {0.5, 0.5});
  return s;
}

}  // namespace

TEST(ValidatePose, AcceptsValidPose) {
  const Pose p = make_pose({{1, 1, 2}, {2, 2, 2}, {3, 3, 2}, {4, 4, 2}, {5, 5, 2}});
  const Pose& out = validate_pose(p, spec_k(5), 64, 64);
  EXPECT_EQ(&out, &p);
}

TEST(ValidatePose, WrongKeypointCount) {
  const Pose p = make_pose({{1, 1, 2}, {2, 2, 2}, {3, 3, 2}, {4, 4, 2}});
  EXPECT_THROW(validate_pose(p, spec_k(5), 64, 64), std::invalid_argument);
  try {
    validate_pose(p, spec_k(5), 64, 64);
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("keypoint count mismatch"), std::string::npos);
  }
}

TEST(ValidatePose, VisibleKeypointOutOfBounds) {
  const Pose p = make_pose({{1, 1, 2}, {70, 2, 2}});
  EXPECT_THROW(validate_pose(p, spec_k(2), 64, 64), std::invalid_argument);
}

TEST(ValidatePose, InvisibleKeypointMayBeAnywhere) {
  const Pose p = make_pose({{1, 1, 2}, {-500, 9000, 0}});
  EXPECT_NO_THROW(validate_pose(p, spec_k(2), 64, 64));
}

TEST(ValidatePose, AllInvisibleRejected) {
  const Pose p = make_pose({{1, 1, 0}, {2, 2, 0}});
  try {
    validate_pose(p, spec_k(2), 64, 64);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("no visible keypoints"), std::string::npos);
  }
}

TEST(ValidatePose, Idempotent) {
  const Pose p = make_pose({{3, 4, 2}, {5, 6, 1}});
  const Pose& once = validate_pose(p, spec_k(2), 64, 64);
  const Pose& twice = validate_pose(once, spec_k(2), 64, 64);
  EXPECT_EQ(&twice, &p);
}

TEST(KeypointBbox, TwoPointHull) {
  const BBox b = keypoint_bbox(make_pose({{1, 1, 2}, {3, 5, 2}}));
  EXPECT_DOUBLE_EQ(b.x_min, 1);
  EXPECT_DOUBLE_EQ(b.y_min, 1);
  EXPECT_DOUBLE_EQ(b.x_max, 3);
  EXPECT_DOUBLE_EQ(b.y_max, 5);
}

TEST(KeypointBbox, SinglePointDegenerate) {
  const BBox b = keypoint_bbox(make_pose({{4, 4, 2}}));
  EXPECT_DOUBLE_EQ(b.x_min, 4);
  EXPECT_DOUBLE_EQ(b.x_max, 4);
  EXPECT_DOUBLE_EQ(b.area(), 0);
}

TEST(KeypointBbox, IgnoresInvisiblePoints) {
  const BBox b = keypoint_bbox(make_pose({{0, 0, 2}, {9, 0, 0}, {2, 7, 2}}));
  EXPECT_DOUBLE_EQ(b.x_min, 0);
  EXPECT_DOUBLE_EQ(b.y_min, 0);
  EXPECT_DOUBLE_EQ(b.x_max, 2);
  EXPECT_DOUBLE_EQ(b.y_max, 7);
}

TEST(KeypointBbox, NoVisibleThrows) {
  EXPECT_THROW(keypoint_bbox(make_pose({{1, 1, 0}})), std::invalid_argument);
}

TEST(KeypointBbox, TranslationEquivariant) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Pose p;
    const int k = 2 + static_cast<int>(rng.below(6));
    for (int i = 0; i < k; ++i)
      p.keypoints.push_back({rng.uniform(0, 50), rng.uniform(0, 50), 2});
    const double dx = rng.uniform(-10, 10), dy = rng.uniform(-10, 10);
    Pose q = p;
    for (auto& kp : q.keypoints) {
      kp.x += dx;
      kp.y += dy;
    }
    const BBox a = keypoint_bbox(p), b = keypoint_bbox(q);
    EXPECT_NEAR(b.x_min, a.x_min + dx, 1e-12);
    EXPECT_NEAR(b.y_min, a.y_min + dy, 1e-12);
    EXPECT_NEAR(b.x_max, a.x_max + dx, 1e-12);
    EXPECT_NEAR(b.y_max, a.y_max + dy, 1e-12);
  }
}

TEST(Skeleton, CocoSigmasTable) {
  const auto s = coco_sigmas();
  ASSERT_EQ(s.size(), 17u);
  EXPECT_DOUBLE_EQ(s[0], 0.026);   // nose
  EXPECT_DOUBLE_EQ(s[16], 0.089);  // right ankle
  for (double v : s) EXPECT_GT(v, 0.0);
}

TEST(Skeleton, DefaultSigmasFallBackToUniform) {
  EXPECT_EQ(default_sigmas(17), coco_sigmas());
  const auto s5 = default_sigmas(5);
  ASSERT_EQ(s5.size(), 5u);
  for (double v : s5) EXPECT_DOUBLE_EQ(v, 0.079);
}

TEST(Skeleton, SyntheticTemplateInUnitSquare) {
  for (int k : {2, 5, 9}) {
    const SkeletonSpec s = default_synthetic_skeleton(k);
    EXPECT_EQ(s.k, k);
    ASSERT_EQ(s.template_points.size(), static_cast<size_t>(k));
    ASSERT_EQ(s.sigmas.size(), static_cast<size_t>(k));
    ASSERT_EQ(s.joint_names.size(), static_cast<size_t>(k));
    std::set<std::string> names(s.joint_names.begin(), s.joint_names.end());
    EXPECT_EQ(names.size(), s.joint_names.size()) << "joint names must be distinct";
    for (const auto& t : s.template_points) {
      EXPECT_GE(t[0], 0.0);
      EXPECT_LE(t[0], 1.0);
      EXPECT_GE(t[1], 0.0);
      EXPECT_LE(t[1], 1.0);
    }
  }
}

TEST(Rng, DeterministicFromSeed) {
  Rng a(123), b(123), c(124);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformInHalfOpenUnitInterval) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(9);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t v = rng.below(7);
    EXPECT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, ForkedStreamsDiverge) {
  Rng base(42);
  Rng f0 = base.fork(0);
  Rng f1 = base.fork(1);
  bool any_diff = false;
  for (int i = 0; i < 50; ++i)
    if (f0.next_u64() != f1.next_u64()) any_diff = true;
  EXPECT_TRUE(any_diff);
}
