#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit {

/// Keypoint visibility follows the COCO 3-state convention:
/// 0 = absent, 1 = labeled but occluded, 2 = visible.
/// Metrics treat v > 0 as "counts"; v = 0 keypoints are ignored.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int v = 0;
};

struct Pose {
  std::vector<Keypoint> keypoints;
  std::optional<double> score;

  int visible_count() const {
    int n = 0;
    for (const auto& k : keypoints)
      if (k.v > 0) ++n;
    return n;
  }
};

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
};

/// Joint-count, per-joint OKS falloff constants, and the unit-square
/// template used by the synthetic generator.
struct SkeletonSpec {
  int k = 0;
  std::vector<std::string> joint_names;
  std::vector<double> sigmas;
  std::vector<std::array<double, 2>> template_points;
};

/// One image worth of data: a dense C x H x W intensity grid in [0, 1],
/// ground-truth poses, and the scene's crowding statistic
/// (mean pairwise keypoint-box IoU).
struct Scene {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> image;  // row-major C x H x W
  std::vector<Pose> gt_poses;
  double crowd_index = 0.0;
};

/// The 17 per-joint falloff constants of the standard COCO skeleton.
std::vector<double> coco_sigmas();
std::vector<std::string> coco_joint_names();

/// Default falloff constants for a K-joint skeleton: the COCO table when
/// K = 17, otherwise a uniform 0.079.
std::vector<double> default_sigmas(int k);

/// The built-in 5-joint stick figure used by the synthetic generator.
SkeletonSpec default_synthetic_skeleton(int k = 5);

/// Checks pose invariants against the skeleton and image bounds; returns the
/// pose unchanged. Throws std::invalid_argument on: keypoint count mismatch,
/// a visible keypoint outside [0, W) x [0, H), or no visible keypoints.
const Pose& validate_pose(const Pose& pose, const SkeletonSpec& spec, double width, double height);

/// Minimal axis-aligned box over keypoints with v > 0.
/// Throws std::invalid_argument if the pose has no visible keypoints.
BBox keypoint_bbox(const Pose& pose);

}  // namespace posekit
