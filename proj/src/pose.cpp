#include "posekit/pose.hpp"

#include <algorithm>
#include <cmath>

namespace posekit {

std::vector<double> coco_sigmas() {
  return {0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
          0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089};
}

std::vector<std::string> coco_joint_names() {
  return {"nose",          "left_eye",      "right_eye",    "left_ear",    "right_ear",
          "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow", "left_wrist",
          "right_wrist",   "left_hip",      "right_hip",    "left_knee",   "right_knee",
          "left_ankle",    "right_ankle"};
}

std::vector<double> default_sigmas(int k) {
  if (k == 17) return coco_sigmas();
  return std::vector<double>(static_cast<size_t>(k), 0.079);
}

SkeletonSpec default_synthetic_skeleton(int k) {
  SkeletonSpec spec;
  spec.k = k;
  spec.sigmas = default_sigmas(k);
  if (k == 5) {
    spec.joint_names = {"head", "left_hand", "right_hand", "left_foot", "right_foot"};
    spec.template_points = {{0.50, 0.08}, {0.15, 0.45}, {0.85, 0.45}, {0.33, 0.95}, {0.67, 0.95}};
  } else {
    // Evenly spaced ring inside the unit square.
    spec.joint_names.reserve(static_cast<size_t>(k));
    spec.template_points.reserve(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
      spec.joint_names.push_back("joint_" + std::to_string(j));
      const double a = 6.283185307179586 * j / k;
      spec.template_points.push_back({0.5 + 0.4 * std::cos(a), 0.5 + 0.4 * std::sin(a)});
    }
  }
  return spec;
}

const Pose& validate_pose(const Pose& pose, const SkeletonSpec& spec, double width, double height) {
  if (static_cast<int>(pose.keypoints.size()) != spec.k) {
    throw std::invalid_argument("keypoint count mismatch: pose has " +
                                std::to_string(pose.keypoints.size()) + ", skeleton expects " +
                                std::to_string(spec.k));
  }
  int visible = 0;
  for (size_t i = 0; i < pose.keypoints.size(); ++i) {
    const Keypoint& kp = pose.keypoints[i];
    if (kp.v == 0) continue;
    ++visible;
    if (!(kp.x >= 0.0 && kp.x < width && kp.y >= 0.0 && kp.y < height)) {
      throw std::invalid_argument("visible keypoint " + std::to_string(i) + " at (" +
                                  std::to_string(kp.x) + ", " + std::to_string(kp.y) +
                                  ") out of bounds " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
  }
  if (visible == 0) throw std::invalid_argument("no visible keypoints");
  return pose;
}

BBox keypoint_bbox(const Pose& pose) {
  BBox box;
  bool any = false;
  for (const auto& kp : pose.keypoints) {
    if (kp.v <= 0) continue;
    if (!any) {
      box = {kp.x, kp.y, kp.x, kp.y};
      any = true;
    } else {
      box.x_min = std::min(box.x_min, kp.x);
      box.y_min = std::min(box.y_min, kp.y);
      box.x_max = std::max(box.x_max, kp.x);
      box.y_max = std::max(box.y_max, kp.y);
    }
  }
  if (!any) throw std::invalid_argument("keypoint_bbox: no visible keypoints");
  return box;
}

}  // namespace posekit
