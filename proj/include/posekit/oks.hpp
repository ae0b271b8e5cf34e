#pragma once

#include "posekit/pose.hpp"

namespace posekit {

/// Per-joint falloff constants plus the minimal object scale in pixels that
/// guards degenerate keypoint boxes.
struct OksParams {
  std::vector<double> sigmas;
  double scale_floor = 1.0;
};

/// Object Keypoint Similarity between a predicted pose and a reference pose:
///
///   OKS = mean over {i : ref.v_i > 0} of exp(-d_i^2 / (2 s^2 k_i^2))
///
/// where d_i is the pixel distance between the i-th keypoints,
/// s = max(scale_floor, sqrt(area(keypoint_bbox(ref)))) and k_i = sigmas[i].
/// Only the reference pose's visibility matters; prediction coordinates are
/// used as-is. Throws if ref has no visible keypoint or on length mismatch.
double oks(const Pose& pred, const Pose& ref, const OksParams& params);

/// OKS between two scored predictions, using the higher-scored pose as the
/// reference (ties: the first argument). Used inside OKS-based NMS.
double oks_symmetric(const Pose& a, const Pose& b, const OksParams& params);

/// Same, with the scores supplied explicitly (detections carry the score
/// outside the pose).
double oks_symmetric(const Pose& a, double score_a, const Pose& b, double score_b,
                     const OksParams& params);

}  // namespace posekit
