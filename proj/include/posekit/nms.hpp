#pragma once

#include "posekit/oks.hpp"
#include "posekit/pose.hpp"

namespace posekit {

/// One decoded pose hypothesis.
struct Detection {
  Pose pose;
  double score = 0.0;
  int level = 0;
};

enum class NmsKind { kOks, kIou };

/// Intersection-over-union of two boxes; 0 when the union has zero area.
double box_iou(const BBox& a, const BBox& b);

/// Greedy non-maximum suppression. Detections are ranked by descending score
/// (ties broken by input order); the top detection is kept and every
/// remaining detection whose similarity to it exceeds `threshold` is
/// discarded; repeats until empty or `max_keep` detections are kept.
/// IoU mode measures keypoint_bbox overlap; OKS mode uses oks_symmetric.
std::vector<Detection> greedy_nms(const std::vector<Detection>& dets, NmsKind kind,
                                  double threshold, int max_keep, const OksParams& params);

/// Indices into `dets` of the kept detections, in keep order. greedy_nms is
/// a thin wrapper over this.
std::vector<int> greedy_nms_indices(const std::vector<Detection>& dets, NmsKind kind,
                                    double threshold, int max_keep, const OksParams& params);

}  // namespace posekit
