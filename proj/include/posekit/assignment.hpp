#pragma once

#include <array>
#include <string>
#include <vector>

#include "posekit/oks.hpp"
#include "posekit/pose.hpp"

namespace posekit {

/// Pyramid geometry: per-level downsampling factors plus the object size (in
/// pixels) that maps to the first level.
struct LevelConfig {
  std::vector<int> strides = {4, 8, 16};
  double base_scale = 32.0;

  int level_count() const { return static_cast<int>(strides.size()); }
};

enum class CentroidMode { kKeypoints, kBbox };

/// The single cell responsible for regressing one ground-truth pose.
/// target_offsets are (gt - cell_center) / stride per joint, x then y;
/// joint_mask marks which joints participate in the loss (v > 0).
struct CoarseTarget {
  int level = 0;
  int row = 0;
  int col = 0;
  int gt_index = 0;
  std::vector<double> target_offsets;  // 2K, feature-cell units
  std::vector<bool> joint_mask;        // K
};

struct CandidateLabel {
  enum class Kind { kPositive, kNegative, kIgnore };
  Kind kind = Kind::kNegative;
  int gt_index = -1;          // set for positives
  bool regression_active = false;
};

/// Classification/regression banding around the best-ground-truth OKS.
struct LabelThresholds {
  double positive = 0.6;    // best > positive  -> positive
  double negative = 0.5;    // best < negative  -> negative; else ignore
  double regression = 0.7;  // best > regression -> regression_active
};

/// Mean of visible keypoints, or center of their bounding box.
/// Throws if the pose has no visible keypoints.
std::array<double, 2> pose_centroid(const Pose& pose, CentroidMode mode);

/// l = clamp(floor(log2(max(1, sqrt(box area)) / base_scale)), 0, L-1).
int assign_fpn_level(const Pose& pose, const LevelConfig& cfg);

/// Maps each GT pose to (level via assign_fpn_level, the cell whose center
/// (c + 0.5) * stride is nearest the pose centroid; equidistant cells go to
/// the smaller row, then smaller col). When two GTs land on the same cell the
/// later one wins and a warning naming both is appended to `warnings` (when
/// given). Results stay in GT order minus overwritten entries.
std::vector<CoarseTarget> assign_coarse_targets(const std::vector<Pose>& gt,
                                                const LevelConfig& cfg,
                                                const std::vector<std::array<int, 2>>& grids,
                                                CentroidMode mode,
                                                std::vector<std::string>* warnings = nullptr);

/// Labels every candidate by its best OKS over the GT list (argmax ties: the
/// lower GT index). No GT poses -> everything negative.
std::vector<CandidateLabel> label_candidates(const std::vector<Pose>& candidates,
                                             const std::vector<Pose>& gt, const OksParams& params,
                                             const LabelThresholds& thresholds = {});

}  // namespace posekit
