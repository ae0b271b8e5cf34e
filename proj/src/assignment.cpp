#include "posekit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>

namespace posekit {

std::array<double, 2> pose_centroid(const Pose& pose, CentroidMode mode) {
  if (mode == CentroidMode::kBbox) {
    const BBox b = keypoint_bbox(pose);
    return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
  }
  double sx = 0, sy = 0;
  int n = 0;
  for (const auto& kp : pose.keypoints) {
    if (kp.v <= 0) continue;
    sx += kp.x;
    sy += kp.y;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("pose_centroid: no visible keypoints");
  return {sx / n, sy / n};
}

int assign_fpn_level(const Pose& pose, const LevelConfig& cfg) {
  const double side = std::max(1.0, std::sqrt(keypoint_bbox(pose).area()));
  const int l = static_cast<int>(std::floor(std::log2(side / cfg.base_scale)));
  return std::clamp(l, 0, cfg.level_count() - 1);
}

namespace {

// Index of the grid cell whose center (c + 0.5) * stride is nearest to v;
// equidistant pairs resolve toward the smaller index.
int nearest_cell(double v, int stride, int cells) {
  const int c = static_cast<int>(std::ceil(v / stride - 0.5 - 0.5));
  // ceil(x - 0.5) is round-half-down of x, here x = v/stride - 0.5.
  return std::clamp(c, 0, cells - 1);
}

}  // namespace

std::vector<CoarseTarget> assign_coarse_targets(const std::vector<Pose>& gt,
                                                const LevelConfig& cfg,
                                                const std::vector<std::array<int, 2>>& grids,
                                                CentroidMode mode,
                                                std::vector<std::string>* warnings) {
  if (static_cast<int>(grids.size()) != cfg.level_count())
    throw std::invalid_argument("assign_coarse_targets: one grid per level required");

  std::vector<std::optional<CoarseTarget>> slots(gt.size());
  std::map<std::array<int, 3>, int> occupied;  // (level, row, col) -> gt index

  for (size_t gi = 0; gi < gt.size(); ++gi) {
    const Pose& pose = gt[gi];
    const int level = assign_fpn_level(pose, cfg);
    const int stride = cfg.strides[static_cast<size_t>(level)];
    const auto [grid_h, grid_w] = grids[static_cast<size_t>(level)];
    const auto [cx, cy] = pose_centroid(pose, mode);

    CoarseTarget t;
    t.level = level;
    t.col = nearest_cell(cx, stride, grid_w);
    t.row = nearest_cell(cy, stride, grid_h);
    t.gt_index = static_cast<int>(gi);

    const double center_x = (t.col + 0.5) * stride;
    const double center_y = (t.row + 0.5) * stride;
    const int k = static_cast<int>(pose.keypoints.size());
    t.target_offsets.assign(static_cast<size_t>(2 * k), 0.0);
    t.joint_mask.assign(static_cast<size_t>(k), false);
    for (int i = 0; i < k; ++i) {
      const Keypoint& kp = pose.keypoints[static_cast<size_t>(i)];
      if (kp.v <= 0) continue;
      t.joint_mask[static_cast<size_t>(i)] = true;
      t.target_offsets[static_cast<size_t>(2 * i)] = (kp.x - center_x) / stride;
      t.target_offsets[static_cast<size_t>(2 * i + 1)] = (kp.y - center_y) / stride;
    }

    const std::array<int, 3> key{level, t.row, t.col};
    auto [it, fresh] = occupied.try_emplace(key, static_cast<int>(gi));
    if (!fresh) {
      if (warnings)
        warnings->push_back("cell collision at level " + std::to_string(level) + " cell (" +
                            std::to_string(t.row) + ", " + std::to_string(t.col) + "): GT " +
                            std::to_string(gi) + " replaces GT " + std::to_string(it->second));
      slots[static_cast<size_t>(it->second)].reset();
      it->second = static_cast<int>(gi);
    }
    slots[gi] = std::move(t);
  }

  std::vector<CoarseTarget> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

std::vector<CandidateLabel> label_candidates(const std::vector<Pose>& candidates,
                                             const std::vector<Pose>& gt, const OksParams& params,
                                             const LabelThresholds& thresholds) {
  std::vector<CandidateLabel> labels(candidates.size());
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    double best = 0.0;
    int best_gt = -1;
    for (size_t gi = 0; gi < gt.size(); ++gi) {
      const double o = oks(candidates[ci], gt[gi], params);
      if (best_gt < 0 || o > best) {
        best = o;
        best_gt = static_cast<int>(gi);
      }
    }
    CandidateLabel& lab = labels[ci];
    if (best_gt < 0 || best < thresholds.negative) {
      lab.kind = CandidateLabel::Kind::kNegative;
    } else if (best > thresholds.positive) {
      lab.kind = CandidateLabel::Kind::kPositive;
      lab.gt_index = best_gt;
      lab.regression_active = best > thresholds.regression;
    } else {
      lab.kind = CandidateLabel::Kind::kIgnore;
    }
  }
  return labels;
}

}  // namespace posekit
