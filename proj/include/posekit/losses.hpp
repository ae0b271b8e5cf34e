#pragma once

#include <array>
#include <vector>

#include "posekit/assignment.hpp"
#include "posekit/pose.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

/// Per-level K x H_l x W_l Gaussian joint maps; peak 1.0 at each visible GT
/// joint, multiple instances combined by max.
struct HeatmapTarget {
  std::vector<Tensor> maps;
};

/// sigma is measured in feature-grid cells at every level by default;
/// sigma_in_pixels switches to a fixed pixel width shared by all levels.
HeatmapTarget gaussian_target_maps(const std::vector<Pose>& gt,
                                   const std::vector<std::array<int, 2>>& grids,
                                   const std::vector<int>& strides, double sigma = 2.0,
                                   bool sigma_in_pixels = false);

/// Mean of mask-selected squared differences pooled over all given tensors:
/// sum mask * (pred - target)^2 / max(1, sum mask). Pass empty masks (or a
/// null entry) to average over every element. Differentiable w.r.t. preds.
Var masked_l2(Graph& g, const std::vector<Var>& preds, const std::vector<const Tensor*>& targets,
              const std::vector<const Tensor*>& masks);

/// Single-tensor convenience form.
Var l2_loss(Graph& g, Var pred, const Tensor& target, const Tensor* mask = nullptr);

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Sigmoid focal loss over dense per-cell logits (one logit channel per
/// level, labels in row-major cell order): positives score
/// -alpha*(1-p)^gamma*log(p), negatives -(1-alpha)*p^gamma*log(1-p), ignore
/// cells are skipped; sum over all levels divided by max(1, #positives).
Var focal_loss(Graph& g, const std::vector<Var>& logits,
               const std::vector<std::vector<CandidateLabel>>& labels, const FocalParams& fp);

/// Dense per-level regression targets from the assigned cells: a 2K x H x W
/// target tensor (stride-normalized offsets at each assigned cell) and a
/// matching 0/1 mask covering visible joints of assigned cells only.
void coarse_target_tensors(const std::vector<CoarseTarget>& targets, int level, int k, int h,
                           int w, Tensor* target, Tensor* mask);

/// Residual targets for the refinement head: at each assigned cell the
/// target is (coarse_target - predicted_coarse), using the prediction as a
/// constant (the refinement loss does not backpropagate into the coarse
/// head through its own target).
void refine_target_tensors(const std::vector<CoarseTarget>& targets, int level, int k,
                           const Tensor& coarse_pred, Tensor* target, Tensor* mask);

struct LossWeights {
  double coarse = 1.0;
  double refine = 1.0;
  double focal = 1.0;
  double heatmap = 1.0;
};

struct LossReport {
  double coarse_l2 = 0.0;
  double refine_l2 = 0.0;
  double focal = 0.0;
  double heatmap_l2 = 0.0;
  double total = 0.0;
  std::array<double, 4> weights{1, 1, 1, 1};
};

/// Everything the four loss terms consume, per pyramid level.
struct LossInputs {
  std::vector<Var> coarse_offsets;
  std::vector<Var> refine_offsets;
  std::vector<Var> score_logits;
  std::vector<Var> heatmaps;  // empty when intermediate supervision is off

  std::vector<Tensor> coarse_targets, coarse_masks;
  std::vector<Tensor> refine_targets, refine_masks;
  std::vector<std::vector<CandidateLabel>> labels;
  std::vector<Tensor> heatmap_targets;

  FocalParams focal_params;
};

/// Weighted sum of the four terms. Each term is also reported separately;
/// an absent heatmap head contributes a zero term.
Var total_loss(Graph& g, const LossInputs& in, const LossWeights& w, LossReport* report = nullptr);

}  // namespace posekit
