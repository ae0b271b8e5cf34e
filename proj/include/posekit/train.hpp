#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "posekit/assignment.hpp"
#include "posekit/losses.hpp"
#include "posekit/model.hpp"
#include "posekit/pose.hpp"

namespace posekit {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 4;  // scenes per weight update; gradients are averaged
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights loss_weights;
  bool offsets_grad = true;               // backprop through the sampling points
  bool intermediate_supervision = true;   // heatmap branch + its loss term
  CentroidMode centroid_mode = CentroidMode::kKeypoints;
  LabelThresholds thresholds;
  FocalParams focal;
  double heatmap_sigma = 2.0;  // feature cells
  double base_scale = 32.0;    // level-assignment size anchor, pixels
  OksParams oks;               // empty sigmas -> default_sigmas(K)
  uint64_t seed = 0;
};

/// First and second Adam moments per parameter plus the shared step counter.
struct AdamState {
  std::map<std::string, Tensor> m, v;
  int64_t t = 0;
};

/// Standard bias-corrected Adam update, in place. Moments are created on
/// first use; throws std::invalid_argument on any weight/gradient shape
/// mismatch.
void adam_step(std::map<std::string, Tensor>& weights,
               const std::map<std::string, Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct TrainResult {
  Model model;
  std::vector<LossReport> history;  // one averaged report per epoch
};

/// Runs the full loop: per batch, forward -> coarse-target assignment +
/// OKS-based candidate labeling -> total_loss -> backward -> adam_step.
/// Scene order is reshuffled each epoch from cfg.seed; everything is
/// deterministic. Throws std::invalid_argument on empty data or an image
/// shape the model cannot take, and std::runtime_error naming the epoch and
/// batch if the total loss stops being finite.
TrainResult train(const Model& initial, const std::vector<Scene>& data, const TrainConfig& cfg);

/// Builds the per-scene loss inputs (targets, masks, labels) the loop uses;
/// exposed so evaluation code can compute a loss on held-out scenes.
LossInputs build_loss_inputs(Graph& g, const ForwardVars& fw, const Scene& scene,
                             const HeadConfig& model_cfg, const TrainConfig& cfg);

/// Loss history as CSV with the frozen column order:
/// epoch,coarse_l2,refine_l2,focal,heatmap_l2,total
void write_loss_csv(const std::vector<LossReport>& history, const std::string& path);

}  // namespace posekit
