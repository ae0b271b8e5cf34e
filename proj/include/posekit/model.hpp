#pragma once

#include <map>
#include <string>
#include <vector>

#include "posekit/nms.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

/// Network hyperparameters plus the decode-time policy.
struct HeadConfig {
  int joints = 17;          // K
  int in_channels = 3;      // image channels
  int channels = 32;        // feature width C
  int level_count = 3;
  std::vector<int> strides = {4, 8, 16};
  int embed_channels = 32;  // output width of the deformable gather
  double score_threshold = 0.05;
  int topk_per_level = 50;
  NmsKind nms_kind = NmsKind::kOks;
  double nms_threshold = 0.3;
  int nms_max_keep = 100;
};

/// Weights as named flat tensors. `param_order` is creation order and fixes
/// both the deterministic initialization sequence and the checkpoint layout.
/// Heads are shared across pyramid levels: there is exactly one tensor per
/// head layer, no per-level copies.
struct Model {
  HeadConfig config;
  std::vector<std::string> param_order;
  std::map<std::string, Tensor> params;

  const Tensor& p(const std::string& name) const;
  Tensor& p(const std::string& name);
  int parameter_count() const;
};

/// Builds the toy network: a stack of stride-2 3x3 conv stages feeding 1x1
/// lateral connections with nearest-neighbour top-down fusion (one pyramid
/// level per stride), plus the shared heads:
///   bypass          3x3 conv -> 1x1 conv to 2K offset channels
///   regression      two 3x3 convs -> deformable gather -> 1x1 conv to 2K
///   classification  two 3x3 convs -> deformable gather -> 1x1 conv to 1
///   heatmap         3x3 conv -> 1x1 conv to K
/// Hidden weights are uniform in +/- sqrt(6 / fan_in) drawn from `seed` in
/// param_order; biases start at zero. The bypass and regression finals are
/// zero-initialized and the classification final bias starts at
/// -log((1 - 0.01) / 0.01) so initial positives are rare.
Model build_model(const HeadConfig& cfg, uint64_t seed);

/// Per-level dense outputs (heatmaps empty unless requested).
struct DensePrediction {
  std::vector<Tensor> coarse_offsets;  // 2K x H_l x W_l
  std::vector<Tensor> refine_offsets;  // 2K x H_l x W_l
  std::vector<Tensor> score_logits;    // 1 x H_l x W_l
  std::vector<Tensor> heatmaps;        // K x H_l x W_l
};

struct ForwardOptions {
  bool with_heatmaps = false;
  // When false the deformable layers treat the bypass offsets as constants,
  // leaving the coarse loss as the offsets' only training signal.
  bool offsets_grad = true;
};

/// Graph handles for the per-level outputs; feed these to the losses.
struct ForwardVars {
  std::vector<Var> coarse_offsets;
  std::vector<Var> refine_offsets;
  std::vector<Var> score_logits;
  std::vector<Var> heatmaps;
};

/// Core wiring over already-registered leaves. `params` must contain a Var
/// per model parameter name. The bypass output is both the coarse offset
/// prediction and the sampling offsets of BOTH branches' deformable layers.
/// Throws std::invalid_argument when H or W is not divisible by the largest
/// stride.
ForwardVars forward_vars(Graph& g, const HeadConfig& cfg, const std::map<std::string, Var>& params,
                         Var image, const ForwardOptions& opt = {});

struct ForwardResult {
  ForwardVars vars;
  std::map<std::string, Var> params;  // leaf handle per weight tensor
};

/// Registers the weights and the image as leaves and runs forward_vars.
ForwardResult forward(Graph& g, const Model& m, const Tensor& image, const ForwardOptions& opt = {});

/// Copies the forward values out of the graph.
DensePrediction dense_values(const Graph& g, const ForwardVars& vars);

/// Convenience for inference: forward pass discarding the graph.
DensePrediction forward_values(const Model& m, const Tensor& image, bool with_heatmaps = false);

/// Pose hypothesis of a single cell: joint_i = cell_center + stride *
/// (coarse_i + refine_i), refine optional. All joints marked visible.
Pose decode_cell(const Tensor& coarse, const Tensor* refine, int row, int col, double stride);

/// Decodes dense predictions into detections: sigmoid scores, keep cells
/// strictly above score_threshold, top-k per level (ties by cell index),
/// joint_i = cell_center + stride * (coarse_i + refine_i), pool levels,
/// greedy NMS per cfg. `coarse_only` drops the refinement term.
std::vector<Detection> decode(const DensePrediction& pred, const HeadConfig& cfg,
                              const OksParams& params, bool coarse_only = false);

/// JSON checkpoint: config + named flat weight arrays with shapes, plus a
/// mandatory version field. Loading validates version, shapes, and config
/// consistency.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace posekit
