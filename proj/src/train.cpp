#include "posekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "posekit/rng.hpp"

namespace posekit {

void adam_step(std::map<std::string, Tensor>& weights,
               const std::map<std::string, Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (auto& [name, w] : weights) {
    const auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("adam_step: no gradient for parameter " + name);
    const Tensor& g = git->second;
    if (!w.same_shape(g))
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
    Tensor& m = state.m.try_emplace(name, Tensor(w.shape, 0.0)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(w.shape, 0.0)).first->second;
    if (!m.same_shape(w) || !v.same_shape(w))
      throw std::invalid_argument("adam_step: stale moment shape for " + name);
    for (size_t i = 0; i < w.values.size(); ++i) {
      const double gi = g.values[i];
      m.values[i] = beta1 * m.values[i] + (1.0 - beta1) * gi;
      v.values[i] = beta2 * v.values[i] + (1.0 - beta2) * gi * gi;
      const double mhat = m.values[i] / bc1;
      const double vhat = v.values[i] / bc2;
      w.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

LossInputs build_loss_inputs(Graph& g, const ForwardVars& fw, const Scene& scene,
                             const HeadConfig& model_cfg, const TrainConfig& cfg) {
  const int levels = model_cfg.level_count;
  const int k = model_cfg.joints;
  OksParams oks_params = cfg.oks;
  if (oks_params.sigmas.empty()) oks_params.sigmas = default_sigmas(k);

  std::vector<std::array<int, 2>> grids(levels);
  for (int l = 0; l < levels; ++l) {
    const Tensor& logits = g.value(fw.score_logits[l]);
    grids[l] = {logits.shape[1], logits.shape[2]};
  }

  LevelConfig lc;
  lc.strides = model_cfg.strides;
  lc.base_scale = cfg.base_scale;
  const auto targets =
      assign_coarse_targets(scene.gt_poses, lc, grids, cfg.centroid_mode, nullptr);

  LossInputs in;
  in.coarse_offsets = fw.coarse_offsets;
  in.refine_offsets = fw.refine_offsets;
  in.score_logits = fw.score_logits;
  in.focal_params = cfg.focal;
  for (int l = 0; l < levels; ++l) {
    const Tensor& coarse = g.value(fw.coarse_offsets[l]);
    const Tensor& refine = g.value(fw.refine_offsets[l]);
    Tensor ct, cm, rt, rm;
    coarse_target_tensors(targets, l, k, grids[l][0], grids[l][1], &ct, &cm);
    refine_target_tensors(targets, l, k, coarse, &rt, &rm);
    in.coarse_targets.push_back(std::move(ct));
    in.coarse_masks.push_back(std::move(cm));
    in.refine_targets.push_back(std::move(rt));
    in.refine_masks.push_back(std::move(rm));

    // Score every cell's current pose hypothesis against the ground truth.
    std::vector<Pose> candidates;
    candidates.reserve(static_cast<size_t>(grids[l][0]) * grids[l][1]);
    for (int r = 0; r < grids[l][0]; ++r)
      for (int c = 0; c < grids[l][1]; ++c)
        candidates.push_back(decode_cell(coarse, &refine, r, c, model_cfg.strides[l]));
    in.labels.push_back(label_candidates(candidates, scene.gt_poses, oks_params, cfg.thresholds));
  }
  if (cfg.intermediate_supervision && !fw.heatmaps.empty()) {
    in.heatmaps = fw.heatmaps;
    in.heatmap_targets =
        gaussian_target_maps(scene.gt_poses, grids, model_cfg.strides, cfg.heatmap_sigma).maps;
  }
  return in;
}

TrainResult train(const Model& initial, const std::vector<Scene>& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: no scenes");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  for (size_t i = 0; i < data.size(); ++i)
    if (data[i].channels != initial.config.in_channels)
      throw std::invalid_argument("train: scene " + std::to_string(i) + " has " +
                                  std::to_string(data[i].channels) + " channels, model takes " +
                                  std::to_string(initial.config.in_channels));

  TrainResult result;
  result.model = initial;
  Model& model = result.model;
  AdamState adam;
  Rng shuffle_rng(cfg.seed);
  ForwardOptions fopt;
  fopt.with_heatmaps = cfg.intermediate_supervision;
  fopt.offsets_grad = cfg.offsets_grad;

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    LossReport epoch_sum;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::map<std::string, Tensor> grad_acc;
      for (const auto& name : model.param_order)
        grad_acc.emplace(name, Tensor(model.params.at(name).shape, 0.0));

      for (size_t bi = start; bi < end; ++bi) {
        const Scene& scene = data[order[bi]];
        Graph g;
        const ForwardResult fw = forward(
            g, model, Tensor::from({scene.channels, scene.height, scene.width}, scene.image),
            fopt);
        const LossInputs in = build_loss_inputs(g, fw.vars, scene, model.config, cfg);
        LossReport report;
        const Var loss = total_loss(g, in, cfg.loss_weights, &report);
        if (!std::isfinite(report.total))
          throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / cfg.batch_size) +
                                   ": total loss " + std::to_string(report.total));
        g.backward(loss);
        for (const auto& name : model.param_order) {
          const Tensor& pg = g.grad(fw.params.at(name));
          Tensor& acc = grad_acc.at(name);
          for (size_t vi = 0; vi < acc.values.size(); ++vi) acc.values[vi] += pg.values[vi];
        }
        epoch_sum.coarse_l2 += report.coarse_l2;
        epoch_sum.refine_l2 += report.refine_l2;
        epoch_sum.focal += report.focal;
        epoch_sum.heatmap_l2 += report.heatmap_l2;
        epoch_sum.total += report.total;
      }

      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, acc] : grad_acc)
        for (double& v : acc.values) v *= inv;
      adam_step(model.params, grad_acc, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    }

    const double inv_scenes = 1.0 / static_cast<double>(order.size());
    epoch_sum.coarse_l2 *= inv_scenes;
    epoch_sum.refine_l2 *= inv_scenes;
    epoch_sum.focal *= inv_scenes;
    epoch_sum.heatmap_l2 *= inv_scenes;
    epoch_sum.total *= inv_scenes;
    epoch_sum.weights = {cfg.loss_weights.coarse, cfg.loss_weights.refine, cfg.loss_weights.focal,
                         cfg.loss_weights.heatmap};
    result.history.push_back(epoch_sum);
  }
  return result;
}

void write_loss_csv(const std::vector<LossReport>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,coarse_l2,refine_l2,focal,heatmap_l2,total\n";
  char line[256];
  for (size_t e = 0; e < history.size(); ++e) {
    const LossReport& r = history[e];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e + 1, r.coarse_l2,
                  r.refine_l2, r.focal, r.heatmap_l2, r.total);
    out << line;
  }
  if (!out.good()) throw std::runtime_error("failed writing " + path);
}

}  // namespace posekit
