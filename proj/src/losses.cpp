#include "posekit/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace posekit {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

HeatmapTarget gaussian_target_maps(const std::vector<Pose>& gt,
                                   const std::vector<std::array<int, 2>>& grids,
                                   const std::vector<int>& strides, double sigma,
                                   bool sigma_in_pixels) {
  if (grids.size() != strides.size())
    throw std::invalid_argument("gaussian_target_maps: grids/strides length mismatch");
  if (sigma <= 0) throw std::invalid_argument("gaussian_target_maps: sigma must be positive");

  int k = 0;
  for (const auto& p : gt) k = std::max(k, static_cast<int>(p.keypoints.size()));

  HeatmapTarget out;
  for (size_t l = 0; l < grids.size(); ++l) {
    const auto [h, w] = grids[l];
    const int stride = strides[l];
    const double sigma_cells = sigma_in_pixels ? sigma / stride : sigma;
    Tensor map({k, h, w}, 0.0);
    for (const auto& pose : gt) {
      for (size_t i = 0; i < pose.keypoints.size(); ++i) {
        const Keypoint& kp = pose.keypoints[i];
        if (kp.v <= 0) continue;
        const double gx = kp.x / stride - 0.5;  // joint position in cell units
        const double gy = kp.y / stride - 0.5;
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            const double dx = c - gx, dy = r - gy;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_cells * sigma_cells));
            double& cell = map.at3(static_cast<int>(i), r, c);
            cell = std::max(cell, v);
          }
        }
      }
    }
    out.maps.push_back(std::move(map));
  }
  return out;
}

Var masked_l2(Graph& g, const std::vector<Var>& preds, const std::vector<const Tensor*>& targets,
              const std::vector<const Tensor*>& masks) {
  if (preds.size() != targets.size() || preds.size() != masks.size())
    throw std::invalid_argument("masked_l2: list length mismatch");

  // Snapshot targets/masks; the custom node only owns constants.
  std::vector<Tensor> t_copy, m_copy;
  std::vector<bool> has_mask;
  double num = 0.0, mask_sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const Tensor& pv = g.value(preds[i]);
    if (!pv.same_shape(*targets[i])) throw std::invalid_argument("masked_l2: shape mismatch");
    if (masks[i] && !pv.same_shape(*masks[i]))
      throw std::invalid_argument("masked_l2: mask shape mismatch");
    t_copy.push_back(*targets[i]);
    has_mask.push_back(masks[i] != nullptr);
    m_copy.push_back(masks[i] ? *masks[i] : Tensor());
    for (size_t j = 0; j < pv.values.size(); ++j) {
      const double m = masks[i] ? masks[i]->values[j] : 1.0;
      const double d = pv.values[j] - targets[i]->values[j];
      num += m * d * d;
      mask_sum += m;
    }
  }
  const double denom = std::max(1.0, mask_sum);

  auto backward = [t_copy = std::move(t_copy), m_copy = std::move(m_copy),
                   has_mask = std::move(has_mask), denom](
                      const Tensor& og, const std::vector<const Tensor*>& ins,
                      const std::vector<Tensor*>& grads) {
    const double scale = 2.0 * og.values[0] / denom;
    for (size_t i = 0; i < ins.size(); ++i) {
      for (size_t j = 0; j < ins[i]->values.size(); ++j) {
        const double m = has_mask[i] ? m_copy[i].values[j] : 1.0;
        grads[i]->values[j] += scale * m * (ins[i]->values[j] - t_copy[i].values[j]);
      }
    }
  };
  return g.custom(Tensor::scalar(num / denom), preds, std::move(backward));
}

Var l2_loss(Graph& g, Var pred, const Tensor& target, const Tensor* mask) {
  return masked_l2(g, {pred}, {&target}, {mask});
}

Var focal_loss(Graph& g, const std::vector<Var>& logits,
               const std::vector<std::vector<CandidateLabel>>& labels, const FocalParams& fp) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("focal_loss: level count mismatch");

  int positives = 0;
  for (const auto& lv : labels)
    for (const auto& lab : lv)
      if (lab.kind == CandidateLabel::Kind::kPositive) ++positives;
  const double denom = std::max(1, positives);

  double sum = 0.0;
  for (size_t l = 0; l < logits.size(); ++l) {
    const Tensor& z = g.value(logits[l]);
    if (z.values.size() != labels[l].size())
      throw std::invalid_argument("focal_loss: logits/labels size mismatch at level " +
                                  std::to_string(l));
    for (size_t j = 0; j < z.values.size(); ++j) {
      const CandidateLabel& lab = labels[l][j];
      if (lab.kind == CandidateLabel::Kind::kIgnore) continue;
      const double zj = z.values[j];
      const double p = sigmoid(zj);
      if (lab.kind == CandidateLabel::Kind::kPositive) {
        const double log_p = -softplus(-zj);
        sum += fp.alpha * std::pow(1.0 - p, fp.gamma) * (-log_p);
      } else {
        const double log_1mp = -softplus(zj);
        sum += (1.0 - fp.alpha) * std::pow(p, fp.gamma) * (-log_1mp);
      }
    }
  }

  auto backward = [labels, fp, denom](const Tensor& og, const std::vector<const Tensor*>& ins,
                                      const std::vector<Tensor*>& grads) {
    const double scale = og.values[0] / denom;
    for (size_t l = 0; l < ins.size(); ++l) {
      for (size_t j = 0; j < ins[l]->values.size(); ++j) {
        const CandidateLabel& lab = labels[l][j];
        if (lab.kind == CandidateLabel::Kind::kIgnore) continue;
        const double zj = ins[l]->values[j];
        const double p = sigmoid(zj);
        double dz;
        if (lab.kind == CandidateLabel::Kind::kPositive) {
          const double log_p = -softplus(-zj);
          dz = fp.alpha * std::pow(1.0 - p, fp.gamma) * (fp.gamma * p * log_p - (1.0 - p));
        } else {
          const double log_1mp = -softplus(zj);
          dz = (1.0 - fp.alpha) * std::pow(p, fp.gamma) * (p - fp.gamma * (1.0 - p) * log_1mp);
        }
        grads[l]->values[j] += scale * dz;
      }
    }
  };
  return g.custom(Tensor::scalar(sum / denom), logits, std::move(backward));
}

void coarse_target_tensors(const std::vector<CoarseTarget>& targets, int level, int k, int h,
                           int w, Tensor* target, Tensor* mask) {
  *target = Tensor({2 * k, h, w}, 0.0);
  *mask = Tensor({2 * k, h, w}, 0.0);
  for (const CoarseTarget& t : targets) {
    if (t.level != level) continue;
    for (int i = 0; i < k; ++i) {
      if (!t.joint_mask[static_cast<size_t>(i)]) continue;
      target->at3(2 * i, t.row, t.col) = t.target_offsets[static_cast<size_t>(2 * i)];
      target->at3(2 * i + 1, t.row, t.col) = t.target_offsets[static_cast<size_t>(2 * i + 1)];
      mask->at3(2 * i, t.row, t.col) = 1.0;
      mask->at3(2 * i + 1, t.row, t.col) = 1.0;
    }
  }
}

void refine_target_tensors(const std::vector<CoarseTarget>& targets, int level, int k,
                           const Tensor& coarse_pred, Tensor* target, Tensor* mask) {
  const int h = coarse_pred.shape[1], w = coarse_pred.shape[2];
  if (coarse_pred.shape[0] != 2 * k)
    throw std::invalid_argument("refine_target_tensors: coarse prediction channel mismatch");
  *target = Tensor({2 * k, h, w}, 0.0);
  *mask = Tensor({2 * k, h, w}, 0.0);
  for (const CoarseTarget& t : targets) {
    if (t.level != level) continue;
    for (int i = 0; i < k; ++i) {
      if (!t.joint_mask[static_cast<size_t>(i)]) continue;
      target->at3(2 * i, t.row, t.col) =
          t.target_offsets[static_cast<size_t>(2 * i)] - coarse_pred.at3(2 * i, t.row, t.col);
      target->at3(2 * i + 1, t.row, t.col) =
          t.target_offsets[static_cast<size_t>(2 * i + 1)] -
          coarse_pred.at3(2 * i + 1, t.row, t.col);
      mask->at3(2 * i, t.row, t.col) = 1.0;
      mask->at3(2 * i + 1, t.row, t.col) = 1.0;
    }
  }
}

Var total_loss(Graph& g, const LossInputs& in, const LossWeights& w, LossReport* report) {
  auto ptrs = [](const std::vector<Tensor>& v) {
    std::vector<const Tensor*> out;
    for (const auto& t : v) out.push_back(&t);
    return out;
  };

  const Var coarse = masked_l2(g, in.coarse_offsets, ptrs(in.coarse_targets),
                               ptrs(in.coarse_masks));
  const Var refine = masked_l2(g, in.refine_offsets, ptrs(in.refine_targets),
                               ptrs(in.refine_masks));
  const Var focal = focal_loss(g, in.score_logits, in.labels, in.focal_params);
  Var heat;
  if (in.heatmaps.empty()) {
    heat = g.leaf(Tensor::scalar(0.0));
  } else {
    std::vector<const Tensor*> no_masks(in.heatmaps.size(), nullptr);
    heat = masked_l2(g, in.heatmaps, ptrs(in.heatmap_targets), no_masks);
  }

  const Var total = g.add(g.add(g.add(g.scale(coarse, w.coarse), g.scale(refine, w.refine)),
                                g.scale(focal, w.focal)),
                          g.scale(heat, w.heatmap));
  if (report) {
    report->coarse_l2 = g.value(coarse).values[0];
    report->refine_l2 = g.value(refine).values[0];
    report->focal = g.value(focal).values[0];
    report->heatmap_l2 = g.value(heat).values[0];
    report->total = g.value(total).values[0];
    report->weights = {w.coarse, w.refine, w.focal, w.heatmap};
  }
  return total;
}

}  // namespace posekit
