#include "posekit/gradsuite.hpp"

#include <array>
#include <chrono>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "posekit/assignment.hpp"
#include "posekit/losses.hpp"
#include "posekit/model.hpp"
#include "posekit/parallel.hpp"
#include "posekit/rng.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

namespace {

constexpr double kEps = 1e-4;

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so central differences never straddle the
// relu kink.
Tensor off_kink_tensor(Rng& rng, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(0.05, 1.0) * (rng.below(2) ? 1.0 : -1.0);
  return t;
}

// Fractional offsets away from cell boundaries so the differences stay
// within one bilinear patch.
Tensor interior_offsets(Rng& rng, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(0.15, 0.45) * (rng.below(2) ? 1.0 : -1.0);
  return t;
}

GradCheckReport conv2d_once(Rng& r, double tol) {
  const int c_in = static_cast<int>(r.range(1, 3));
  const int c_out = static_cast<int>(r.range(1, 3));
  const int h = static_cast<int>(r.range(3, 6));
  const int w = static_cast<int>(r.range(3, 6));
  const int k = r.below(2) ? 3 : 1;
  const int stride = static_cast<int>(r.range(1, 2));
  const int padding = static_cast<int>(r.range(0, 1));
  std::map<std::string, Tensor> inputs;
  inputs["x"] = random_tensor(r, {c_in, h, w});
  inputs["w"] = random_tensor(r, {c_out, c_in, k, k});
  inputs["b"] = random_tensor(r, {c_out});
  return gradcheck(
      inputs,
      [stride, padding](Graph& g, const std::map<std::string, Var>& v) {
        return g.sum(g.conv2d(v.at("x"), v.at("w"), v.at("b"), stride, padding));
      },
      kEps, tol, r.next_u64());
}

GradCheckReport relu_once(Rng& r, double tol) {
  const int c = static_cast<int>(r.range(1, 3));
  const int h = static_cast<int>(r.range(1, 5));
  const int w = static_cast<int>(r.range(1, 5));
  std::map<std::string, Tensor> inputs;
  inputs["x"] = off_kink_tensor(r, {c, h, w});
  const double factor = r.uniform(0.5, 2.0);
  return gradcheck(
      inputs,
      [factor](Graph& g, const std::map<std::string, Var>& v) {
        return g.sum(g.scale(g.relu(v.at("x")), factor));
      },
      kEps, tol, r.next_u64());
}

GradCheckReport bilinear_once(Rng& r, double tol) {
  const int c = static_cast<int>(r.range(1, 3));
  const int h = static_cast<int>(r.range(3, 6));
  const int w = static_cast<int>(r.range(3, 6));
  std::map<std::string, Tensor> inputs;
  inputs["f"] = random_tensor(r, {c, h, w});
  // A strictly interior point with a fractional part away from the lattice.
  Tensor point({2});
  point.values[0] = r.range(0, w - 2) + r.uniform(0.15, 0.85);
  point.values[1] = r.range(0, h - 2) + r.uniform(0.15, 0.85);
  inputs["p"] = point;
  return gradcheck(
      inputs,
      [](Graph& g, const std::map<std::string, Var>& v) {
        return g.sum(g.bilinear_sample(v.at("f"), v.at("p")));
      },
      kEps, tol, r.next_u64());
}

GradCheckReport deformable_once(Rng& r, double tol) {
  const int c_in = static_cast<int>(r.range(1, 3));
  const int c_out = static_cast<int>(r.range(1, 3));
  const int k = static_cast<int>(r.range(1, 3));
  const int h = static_cast<int>(r.range(4, 6));
  const int w = static_cast<int>(r.range(4, 6));
  std::map<std::string, Tensor> inputs;
  inputs["f"] = random_tensor(r, {c_in, h, w});
  inputs["off"] = interior_offsets(r, {2 * k, h, w});
  inputs["w"] = random_tensor(r, {c_out, c_in, k});
  inputs["b"] = random_tensor(r, {c_out});
  return gradcheck(
      inputs,
      [](Graph& g, const std::map<std::string, Var>& v) {
        return g.sum(g.deformable_pose_conv(v.at("f"), v.at("off"), v.at("w"), v.at("b")));
      },
      kEps, tol, r.next_u64());
}

GradCheckReport fusion_once(Rng& r, double tol) {
  const int c = static_cast<int>(r.range(1, 3));
  const int h = static_cast<int>(r.range(2, 4));
  const int w = static_cast<int>(r.range(2, 4));
  std::map<std::string, Tensor> inputs;
  inputs["coarse"] = random_tensor(r, {c, h, w});
  const double factor = r.uniform(0.5, 2.0);
  // Choose the lateral so every pre-relu sum lands away from the kink.
  Tensor fine({c, 2 * h, 2 * w});
  for (int cc = 0; cc < c; ++cc)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) {
        const double target = r.uniform(0.05, 1.0) * (r.below(2) ? 1.0 : -1.0);
        fine.at3(cc, y, x) = target - factor * inputs["coarse"].at3(cc, y / 2, x / 2);
      }
  inputs["fine"] = fine;
  // The top-down fusion step: upsample, add the lateral, rectify.
  return gradcheck(
      inputs,
      [factor](Graph& g, const std::map<std::string, Var>& v) {
        return g.sum(
            g.relu(g.add(g.scale(g.upsample_nearest2(v.at("coarse")), factor), v.at("fine"))));
      },
      kEps, tol, r.next_u64());
}

GradCheckReport losses_once(Rng& r, double tol) {
  const int k = static_cast<int>(r.range(1, 2));
  const std::array<std::array<int, 2>, 2> dims = {{
      {static_cast<int>(r.range(1, 3)), static_cast<int>(r.range(1, 3))},
      {static_cast<int>(r.range(1, 2)), static_cast<int>(r.range(1, 2))},
  }};

  LossInputs base;
  std::vector<Tensor> coarse, refine, logits, heat;
  for (const auto& [h, w] : dims) {
    coarse.push_back(random_tensor(r, {2 * k, h, w}));
    refine.push_back(random_tensor(r, {2 * k, h, w}));
    logits.push_back(random_tensor(r, {1, h, w}, -2, 2));
    heat.push_back(random_tensor(r, {k, h, w}, 0, 1));
    base.coarse_targets.push_back(random_tensor(r, {2 * k, h, w}));
    base.refine_targets.push_back(random_tensor(r, {2 * k, h, w}));
    base.heatmap_targets.push_back(random_tensor(r, {k, h, w}, 0, 1));
    Tensor cm({2 * k, h, w}), rm({2 * k, h, w});
    for (double& v : cm.values) v = r.below(2) ? 1.0 : 0.0;
    for (double& v : rm.values) v = r.below(2) ? 1.0 : 0.0;
    base.coarse_masks.push_back(cm);
    base.refine_masks.push_back(rm);
    std::vector<CandidateLabel> labels(static_cast<size_t>(h) * w);
    for (auto& lab : labels) {
      const auto roll = r.below(3);
      lab.kind = roll == 0   ? CandidateLabel::Kind::kPositive
                 : roll == 1 ? CandidateLabel::Kind::kNegative
                             : CandidateLabel::Kind::kIgnore;
    }
    base.labels.push_back(std::move(labels));
  }
  const LossWeights weights{r.uniform(0.25, 2.0), r.uniform(0.25, 2.0), r.uniform(0.25, 2.0),
                            r.uniform(0.25, 2.0)};

  std::map<std::string, Tensor> inputs;
  for (int l = 0; l < 2; ++l) {
    inputs["c" + std::to_string(l)] = coarse[l];
    inputs["r" + std::to_string(l)] = refine[l];
    inputs["z" + std::to_string(l)] = logits[l];
    inputs["h" + std::to_string(l)] = heat[l];
  }
  return gradcheck(
      inputs,
      [&base, &weights](Graph& g, const std::map<std::string, Var>& v) {
        LossInputs in = base;
        in.coarse_offsets = {v.at("c0"), v.at("c1")};
        in.refine_offsets = {v.at("r0"), v.at("r1")};
        in.score_logits = {v.at("z0"), v.at("z1")};
        in.heatmaps = {v.at("h0"), v.at("h1")};
        return total_loss(g, in, weights, nullptr);
      },
      kEps, tol, r.next_u64());
}

GradCheckReport head_once(Rng& r, double tol) {
  HeadConfig cfg;
  cfg.joints = 2;
  cfg.in_channels = 1;
  cfg.channels = static_cast<int>(r.range(2, 3));
  cfg.embed_channels = cfg.channels;
  cfg.level_count = 2;
  cfg.strides = {4, 8};
  const int side = 16;

  Model m = build_model(cfg, r.next_u64());
  // Zero-initialized finals keep the sampling points exactly on grid
  // corners, where one-sided bilinear derivatives make finite differences
  // meaningless; move every weight off its initialization.
  for (const auto& name : m.param_order)
    for (double& v : m.p(name).values) v += r.uniform(-0.35, 0.35);

  Tensor image({1, side, side});
  for (double& v : image.values) v = r.uniform(0.0, 1.0);

  const int person_count = static_cast<int>(r.range(1, 2));
  std::vector<Pose> gt(person_count);
  for (auto& pose : gt) {
    pose.keypoints.resize(cfg.joints);
    for (auto& kp : pose.keypoints) {
      kp.x = r.uniform(3.0, side - 3.0);
      kp.y = r.uniform(3.0, side - 3.0);
      kp.v = 2;
    }
  }

  LevelConfig lc;
  lc.strides = cfg.strides;
  const std::vector<std::array<int, 2>> grids = {{side / 4, side / 4}, {side / 8, side / 8}};
  const auto targets = assign_coarse_targets(gt, lc, grids, CentroidMode::kKeypoints);

  // Residual targets are frozen at the unperturbed prediction; training
  // treats them as constants, so the check must too.
  const DensePrediction basepred = forward_values(m, image, true);

  LossInputs shared;
  for (int l = 0; l < cfg.level_count; ++l) {
    Tensor ct, cm;
    coarse_target_tensors(targets, l, cfg.joints, grids[l][0], grids[l][1], &ct, &cm);
    Tensor rt, rm;
    refine_target_tensors(targets, l, cfg.joints, basepred.coarse_offsets[l], &rt, &rm);
    shared.coarse_targets.push_back(ct);
    shared.coarse_masks.push_back(cm);
    shared.refine_targets.push_back(rt);
    shared.refine_masks.push_back(rm);
    shared.labels.emplace_back(static_cast<size_t>(grids[l][0]) * grids[l][1]);
  }
  for (const auto& t : targets) {
    auto& lab = shared.labels[t.level][static_cast<size_t>(t.row) * grids[t.level][1] + t.col];
    lab.kind = CandidateLabel::Kind::kPositive;
    lab.gt_index = t.gt_index;
  }
  shared.heatmap_targets = gaussian_target_maps(gt, grids, cfg.strides).maps;

  std::map<std::string, Tensor> inputs;
  for (const auto& name : m.param_order) inputs[name] = m.p(name);
  inputs["image"] = image;

  return gradcheck(
      inputs,
      [&m, &cfg, &shared](Graph& g, const std::map<std::string, Var>& v) {
        std::map<std::string, Var> params;
        for (const auto& name : m.param_order) params[name] = v.at(name);
        ForwardOptions opt;
        opt.with_heatmaps = true;
        const ForwardVars fw = forward_vars(g, cfg, params, v.at("image"), opt);
        LossInputs in = shared;
        in.coarse_offsets = fw.coarse_offsets;
        in.refine_offsets = fw.refine_offsets;
        in.score_logits = fw.score_logits;
        in.heatmaps = fw.heatmaps;
        return total_loss(g, in, LossWeights{}, nullptr);
      },
      // The stack of relus and bilinear patches straddles kinks under
      // isolated probes and carries near-dead coordinates below the FD
      // resolution floor; the guards skip exactly those.
      kEps, tol, r.next_u64(), /*coords_per_tensor=*/4, /*fd_guards=*/true);
}

using OpFn = GradCheckReport (*)(Rng&, double);

GradOpReport run_op(const char* name, OpFn fn, int configs, double tol, Rng& root) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<uint64_t> seeds(static_cast<size_t>(configs));
  for (auto& s : seeds) s = root.next_u64();

  std::vector<double> worst(seeds.size(), 0.0);
  std::vector<char> ok(seeds.size(), 0);
  parallel_for(configs, [&](int i) {
    Rng r(seeds[static_cast<size_t>(i)]);
    const GradCheckReport rep = fn(r, tol);
    double w = 0;
    for (const auto& [input, err] : rep.max_rel_err) w = std::max(w, err);
    worst[static_cast<size_t>(i)] = w;
    ok[static_cast<size_t>(i)] = rep.pass ? 1 : 0;
  });

  GradOpReport out;
  out.op = name;
  out.configs = configs;
  out.pass = true;
  for (size_t i = 0; i < seeds.size(); ++i) {
    out.worst_rel_err = std::max(out.worst_rel_err, worst[i]);
    out.pass = out.pass && ok[i];
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

GradSuiteReport run_gradient_suite(int configs_per_op, double tol, uint64_t seed) {
  if (configs_per_op < 1)
    throw std::invalid_argument("gradient suite: configs_per_op must be >= 1");
  if (tol <= 0) throw std::invalid_argument("gradient suite: tol must be > 0");

  static constexpr std::pair<const char*, OpFn> kOps[] = {
      {"conv2d", conv2d_once},
      {"relu", relu_once},
      {"bilinear_sample", bilinear_once},
      {"deformable_pose_conv", deformable_once},
      {"fusion", fusion_once},
      {"losses", losses_once},
      {"head", head_once},
  };

  const auto start = std::chrono::steady_clock::now();
  Rng root(seed);
  GradSuiteReport report;
  report.pass = true;
  int op_index = 0;
  for (const auto& [name, fn] : kOps) {
    Rng op_rng = root.fork(static_cast<uint64_t>(op_index++));
    report.ops.push_back(run_op(name, fn, configs_per_op, tol, op_rng));
    report.pass = report.pass && report.ops.back().pass;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace posekit
