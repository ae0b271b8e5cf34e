#include "posekit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "posekit/rng.hpp"

namespace posekit {

namespace {

void validate_config(const HeadConfig& cfg) {
  if (cfg.joints < 1) throw std::invalid_argument("HeadConfig: joints must be >= 1");
  if (cfg.in_channels < 1) throw std::invalid_argument("HeadConfig: in_channels must be >= 1");
  if (cfg.channels < 1) throw std::invalid_argument("HeadConfig: channels must be >= 1");
  if (cfg.embed_channels < 1) throw std::invalid_argument("HeadConfig: embed_channels must be >= 1");
  if (cfg.level_count < 1) throw std::invalid_argument("HeadConfig: level_count must be >= 1");
  if (static_cast<int>(cfg.strides.size()) != cfg.level_count)
    throw std::invalid_argument("HeadConfig: strides must have level_count entries");
  for (int l = 0; l < cfg.level_count; ++l)
    if (cfg.strides[l] != (4 << l))
      throw std::invalid_argument("HeadConfig: the backbone produces strides 4, 8, 16, ...; got " +
                                  std::to_string(cfg.strides[l]) + " at level " + std::to_string(l));
}

enum class Init { kUniform, kZero };

struct Builder {
  Model m;
  Rng rng;

  Builder(const HeadConfig& cfg, uint64_t seed) : rng(seed) { m.config = cfg; }

  void add(const std::string& name, std::vector<int> shape, Init init, int fan_in,
           double bias_value = 0.0) {
    Tensor t(std::move(shape), bias_value);
    if (init == Init::kUniform) {
      const double bound = std::sqrt(6.0 / fan_in);
      for (double& v : t.values) v = rng.uniform(-bound, bound);
    }
    m.param_order.push_back(name);
    m.params.emplace(name, std::move(t));
  }

  void conv(const std::string& name, int c_out, int c_in, int k, Init init,
            double bias_value = 0.0) {
    add(name + ".w", {c_out, c_in, k, k}, init, c_in * k * k);
    add(name + ".b", {c_out}, Init::kZero, 0, init == Init::kZero ? 0.0 : bias_value);
  }

  void embed(const std::string& name, int c_out, int c_in, int k) {
    add(name + ".w", {c_out, c_in, k}, Init::kUniform, c_in * k);
    add(name + ".b", {c_out}, Init::kZero, 0);
  }
};

}  // namespace

const Tensor& Model::p(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("no model parameter named " + name);
  return it->second;
}

Tensor& Model::p(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Model*>(this)->p(name));
}

int Model::parameter_count() const {
  int n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

Model build_model(const HeadConfig& cfg, uint64_t seed) {
  validate_config(cfg);
  Builder b(cfg, seed);
  const int c = cfg.channels;
  const int k2 = 2 * cfg.joints;

  // Stage 1 halves the image; stages 2.. produce the pyramid strides.
  b.conv("backbone.stage1", c, cfg.in_channels, 3, Init::kUniform);
  for (int s = 2; s <= cfg.level_count + 1; ++s)
    b.conv("backbone.stage" + std::to_string(s), c, c, 3, Init::kUniform);
  for (int l = 0; l < cfg.level_count; ++l)
    b.conv("fpn.lateral" + std::to_string(l), c, c, 1, Init::kUniform);

  b.conv("bypass.conv", c, c, 3, Init::kUniform);
  b.conv("bypass.out", k2, c, 1, Init::kZero);

  b.conv("reg.conv1", c, c, 3, Init::kUniform);
  b.conv("reg.conv2", c, c, 3, Init::kUniform);
  b.embed("reg.embed", cfg.embed_channels, c, cfg.joints);
  b.conv("reg.out", k2, cfg.embed_channels, 1, Init::kZero);

  b.conv("cls.conv1", c, c, 3, Init::kUniform);
  b.conv("cls.conv2", c, c, 3, Init::kUniform);
  b.embed("cls.embed", cfg.embed_channels, c, cfg.joints);
  // Start scores near 0.01 probability so the focal loss is not swamped by
  // a sea of confident false positives.
  b.conv("cls.out", 1, cfg.embed_channels, 1, Init::kUniform, -std::log((1.0 - 0.01) / 0.01));

  b.conv("heat.conv", c, c, 3, Init::kUniform);
  b.conv("heat.out", cfg.joints, c, 1, Init::kUniform);
  return std::move(b.m);
}

ForwardVars forward_vars(Graph& g, const HeadConfig& cfg, const std::map<std::string, Var>& params,
                         Var image, const ForwardOptions& opt) {
  validate_config(cfg);
  const Tensor& img = g.value(image);
  if (img.shape.size() != 3 || img.shape[0] != cfg.in_channels)
    throw std::invalid_argument("forward: image must be in_channels x H x W");
  const int max_stride = cfg.strides.back();
  if (img.shape[1] % max_stride != 0 || img.shape[2] % max_stride != 0)
    throw std::invalid_argument("forward: image size " + std::to_string(img.shape[1]) + "x" +
                                std::to_string(img.shape[2]) + " not divisible by stride " +
                                std::to_string(max_stride));
  const auto P = [&](const std::string& n) {
    const auto it = params.find(n);
    if (it == params.end()) throw std::out_of_range("forward: missing parameter " + n);
    return it->second;
  };

  // Backbone: stride-2 stages, keeping the outputs from stride 4 onward.
  Var x = image;
  std::vector<Var> stages;
  for (int s = 1; s <= cfg.level_count + 1; ++s) {
    const std::string n = "backbone.stage" + std::to_string(s);
    x = g.relu(g.conv2d(x, P(n + ".w"), P(n + ".b"), 2, 1));
    if (s >= 2) stages.push_back(x);
  }

  // Lateral projections + nearest-neighbour top-down fusion.
  std::vector<Var> pyramid(cfg.level_count);
  for (int l = cfg.level_count - 1; l >= 0; --l) {
    const std::string n = "fpn.lateral" + std::to_string(l);
    Var lat = g.conv2d(stages[l], P(n + ".w"), P(n + ".b"), 1, 0);
    pyramid[l] = l == cfg.level_count - 1 ? lat : g.add(lat, g.upsample_nearest2(pyramid[l + 1]));
  }

  ForwardVars out;
  for (int l = 0; l < cfg.level_count; ++l) {
    const Var f = pyramid[l];

    Var by = g.relu(g.conv2d(f, P("bypass.conv.w"), P("bypass.conv.b"), 1, 1));
    const Var coarse = g.conv2d(by, P("bypass.out.w"), P("bypass.out.b"), 1, 0);

    Var r = g.relu(g.conv2d(f, P("reg.conv1.w"), P("reg.conv1.b"), 1, 1));
    r = g.relu(g.conv2d(r, P("reg.conv2.w"), P("reg.conv2.b"), 1, 1));
    r = g.relu(g.deformable_pose_conv(r, coarse, P("reg.embed.w"), P("reg.embed.b"),
                                      opt.offsets_grad));
    const Var refine = g.conv2d(r, P("reg.out.w"), P("reg.out.b"), 1, 0);

    Var s = g.relu(g.conv2d(f, P("cls.conv1.w"), P("cls.conv1.b"), 1, 1));
    s = g.relu(g.conv2d(s, P("cls.conv2.w"), P("cls.conv2.b"), 1, 1));
    s = g.relu(g.deformable_pose_conv(s, coarse, P("cls.embed.w"), P("cls.embed.b"),
                                      opt.offsets_grad));
    const Var logits = g.conv2d(s, P("cls.out.w"), P("cls.out.b"), 1, 0);

    out.coarse_offsets.push_back(coarse);
    out.refine_offsets.push_back(refine);
    out.score_logits.push_back(logits);
    if (opt.with_heatmaps) {
      Var h = g.relu(g.conv2d(f, P("heat.conv.w"), P("heat.conv.b"), 1, 1));
      out.heatmaps.push_back(g.conv2d(h, P("heat.out.w"), P("heat.out.b"), 1, 0));
    }
  }
  return out;
}

ForwardResult forward(Graph& g, const Model& m, const Tensor& image, const ForwardOptions& opt) {
  ForwardResult r;
  for (const auto& name : m.param_order) r.params[name] = g.leaf(m.params.at(name));
  r.vars = forward_vars(g, m.config, r.params, g.leaf(image), opt);
  return r;
}

DensePrediction dense_values(const Graph& g, const ForwardVars& vars) {
  DensePrediction p;
  for (Var v : vars.coarse_offsets) p.coarse_offsets.push_back(g.value(v));
  for (Var v : vars.refine_offsets) p.refine_offsets.push_back(g.value(v));
  for (Var v : vars.score_logits) p.score_logits.push_back(g.value(v));
  for (Var v : vars.heatmaps) p.heatmaps.push_back(g.value(v));
  return p;
}

DensePrediction forward_values(const Model& m, const Tensor& image, bool with_heatmaps) {
  Graph g;
  ForwardOptions opt;
  opt.with_heatmaps = with_heatmaps;
  return dense_values(g, forward(g, m, image, opt).vars);
}

Pose decode_cell(const Tensor& coarse, const Tensor* refine, int row, int col, double stride) {
  const int joints = coarse.shape[0] / 2;
  Pose pose;
  pose.keypoints.resize(joints);
  for (int j = 0; j < joints; ++j) {
    double dx = coarse.at3(2 * j, row, col);
    double dy = coarse.at3(2 * j + 1, row, col);
    if (refine) {
      dx += refine->at3(2 * j, row, col);
      dy += refine->at3(2 * j + 1, row, col);
    }
    pose.keypoints[j] = {(col + 0.5) * stride + stride * dx, (row + 0.5) * stride + stride * dy,
                         2};
  }
  return pose;
}

std::vector<Detection> decode(const DensePrediction& pred, const HeadConfig& cfg,
                              const OksParams& params, bool coarse_only) {
  if (pred.score_logits.size() != static_cast<size_t>(cfg.level_count) ||
      pred.coarse_offsets.size() != pred.score_logits.size() ||
      pred.refine_offsets.size() != pred.score_logits.size())
    throw std::invalid_argument("decode: prediction level count does not match config");

  std::vector<Detection> pool;
  for (int l = 0; l < cfg.level_count; ++l) {
    const Tensor& logits = pred.score_logits[l];
    const Tensor& coarse = pred.coarse_offsets[l];
    const Tensor& refine = pred.refine_offsets[l];
    const int h = logits.shape[1];
    const int w = logits.shape[2];
    const double stride = cfg.strides[l];

    std::vector<std::pair<double, int>> cells;  // (score, cell index)
    for (int i = 0; i < h * w; ++i) {
      const double score = 1.0 / (1.0 + std::exp(-logits.values[static_cast<size_t>(i)]));
      if (score > cfg.score_threshold) cells.emplace_back(score, i);
    }
    std::stable_sort(cells.begin(), cells.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    if (static_cast<int>(cells.size()) > cfg.topk_per_level) cells.resize(cfg.topk_per_level);

    for (const auto& [score, idx] : cells) {
      Detection det;
      det.score = score;
      det.level = l;
      det.pose = decode_cell(coarse, coarse_only ? nullptr : &refine, idx / w, idx % w, stride);
      det.pose.score = score;
      pool.push_back(std::move(det));
    }
  }
  return greedy_nms(pool, cfg.nms_kind, cfg.nms_threshold, cfg.nms_max_keep, params);
}

void save_checkpoint(const Model& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  const HeadConfig& c = m.config;
  j["config"] = {{"joints", c.joints},
                 {"in_channels", c.in_channels},
                 {"channels", c.channels},
                 {"level_count", c.level_count},
                 {"strides", c.strides},
                 {"embed_channels", c.embed_channels},
                 {"score_threshold", c.score_threshold},
                 {"topk_per_level", c.topk_per_level},
                 {"nms_kind", c.nms_kind == NmsKind::kOks ? "oks" : "iou"},
                 {"nms_threshold", c.nms_threshold},
                 {"nms_max_keep", c.nms_max_keep}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& name : m.param_order) {
    const Tensor& t = m.params.at(name);
    params.push_back({{"name", name}, {"shape", t.shape}, {"values", t.values}});
  }
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file " + path);
  out << j.dump();
  if (!out.good()) throw std::runtime_error("failed writing checkpoint file " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("version")) throw std::runtime_error("checkpoint missing version field");
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version " + j.at("version").dump());

  Model m;
  const auto& c = j.at("config");
  m.config.joints = c.at("joints").get<int>();
  m.config.in_channels = c.at("in_channels").get<int>();
  m.config.channels = c.at("channels").get<int>();
  m.config.level_count = c.at("level_count").get<int>();
  m.config.strides = c.at("strides").get<std::vector<int>>();
  m.config.embed_channels = c.at("embed_channels").get<int>();
  m.config.score_threshold = c.at("score_threshold").get<double>();
  m.config.topk_per_level = c.at("topk_per_level").get<int>();
  const std::string kind = c.at("nms_kind").get<std::string>();
  if (kind != "oks" && kind != "iou")
    throw std::runtime_error("checkpoint has unknown nms_kind \"" + kind + "\"");
  m.config.nms_kind = kind == "oks" ? NmsKind::kOks : NmsKind::kIou;
  m.config.nms_threshold = c.at("nms_threshold").get<double>();
  m.config.nms_max_keep = c.at("nms_max_keep").get<int>();
  validate_config(m.config);

  for (const auto& entry : j.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<int>>();
    t.values = entry.at("values").get<std::vector<double>>();
    int expected = 1;
    for (int d : t.shape) expected *= d;
    if (expected != static_cast<int>(t.values.size()))
      throw std::runtime_error("checkpoint parameter " + name + " has " +
                               std::to_string(t.values.size()) + " values but shape wants " +
                               std::to_string(expected));
    if (m.params.count(name))
      throw std::runtime_error("checkpoint parameter " + name + " appears twice");
    m.param_order.push_back(name);
    m.params.emplace(name, std::move(t));
  }
  return m;
}

}  // namespace posekit
