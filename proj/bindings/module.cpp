// python surface: thin converters over the C++ core. Poses cross the
// boundary as flat COCO-style [x1, y1, v1, x2, y2, v2, ...] lists; images
// come back as C x H x W numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posekit/config.hpp"
#include "posekit/eval.hpp"
#include "posekit/gradsuite.hpp"
#include "posekit/model.hpp"
#include "posekit/nms.hpp"
#include "posekit/oks.hpp"
#include "posekit/synth.hpp"
#include "posekit/train.hpp"

namespace py = pybind11;

namespace {

using FlatPose = std::vector<double>;
using ScoredPose = std::pair<FlatPose, double>;

posekit::Pose pose_from_flat(const FlatPose& flat) {
  if (flat.size() % 3 != 0)
    throw std::invalid_argument("flat pose length must be a multiple of 3 (x, y, v triples)");
  posekit::Pose p;
  for (std::size_t i = 0; i < flat.size(); i += 3)
    p.keypoints.push_back({flat[i], flat[i + 1], static_cast<int>(flat[i + 2])});
  return p;
}

FlatPose flat_from_pose(const posekit::Pose& p) {
  FlatPose flat;
  for (const posekit::Keypoint& k : p.keypoints) {
    flat.push_back(k.x);
    flat.push_back(k.y);
    flat.push_back(static_cast<double>(k.v));
  }
  return flat;
}

posekit::OksParams make_params(std::vector<double> sigmas, double scale_floor, int k) {
  posekit::OksParams params;
  params.sigmas = sigmas.empty() ? posekit::default_sigmas(k) : std::move(sigmas);
  params.scale_floor = scale_floor;
  return params;
}

posekit::RunConfig config_from_text(const std::string& text) {
  return text.empty() ? posekit::RunConfig{} : posekit::parse_run_config(text);
}

std::vector<posekit::Scene> scenes_from_config(const posekit::RunConfig& cfg) {
  if (!cfg.data.dataset_dir.empty()) return posekit::read_dataset(cfg.data.dataset_dir);
  return posekit::synth_dataset(cfg.synth);
}

posekit::OksParams params_from_config(const posekit::RunConfig& cfg) {
  posekit::OksParams params = cfg.oks;
  if (params.sigmas.empty()) params.sigmas = posekit::default_sigmas(cfg.model.joints);
  return params;
}

double oks_py(const FlatPose& pred, const FlatPose& ref, std::vector<double> sigmas,
              double scale_floor) {
  const posekit::Pose r = pose_from_flat(ref);
  return posekit::oks(pose_from_flat(pred), r,
                      make_params(std::move(sigmas), scale_floor,
                                  static_cast<int>(r.keypoints.size())));
}

std::vector<int> greedy_nms_py(const std::vector<FlatPose>& poses,
                               const std::vector<double>& scores, const std::string& kind,
                               double threshold, int max_keep, std::vector<double> sigmas,
                               double scale_floor) {
  if (poses.size() != scores.size())
    throw std::invalid_argument("poses and scores must have the same length");
  if (kind != "oks" && kind != "iou") throw std::invalid_argument("kind must be 'oks' or 'iou'");
  std::vector<posekit::Detection> dets;
  int k = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    posekit::Detection d;
    d.pose = pose_from_flat(poses[i]);
    d.score = scores[i];
    d.pose.score = scores[i];
    k = static_cast<int>(d.pose.keypoints.size());
    dets.push_back(std::move(d));
  }
  return posekit::greedy_nms_indices(dets,
                                     kind == "oks" ? posekit::NmsKind::kOks
                                                   : posekit::NmsKind::kIou,
                                     threshold, max_keep,
                                     make_params(std::move(sigmas), scale_floor, k));
}

double oks_ap_py(const std::vector<std::vector<ScoredPose>>& dets,
                 const std::vector<std::vector<FlatPose>>& gts, double threshold,
                 std::vector<double> sigmas, double scale_floor) {
  std::vector<std::vector<posekit::Detection>> det_scenes;
  std::vector<std::vector<posekit::Pose>> gt_scenes;
  int k = 1;
  for (const auto& scene : dets) {
    std::vector<posekit::Detection> ds;
    for (const auto& [flat, score] : scene) {
      posekit::Detection d;
      d.pose = pose_from_flat(flat);
      d.score = score;
      d.pose.score = score;
      ds.push_back(std::move(d));
    }
    det_scenes.push_back(std::move(ds));
  }
  for (const auto& scene : gts) {
    std::vector<posekit::Pose> ps;
    for (const auto& flat : scene) {
      ps.push_back(pose_from_flat(flat));
      k = static_cast<int>(ps.back().keypoints.size());
    }
    gt_scenes.push_back(std::move(ps));
  }
  return posekit::oks_ap(det_scenes, gt_scenes, threshold,
                         make_params(std::move(sigmas), scale_floor, k));
}

py::list synth_scenes_py(const std::string& config_text) {
  const posekit::RunConfig cfg = config_from_text(config_text);
  py::list out;
  for (const posekit::Scene& s : posekit::synth_dataset(cfg.synth)) {
    py::dict d;
    py::array_t<double> image({s.channels, s.height, s.width});
    std::copy(s.image.begin(), s.image.end(), image.mutable_data());
    d["image"] = std::move(image);
    py::list poses;
    for (const posekit::Pose& p : s.gt_poses) poses.append(flat_from_pose(p));
    d["gt_poses"] = std::move(poses);
    d["crowd_index"] = s.crowd_index;
    out.append(std::move(d));
  }
  return out;
}

py::list train_py(const std::string& config_text, const std::string& checkpoint_path) {
  const posekit::RunConfig cfg = config_from_text(config_text);
  const std::vector<posekit::Scene> scenes = scenes_from_config(cfg);
  const posekit::Model initial = posekit::build_model(cfg.model, cfg.train.seed);
  const posekit::TrainResult result = posekit::train(initial, scenes, cfg.train);
  posekit::save_checkpoint(result.model, checkpoint_path);
  py::list history;
  for (const posekit::LossReport& r : result.history) {
    py::dict row;
    row["coarse_l2"] = r.coarse_l2;
    row["refine_l2"] = r.refine_l2;
    row["focal"] = r.focal;
    row["heatmap_l2"] = r.heatmap_l2;
    row["total"] = r.total;
    history.append(std::move(row));
  }
  return history;
}

py::list detect_py(const std::string& checkpoint_path, const std::string& config_text) {
  const posekit::RunConfig cfg = config_from_text(config_text);
  const posekit::Model model = posekit::load_checkpoint(checkpoint_path);
  const posekit::OksParams params = params_from_config(cfg);
  py::list out;
  for (const posekit::Scene& s : scenes_from_config(cfg)) {
    const posekit::Tensor image = posekit::Tensor::from({s.channels, s.height, s.width}, s.image);
    py::list dets;
    for (const posekit::Detection& d :
         posekit::decode(posekit::forward_values(model, image), cfg.model, params)) {
      py::dict row;
      row["keypoints"] = flat_from_pose(d.pose);
      row["score"] = d.score;
      row["level"] = d.level;
      dets.append(std::move(row));
    }
    out.append(std::move(dets));
  }
  return out;
}

py::dict refinement_gain_py(const std::string& checkpoint_path, const std::string& config_text) {
  const posekit::RunConfig cfg = config_from_text(config_text);
  const posekit::RefinementGain gain =
      posekit::refinement_gain(posekit::load_checkpoint(checkpoint_path),
                               scenes_from_config(cfg), params_from_config(cfg));
  py::dict out;
  out["mean_oks_coarse"] = gain.mean_oks_coarse;
  out["mean_oks_refined"] = gain.mean_oks_refined;
  return out;
}

py::dict gradient_suite_py(int configs_per_op, double tol, std::uint64_t seed) {
  const posekit::GradSuiteReport report = posekit::run_gradient_suite(configs_per_op, tol, seed);
  py::dict out;
  out["pass"] = report.pass;
  out["seconds"] = report.seconds;
  py::list ops;
  for (const posekit::GradOpReport& op : report.ops) {
    py::dict row;
    row["op"] = op.op;
    row["configs"] = op.configs;
    row["worst_rel_err"] = op.worst_rel_err;
    row["seconds"] = op.seconds;
    row["pass"] = op.pass;
    ops.append(std::move(row));
  }
  out["ops"] = std::move(ops);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "single-stage multi-person pose estimation, desk scale";
  m.attr("__version__") = "0.1.0";

  m.def("default_sigmas", &posekit::default_sigmas, py::arg("k"),
        "per-joint OKS falloff constants (the COCO table when k = 17)");
  m.def("oks", &oks_py, py::arg("pred"), py::arg("ref"), py::arg("sigmas") = std::vector<double>{},
        py::arg("scale_floor") = 1.0,
        "object keypoint similarity between flat [x, y, v, ...] poses");
  m.def("greedy_nms", &greedy_nms_py, py::arg("poses"), py::arg("scores"), py::arg("kind") = "oks",
        py::arg("threshold") = 0.3, py::arg("max_keep") = 100,
        py::arg("sigmas") = std::vector<double>{}, py::arg("scale_floor") = 1.0,
        "kept indices after greedy suppression ('oks' or 'iou')");
  m.def("oks_ap", &oks_ap_py, py::arg("detections"), py::arg("ground_truths"),
        py::arg("threshold"), py::arg("sigmas") = std::vector<double>{},
        py::arg("scale_floor") = 1.0,
        "average precision at one OKS threshold; detections are per-scene lists of "
        "(flat_pose, score) pairs");
  m.def("synth_scenes", &synth_scenes_py, py::arg("config") = std::string{},
        "synthetic scenes from a run-config document: dicts with a C x H x W image "
        "array, flat gt_poses, and crowd_index");
  m.def("train", &train_py, py::arg("config"), py::arg("checkpoint"),
        "train on the config's scenes, save a checkpoint, return the per-epoch loss history");
  m.def("detect", &detect_py, py::arg("checkpoint"), py::arg("config") = std::string{},
        "run a checkpoint over the config's scenes; per-scene lists of "
        "{keypoints, score, level} dicts");
  m.def("refinement_gain", &refinement_gain_py, py::arg("checkpoint"),
        py::arg("config") = std::string{},
        "mean best OKS per ground truth with and without the refinement term");
  m.def("run_gradient_suite", &gradient_suite_py, py::arg("configs_per_op") = 50,
        py::arg("tol") = 1e-4, py::arg("seed") = 0,
        "finite-difference audit of every differentiable operation");
  m.def("parse_config", [](const std::string& text) {
    return posekit::serialize_run_config(posekit::parse_run_config(text));
  }, py::arg("text"), "validate a run-config document and return its canonical form");
  m.def("config_hash", [](const std::string& text) {
    return posekit::run_config_hash(config_from_text(text));
  }, py::arg("text"), "16-hex-digit hash of the canonical run config");
}
