#include "posekit/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "posekit/nms.hpp"
#include "posekit/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "the raw image blob format is little-endian");

namespace posekit {

namespace {

void validate(const SynthConfig& cfg) {
  if (cfg.joints < 1) throw std::invalid_argument("synth: joints must be >= 1");
  if (cfg.height < 8 || cfg.width < 8) throw std::invalid_argument("synth: image too small");
  if (cfg.min_persons < 1 || cfg.max_persons < cfg.min_persons)
    throw std::invalid_argument("synth: persons range is empty");
  if (cfg.min_scale <= 0 || cfg.max_scale < cfg.min_scale)
    throw std::invalid_argument("synth: scale range is empty");
  if (cfg.max_rotation < cfg.min_rotation)
    throw std::invalid_argument("synth: rotation range is empty");
  if (cfg.overlap_target < 0 || cfg.overlap_target >= 1)
    throw std::invalid_argument("synth: overlap target must be in [0, 1)");
  if (cfg.count < 1) throw std::invalid_argument("synth: count must be >= 1");
  // The template spans the unit square around its center, so a rotated
  // instance stays within 0.71 * scale of its center.
  if (cfg.width <= 1.42 * cfg.max_scale || cfg.height <= 1.42 * cfg.max_scale)
    throw std::invalid_argument("synth: max_scale too large for the image size");
  if (cfg.blob_sigma <= 0) throw std::invalid_argument("synth: blob_sigma must be positive");
}

Pose place_person(Rng& rng, const SkeletonSpec& spec, const SynthConfig& cfg,
                  const std::vector<Pose>& placed) {
  const double s = rng.uniform(cfg.min_scale, cfg.max_scale);
  const double theta = rng.uniform(cfg.min_rotation, cfg.max_rotation);
  const double margin = 0.71 * s;
  double cx, cy;
  if (!placed.empty() && cfg.overlap_target > 0) {
    // Bias the center toward an existing person so crowded targets are
    // reachable by rejection sampling.
    const Pose& anchor = placed[rng.below(placed.size())];
    const auto abox = keypoint_bbox(anchor);
    const double ax = 0.5 * (abox.x_min + abox.x_max);
    const double ay = 0.5 * (abox.y_min + abox.y_max);
    cx = std::clamp(ax + rng.uniform(-1.2 * s, 1.2 * s), margin, cfg.width - margin);
    cy = std::clamp(ay + rng.uniform(-1.2 * s, 1.2 * s), margin, cfg.height - margin);
  } else {
    cx = rng.uniform(margin, cfg.width - margin);
    cy = rng.uniform(margin, cfg.height - margin);
  }
  const double c = std::cos(theta), sn = std::sin(theta);
  Pose pose;
  pose.keypoints.resize(spec.template_points.size());
  for (size_t j = 0; j < spec.template_points.size(); ++j) {
    const double tx = spec.template_points[j][0] - 0.5;
    const double ty = spec.template_points[j][1] - 0.5;
    pose.keypoints[j] = {cx + s * (c * tx - sn * ty), cy + s * (sn * tx + c * ty), 2};
  }
  return pose;
}

void render(Scene& scene, double sigma) {
  const int h = scene.height, w = scene.width;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  for (const Pose& pose : scene.gt_poses)
    for (size_t j = 0; j < pose.keypoints.size(); ++j) {
      const Keypoint& kp = pose.keypoints[j];
      if (kp.v == 0) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(kp.x - reach)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(kp.x + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(kp.y - reach)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(kp.y + reach)));
      for (int py = y0; py <= y1; ++py)
        for (int px = x0; px <= x1; ++px) {
          const double dx = px + 0.5 - kp.x;
          const double dy = py + 0.5 - kp.y;
          const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          double& cell = scene.image[(j * h + py) * static_cast<size_t>(w) + px];
          cell = std::max(cell, v);
        }
    }
}

}  // namespace

double mean_pairwise_box_iou(const std::vector<Pose>& poses) {
  if (poses.size() < 2) return 0.0;
  double sum = 0.0;
  int pairs = 0;
  for (size_t a = 0; a < poses.size(); ++a)
    for (size_t b = a + 1; b < poses.size(); ++b) {
      sum += box_iou(keypoint_bbox(poses[a]), keypoint_bbox(poses[b]));
      ++pairs;
    }
  return sum / pairs;
}

std::vector<Scene> synth_dataset(const SynthConfig& cfg) {
  validate(cfg);
  const SkeletonSpec spec = default_synthetic_skeleton(cfg.joints);
  std::vector<Scene> scenes;
  scenes.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(i) + 1)));
    std::vector<Pose> poses;
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      poses.clear();
      const int persons = static_cast<int>(rng.range(cfg.min_persons, cfg.max_persons));
      for (int p = 0; p < persons; ++p) poses.push_back(place_person(rng, spec, cfg, poses));
      accepted = cfg.overlap_target == 0.0 ||
                 std::abs(mean_pairwise_box_iou(poses) - cfg.overlap_target) <= 0.05;
    }
    if (!accepted)
      throw std::runtime_error("synth: scene " + std::to_string(i) +
                               " could not reach overlap target " +
                               std::to_string(cfg.overlap_target) + " within 1000 attempts");
    Scene scene;
    scene.channels = cfg.joints;
    scene.height = cfg.height;
    scene.width = cfg.width;
    scene.image.assign(static_cast<size_t>(cfg.joints) * cfg.height * cfg.width, 0.0);
    scene.gt_poses = std::move(poses);
    scene.crowd_index = mean_pairwise_box_iou(scene.gt_poses);
    render(scene, cfg.blob_sigma);
    for (const Pose& p : scene.gt_poses) validate_pose(p, spec, cfg.width, cfg.height);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void write_dataset(const std::vector<Scene>& scenes, const std::string& dir) {
  if (scenes.empty()) throw std::invalid_argument("write_dataset: no scenes");
  std::filesystem::create_directories(dir);
  const Scene& first = scenes.front();
  for (const Scene& s : scenes)
    if (s.channels != first.channels || s.height != first.height || s.width != first.width)
      throw std::invalid_argument("write_dataset: scenes must share one image shape");

  nlohmann::json j;
  j["version"] = 1;
  j["channels"] = first.channels;
  j["height"] = first.height;
  j["width"] = first.width;
  j["count"] = scenes.size();
  j["blob_file"] = "images.f32";
  nlohmann::json scene_list = nlohmann::json::array();
  for (const Scene& s : scenes) {
    nlohmann::json poses = nlohmann::json::array();
    for (const Pose& p : s.gt_poses) {
      nlohmann::json flat = nlohmann::json::array();
      for (const Keypoint& kp : p.keypoints) {
        flat.push_back(kp.x);
        flat.push_back(kp.y);
        flat.push_back(kp.v);
      }
      poses.push_back({{"keypoints", std::move(flat)}});
    }
    scene_list.push_back({{"crowd_index", s.crowd_index}, {"poses", std::move(poses)}});
  }
  j["scenes"] = std::move(scene_list);

  const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write " + manifest_path.string());
  manifest << j.dump(2) << "\n";

  const auto blob_path = std::filesystem::path(dir) / "images.f32";
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path.string());
  for (const Scene& s : scenes) {
    std::vector<float> buf(s.image.begin(), s.image.end());
    blob.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!blob.good()) throw std::runtime_error("failed writing " + blob_path.string());
}

std::vector<Scene> read_dataset(const std::string& dir) {
  const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot read " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(manifest_path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("version")) throw std::runtime_error(manifest_path.string() + ": missing version");
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error(manifest_path.string() + ": unsupported version");
  const int channels = j.at("channels").get<int>();
  const int height = j.at("height").get<int>();
  const int width = j.at("width").get<int>();
  const size_t count = j.at("count").get<size_t>();
  if (j.at("scenes").size() != count)
    throw std::runtime_error(manifest_path.string() + ": count does not match the scene list");

  const auto blob_path = std::filesystem::path(dir) / j.at("blob_file").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot read " + blob_path.string());
  const size_t scene_floats = static_cast<size_t>(channels) * height * width;
  std::vector<float> buf(scene_floats * count);
  blob.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<size_t>(blob.gcount()) != buf.size() * sizeof(float) || blob.peek() != EOF)
    throw std::runtime_error(blob_path.string() + ": size does not match " +
                             std::to_string(count) + " scenes of " + std::to_string(scene_floats) +
                             " floats");

  std::vector<Scene> scenes(count);
  for (size_t i = 0; i < count; ++i) {
    Scene& s = scenes[i];
    s.channels = channels;
    s.height = height;
    s.width = width;
    s.crowd_index = j.at("scenes")[i].at("crowd_index").get<double>();
    s.image.assign(buf.begin() + static_cast<std::ptrdiff_t>(i * scene_floats),
                   buf.begin() + static_cast<std::ptrdiff_t>((i + 1) * scene_floats));
    for (const auto& pj : j.at("scenes")[i].at("poses")) {
      const auto flat = pj.at("keypoints").get<std::vector<double>>();
      if (flat.size() % 3 != 0)
        throw std::runtime_error(manifest_path.string() + ": scene " + std::to_string(i) +
                                 " keypoints length " + std::to_string(flat.size()) +
                                 " is not a multiple of 3");
      Pose p;
      for (size_t k = 0; k < flat.size(); k += 3)
        p.keypoints.push_back({flat[k], flat[k + 1], static_cast<int>(flat[k + 2])});
      s.gt_poses.push_back(std::move(p));
    }
  }
  return scenes;
}

}  // namespace posekit
