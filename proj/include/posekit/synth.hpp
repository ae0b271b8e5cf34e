#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posekit/pose.hpp"

namespace posekit {

/// Synthetic stick-figure crowd generator settings.
struct SynthConfig {
  int joints = 5;
  int height = 64;
  int width = 64;
  int min_persons = 1;
  int max_persons = 3;
  double min_scale = 10.0;  // template-square size in pixels
  double max_scale = 24.0;
  double min_rotation = -0.5;  // radians
  double max_rotation = 0.5;
  // Desired mean pairwise keypoint-box IoU per scene, matched within +/-0.05
  // by whole-scene resampling. 0 disables the constraint.
  double overlap_target = 0.0;
  double blob_sigma = 1.5;  // pixel width of the rendered joint blobs
  int count = 16;
  uint64_t seed = 0;
};

/// Generates `count` scenes: each places persons by similarity transforms of
/// the K-joint template, renders every joint as a Gaussian blob into that
/// joint's own image channel (so the image determines the pose), and records
/// the exact GT poses plus the crowd index. Deterministic from cfg.seed and
/// independent per scene. Throws std::invalid_argument on a bad config and
/// std::runtime_error naming the scene index when the overlap target cannot
/// be met within 1000 attempts.
std::vector<Scene> synth_dataset(const SynthConfig& cfg);

/// Mean pairwise keypoint-box IoU of a pose list (0 with fewer than 2).
double mean_pairwise_box_iou(const std::vector<Pose>& poses);

/// Writes scenes as <dir>/manifest.json (poses, crowd indices, dimensions)
/// plus <dir>/images.f32 (raw little-endian float32 C x H x W arrays,
/// concatenated in scene order). Creates the directory if needed.
void write_dataset(const std::vector<Scene>& scenes, const std::string& dir);

/// Reads a dataset written by write_dataset. Throws std::runtime_error with
/// the offending file/field on any inconsistency.
std::vector<Scene> read_dataset(const std::string& dir);

}  // namespace posekit
