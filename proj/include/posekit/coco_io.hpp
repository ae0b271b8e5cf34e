#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "posekit/nms.hpp"
#include "posekit/pose.hpp"

namespace posekit {

/// One entry of the person-keypoints "images" list.
struct CocoImage {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

/// One annotation, with the source metadata the evaluator may want later.
/// Crowd-region annotations are kept but flagged; by default they do not
/// participate in matching.
struct CocoPoseRecord {
  Pose pose;
  std::int64_t annotation_id = 0;
  double area = 0.0;  // annotation "area" as given, 0 when absent
  bool iscrowd = false;
};

struct CocoImageScene {
  CocoImage image;
  std::vector<CocoPoseRecord> records;

  /// The default ground-truth set: every non-crowd pose, in file order.
  std::vector<Pose> gt_poses() const;
};

struct CocoDataset {
  SkeletonSpec skeleton;  // joint count/names from the category
  std::vector<CocoImageScene> images;
};

/// Reads a COCO person-keypoints document. The joint count comes from the
/// single keypoint-bearing category; images keep their file order and group
/// their annotations. Every malformed construct (bad JSON, missing fields,
/// keypoints length != 3K, visibility outside {0, 1, 2}, an image_id that
/// resolves nowhere, ...) raises std::runtime_error naming the offending
/// element, e.g. "annotations[3] (id 17): keypoints length 50 ≠ 51".
CocoDataset read_coco_keypoints(const std::string& path);

/// Detections grouped per image id.
using ResultsPerImage = std::vector<std::pair<std::int64_t, std::vector<Detection>>>;

/// Writes the COCO results array: one {image_id, category_id, keypoints,
/// score} object per detection, keypoints flattened [x1, y1, 1, ...] with
/// every joint's visibility written as 1, numbers serialized with 17
/// significant digits so reading the file back reproduces them exactly.
/// Empty input writes "[]".
void write_results(const ResultsPerImage& dets, const std::string& path, int category_id = 1);

/// Reads a results array back, grouping detections by image id in order of
/// first appearance. Malformed entries raise std::runtime_error naming the
/// element, e.g. "results[2]: missing 'score'".
ResultsPerImage read_results(const std::string& path);

}  // namespace posekit
