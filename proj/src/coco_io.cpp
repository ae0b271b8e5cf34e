#include "posekit/coco_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace posekit {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": malformed JSON: " + e.what());
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw std::runtime_error(where + ": missing '" + key + "'");
  return *it;
}

std::int64_t as_int(const json& j, const std::string& where, const char* field) {
  if (!j.is_number_integer())
    throw std::runtime_error(where + ": '" + field + "' must be an integer");
  return j.get<std::int64_t>();
}

double as_number(const json& j, const std::string& where, const char* field) {
  if (!j.is_number()) throw std::runtime_error(where + ": '" + field + "' must be a number");
  return j.get<double>();
}

std::string ann_where(size_t index, const json& ann) {
  std::string where = "annotations[" + std::to_string(index) + "]";
  if (ann.is_object()) {
    const auto it = ann.find("id");
    if (it != ann.end() && it->is_number_integer())
      where += " (id " + std::to_string(it->get<std::int64_t>()) + ")";
  }
  return where;
}

}  // namespace

std::vector<Pose> CocoImageScene::gt_poses() const {
  std::vector<Pose> out;
  for (const auto& r : records)
    if (!r.iscrowd) out.push_back(r.pose);
  return out;
}

CocoDataset read_coco_keypoints(const std::string& path) {
  const json doc = parse_file(path);
  if (!doc.is_object())
    throw std::runtime_error(path + ": top-level JSON value must be an object");

  // The single keypoint-bearing category fixes K and the joint names.
  const json& categories = require(doc, "categories", path);
  if (!categories.is_array()) throw std::runtime_error(path + ": 'categories' must be an array");
  const json* category = nullptr;
  size_t category_index = 0;
  int with_keypoints = 0;
  for (size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].is_object() && categories[i].contains("keypoints")) {
      ++with_keypoints;
      category = &categories[i];
      category_index = i;
    }
  }
  if (with_keypoints != 1)
    throw std::runtime_error(path + ": categories must contain exactly one keypoint category, found " +
                             std::to_string(with_keypoints));
  const std::string cat_where = "categories[" + std::to_string(category_index) + "]";
  const std::int64_t category_id = as_int(require(*category, "id", cat_where), cat_where, "id");
  const json& names = category->at("keypoints");
  if (!names.is_array() || names.empty())
    throw std::runtime_error(cat_where + ": 'keypoints' must name at least one joint");

  CocoDataset out;
  out.skeleton.k = static_cast<int>(names.size());
  for (size_t i = 0; i < names.size(); ++i) {
    if (!names[i].is_string())
      throw std::runtime_error(cat_where + ": keypoint names must be strings");
    out.skeleton.joint_names.push_back(names[i].get<std::string>());
  }
  out.skeleton.sigmas = default_sigmas(out.skeleton.k);

  const json& images = require(doc, "images", path);
  if (!images.is_array()) throw std::runtime_error(path + ": 'images' must be an array");
  std::map<std::int64_t, size_t> image_index;
  for (size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const json& jm = images[i];
    if (!jm.is_object()) throw std::runtime_error(where + ": entry must be an object");
    CocoImageScene scene;
    scene.image.id = as_int(require(jm, "id", where), where, "id");
    if (jm.contains("width"))
      scene.image.width = static_cast<int>(as_int(jm.at("width"), where, "width"));
    if (jm.contains("height"))
      scene.image.height = static_cast<int>(as_int(jm.at("height"), where, "height"));
    if (jm.contains("file_name")) {
      if (!jm.at("file_name").is_string())
        throw std::runtime_error(where + ": 'file_name' must be a string");
      scene.image.file_name = jm.at("file_name").get<std::string>();
    }
    if (!image_index.emplace(scene.image.id, out.images.size()).second)
      throw std::runtime_error(where + ": duplicate image id " + std::to_string(scene.image.id));
    out.images.push_back(std::move(scene));
  }

  const json& annotations = require(doc, "annotations", path);
  if (!annotations.is_array())
    throw std::runtime_error(path + ": 'annotations' must be an array");
  const int expected_len = 3 * out.skeleton.k;
  for (size_t i = 0; i < annotations.size(); ++i) {
    const json& ja = annotations[i];
    const std::string where = ann_where(i, ja);
    if (!ja.is_object()) throw std::runtime_error(where + ": entry must be an object");

    CocoPoseRecord rec;
    rec.annotation_id = as_int(require(ja, "id", where), where, "id");
    const std::int64_t image_id = as_int(require(ja, "image_id", where), where, "image_id");
    const auto img_it = image_index.find(image_id);
    if (img_it == image_index.end())
      throw std::runtime_error(where + ": image_id " + std::to_string(image_id) +
                               " does not match any image");
    const std::int64_t cat = as_int(require(ja, "category_id", where), where, "category_id");
    if (cat != category_id)
      throw std::runtime_error(where + ": category_id " + std::to_string(cat) + " ≠ " +
                               std::to_string(category_id));

    const json& kps = require(ja, "keypoints", where);
    if (!kps.is_array()) throw std::runtime_error(where + ": 'keypoints' must be an array");
    if (static_cast<int>(kps.size()) != expected_len)
      throw std::runtime_error(where + ": keypoints length " + std::to_string(kps.size()) +
                               " ≠ " + std::to_string(expected_len));
    for (int j = 0; j < out.skeleton.k; ++j) {
      Keypoint kp;
      kp.x = as_number(kps[3 * j], where, "keypoints");
      kp.y = as_number(kps[3 * j + 1], where, "keypoints");
      const double v = as_number(kps[3 * j + 2], where, "keypoints");
      if (v != 0.0 && v != 1.0 && v != 2.0)
        throw std::runtime_error(where + ": keypoint " + std::to_string(j) + " visibility " +
                                 fmt17(v) + " must be 0, 1, or 2");
      kp.v = static_cast<int>(v);
      rec.pose.keypoints.push_back(kp);
    }

    if (ja.contains("area")) rec.area = as_number(ja.at("area"), where, "area");
    if (ja.contains("iscrowd")) {
      const std::int64_t crowd = as_int(ja.at("iscrowd"), where, "iscrowd");
      if (crowd != 0 && crowd != 1)
        throw std::runtime_error(where + ": 'iscrowd' must be 0 or 1, got " +
                                 std::to_string(crowd));
      rec.iscrowd = crowd == 1;
    }
    out.images[img_it->second].records.push_back(std::move(rec));
  }
  return out;
}

void write_results(const ResultsPerImage& dets, const std::string& path, int category_id) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  // Hand-rolled so every float carries 17 significant digits.
  bool first = true;
  out << "[";
  for (const auto& [image_id, list] : dets) {
    for (const auto& d : list) {
      out << (first ? "\n" : ",\n");
      first = false;
      out << "  {\"image_id\": " << image_id << ", \"category_id\": " << category_id
          << ", \"keypoints\": [";
      for (size_t i = 0; i < d.pose.keypoints.size(); ++i) {
        const auto& kp = d.pose.keypoints[i];
        if (i > 0) out << ", ";
        out << fmt17(kp.x) << ", " << fmt17(kp.y) << ", 1";
      }
      out << "], \"score\": " << fmt17(d.score) << "}";
    }
  }
  out << (first ? "]\n" : "\n]\n");
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

ResultsPerImage read_results(const std::string& path) {
  const json doc = parse_file(path);
  if (!doc.is_array()) throw std::runtime_error(path + ": results document must be an array");

  ResultsPerImage out;
  std::map<std::int64_t, size_t> group;
  for (size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "results[" + std::to_string(i) + "]";
    const json& je = doc[i];
    if (!je.is_object()) throw std::runtime_error(where + ": entry must be an object");
    const std::int64_t image_id = as_int(require(je, "image_id", where), where, "image_id");

    const json& kps = require(je, "keypoints", where);
    if (!kps.is_array()) throw std::runtime_error(where + ": 'keypoints' must be an array");
    if (kps.size() % 3 != 0)
      throw std::runtime_error(where + ": keypoints length " + std::to_string(kps.size()) +
                               " is not a multiple of 3");

    Detection d;
    for (size_t j = 0; j < kps.size(); j += 3) {
      Keypoint kp;
      kp.x = as_number(kps[j], where, "keypoints");
      kp.y = as_number(kps[j + 1], where, "keypoints");
      kp.v = static_cast<int>(as_number(kps[j + 2], where, "keypoints"));
      d.pose.keypoints.push_back(kp);
    }
    d.score = as_number(require(je, "score", where), where, "score");

    auto [it, inserted] = group.emplace(image_id, out.size());
    if (inserted) out.push_back({image_id, {}});
    out[it->second].second.push_back(std::move(d));
  }
  return out;
}

}  // namespace posekit
