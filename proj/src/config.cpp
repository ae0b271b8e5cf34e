#include "posekit/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace posekit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, const std::string& section,
                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      fail(where, "unknown key '" + key + "'" + (section.empty() ? "" : " in '" + section + "'"));
  }
}

std::string dotted(const std::string& section, const char* key) {
  return section.empty() ? key : section + "." + key;
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double read_number(const json& j, const std::string& where, const std::string& path) {
  if (!j.is_number()) fail(where, "'" + path + "' must be a number");
  return j.get<double>();
}

void get(const json& obj, const char* key, double& out, const std::string& where,
         const std::string& section) {
  if (const json* j = find(obj, key)) out = read_number(*j, where, dotted(section, key));
}

void get(const json& obj, const char* key, int& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (!j->is_number_integer()) fail(where, "'" + dotted(section, key) + "' must be an integer");
  out = static_cast<int>(j->get<std::int64_t>());
}

void get(const json& obj, const char* key, bool& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (!j->is_boolean()) fail(where, "'" + dotted(section, key) + "' must be a boolean");
  out = j->get<bool>();
}

void get(const json& obj, const char* key, std::uint64_t& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (j->is_number_unsigned()) {
    out = j->get<std::uint64_t>();
    return;
  }
  if (j->is_number_integer() && j->get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(j->get<std::int64_t>());
    return;
  }
  fail(where, "'" + dotted(section, key) + "' must be a non-negative integer");
}

void get(const json& obj, const char* key, std::string& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (!j->is_string()) fail(where, "'" + dotted(section, key) + "' must be a string");
  out = j->get<std::string>();
}

void get(const json& obj, const char* key, std::vector<double>& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (!j->is_array()) fail(where, "'" + dotted(section, key) + "' must be an array of numbers");
  std::vector<double> values;
  for (const auto& e : *j) values.push_back(read_number(e, where, dotted(section, key)));
  out = std::move(values);
}

void get(const json& obj, const char* key, std::vector<int>& out, const std::string& where,
         const std::string& section) {
  const json* j = find(obj, key);
  if (!j) return;
  if (!j->is_array()) fail(where, "'" + dotted(section, key) + "' must be an array of integers");
  std::vector<int> values;
  for (const auto& e : *j) {
    if (!e.is_number_integer())
      fail(where, "'" + dotted(section, key) + "' must be an array of integers");
    values.push_back(static_cast<int>(e.get<std::int64_t>()));
  }
  out = std::move(values);
}

template <typename Enum>
void get_enum(const json& obj, const char* key, Enum& out, const std::string& where,
              const std::string& section,
              std::initializer_list<std::pair<const char*, Enum>> values) {
  const json* j = find(obj, key);
  if (!j) return;
  std::string allowed;
  if (j->is_string()) {
    const std::string s = j->get<std::string>();
    for (const auto& [name, value] : values) {
      if (s == name) {
        out = value;
        return;
      }
    }
  }
  for (const auto& [name, value] : values) {
    if (!allowed.empty()) allowed += " | ";
    allowed += name;
  }
  fail(where, "'" + dotted(section, key) + "' must be one of: " + allowed);
}

void parse_synth(const json& obj, SynthConfig& out, const std::string& where) {
  check_keys(obj, where, "synth",
             {"joints", "height", "width", "min_persons", "max_persons", "min_scale", "max_scale",
              "min_rotation", "max_rotation", "overlap_target", "blob_sigma", "count", "seed"});
  get(obj, "joints", out.joints, where, "synth");
  get(obj, "height", out.height, where, "synth");
  get(obj, "width", out.width, where, "synth");
  get(obj, "min_persons", out.min_persons, where, "synth");
  get(obj, "max_persons", out.max_persons, where, "synth");
  get(obj, "min_scale", out.min_scale, where, "synth");
  get(obj, "max_scale", out.max_scale, where, "synth");
  get(obj, "min_rotation", out.min_rotation, where, "synth");
  get(obj, "max_rotation", out.max_rotation, where, "synth");
  get(obj, "overlap_target", out.overlap_target, where, "synth");
  get(obj, "blob_sigma", out.blob_sigma, where, "synth");
  get(obj, "count", out.count, where, "synth");
  get(obj, "seed", out.seed, where, "synth");
}

void parse_model(const json& obj, HeadConfig& out, const std::string& where) {
  check_keys(obj, where, "model",
             {"joints", "in_channels", "channels", "level_count", "strides", "embed_channels",
              "score_threshold", "topk_per_level", "nms_kind", "nms_threshold", "nms_max_keep"});
  get(obj, "joints", out.joints, where, "model");
  get(obj, "in_channels", out.in_channels, where, "model");
  get(obj, "channels", out.channels, where, "model");
  get(obj, "level_count", out.level_count, where, "model");
  if (find(obj, "strides")) {
    get(obj, "strides", out.strides, where, "model");
  } else if (find(obj, "level_count")) {
    out.strides.clear();
    for (int l = 0; l < out.level_count; ++l) out.strides.push_back(4 << l);
  }
  get(obj, "embed_channels", out.embed_channels, where, "model");
  get(obj, "score_threshold", out.score_threshold, where, "model");
  get(obj, "topk_per_level", out.topk_per_level, where, "model");
  get_enum(obj, "nms_kind", out.nms_kind, where, "model",
           {{"oks", NmsKind::kOks}, {"iou", NmsKind::kIou}});
  get(obj, "nms_threshold", out.nms_threshold, where, "model");
  get(obj, "nms_max_keep", out.nms_max_keep, where, "model");
}

void parse_train(const json& obj, TrainConfig& out, const std::string& where) {
  check_keys(obj, where, "train",
             {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "loss_weights",
              "offsets_grad", "intermediate_supervision", "centroid_mode", "thresholds", "focal",
              "heatmap_sigma", "base_scale", "seed"});
  get(obj, "epochs", out.epochs, where, "train");
  get(obj, "batch_size", out.batch_size, where, "train");
  get(obj, "lr", out.lr, where, "train");
  get(obj, "beta1", out.beta1, where, "train");
  get(obj, "beta2", out.beta2, where, "train");
  get(obj, "adam_eps", out.adam_eps, where, "train");
  if (const json* j = find(obj, "loss_weights")) {
    if (!j->is_object()) fail(where, "'train.loss_weights' must be an object");
    check_keys(*j, where, "train.loss_weights", {"coarse", "refine", "focal", "heatmap"});
    get(*j, "coarse", out.loss_weights.coarse, where, "train.loss_weights");
    get(*j, "refine", out.loss_weights.refine, where, "train.loss_weights");
    get(*j, "focal", out.loss_weights.focal, where, "train.loss_weights");
    get(*j, "heatmap", out.loss_weights.heatmap, where, "train.loss_weights");
  }
  get(obj, "offsets_grad", out.offsets_grad, where, "train");
  get(obj, "intermediate_supervision", out.intermediate_supervision, where, "train");
  get_enum(obj, "centroid_mode", out.centroid_mode, where, "train",
           {{"keypoints", CentroidMode::kKeypoints}, {"bbox", CentroidMode::kBbox}});
  if (const json* j = find(obj, "thresholds")) {
    if (!j->is_object()) fail(where, "'train.thresholds' must be an object");
    check_keys(*j, where, "train.thresholds", {"positive", "negative", "regression"});
    get(*j, "positive", out.thresholds.positive, where, "train.thresholds");
    get(*j, "negative", out.thresholds.negative, where, "train.thresholds");
    get(*j, "regression", out.thresholds.regression, where, "train.thresholds");
  }
  if (const json* j = find(obj, "focal")) {
    if (!j->is_object()) fail(where, "'train.focal' must be an object");
    check_keys(*j, where, "train.focal", {"alpha", "gamma"});
    get(*j, "alpha", out.focal.alpha, where, "train.focal");
    get(*j, "gamma", out.focal.gamma, where, "train.focal");
  }
  get(obj, "heatmap_sigma", out.heatmap_sigma, where, "train");
  get(obj, "base_scale", out.base_scale, where, "train");
  get(obj, "seed", out.seed, where, "train");
}

void parse_oks(const json& obj, OksParams& out, const std::string& where) {
  check_keys(obj, where, "oks", {"sigmas", "scale_floor"});
  get(obj, "sigmas", out.sigmas, where, "oks");
  get(obj, "scale_floor", out.scale_floor, where, "oks");
}

void parse_eval(const json& obj, EvalSettings& out, const std::string& where) {
  check_keys(obj, where, "eval",
             {"bucket_lo", "bucket_hi", "bound_thresholds", "score_policy"});
  get(obj, "bucket_lo", out.bucket_lo, where, "eval");
  get(obj, "bucket_hi", out.bucket_hi, where, "eval");
  get(obj, "bound_thresholds", out.bound_thresholds, where, "eval");
  get_enum(obj, "score_policy", out.score_policy, where, "eval",
           {{"uniform", BoundScorePolicy::kUniformScores},
            {"random", BoundScorePolicy::kRandomScores}});
}

void parse_data(const json& obj, DataPaths& out, const std::string& where) {
  check_keys(obj, where, "data", {"dataset_dir", "checkpoint", "results", "coco_gt"});
  get(obj, "dataset_dir", out.dataset_dir, where, "data");
  get(obj, "checkpoint", out.checkpoint, where, "data");
  get(obj, "results", out.results, where, "data");
  get(obj, "coco_gt", out.coco_gt, where, "data");
}

json section(const json& doc, const char* key, const std::string& where) {
  const json* j = find(doc, key);
  if (!j) return json::object();
  if (!j->is_object()) fail(where, std::string("'") + key + "' must be an object");
  return *j;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& where) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(where, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(where, "top-level JSON value must be an object");
  check_keys(doc, where, "", {"synth", "model", "train", "oks", "eval", "data"});

  RunConfig cfg;
  parse_synth(section(doc, "synth", where), cfg.synth, where);
  parse_model(section(doc, "model", where), cfg.model, where);
  parse_train(section(doc, "train", where), cfg.train, where);
  parse_oks(section(doc, "oks", where), cfg.oks, where);
  parse_eval(section(doc, "eval", where), cfg.eval, where);
  parse_data(section(doc, "data", where), cfg.data, where);
  cfg.train.oks = cfg.oks;  // one similarity section feeds labeling too
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string serialize_run_config(const RunConfig& cfg) {
  json doc;
  json& synth = doc["synth"] = json::object();
  synth["joints"] = cfg.synth.joints;
  synth["height"] = cfg.synth.height;
  synth["width"] = cfg.synth.width;
  synth["min_persons"] = cfg.synth.min_persons;
  synth["max_persons"] = cfg.synth.max_persons;
  synth["min_scale"] = cfg.synth.min_scale;
  synth["max_scale"] = cfg.synth.max_scale;
  synth["min_rotation"] = cfg.synth.min_rotation;
  synth["max_rotation"] = cfg.synth.max_rotation;
  synth["overlap_target"] = cfg.synth.overlap_target;
  synth["blob_sigma"] = cfg.synth.blob_sigma;
  synth["count"] = cfg.synth.count;
  synth["seed"] = cfg.synth.seed;

  json& model = doc["model"] = json::object();
  model["joints"] = cfg.model.joints;
  model["in_channels"] = cfg.model.in_channels;
  model["channels"] = cfg.model.channels;
  model["level_count"] = cfg.model.level_count;
  model["strides"] = cfg.model.strides;
  model["embed_channels"] = cfg.model.embed_channels;
  model["score_threshold"] = cfg.model.score_threshold;
  model["topk_per_level"] = cfg.model.topk_per_level;
  model["nms_kind"] = cfg.model.nms_kind == NmsKind::kOks ? "oks" : "iou";
  model["nms_threshold"] = cfg.model.nms_threshold;
  model["nms_max_keep"] = cfg.model.nms_max_keep;

  json& train = doc["train"] = json::object();
  train["epochs"] = cfg.train.epochs;
  train["batch_size"] = cfg.train.batch_size;
  train["lr"] = cfg.train.lr;
  train["beta1"] = cfg.train.beta1;
  train["beta2"] = cfg.train.beta2;
  train["adam_eps"] = cfg.train.adam_eps;
  train["loss_weights"] = {{"coarse", cfg.train.loss_weights.coarse},
                           {"refine", cfg.train.loss_weights.refine},
                           {"focal", cfg.train.loss_weights.focal},
                           {"heatmap", cfg.train.loss_weights.heatmap}};
  train["offsets_grad"] = cfg.train.offsets_grad;
  train["intermediate_supervision"] = cfg.train.intermediate_supervision;
  train["centroid_mode"] =
      cfg.train.centroid_mode == CentroidMode::kKeypoints ? "keypoints" : "bbox";
  // train.oks mirrors the top-level oks section and is not written twice.
  train["thresholds"] = {{"positive", cfg.train.thresholds.positive},
                         {"negative", cfg.train.thresholds.negative},
                         {"regression", cfg.train.thresholds.regression}};
  train["focal"] = {{"alpha", cfg.train.focal.alpha}, {"gamma", cfg.train.focal.gamma}};
  train["heatmap_sigma"] = cfg.train.heatmap_sigma;
  train["base_scale"] = cfg.train.base_scale;
  train["seed"] = cfg.train.seed;

  json& oks = doc["oks"] = json::object();
  oks["sigmas"] = cfg.oks.sigmas;
  oks["scale_floor"] = cfg.oks.scale_floor;

  json& eval = doc["eval"] = json::object();
  eval["bucket_lo"] = cfg.eval.bucket_lo;
  eval["bucket_hi"] = cfg.eval.bucket_hi;
  eval["bound_thresholds"] = cfg.eval.bound_thresholds;
  eval["score_policy"] =
      cfg.eval.score_policy == BoundScorePolicy::kUniformScores ? "uniform" : "random";

  json& data = doc["data"] = json::object();
  data["dataset_dir"] = cfg.data.dataset_dir;
  data["checkpoint"] = cfg.data.checkpoint;
  data["results"] = cfg.data.results;
  data["coco_gt"] = cfg.data.coco_gt;

  return doc.dump(2) + "\n";
}

std::string run_config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_run_config(cfg))));
  return buf;
}

}  // namespace posekit
