#pragma once

#include <string>
#include <vector>

#include "posekit/eval.hpp"
#include "posekit/model.hpp"
#include "posekit/oks.hpp"
#include "posekit/synth.hpp"
#include "posekit/train.hpp"

namespace posekit {

struct EvalSettings {
  double bucket_lo = 0.1;  // crowd-index cut easy/medium
  double bucket_hi = 0.3;  // crowd-index cut medium/hard
  std::vector<double> bound_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  BoundScorePolicy score_policy = BoundScorePolicy::kUniformScores;
};

/// Input locations consumed by the pipeline commands. Empty dataset_dir means
/// "synthesize from the synth section instead of reading from disk".
struct DataPaths {
  std::string dataset_dir;
  std::string checkpoint;
  std::string results;
  std::string coco_gt;
};

/// One document configuring every stage. Defaults are the library defaults
/// except where the sections have to agree to run end-to-end out of the box:
/// the model is sized to the synthetic skeleton (joints = in_channels = 5)
/// at toy width (8 channels), and the learning rate is the one that trains
/// that model well.
struct RunConfig {
  SynthConfig synth;
  HeadConfig model;
  TrainConfig train;
  OksParams oks;  // empty sigmas -> default_sigmas(model.joints)
  EvalSettings eval;
  DataPaths data;

  RunConfig() {
    model.joints = synth.joints;
    model.in_channels = synth.joints;
    model.channels = 8;
    model.embed_channels = 8;
    train.lr = 1e-2;
  }
};

/// Parses a config document. Every field is optional and defaulted; unknown
/// keys, wrong types, bad enum strings, and negative seeds are rejected with
/// the dotted path of the offending key ("config: 'train.lr' must be a
/// number"). `where` names the source in error messages. When "model" sets
/// level_count but no strides, strides default to 4 << level. The top-level
/// "oks" section also feeds train.oks, so labeling and evaluation share one
/// similarity definition.
RunConfig parse_run_config(const std::string& text, const std::string& where = "config");

/// parse_run_config over a file's contents.
RunConfig load_run_config(const std::string& path);

/// Canonical JSON with every field written explicitly. Parsing it back
/// reproduces the config; serializing again is byte-identical.
std::string serialize_run_config(const RunConfig& cfg);

/// FNV-1a over the canonical serialization, as 16 hex characters.
std::string run_config_hash(const RunConfig& cfg);

}  // namespace posekit
