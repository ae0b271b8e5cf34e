#include "posekit/config.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <string>

using namespace posekit;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfigParse, EmptyDocumentYieldsCoherentDefaults) {
  const RunConfig cfg = parse_run_config("{}");
  EXPECT_EQ(cfg.synth.joints, 5);
  EXPECT_EQ(cfg.synth.height, 64);
  EXPECT_EQ(cfg.synth.count, 16);
  EXPECT_EQ(cfg.model.joints, 5);
  EXPECT_EQ(cfg.model.in_channels, 5);
  EXPECT_EQ(cfg.model.channels, 8);
  EXPECT_EQ(cfg.model.embed_channels, 8);
  EXPECT_EQ(cfg.model.level_count, 3);
  EXPECT_EQ(cfg.model.strides, (std::vector<int>{4, 8, 16}));
  EXPECT_EQ(cfg.model.nms_kind, NmsKind::kOks);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 1e-2);
  EXPECT_EQ(cfg.train.epochs, 10);
  EXPECT_TRUE(cfg.train.intermediate_supervision);
  EXPECT_EQ(cfg.train.centroid_mode, CentroidMode::kKeypoints);
  EXPECT_TRUE(cfg.oks.sigmas.empty());
  EXPECT_DOUBLE_EQ(cfg.eval.bucket_lo, 0.1);
  EXPECT_DOUBLE_EQ(cfg.eval.bucket_hi, 0.3);
  EXPECT_EQ(cfg.eval.bound_thresholds.size(), 9u);
  EXPECT_EQ(cfg.eval.score_policy, BoundScorePolicy::kUniformScores);
  EXPECT_TRUE(cfg.data.dataset_dir.empty());
}

TEST(RunConfigParse, EveryFieldSurvivesASerializationRoundTrip) {
  RunConfig cfg;
  cfg.synth.joints = 7;
  cfg.synth.height = 48;
  cfg.synth.width = 80;
  cfg.synth.min_persons = 2;
  cfg.synth.max_persons = 4;
  cfg.synth.min_scale = 9.5;
  cfg.synth.max_scale = 19.25;
  cfg.synth.min_rotation = -0.75;
  cfg.synth.max_rotation = 0.25;
  cfg.synth.overlap_target = 0.2;
  cfg.synth.blob_sigma = 2.5;
  cfg.synth.count = 33;
  cfg.synth.seed = 987654321;
  cfg.model.joints = 7;
  cfg.model.in_channels = 7;
  cfg.model.channels = 12;
  cfg.model.level_count = 2;
  cfg.model.strides = {4, 8};
  cfg.model.embed_channels = 6;
  cfg.model.score_threshold = 0.125;
  cfg.model.topk_per_level = 17;
  cfg.model.nms_kind = NmsKind::kIou;
  cfg.model.nms_threshold = 0.45;
  cfg.model.nms_max_keep = 31;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 7;
  cfg.train.lr = 0.125;
  cfg.train.beta1 = 0.8;
  cfg.train.beta2 = 0.99;
  cfg.train.adam_eps = 1e-7;
  cfg.train.loss_weights = {0.5, 1.5, 2.0, 0.25};
  cfg.train.offsets_grad = false;
  cfg.train.intermediate_supervision = false;
  cfg.train.centroid_mode = CentroidMode::kBbox;
  cfg.train.thresholds = {0.65, 0.45, 0.75};
  cfg.train.focal = {0.3, 1.5};
  cfg.train.heatmap_sigma = 1.5;
  cfg.train.base_scale = 24.0;
  cfg.train.seed = 11;
  cfg.oks.sigmas = {0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1};
  cfg.oks.scale_floor = 2.0;
  cfg.train.oks = cfg.oks;
  cfg.eval.bucket_lo = 0.05;
  cfg.eval.bucket_hi = 0.4;
  cfg.eval.bound_thresholds = {0.25, 0.5, 0.75};
  cfg.eval.score_policy = BoundScorePolicy::kRandomScores;
  cfg.data.dataset_dir = "d";
  cfg.data.checkpoint = "c.json";
  cfg.data.results = "r.json";
  cfg.data.coco_gt = "gt.json";

  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text);

  EXPECT_EQ(back.synth.joints, 7);
  EXPECT_EQ(back.synth.height, 48);
  EXPECT_EQ(back.synth.width, 80);
  EXPECT_EQ(back.synth.min_persons, 2);
  EXPECT_EQ(back.synth.max_persons, 4);
  EXPECT_DOUBLE_EQ(back.synth.min_scale, 9.5);
  EXPECT_DOUBLE_EQ(back.synth.max_scale, 19.25);
  EXPECT_DOUBLE_EQ(back.synth.min_rotation, -0.75);
  EXPECT_DOUBLE_EQ(back.synth.max_rotation, 0.25);
  EXPECT_DOUBLE_EQ(back.synth.overlap_target, 0.2);
  EXPECT_DOUBLE_EQ(back.synth.blob_sigma, 2.5);
  EXPECT_EQ(back.synth.count, 33);
  EXPECT_EQ(back.synth.seed, 987654321u);
  EXPECT_EQ(back.model.joints, 7);
  EXPECT_EQ(back.model.in_channels, 7);
  EXPECT_EQ(back.model.channels, 12);
  EXPECT_EQ(back.model.level_count, 2);
  EXPECT_EQ(back.model.strides, (std::vector<int>{4, 8}));
  EXPECT_EQ(back.model.embed_channels, 6);
  EXPECT_DOUBLE_EQ(back.model.score_threshold, 0.125);
  EXPECT_EQ(back.model.topk_per_level, 17);
  EXPECT_EQ(back.model.nms_kind, NmsKind::kIou);
  EXPECT_DOUBLE_EQ(back.model.nms_threshold, 0.45);
  EXPECT_EQ(back.model.nms_max_keep, 31);
  EXPECT_EQ(back.train.epochs, 3);
  EXPECT_EQ(back.train.batch_size, 7);
  EXPECT_DOUBLE_EQ(back.train.lr, 0.125);
  EXPECT_DOUBLE_EQ(back.train.beta1, 0.8);
  EXPECT_DOUBLE_EQ(back.train.beta2, 0.99);
  EXPECT_DOUBLE_EQ(back.train.adam_eps, 1e-7);
  EXPECT_DOUBLE_EQ(back.train.loss_weights.coarse, 0.5);
  EXPECT_DOUBLE_EQ(back.train.loss_weights.refine, 1.5);
  EXPECT_DOUBLE_EQ(back.train.loss_weights.focal, 2.0);
  EXPECT_DOUBLE_EQ(back.train.loss_weights.heatmap, 0.25);
  EXPECT_FALSE(back.train.offsets_grad);
  EXPECT_FALSE(back.train.intermediate_supervision);
  EXPECT_EQ(back.train.centroid_mode, CentroidMode::kBbox);
  EXPECT_DOUBLE_EQ(back.train.thresholds.positive, 0.65);
  EXPECT_DOUBLE_EQ(back.train.thresholds.negative, 0.45);
  EXPECT_DOUBLE_EQ(back.train.thresholds.regression, 0.75);
  EXPECT_DOUBLE_EQ(back.train.focal.alpha, 0.3);
  EXPECT_DOUBLE_EQ(back.train.focal.gamma, 1.5);
  EXPECT_DOUBLE_EQ(back.train.heatmap_sigma, 1.5);
  EXPECT_DOUBLE_EQ(back.train.base_scale, 24.0);
  EXPECT_EQ(back.train.seed, 11u);
  EXPECT_EQ(back.oks.sigmas.size(), 7u);
  EXPECT_DOUBLE_EQ(back.oks.sigmas[2], 0.3);
  EXPECT_DOUBLE_EQ(back.oks.scale_floor, 2.0);
  EXPECT_EQ(back.train.oks.sigmas, back.oks.sigmas);
  EXPECT_DOUBLE_EQ(back.eval.bucket_lo, 0.05);
  EXPECT_DOUBLE_EQ(back.eval.bucket_hi, 0.4);
  EXPECT_EQ(back.eval.bound_thresholds, (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_EQ(back.eval.score_policy, BoundScorePolicy::kRandomScores);
  EXPECT_EQ(back.data.dataset_dir, "d");
  EXPECT_EQ(back.data.checkpoint, "c.json");
  EXPECT_EQ(back.data.results, "r.json");
  EXPECT_EQ(back.data.coco_gt, "gt.json");

  // Canonical form is a fixed point.
  EXPECT_EQ(serialize_run_config(back), text);
}

TEST(RunConfigParse, UnknownKeysAreLocated) {
  EXPECT_NE(error_of("{\"bogus\": 1}").find("unknown key 'bogus'"), std::string::npos);
  const std::string nested = error_of("{\"train\": {\"loss_weights\": {\"extra\": 1}}}");
  EXPECT_NE(nested.find("unknown key 'extra'"), std::string::npos) << nested;
  EXPECT_NE(nested.find("train.loss_weights"), std::string::npos) << nested;
  EXPECT_NE(error_of("{\"synth\": {\"persons\": 3}}").find("'persons'"), std::string::npos);
}

TEST(RunConfigParse, WrongTypesAreLocated) {
  EXPECT_NE(error_of("{\"train\": {\"lr\": \"fast\"}}").find("'train.lr' must be a number"),
            std::string::npos);
  EXPECT_NE(error_of("{\"model\": {\"strides\": \"x\"}}")
                .find("'model.strides' must be an array of integers"),
            std::string::npos);
  EXPECT_NE(error_of("{\"model\": {\"channels\": 2.5}}")
                .find("'model.channels' must be an integer"),
            std::string::npos);
  EXPECT_NE(error_of("{\"train\": {\"offsets_grad\": 1}}")
                .find("'train.offsets_grad' must be a boolean"),
            std::string::npos);
  EXPECT_NE(error_of("{\"data\": {\"checkpoint\": 5}}")
                .find("'data.checkpoint' must be a string"),
            std::string::npos);
  EXPECT_NE(error_of("{\"train\": 4}").find("'train' must be an object"), std::string::npos);
}

TEST(RunConfigParse, EnumStringsAreValidated) {
  const std::string nms = error_of("{\"model\": {\"nms_kind\": \"both\"}}");
  EXPECT_NE(nms.find("'model.nms_kind' must be one of: oks | iou"), std::string::npos) << nms;
  EXPECT_NE(error_of("{\"train\": {\"centroid_mode\": \"feet\"}}")
                .find("keypoints | bbox"),
            std::string::npos);
  EXPECT_NE(error_of("{\"eval\": {\"score_policy\": \"x\"}}").find("uniform | random"),
            std::string::npos);
}

TEST(RunConfigParse, NegativeSeedIsRejected) {
  EXPECT_NE(error_of("{\"train\": {\"seed\": -5}}")
                .find("'train.seed' must be a non-negative integer"),
            std::string::npos);
  EXPECT_NE(error_of("{\"synth\": {\"seed\": -1}}").find("non-negative"), std::string::npos);
}

TEST(RunConfigParse, MalformedJsonIsAnError) {
  EXPECT_NE(error_of("{ nope").find("malformed JSON"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").find("must be an object"), std::string::npos);
}

TEST(RunConfigParse, StridesFollowLevelCountWhenUnset) {
  const RunConfig two = parse_run_config("{\"model\": {\"level_count\": 2}}");
  EXPECT_EQ(two.model.strides, (std::vector<int>{4, 8}));
  const RunConfig four = parse_run_config("{\"model\": {\"level_count\": 4}}");
  EXPECT_EQ(four.model.strides, (std::vector<int>{4, 8, 16, 32}));
  // An explicit strides list wins.
  const RunConfig manual =
      parse_run_config("{\"model\": {\"level_count\": 2, \"strides\": [4, 8]}}");
  EXPECT_EQ(manual.model.strides, (std::vector<int>{4, 8}));
}

TEST(RunConfigParse, SharedOksSectionFeedsTraining) {
  const RunConfig cfg =
      parse_run_config("{\"oks\": {\"sigmas\": [0.2, 0.2, 0.2, 0.2, 0.2], \"scale_floor\": 3}}");
  EXPECT_EQ(cfg.train.oks.sigmas, cfg.oks.sigmas);
  EXPECT_DOUBLE_EQ(cfg.train.oks.scale_floor, 3.0);
}

TEST(RunConfigHash, StableAndSensitive) {
  const RunConfig a;
  const RunConfig b;
  EXPECT_EQ(run_config_hash(a), run_config_hash(b));
  EXPECT_EQ(run_config_hash(a).size(), 16u);
  RunConfig c;
  c.train.lr = 0.5;
  EXPECT_NE(run_config_hash(a), run_config_hash(c));
}

TEST(RunConfigLoad, ReadsFilesAndReportsMissingOnes) {
  const std::string path = std::string(::testing::TempDir()) + "posekit_cfg.json";
  {
    std::ofstream out(path);
    out << "{\"train\": {\"epochs\": 2}}";
  }
  EXPECT_EQ(load_run_config(path).train.epochs, 2);
  EXPECT_THROW(load_run_config("/no/such/config.json"), std::invalid_argument);
}
