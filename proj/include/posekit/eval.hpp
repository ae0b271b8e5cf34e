#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posekit/model.hpp"
#include "posekit/nms.hpp"
#include "posekit/oks.hpp"
#include "posekit/pose.hpp"

namespace posekit {

/// The ten evaluation thresholds {0.50, 0.55, ..., 0.95}.
std::vector<double> ap_thresholds();

/// COCO-style summary. Scenes are split by crowd_index into easy
/// (< cut_lo), medium ([cut_lo, cut_hi)) and hard (>= cut_hi) buckets; a
/// bucket with no scenes reports no AP rather than 0.
struct EvalResult {
  std::map<double, double> ap_per_threshold;
  double mean_ap = 0.0;  // arithmetic mean over the ten thresholds
  double ap50 = 0.0;
  double ap75 = 0.0;

  struct Bucket {
    std::string name;  // "easy" | "medium" | "hard"
    int scene_count = 0;
    std::optional<double> mean_ap;
  };
  std::vector<Bucket> buckets;
  std::vector<std::string> warnings;
};

/// Average precision at one OKS threshold. Within each scene, detections are
/// taken in descending score order (ties by input order) and matched to the
/// still-unmatched ground-truth pose of highest OKS >= threshold; everything
/// else is a false positive and unmatched ground truth counts as a miss. The
/// pooled, score-sorted hit/miss list is integrated with the 101-point
/// monotone precision interpolation. No ground truth anywhere gives 0 and
/// appends a warning. Throws on threshold outside (0, 1) or a scene-count
/// mismatch between dets and gts.
double oks_ap(const std::vector<std::vector<Detection>>& dets,
              const std::vector<std::vector<Pose>>& gts, double threshold, const OksParams& params,
              std::vector<std::string>* warnings = nullptr);

/// Full summary over the ten thresholds plus crowding buckets.
/// Throws when dets and scenes disagree in length or the cut points are not
/// ascending within [0, 1].
EvalResult summarize(const std::vector<std::vector<Detection>>& dets,
                     const std::vector<Scene>& scenes, const OksParams& params,
                     double cut_lo = 0.1, double cut_hi = 0.3);

struct RefinementGain {
  double mean_oks_coarse = 0.0;
  double mean_oks_refined = 0.0;
};

/// Decodes each scene's dense predictions twice -- once with the refinement
/// residual dropped, once with the full two-stage offsets -- and reports, per
/// mode, the mean over all ground-truth poses of the best OKS any detection
/// in the same scene reaches against that pose (0 when nothing is detected).
RefinementGain refinement_gain(const std::vector<DensePrediction>& preds,
                               const std::vector<std::vector<Pose>>& gts, const HeadConfig& cfg,
                               const OksParams& params);

/// Convenience wrapper: runs the model on every scene image first.
RefinementGain refinement_gain(const Model& model, const std::vector<Scene>& scenes,
                               const OksParams& params);

/// How the ground-truth-as-detections experiment assigns scores: a constant
/// 1.0 (suppression order = input order) or per-pose uniform random scores
/// drawn from one seeded stream.
enum class BoundScorePolicy { kUniformScores, kRandomScores };

struct NmsBoundRow {
  NmsKind kind = NmsKind::kOks;
  double threshold = 0.0;
  double recall = 0.0;   // kept detections / total ground truth
  double ap_hard = 0.0;  // oks_ap at 0.5 on hard-bucket scenes, kept as preds
};

/// OKS rows first, then IoU rows; thresholds ascending within each kind.
struct NmsBoundTable {
  std::vector<NmsBoundRow> rows;
};

/// Suppression upper bound: every ground-truth pose becomes a detection,
/// both NMS kinds run at each threshold, and a kept detection counts as a
/// recalled true pose. ap_hard re-scores the kept detections against the
/// full ground truth of scenes with crowd_index >= hard_cut. Throws when a
/// threshold lies outside (0, 1) or no scene has ground truth.
NmsBoundTable nms_upper_bound(const std::vector<Scene>& scenes,
                              const std::vector<double>& thresholds, const OksParams& params,
                              BoundScorePolicy policy = BoundScorePolicy::kUniformScores,
                              uint64_t seed = 0, double hard_cut = 0.3);

/// CSV with header "metric,value": ap@<threshold> rows, then mAP/AP50/AP75,
/// then ap_<bucket> and scenes_<bucket> rows (empty value for an AP-less
/// bucket). Values use shortest round-trip formatting (%.17g).
void write_eval_csv(const EvalResult& result, const std::string& path);

/// JSON object mirroring EvalResult; absent bucket APs serialize as null.
void write_eval_json(const EvalResult& result, const std::string& path);

/// CSV with header "nms_kind,threshold,recall,ap_hard"; kinds as oks/iou.
void write_bound_csv(const NmsBoundTable& table, const std::string& path);

/// JSON {"rows": [{nms_kind, threshold, recall, ap_hard}, ...]}.
void write_bound_json(const NmsBoundTable& table, const std::string& path);

}  // namespace posekit
