#include "posekit/eval.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "posekit/parallel.hpp"
#include "posekit/rng.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_threshold(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

void append_unique(std::vector<std::string>* out, const std::vector<std::string>& extra,
                   const std::string& prefix = "") {
  if (!out) return;
  for (const auto& w : extra) {
    const std::string line = prefix + w;
    if (std::find(out->begin(), out->end(), line) == out->end()) out->push_back(line);
  }
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::vector<double> ap_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

double oks_ap(const std::vector<std::vector<Detection>>& dets,
              const std::vector<std::vector<Pose>>& gts, double threshold, const OksParams& params,
              std::vector<std::string>* warnings) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("oks_ap: threshold must lie in (0, 1), got " + fmt17(threshold));
  if (dets.size() != gts.size())
    throw std::invalid_argument("oks_ap: " + std::to_string(dets.size()) +
                                " detection scenes vs " + std::to_string(gts.size()) +
                                " ground-truth scenes");

  int total_gt = 0;
  for (const auto& g : gts) total_gt += static_cast<int>(g.size());
  if (total_gt == 0) {
    if (warnings) warnings->push_back("oks_ap: no ground truth in any scene; AP defined as 0");
    return 0.0;
  }

  struct Entry {
    double score;
    bool tp;
  };
  std::vector<Entry> pooled;

  for (size_t s = 0; s < dets.size(); ++s) {
    const auto& scene_dets = dets[s];
    const auto& scene_gts = gts[s];
    std::vector<int> order(scene_dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scene_dets[a].score > scene_dets[b].score; });
    std::vector<bool> gt_used(scene_gts.size(), false);
    for (int di : order) {
      int best = -1;
      double best_oks = 0.0;
      for (size_t gi = 0; gi < scene_gts.size(); ++gi) {
        if (gt_used[gi]) continue;
        const double o = oks(scene_dets[di].pose, scene_gts[gi], params);
        if (o < threshold) continue;
        if (best < 0 || o > best_oks) {
          best = static_cast<int>(gi);
          best_oks = o;
        }
      }
      if (best >= 0) gt_used[static_cast<size_t>(best)] = true;
      pooled.push_back({scene_dets[di].score, best >= 0});
    }
  }

  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });

  std::vector<double> precision(pooled.size()), recall(pooled.size());
  int tp = 0, fp = 0;
  for (size_t i = 0; i < pooled.size(); ++i) {
    pooled[i].tp ? ++tp : ++fp;
    precision[i] = static_cast<double>(tp) / (tp + fp);
    recall[i] = static_cast<double>(tp) / total_gt;
  }
  // Monotone envelope from the right, then 101 evenly spaced recall samples.
  for (size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double ap = 0.0;
  for (int ri = 0; ri <= 100; ++ri) {
    const double r = ri / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) ap += precision[static_cast<size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

EvalResult summarize(const std::vector<std::vector<Detection>>& dets,
                     const std::vector<Scene>& scenes, const OksParams& params, double cut_lo,
                     double cut_hi) {
  if (dets.size() != scenes.size())
    throw std::invalid_argument("summarize: " + std::to_string(dets.size()) +
                                " detection scenes vs " + std::to_string(scenes.size()) +
                                " scenes");
  if (!(cut_lo >= 0.0 && cut_lo < cut_hi && cut_hi <= 1.0))
    throw std::invalid_argument("summarize: bucket cut points must be ascending within [0, 1]");

  std::vector<std::vector<Pose>> gts(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) gts[i] = scenes[i].gt_poses;

  EvalResult result;
  const std::vector<double> thresholds = ap_thresholds();
  double sum = 0.0;
  for (double t : thresholds) {
    std::vector<std::string> w;
    const double ap = oks_ap(dets, gts, t, params, &w);
    result.ap_per_threshold[t] = ap;
    sum += ap;
    append_unique(&result.warnings, w);
  }
  result.mean_ap = sum / thresholds.size();
  result.ap50 = result.ap_per_threshold.at(thresholds[0]);
  result.ap75 = result.ap_per_threshold.at(thresholds[5]);

  const auto in_bucket = [&](double c, int b) {
    if (b == 0) return c < cut_lo;
    if (b == 1) return c >= cut_lo && c < cut_hi;
    return c >= cut_hi;
  };
  const char* names[] = {"easy", "medium", "hard"};
  for (int b = 0; b < 3; ++b) {
    EvalResult::Bucket bucket;
    bucket.name = names[b];
    std::vector<std::vector<Detection>> bd;
    std::vector<std::vector<Pose>> bg;
    for (size_t i = 0; i < scenes.size(); ++i) {
      if (!in_bucket(scenes[i].crowd_index, b)) continue;
      bd.push_back(dets[i]);
      bg.push_back(gts[i]);
    }
    bucket.scene_count = static_cast<int>(bd.size());
    if (bucket.scene_count > 0) {
      double bsum = 0.0;
      for (double t : thresholds) {
        std::vector<std::string> w;
        bsum += oks_ap(bd, bg, t, params, &w);
        append_unique(&result.warnings, w, std::string("bucket ") + names[b] + ": ");
      }
      bucket.mean_ap = bsum / thresholds.size();
    }
    result.buckets.push_back(std::move(bucket));
  }
  return result;
}

RefinementGain refinement_gain(const std::vector<DensePrediction>& preds,
                               const std::vector<std::vector<Pose>>& gts, const HeadConfig& cfg,
                               const OksParams& params) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("refinement_gain: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(gts.size()) +
                                " ground-truth scenes");

  std::vector<double> coarse_sum(preds.size(), 0.0), refined_sum(preds.size(), 0.0);
  std::vector<int> counts(preds.size(), 0);
  parallel_for(static_cast<int>(preds.size()), [&](int i) {
    const auto refined = decode(preds[i], cfg, params, false);
    const auto coarse = decode(preds[i], cfg, params, true);
    for (const Pose& gt : gts[i]) {
      double best_r = 0.0, best_c = 0.0;
      for (const auto& d : refined) best_r = std::max(best_r, oks(d.pose, gt, params));
      for (const auto& d : coarse) best_c = std::max(best_c, oks(d.pose, gt, params));
      refined_sum[i] += best_r;
      coarse_sum[i] += best_c;
      ++counts[i];
    }
  });

  RefinementGain gain;
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  if (total == 0) return gain;
  gain.mean_oks_coarse = std::accumulate(coarse_sum.begin(), coarse_sum.end(), 0.0) / total;
  gain.mean_oks_refined = std::accumulate(refined_sum.begin(), refined_sum.end(), 0.0) / total;
  return gain;
}

RefinementGain refinement_gain(const Model& model, const std::vector<Scene>& scenes,
                               const OksParams& params) {
  std::vector<DensePrediction> preds(scenes.size());
  std::vector<std::vector<Pose>> gts(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), [&](int i) {
    const Scene& s = scenes[i];
    preds[i] = forward_values(
        model, Tensor::from({s.channels, s.height, s.width}, s.image), false);
    gts[i] = s.gt_poses;
  });
  return refinement_gain(preds, gts, model.config, params);
}

NmsBoundTable nms_upper_bound(const std::vector<Scene>& scenes,
                              const std::vector<double>& thresholds, const OksParams& params,
                              BoundScorePolicy policy, uint64_t seed, double hard_cut) {
  for (double t : thresholds)
    if (!(t > 0.0 && t < 1.0))
      throw std::invalid_argument("nms_upper_bound: threshold must lie in (0, 1), got " +
                                  fmt17(t));
  if (!(hard_cut >= 0.0 && hard_cut <= 1.0))
    throw std::invalid_argument("nms_upper_bound: hard_cut must lie in [0, 1]");

  int total_gt = 0;
  for (const auto& s : scenes) total_gt += static_cast<int>(s.gt_poses.size());
  if (total_gt == 0)
    throw std::invalid_argument("nms_upper_bound: no scene has ground-truth poses");

  // Scores are drawn once, in scene order, so every (kind, threshold) pair
  // suppresses the same scored detections.
  Rng rng(seed);
  std::vector<std::vector<Detection>> scene_dets(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    for (const Pose& gt : scenes[i].gt_poses) {
      Detection d;
      d.pose = gt;
      d.score = policy == BoundScorePolicy::kUniformScores ? 1.0 : rng.uniform();
      scene_dets[i].push_back(std::move(d));
    }
  }

  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());

  NmsBoundTable table;
  for (const NmsKind kind : {NmsKind::kOks, NmsKind::kIou}) {
    for (double t : sorted) {
      std::vector<std::vector<Detection>> kept(scenes.size());
      parallel_for(static_cast<int>(scenes.size()), [&](int i) {
        kept[i] = greedy_nms(scene_dets[i], kind, t, INT_MAX, params);
      });

      int kept_total = 0;
      std::vector<std::vector<Detection>> hard_dets;
      std::vector<std::vector<Pose>> hard_gts;
      for (size_t i = 0; i < scenes.size(); ++i) {
        kept_total += static_cast<int>(kept[i].size());
        if (scenes[i].crowd_index >= hard_cut) {
          hard_dets.push_back(kept[i]);
          hard_gts.push_back(scenes[i].gt_poses);
        }
      }

      NmsBoundRow row;
      row.kind = kind;
      row.threshold = t;
      row.recall = static_cast<double>(kept_total) / total_gt;
      row.ap_hard = oks_ap(hard_dets, hard_gts, 0.5, params);
      table.rows.push_back(row);
    }
  }
  return table;
}

void write_eval_csv(const EvalResult& result, const std::string& path) {
  auto out = open_for_write(path);
  out << "metric,value\n";
  for (const auto& [t, ap] : result.ap_per_threshold)
    out << "ap@" << fmt_threshold(t) << "," << fmt17(ap) << "\n";
  out << "mAP," << fmt17(result.mean_ap) << "\n";
  out << "AP50," << fmt17(result.ap50) << "\n";
  out << "AP75," << fmt17(result.ap75) << "\n";
  for (const auto& b : result.buckets) {
    out << "ap_" << b.name << "," << (b.mean_ap ? fmt17(*b.mean_ap) : "") << "\n";
    out << "scenes_" << b.name << "," << b.scene_count << "\n";
  }
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

void write_eval_json(const EvalResult& result, const std::string& path) {
  nlohmann::json doc;
  nlohmann::json per;
  for (const auto& [t, ap] : result.ap_per_threshold) per[fmt_threshold(t)] = ap;
  doc["ap_per_threshold"] = per;
  doc["mAP"] = result.mean_ap;
  doc["AP50"] = result.ap50;
  doc["AP75"] = result.ap75;
  doc["buckets"] = nlohmann::json::array();
  for (const auto& b : result.buckets) {
    nlohmann::json jb;
    jb["name"] = b.name;
    jb["scene_count"] = b.scene_count;
    jb["mean_ap"] = b.mean_ap ? nlohmann::json(*b.mean_ap) : nlohmann::json(nullptr);
    doc["buckets"].push_back(jb);
  }
  doc["warnings"] = result.warnings;
  auto out = open_for_write(path);
  out << doc.dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

void write_bound_csv(const NmsBoundTable& table, const std::string& path) {
  auto out = open_for_write(path);
  out << "nms_kind,threshold,recall,ap_hard\n";
  for (const auto& r : table.rows)
    out << (r.kind == NmsKind::kOks ? "oks" : "iou") << "," << fmt17(r.threshold) << ","
        << fmt17(r.recall) << "," << fmt17(r.ap_hard) << "\n";
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

void write_bound_json(const NmsBoundTable& table, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json jr;
    jr["nms_kind"] = r.kind == NmsKind::kOks ? "oks" : "iou";
    jr["threshold"] = r.threshold;
    jr["recall"] = r.recall;
    jr["ap_hard"] = r.ap_hard;
    rows.push_back(jr);
  }
  nlohmann::json doc;
  doc["rows"] = rows;
  auto out = open_for_write(path);
  out << doc.dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

}  // namespace posekit
