// Command-line front end: wires synthesis, training, inference, evaluation,
// the NMS upper-bound sweep, the refinement comparison, and the gradient
// suite into reproducible runs. Every subcommand takes --config/--seed/--out
// and drops a run-manifest.json next to its outputs.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "posekit/coco_io.hpp"
#include "posekit/config.hpp"
#include "posekit/eval.hpp"
#include "posekit/gradsuite.hpp"
#include "posekit/model.hpp"
#include "posekit/parallel.hpp"
#include "posekit/synth.hpp"
#include "posekit/train.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path, "run config JSON (defaults apply when omitted)");
  sub->add_option("--seed", args->seed, "override the config's seed for this run")
      ->check(CLI::NonNegativeNumber)
      ->each([args](const std::string&) { args->seed_given = true; });
  sub->add_option("--out", args->out_dir, "output directory (created if missing)");
}

posekit::RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) return posekit::RunConfig{};
  return posekit::load_run_config(args.config_path);
}

// The manifest pins everything a rerun needs: the subcommand, the full
// canonical config, its hash, and the effective seed.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const posekit::RunConfig& cfg, std::uint64_t seed) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config"] = nlohmann::json::parse(posekit::serialize_run_config(cfg));
  doc["config_hash"] = posekit::run_config_hash(cfg);
  doc["seed"] = seed;
  doc["versions"]["posekit"] = kVersion;
  const std::string path = out_dir + "/run-manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

std::string prepare_out(const CommonArgs& args) {
  std::filesystem::create_directories(args.out_dir);
  return args.out_dir;
}

// Scenes for any pipeline command: a dataset directory when the config names
// one, otherwise synthesized on the spot.
std::vector<posekit::Scene> load_scenes(const posekit::RunConfig& cfg) {
  if (!cfg.data.dataset_dir.empty()) return posekit::read_dataset(cfg.data.dataset_dir);
  return posekit::synth_dataset(cfg.synth);
}

posekit::OksParams oks_for(const posekit::RunConfig& cfg) {
  posekit::OksParams p = cfg.oks;
  if (p.sigmas.empty()) p.sigmas = posekit::default_sigmas(cfg.model.joints);
  return p;
}

int run_synth(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  if (args.seed_given) cfg.synth.seed = args.seed;
  const std::string out = prepare_out(args);
  const std::vector<posekit::Scene> scenes = posekit::synth_dataset(cfg.synth);
  posekit::write_dataset(scenes, out);
  write_manifest(out, "synth", cfg, cfg.synth.seed);
  std::printf("wrote %d scenes to %s\n", static_cast<int>(scenes.size()), out.c_str());
  return 0;
}

int run_train(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  if (args.seed_given) cfg.train.seed = args.seed;
  const std::string out = prepare_out(args);
  const std::vector<posekit::Scene> scenes = load_scenes(cfg);
  posekit::Model model = posekit::build_model(cfg.model, cfg.train.seed);
  posekit::TrainResult result = posekit::train(model, scenes, cfg.train);
  posekit::save_checkpoint(result.model, out + "/checkpoint.json");
  posekit::write_loss_csv(result.history, out + "/loss.csv");
  write_manifest(out, "train", cfg, cfg.train.seed);
  const posekit::LossReport& last = result.history.back();
  std::printf("trained %d epochs on %d scenes, final total loss %.6g\n",
              static_cast<int>(result.history.size()), static_cast<int>(scenes.size()),
              last.total);
  return 0;
}

int run_infer(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  const std::string out = prepare_out(args);
  if (cfg.data.checkpoint.empty())
    throw std::invalid_argument("infer requires data.checkpoint in the config");
  const posekit::Model model = posekit::load_checkpoint(cfg.data.checkpoint);
  const std::vector<posekit::Scene> scenes = load_scenes(cfg);
  const posekit::OksParams params = oks_for(cfg);

  std::vector<std::vector<posekit::Detection>> dets(scenes.size());
  posekit::parallel_for(static_cast<int>(scenes.size()), [&](int i) {
    const posekit::Scene& s = scenes[i];
    posekit::Tensor image = posekit::Tensor::from({s.channels, s.height, s.width}, s.image);
    dets[i] = posekit::decode(posekit::forward_values(model, image), cfg.model, params);
  });

  posekit::ResultsPerImage results;
  int total = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    results.emplace_back(static_cast<std::int64_t>(i), dets[i]);
    total += static_cast<int>(dets[i].size());
  }
  posekit::write_results(results, out + "/results.json");
  write_manifest(out, "infer", cfg, args.seed_given ? args.seed : cfg.train.seed);
  std::printf("wrote %d detections over %d scenes\n", total, static_cast<int>(scenes.size()));
  return 0;
}

// Ground truth for eval: COCO keypoints when the config names a file (the
// crowding statistic is recomputed from the GT poses), otherwise the same
// scene source the other commands use.
std::vector<posekit::Scene> eval_scenes(const posekit::RunConfig& cfg,
                                        std::map<std::int64_t, int>* id_to_index) {
  if (!cfg.data.coco_gt.empty()) {
    const posekit::CocoDataset coco = posekit::read_coco_keypoints(cfg.data.coco_gt);
    std::vector<posekit::Scene> scenes;
    for (const auto& img : coco.images) {
      posekit::Scene s;
      s.height = img.image.height;
      s.width = img.image.width;
      s.gt_poses = img.gt_poses();
      s.crowd_index = posekit::mean_pairwise_box_iou(s.gt_poses);
      (*id_to_index)[img.image.id] = static_cast<int>(scenes.size());
      scenes.push_back(std::move(s));
    }
    return scenes;
  }
  std::vector<posekit::Scene> scenes = load_scenes(cfg);
  for (std::size_t i = 0; i < scenes.size(); ++i)
    (*id_to_index)[static_cast<std::int64_t>(i)] = static_cast<int>(i);
  return scenes;
}

int run_eval(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  const std::string out = prepare_out(args);
  if (cfg.data.results.empty())
    throw std::invalid_argument("eval requires data.results in the config");

  std::map<std::int64_t, int> id_to_index;
  const std::vector<posekit::Scene> scenes = eval_scenes(cfg, &id_to_index);
  std::vector<std::vector<posekit::Detection>> dets(scenes.size());
  for (const auto& [image_id, image_dets] : posekit::read_results(cfg.data.results)) {
    auto it = id_to_index.find(image_id);
    if (it == id_to_index.end())
      throw std::invalid_argument("results reference unknown image id " +
                                  std::to_string(image_id));
    dets[it->second] = image_dets;
  }

  posekit::EvalResult result =
      posekit::summarize(dets, scenes, oks_for(cfg), cfg.eval.bucket_lo, cfg.eval.bucket_hi);
  posekit::write_eval_csv(result, out + "/eval.csv");
  posekit::write_eval_json(result, out + "/eval.json");
  write_manifest(out, "eval", cfg, args.seed_given ? args.seed : 0);
  std::printf("mAP %.6g  AP50 %.6g  AP75 %.6g over %d scenes\n", result.mean_ap, result.ap50,
              result.ap75, static_cast<int>(scenes.size()));
  for (const std::string& w : result.warnings) std::printf("warning: %s\n", w.c_str());
  return 0;
}

int run_nms_bound(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  const std::string out = prepare_out(args);
  const std::uint64_t seed = args.seed_given ? args.seed : cfg.train.seed;
  const std::vector<posekit::Scene> scenes = load_scenes(cfg);
  posekit::NmsBoundTable table =
      posekit::nms_upper_bound(scenes, cfg.eval.bound_thresholds, oks_for(cfg),
                               cfg.eval.score_policy, seed, cfg.eval.bucket_hi);
  posekit::write_bound_csv(table, out + "/bound.csv");
  posekit::write_bound_json(table, out + "/bound.json");
  write_manifest(out, "nms-bound", cfg, seed);
  for (const posekit::NmsBoundRow& row : table.rows)
    std::printf("%s t=%.2f recall %.4f ap_hard %.4f\n",
                row.kind == posekit::NmsKind::kOks ? "oks" : "iou", row.threshold, row.recall,
                row.ap_hard);
  return 0;
}

int run_refine_gain(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  const std::string out = prepare_out(args);
  if (cfg.data.checkpoint.empty())
    throw std::invalid_argument("refine-gain requires data.checkpoint in the config");
  const posekit::Model model = posekit::load_checkpoint(cfg.data.checkpoint);
  const std::vector<posekit::Scene> scenes = load_scenes(cfg);
  posekit::RefinementGain gain = posekit::refinement_gain(model, scenes, oks_for(cfg));

  const std::string path = out + "/refine-gain.csv";
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("cannot write " + path);
  char line[128];
  std::snprintf(line, sizeof(line), "%.17g,%.17g\n", gain.mean_oks_coarse, gain.mean_oks_refined);
  csv << "mean_oks_coarse,mean_oks_refined\n" << line;
  write_manifest(out, "refine-gain", cfg, args.seed_given ? args.seed : 0);
  std::printf("mean best OKS: coarse %.6g, refined %.6g\n", gain.mean_oks_coarse,
              gain.mean_oks_refined);
  return 0;
}

int run_gradcheck(const CommonArgs& args) {
  posekit::RunConfig cfg = load_config(args);
  const std::string out = prepare_out(args);
  const std::uint64_t seed = args.seed_given ? args.seed : 0;
  posekit::GradSuiteReport report = posekit::run_gradient_suite(50, 1e-4, seed);

  const std::string path = out + "/gradcheck.csv";
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("cannot write " + path);
  csv << "op,configs,worst_rel_err,seconds,pass\n";
  for (const posekit::GradOpReport& op : report.ops) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.17g,%d\n", op.op.c_str(), op.configs,
                  op.worst_rel_err, op.seconds, op.pass ? 1 : 0);
    csv << line;
    std::printf("%-22s %3d configs  worst rel err %.3e  %s\n", op.op.c_str(), op.configs,
                op.worst_rel_err, op.pass ? "pass" : "FAIL");
  }
  write_manifest(out, "gradcheck", cfg, seed);
  std::printf("gradient suite %s in %.2fs\n", report.pass ? "passed" : "FAILED", report.seconds);
  return report.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posekit: single-stage multi-person pose estimation, desk scale"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, infer_args, eval_args, bound_args, gain_args, grad_args;

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset (manifest.json + images.f32) under --out");
  add_common(synth, &synth_args);

  CLI::App* train = app.add_subcommand(
      "train",
      "train the toy model; writes checkpoint.json and loss.csv "
      "(columns: epoch,coarse_l2,refine_l2,focal,heatmap_l2,total)");
  add_common(train, &train_args);

  CLI::App* infer = app.add_subcommand(
      "infer", "run a checkpoint over scenes; writes results.json (image_id = scene index)");
  add_common(infer, &infer_args);

  CLI::App* eval = app.add_subcommand(
      "eval",
      "score results against ground truth; writes eval.csv (columns: metric,value) "
      "and eval.json");
  add_common(eval, &eval_args);

  CLI::App* bound = app.add_subcommand(
      "nms-bound",
      "ground-truth-as-detections suppression sweep; writes bound.csv "
      "(columns: nms_kind,threshold,recall,ap_hard) and bound.json");
  add_common(bound, &bound_args);

  CLI::App* gain = app.add_subcommand(
      "refine-gain",
      "compare coarse-only vs refined decoding; writes refine-gain.csv "
      "(columns: mean_oks_coarse,mean_oks_refined)");
  add_common(gain, &gain_args);

  CLI::App* grad = app.add_subcommand(
      "gradcheck",
      "finite-difference audit of every differentiable op; writes gradcheck.csv "
      "(columns: op,configs,worst_rel_err,seconds,pass); nonzero exit on failure");
  add_common(grad, &grad_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Collapse CLI11's exit-code zoo into the documented taxonomy:
    // 0 for --help, 1 for every flag/usage problem.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args);
    if (infer->parsed()) return run_infer(infer_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (bound->parsed()) return run_nms_bound(bound_args);
    if (gain->parsed()) return run_refine_gain(gain_args);
    if (grad->parsed()) return run_gradcheck(grad_args);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return std::string(e.what()).find("diverged") != std::string::npos ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 2;
}
