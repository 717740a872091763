#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asdvid/checkpoint.hpp"
#include "asdvid/config.hpp"
#include "asdvid/errors.hpp"
#include "asdvid/manifest.hpp"
#include "asdvid/preprocess.hpp"
#include "asdvid/synthetic.hpp"
#include "asdvid/train_eval.hpp"

namespace {

using namespace asdvid;

// Stable exit codes: 0 success, 2 config, 3 IO/data, 4 rejection,
// 5 numeric, 6 checkpoint, 7 missing/short video.
int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidLabel:
    case ErrorKind::TooFewSubjects:
    case ErrorKind::OutOfRangeStep:
    case ErrorKind::OutOfRangeProbability:
    case ErrorKind::SequenceTooLong:
      return 2;
    case ErrorKind::AllFramesRejected:
      return 4;
    case ErrorKind::NonFiniteLoss:
      return 5;
    case ErrorKind::CheckpointMismatch:
      return 6;
    case ErrorKind::VideoTooShort:
      return 7;
    default:
      return 3;
  }
}

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << error_kind_name(e.kind()) << ": " << e.what()
              << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

std::string prob_str(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const SyntheticSpec spec = load_synthetic_spec(spec_path);
  const DatasetManifest manifest = generate_synthetic(spec, out_dir);
  std::set<std::string> subjects;
  for (const auto& r : manifest.records) subjects.insert(r.subject_id);
  std::cout << manifest.records.size() << " videos, " << subjects.size()
            << " subjects\n";
  std::cout << "manifest: "
            << (std::filesystem::path(out_dir) / "manifest.jsonl").string()
            << "\n";
  return 0;
}

int cmd_preprocess(const RunConfig& cfg, bool skip_rejected) {
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const PreprocessOptions opts{cfg.pose_gate, cfg.crop_margin, cfg.out_size};

  std::int64_t total = 0, kept = 0;
  std::vector<std::string> rejected;
  for (const auto& rec : manifest.records) {
    try {
      const VideoPreprocessResult res =
          preprocess_video(rec, opts, cfg.workdir);
      total += std::int64_t(res.total_frames);
      kept += std::int64_t(res.kept.size());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::AllFramesRejected && skip_rejected) {
        rejected.push_back(rec.video_id);
        total += rec.frame_count;
        continue;
      }
      throw;
    }
  }
  const double retention = total ? 100.0 * double(kept) / double(total) : 0.0;
  char pct[16];
  std::snprintf(pct, sizeof pct, "%.1f", retention);
  std::cout << "kept " << kept << " of " << total << " frames (" << pct
            << "% retention)\n";
  if (!rejected.empty()) {
    std::cout << "rejected videos (" << rejected.size() << "):";
    for (const auto& id : rejected) std::cout << " " << id;
    std::cout << "\n";
  }
  std::cout << "output: " << cfg.workdir.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, int fold, bool all_folds) {
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const std::vector<TrainVideo> videos =
      collect_preprocessed(manifest, cfg.workdir);
  const FoldAssignment folds =
      folds_for_videos(videos, cfg.train.k_folds, cfg.train.seed);

  std::vector<int> fold_list;
  if (all_folds)
    for (int f = 0; f < folds.k; ++f) fold_list.push_back(f);
  else
    fold_list.push_back(fold);

  FrameCache cache;
  for (int f : fold_list) {
    const FoldRunResult res = train_fold(videos, folds, f, cfg.model,
                                         cfg.train, cfg.slices,
                                         cfg.checkpoint, &cache);
    const double final_loss =
        res.loss_log.empty() ? 0.0 : res.loss_log.back().loss;
    std::cout << "fold " << f << ": " << res.loss_log.size()
              << " steps, final loss " << prob_str(final_loss)
              << ", checkpoint " << res.checkpoint_dir.string() << "\n";
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, int fold, bool all_folds,
                 const std::string& split) {
  if (split != "test" && split != "train" && split != "all")
    fail(ErrorKind::ConfigError,
         "--split must be test, train or all, got '" + split + "'");
  if (cfg.report.empty())
    fail(ErrorKind::ConfigError, "config: report path required for evaluate");

  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const std::vector<TrainVideo> videos =
      collect_preprocessed(manifest, cfg.workdir);
  const FoldAssignment folds =
      folds_for_videos(videos, cfg.train.k_folds, cfg.train.seed);

  std::vector<int> fold_list;
  if (all_folds)
    for (int f = 0; f < folds.k; ++f) fold_list.push_back(f);
  else
    fold_list.push_back(fold);

  FrameCache cache;
  std::vector<PredictionRecord> records;
  for (int f : fold_list) {
    if (f < 0 || f >= folds.k)
      fail(ErrorKind::ConfigError, "fold " + std::to_string(f) +
                                       " outside [0, " +
                                       std::to_string(folds.k) + ")");
    DualStreamClassifier model(cfg.model, 0);
    load_checkpoint(cfg.checkpoint / ("fold_" + std::to_string(f)), model);

    std::vector<TrainVideo> subset;
    for (const auto& v : videos) {
      const bool in_fold = folds.fold(v.subject_id) == f;
      if (split == "all" || (split == "test" && in_fold) ||
          (split == "train" && !in_fold))
        subset.push_back(v);
    }
    auto recs = evaluate_videos(model, subset, cfg.slices, f, &cache);
    records.insert(records.end(), recs.begin(), recs.end());
  }

  EvalReport report = compute_metrics(records);
  report.seed = cfg.train.seed;
  report.config_echo = {{"model", model_config_to_json(cfg.model)},
                        {"train", train_config_to_json(cfg.train)},
                        {"slices",
                         {{"num_slices", cfg.slices.num_slices},
                          {"slice_len", cfg.slices.slice_len},
                          {"window", to_string(cfg.slices.window)},
                          {"seed", cfg.slices.seed}}},
                        {"split", split}};
  write_eval_report(cfg.report, report);

  std::cout << "accuracy " << prob_str(report.overall.accuracy) << " f1 "
            << prob_str(report.overall.f1) << " ("
            << report.overall.counts.total() << " videos)\n";
  for (const auto& m : report.per_fold)
    std::cout << "  fold " << m.fold_index << ": accuracy "
              << prob_str(m.accuracy) << " f1 " << prob_str(m.f1) << " ("
              << m.counts.total() << " videos)\n";
  std::cout << "report: " << cfg.report.string() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& video_id, int fold) {
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const VideoRecord* rec = manifest.find(video_id);
  if (!rec) {
    std::cerr << "error: video '" << video_id << "' not in manifest\n";
    return 7;
  }
  const std::filesystem::path video_dir = cfg.workdir / video_id;
  if (!std::filesystem::exists(video_dir / "kept_indices.txt")) {
    std::cerr << "error: video '" << video_id
              << "' has no preprocessed frames under " << cfg.workdir.string()
              << "\n";
    return 7;
  }

  TrainVideo v;
  v.video_id = rec->video_id;
  v.subject_id = rec->subject_id;
  v.label = rec->label;
  v.kept = read_kept_indices(video_dir / "kept_indices.txt");
  v.main_dir = video_dir / "main";
  v.fer_dir = video_dir / "fer";

  DualStreamClassifier model(cfg.model, 0);
  load_checkpoint(cfg.checkpoint / ("fold_" + std::to_string(fold)), model);

  const auto records = evaluate_videos(model, {v}, cfg.slices, fold);
  const PredictionRecord& p = records.front();
  std::cout << "video " << p.video_id << " subject " << p.subject_id
            << " true " << to_string(Label(p.true_label)) << "\n";
  std::cout << "slice ASD probabilities:";
  for (double sp : p.slice_probs) std::cout << " " << prob_str(sp);
  std::cout << "\n";
  std::cout << "aggregated ASD probability: " << prob_str(p.aggregated)
            << "\n";
  std::cout << "predicted label: " << p.predicted << " ("
            << to_string(Label(p.predicted)) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video-based ASD/NT behavioral classification pipeline"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  synth->add_option("spec", spec_path, "synthetic spec JSON file")->required();
  synth->add_option("-o,--out", out_dir, "output directory")->required();

  std::string config_path;
  std::vector<std::string> overrides;
  bool skip_rejected = false;
  auto* preprocess =
      app.add_subcommand("preprocess", "pose-gate, crop and align frames");
  preprocess->add_option("-c,--config", config_path, "run config JSON")
      ->required();
  preprocess->add_option("--set", overrides, "override config key=value")->allow_extra_args(false);
  preprocess->add_flag("--skip-rejected", skip_rejected,
                       "skip videos whose every frame fails the pose gate");

  int fold = -1;
  bool all_folds = false;
  auto* train = app.add_subcommand("train", "train one fold or all folds");
  train->add_option("-c,--config", config_path, "run config JSON")->required();
  train->add_option("--set", overrides, "override config key=value")->allow_extra_args(false);
  auto* train_fold_opt = train->add_option("--fold", fold, "fold index");
  auto* train_all_opt =
      train->add_flag("--all-folds", all_folds, "train every fold");
  train_fold_opt->excludes(train_all_opt);

  std::string split = "test";
  auto* evaluate =
      app.add_subcommand("evaluate", "score checkpoints, write a report");
  evaluate->add_option("-c,--config", config_path, "run config JSON")
      ->required();
  evaluate->add_option("--set", overrides, "override config key=value")->allow_extra_args(false);
  auto* eval_fold_opt = evaluate->add_option("--fold", fold, "fold index");
  auto* eval_all_opt =
      evaluate->add_flag("--all-folds", all_folds, "evaluate every fold");
  eval_fold_opt->excludes(eval_all_opt);
  evaluate->add_option("--split", split,
                       "videos to score per fold: test, train or all");

  std::string video_id;
  int predict_fold = 0;
  auto* predict = app.add_subcommand("predict", "predict one video");
  predict->add_option("-c,--config", config_path, "run config JSON")
      ->required();
  predict->add_option("--set", overrides, "override config key=value")->allow_extra_args(false);
  predict->add_option("video_id", video_id, "video to score")->required();
  predict->add_option("--fold", predict_fold, "checkpoint fold to load");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*synth) return run_guarded([&] { return cmd_synth(spec_path, out_dir); });

  return run_guarded([&] {
    const RunConfig cfg = load_run_config(config_path, overrides);
    if (*preprocess) return cmd_preprocess(cfg, skip_rejected);
    if (*train) {
      if (!all_folds && fold < 0)
        fail(ErrorKind::ConfigError, "train needs --fold N or --all-folds");
      return cmd_train(cfg, fold, all_folds);
    }
    if (*evaluate) {
      if (!all_folds && fold < 0) all_folds = true;  // default: every fold
      return cmd_evaluate(cfg, fold, all_folds, split);
    }
    if (*predict) return cmd_predict(cfg, video_id, predict_fold);
    return 2;
  });
}
