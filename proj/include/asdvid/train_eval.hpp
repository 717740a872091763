#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asdvid/model.hpp"
#include "asdvid/nn/adamw.hpp"
#include "asdvid/sampling.hpp"
#include "asdvid/types.hpp"

namespace asdvid {

struct TrainConfig {
  double base_lr = 1e-4;
  double min_lr = 1e-5;
  double weight_decay = 1e-4;
  int batch_size = 4;  // videos per optimizer step
  int epochs = 40;
  int k_folds = 5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Subject-exclusive stratified fold assignment.
struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of;

  int fold(const std::string& subject_id) const;
};

FoldAssignment make_folds(
    const std::vector<std::pair<std::string, Label>>& subjects, int k,
    std::uint64_t seed);

// Cosine annealing over the whole run, no restarts:
//   min_lr + 0.5*(base_lr - min_lr)*(1 + cos(pi*step/total_steps))
double lr_schedule(std::int64_t step, std::int64_t total_steps,
                   const TrainConfig& cfg);

// Mean of -log p(true class) over rows of probs (B,2); labels in {0,1}.
double cross_entropy(const NDArray& probs, const std::vector<int>& labels);

// Arithmetic mean of per-slice ASD probabilities.
double aggregate_video(const std::vector<double>& slice_asd_probs);

// 1 if prob >= threshold else 0; the tie goes to the positive (ASD) class.
int binarize(double prob, double threshold = 0.5);

struct PredictionRecord {
  std::string video_id;
  std::string subject_id;
  int fold_index = -1;
  int true_label = 0;
  int predicted = 0;
  double aggregated = 0.0;
  std::vector<double> slice_probs;  // ASD probability per slice
};

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct MetricsBlock {
  int fold_index = -1;  // -1 means pooled over every record
  ConfusionCounts counts;
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::uint64_t seed = 0;
  nlohmann::ordered_json config_echo;  // may be null
  MetricsBlock overall;
  std::vector<MetricsBlock> per_fold;
  std::vector<PredictionRecord> records;
};

// Accuracy = correct/total; F1 = 2TP/(2TP+FP+FN) with ASD positive, 0 when
// the denominator vanishes. Emits one block per fold index present.
EvalReport compute_metrics(const std::vector<PredictionRecord>& records);

// Structured-text report: one '#' timestamp header line, then JSON. Reruns
// on identical inputs are byte-identical apart from the header.
void write_eval_report(const std::filesystem::path& path, const EvalReport& r);
EvalReport read_eval_report(const std::filesystem::path& path);

// One preprocessed video ready for slicing.
struct TrainVideo {
  std::string video_id;
  std::string subject_id;
  Label label = Label::NT;
  std::vector<std::int64_t> kept;
  std::filesystem::path main_dir;
  std::filesystem::path fer_dir;
};

// Picks up preprocess output under work_dir/<video_id>/. Videos without a
// kept_indices file (rejected and skipped upstream) are left out; an empty
// result is an error.
std::vector<TrainVideo> collect_preprocessed(
    const DatasetManifest& manifest, const std::filesystem::path& work_dir);

FoldAssignment folds_for_videos(const std::vector<TrainVideo>& videos, int k,
                                std::uint64_t seed);

struct LossLogEntry {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

// One "step,lr,loss" line per optimizer step.
void write_loss_log(const std::filesystem::path& path,
                    const std::vector<LossLogEntry>& log);

// The optimization loop: epochs * ceil(n/batch_size) optimizer steps over
// `videos`, slices resampled per video per epoch, every random draw derived
// from run_seed. Aborts with NonFiniteLoss diagnostics. When `opt` is null
// a fresh optimizer is built from cfg.
std::vector<LossLogEntry> train_on_videos(DualStreamClassifier& model,
                                          const std::vector<TrainVideo>& videos,
                                          const TrainConfig& cfg,
                                          const SliceSpec& slices,
                                          std::uint64_t run_seed,
                                          FrameCache* cache = nullptr,
                                          nn::AdamW* opt = nullptr);

struct FoldRunResult {
  std::filesystem::path checkpoint_dir;
  std::vector<LossLogEntry> loss_log;
};

// Trains a fresh model on every fold except fold_index and writes
// out_dir/fold_<i>/ (checkpoint + loss_log.csv).
FoldRunResult train_fold(const std::vector<TrainVideo>& videos,
                         const FoldAssignment& folds, int fold_index,
                         const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const SliceSpec& slices,
                         const std::filesystem::path& out_dir,
                         FrameCache* cache = nullptr);

// Inference over `videos`: deterministic slice sampling keyed by video_id,
// per-slice probabilities aggregated to one record per video.
std::vector<PredictionRecord> evaluate_videos(
    const DualStreamClassifier& model, const std::vector<TrainVideo>& videos,
    const SliceSpec& slices, int fold_index, FrameCache* cache = nullptr);

// Full k-fold protocol: train each fold, reload its checkpoint, evaluate the
// held-out subjects, pool the records.
EvalReport run_cross_validation(const std::vector<TrainVideo>& videos,
                                const ModelConfig& model_cfg,
                                const TrainConfig& cfg, const SliceSpec& slices,
                                const std::filesystem::path& out_dir,
                                FrameCache* cache = nullptr);

}  // namespace asdvid
