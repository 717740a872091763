#include "asdvid/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "asdvid/checkpoint.hpp"
#include "asdvid/errors.hpp"
#include "asdvid/json_util.hpp"
#include "asdvid/preprocess.hpp"
#include "asdvid/rng.hpp"

namespace asdvid {

void TrainConfig::validate() const {
  if (!(min_lr < base_lr))
    fail(ErrorKind::ConfigError, "min_lr must be < base_lr");
  if (base_lr <= 0.0 || min_lr <= 0.0)
    fail(ErrorKind::ConfigError, "learning rates must be positive");
  if (batch_size < 1) fail(ErrorKind::ConfigError, "batch_size must be >= 1");
  if (epochs < 1) fail(ErrorKind::ConfigError, "epochs must be >= 1");
  if (k_folds < 2) fail(ErrorKind::ConfigError, "k_folds must be >= 2");
  if (weight_decay < 0.0)
    fail(ErrorKind::ConfigError, "weight_decay must be >= 0");
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  return {{"base_lr", cfg.base_lr},
          {"min_lr", cfg.min_lr},
          {"weight_decay", cfg.weight_decay},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"k_folds", cfg.k_folds},
          {"seed", cfg.seed},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"eps", cfg.eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown_fields(j,
                        {"base_lr", "min_lr", "weight_decay", "batch_size",
                         "epochs", "k_folds", "seed", "beta1", "beta2", "eps"},
                        "train config");
  TrainConfig cfg;
  if (j.contains("base_lr")) cfg.base_lr = j.at("base_lr").get<double>();
  if (j.contains("min_lr")) cfg.min_lr = j.at("min_lr").get<double>();
  if (j.contains("weight_decay"))
    cfg.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("k_folds")) cfg.k_folds = j.at("k_folds").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
  cfg.validate();
  return cfg;
}

int FoldAssignment::fold(const std::string& subject_id) const {
  auto it = fold_of.find(subject_id);
  if (it == fold_of.end())
    fail(ErrorKind::ConfigError,
         "subject '" + subject_id + "' has no fold assignment");
  return it->second;
}

FoldAssignment make_folds(
    const std::vector<std::pair<std::string, Label>>& subjects, int k,
    std::uint64_t seed) {
  if (k < 2)
    fail(ErrorKind::TooFewSubjects,
         "k must be >= 2, got " + std::to_string(k));

  std::vector<std::string> by_class[2];
  std::set<std::string> seen;
  for (const auto& [id, label] : subjects) {
    if (!seen.insert(id).second)
      fail(ErrorKind::SchemaViolation, "duplicate subject_id '" + id + "'");
    by_class[std::size_t(label)].push_back(id);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < std::size_t(k))
      fail(ErrorKind::TooFewSubjects,
           "class " + std::string(to_string(Label(c))) + " has " +
               std::to_string(by_class[c].size()) + " subjects, need >= " +
               std::to_string(k) + " for stratified folds");
  }

  FoldAssignment out;
  out.k = k;
  std::mt19937_64 rng = make_engine(derive_seed(seed, "folds"));
  for (int c = 0; c < 2; ++c) {
    // input-order independence: canonical order, then a seeded shuffle
    std::sort(by_class[c].begin(), by_class[c].end());
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    for (std::size_t i = 0; i < by_class[c].size(); ++i)
      out.fold_of[by_class[c][i]] = int(i % std::size_t(k));
  }
  return out;
}

double lr_schedule(std::int64_t step, std::int64_t total_steps,
                   const TrainConfig& cfg) {
  if (total_steps < 1)
    fail(ErrorKind::OutOfRangeStep, "total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    fail(ErrorKind::OutOfRangeStep,
         "step " + std::to_string(step) + " outside [0, " +
             std::to_string(total_steps) + "]");
  if (step == 0) return cfg.base_lr;
  if (step == total_steps) return cfg.min_lr;
  const double frac = double(step) / double(total_steps);
  return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) *
                          (1.0 + std::cos(std::numbers::pi * frac));
}

double cross_entropy(const NDArray& probs, const std::vector<int>& labels) {
  if (probs.ndim() != 2 || probs.dim(1) != 2 || probs.dim(0) != labels.size())
    fail(ErrorKind::ShapeMismatch,
         "cross_entropy: probabilities " + probs.shape_str() + " vs " +
             std::to_string(labels.size()) + " labels");
  const std::size_t b_n = probs.dim(0);
  double sum = 0.0;
  for (std::size_t b = 0; b < b_n; ++b) {
    const int y = labels[b];
    if (y != 0 && y != 1)
      fail(ErrorKind::InvalidLabel,
           "label must be 0 or 1, got " + std::to_string(y));
    sum += -std::log(probs[b * 2 + std::size_t(y)]);
  }
  return sum / double(b_n);
}

double aggregate_video(const std::vector<double>& slice_asd_probs) {
  if (slice_asd_probs.empty())
    fail(ErrorKind::EmptyPredictionList, "no slice predictions to aggregate");
  const double sum =
      std::accumulate(slice_asd_probs.begin(), slice_asd_probs.end(), 0.0);
  return sum / double(slice_asd_probs.size());
}

int binarize(double prob, double threshold) {
  if (!(prob >= 0.0 && prob <= 1.0))
    fail(ErrorKind::OutOfRangeProbability,
         "probability " + std::to_string(prob) + " outside [0,1]");
  return prob >= threshold ? 1 : 0;
}

namespace {

MetricsBlock metrics_for(const std::vector<PredictionRecord>& records,
                         int fold_index) {
  MetricsBlock m;
  m.fold_index = fold_index;
  for (const auto& r : records) {
    if (fold_index >= 0 && r.fold_index != fold_index) continue;
    if (r.true_label == 1)
      (r.predicted == 1 ? m.counts.tp : m.counts.fn) += 1;
    else
      (r.predicted == 1 ? m.counts.fp : m.counts.tn) += 1;
  }
  const std::int64_t total = m.counts.total();
  m.accuracy = total ? double(m.counts.tp + m.counts.tn) / double(total) : 0.0;
  const std::int64_t denom = 2 * m.counts.tp + m.counts.fp + m.counts.fn;
  m.f1 = denom ? 2.0 * double(m.counts.tp) / double(denom) : 0.0;
  return m;
}

}  // namespace

EvalReport compute_metrics(const std::vector<PredictionRecord>& records) {
  if (records.empty())
    fail(ErrorKind::EmptyRecords, "no prediction records to score");
  EvalReport report;
  report.records = records;
  report.overall = metrics_for(records, -1);
  std::set<int> fold_indices;
  for (const auto& r : records)
    if (r.fold_index >= 0) fold_indices.insert(r.fold_index);
  for (int f : fold_indices) report.per_fold.push_back(metrics_for(records, f));
  return report;
}

namespace {

nlohmann::ordered_json metrics_to_json(const MetricsBlock& m) {
  return {{"fold_index", m.fold_index}, {"tp", m.counts.tp},
          {"fp", m.counts.fp},         {"tn", m.counts.tn},
          {"fn", m.counts.fn},         {"num_videos", m.counts.total()},
          {"accuracy", m.accuracy},    {"f1", m.f1}};
}

MetricsBlock metrics_from_json(const nlohmann::json& j) {
  MetricsBlock m;
  m.fold_index = j.at("fold_index").get<int>();
  m.counts.tp = j.at("tp").get<std::int64_t>();
  m.counts.fp = j.at("fp").get<std::int64_t>();
  m.counts.tn = j.at("tn").get<std::int64_t>();
  m.counts.fn = j.at("fn").get<std::int64_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.f1 = j.at("f1").get<double>();
  return m;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void write_eval_report(const std::filesystem::path& path,
                       const EvalReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["config"] = r.config_echo.is_null() ? nlohmann::ordered_json(nullptr)
                                        : r.config_echo;
  j["overall"] = metrics_to_json(r.overall);
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& m : r.per_fold) folds.push_back(metrics_to_json(m));
  j["folds"] = std::move(folds);
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"video_id", rec.video_id},
                       {"subject_id", rec.subject_id},
                       {"fold_index", rec.fold_index},
                       {"true_label", rec.true_label},
                       {"predicted", rec.predicted},
                       {"aggregated", rec.aggregated},
                       {"slice_probs", rec.slice_probs}});
  }
  j["records"] = std::move(records);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path.string());
  out << "# generated " << utc_timestamp() << "\n" << j.dump(2) << "\n";
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  std::string body, line;
  bool in_header = true;
  while (std::getline(in, line)) {
    if (in_header && !line.empty() && line[0] == '#') continue;
    in_header = false;
    body += line;
    body += '\n';
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded())
    fail(ErrorKind::SchemaViolation, path.string() + ": invalid report JSON");

  EvalReport r;
  r.seed = j.value("seed", std::uint64_t(0));
  if (j.contains("config") && !j.at("config").is_null())
    r.config_echo = j.at("config");
  r.overall = metrics_from_json(j.at("overall"));
  for (const auto& m : j.at("folds")) r.per_fold.push_back(metrics_from_json(m));
  for (const auto& rec : j.at("records")) {
    PredictionRecord p;
    p.video_id = rec.at("video_id").get<std::string>();
    p.subject_id = rec.value("subject_id", std::string());
    p.fold_index = rec.at("fold_index").get<int>();
    p.true_label = rec.at("true_label").get<int>();
    p.predicted = rec.at("predicted").get<int>();
    p.aggregated = rec.at("aggregated").get<double>();
    p.slice_probs = rec.at("slice_probs").get<std::vector<double>>();
    r.records.push_back(std::move(p));
  }
  return r;
}

std::vector<TrainVideo> collect_preprocessed(
    const DatasetManifest& manifest, const std::filesystem::path& work_dir) {
  std::vector<TrainVideo> out;
  for (const auto& rec : manifest.records) {
    const std::filesystem::path video_dir = work_dir / rec.video_id;
    const std::filesystem::path kept_file = video_dir / "kept_indices.txt";
    if (!std::filesystem::exists(kept_file)) continue;  // rejected upstream
    TrainVideo v;
    v.video_id = rec.video_id;
    v.subject_id = rec.subject_id;
    v.label = rec.label;
    v.kept = read_kept_indices(kept_file);
    v.main_dir = video_dir / "main";
    v.fer_dir = video_dir / "fer";
    out.push_back(std::move(v));
  }
  if (out.empty())
    fail(ErrorKind::EmptyRecords,
         "no preprocessed videos under " + work_dir.string() +
             " (run preprocess first)");
  return out;
}

FoldAssignment folds_for_videos(const std::vector<TrainVideo>& videos, int k,
                                std::uint64_t seed) {
  std::map<std::string, Label> label_of;
  for (const auto& v : videos) {
    auto [it, inserted] = label_of.emplace(v.subject_id, v.label);
    if (!inserted && it->second != v.label)
      fail(ErrorKind::SchemaViolation,
           "subject '" + v.subject_id + "' appears with both labels");
  }
  std::vector<std::pair<std::string, Label>> subjects(label_of.begin(),
                                                      label_of.end());
  return make_folds(subjects, k, seed);
}

void write_loss_log(const std::filesystem::path& path,
                    const std::vector<LossLogEntry>& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path.string());
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%lld,%.12g,%.12g\n",
                  static_cast<long long>(e.step), e.lr, e.loss);
    out << buf;
  }
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

namespace {

struct AssembledBatch {
  SliceBatch frames;
  std::vector<int> labels;  // one per slice
};

AssembledBatch build_batch(const std::vector<const TrainVideo*>& videos,
                           const SliceSpec& slices, std::uint64_t run_seed,
                           std::uint64_t epoch, FrameCache* cache) {
  AssembledBatch out;
  std::vector<SliceBatch> parts;
  parts.reserve(videos.size());
  for (const TrainVideo* v : videos) {
    std::mt19937_64 rng =
        make_engine(derive_seed(run_seed, "slices", v->video_id, epoch));
    const auto sl = sample_slices(v->video_id, v->kept, slices, rng);
    parts.push_back(
        assemble_slice_batch(sl, v->kept, v->main_dir, v->fer_dir, cache));
    for (std::size_t i = 0; i < sl.size(); ++i)
      out.labels.push_back(int(v->label));
  }
  out.frames = concat_slice_batches(parts);
  return out;
}

}  // namespace

std::vector<LossLogEntry> train_on_videos(DualStreamClassifier& model,
                                          const std::vector<TrainVideo>& videos,
                                          const TrainConfig& cfg,
                                          const SliceSpec& slices,
                                          std::uint64_t run_seed,
                                          FrameCache* cache, nn::AdamW* opt) {
  cfg.validate();
  if (videos.empty()) fail(ErrorKind::EmptyRecords, "no training videos");

  const std::size_t n = videos.size();
  const std::size_t batch = std::size_t(cfg.batch_size);
  const std::int64_t steps_per_epoch = std::int64_t((n + batch - 1) / batch);
  const std::int64_t total_steps = std::int64_t(cfg.epochs) * steps_per_epoch;

  nn::AdamW local_opt(
      model.params(),
      nn::AdamWConfig{cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
  nn::AdamW& optimizer = opt ? *opt : local_opt;

  std::mt19937_64 dropout_rng = make_engine(derive_seed(run_seed, "dropout"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<LossLogEntry> log;
  log.reserve(std::size_t(total_steps));
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(),
                 make_engine(derive_seed(run_seed, "shuffle",
                                         std::uint64_t(epoch))));
    for (std::size_t off = 0; off < n; off += batch) {
      std::vector<const TrainVideo*> chunk;
      for (std::size_t i = off; i < std::min(off + batch, n); ++i)
        chunk.push_back(&videos[order[i]]);
      AssembledBatch ab =
          build_batch(chunk, slices, run_seed, std::uint64_t(epoch), cache);

      ForwardContext ctx;
      const NDArray probs = model.forward_train(ab.frames, dropout_rng, ctx);
      const double loss = cross_entropy(probs, ab.labels);
      if (!std::isfinite(loss))
        fail(ErrorKind::NonFiniteLoss,
             "non-finite loss at step " + std::to_string(step) + " (epoch " +
                 std::to_string(epoch) + "); aborting the run");

      const std::size_t b_n = probs.dim(0);
      NDArray d_logits({b_n, 2});
      for (std::size_t b = 0; b < b_n; ++b) {
        for (std::size_t c = 0; c < 2; ++c) {
          const double onehot = (int(c) == ab.labels[b]) ? 1.0 : 0.0;
          d_logits[b * 2 + c] = (probs[b * 2 + c] - onehot) / double(b_n);
        }
      }
      model.zero_grad();
      model.backward(ab.frames, d_logits, ctx);

      const double lr = lr_schedule(step, total_steps, cfg);
      optimizer.step(lr);
      log.push_back({step, lr, loss});
      ++step;
    }
  }
  return log;
}

FoldRunResult train_fold(const std::vector<TrainVideo>& videos,
                         const FoldAssignment& folds, int fold_index,
                         const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const SliceSpec& slices,
                         const std::filesystem::path& out_dir,
                         FrameCache* cache) {
  if (fold_index < 0 || fold_index >= folds.k)
    fail(ErrorKind::ConfigError,
         "fold_index " + std::to_string(fold_index) + " outside [0, " +
             std::to_string(folds.k) + ")");

  std::vector<TrainVideo> train_set;
  for (const auto& v : videos)
    if (folds.fold(v.subject_id) != fold_index) train_set.push_back(v);
  if (train_set.empty())
    fail(ErrorKind::TooFewSubjects,
         "fold " + std::to_string(fold_index) + " leaves no training videos");

  const std::uint64_t fold_seed =
      derive_seed(cfg.seed, "fold", std::uint64_t(fold_index));
  DualStreamClassifier model(model_cfg, derive_seed(fold_seed, "model-init"));
  nn::AdamW opt(model.params(),
                nn::AdamWConfig{cfg.beta1, cfg.beta2, cfg.eps,
                                cfg.weight_decay});

  FoldRunResult result;
  result.loss_log =
      train_on_videos(model, train_set, cfg, slices, fold_seed, cache, &opt);

  result.checkpoint_dir = out_dir / ("fold_" + std::to_string(fold_index));
  CheckpointMeta meta;
  meta.fold_index = fold_index;
  meta.seed = cfg.seed;
  meta.step = opt.step_count();
  meta.param_count = model.param_count();
  save_checkpoint(result.checkpoint_dir, model, &opt, meta);
  write_loss_log(result.checkpoint_dir / "loss_log.csv", result.loss_log);
  return result;
}

std::vector<PredictionRecord> evaluate_videos(
    const DualStreamClassifier& model, const std::vector<TrainVideo>& videos,
    const SliceSpec& slices, int fold_index, FrameCache* cache) {
  std::vector<PredictionRecord> records;
  records.reserve(videos.size());
  for (const auto& v : videos) {
    std::mt19937_64 rng =
        make_engine(derive_seed(slices.seed, "eval-slices", v.video_id, 0));
    const auto sl = sample_slices(v.video_id, v.kept, slices, rng);
    const SliceBatch batch =
        assemble_slice_batch(sl, v.kept, v.main_dir, v.fer_dir, cache);
    const NDArray probs = model.forward(batch);

    PredictionRecord rec;
    rec.video_id = v.video_id;
    rec.subject_id = v.subject_id;
    rec.fold_index = fold_index;
    rec.true_label = int(v.label);
    for (std::size_t s = 0; s < probs.dim(0); ++s)
      rec.slice_probs.push_back(probs[s * 2 + 1]);
    rec.aggregated = aggregate_video(rec.slice_probs);
    rec.predicted = binarize(rec.aggregated);
    records.push_back(std::move(rec));
  }
  return records;
}

EvalReport run_cross_validation(const std::vector<TrainVideo>& videos,
                                const ModelConfig& model_cfg,
                                const TrainConfig& cfg, const SliceSpec& slices,
                                const std::filesystem::path& out_dir,
                                FrameCache* cache) {
  cfg.validate();
  const FoldAssignment folds = folds_for_videos(videos, cfg.k_folds, cfg.seed);

  std::vector<PredictionRecord> records;
  for (int fold = 0; fold < folds.k; ++fold) {
    FoldRunResult run =
        train_fold(videos, folds, fold, model_cfg, cfg, slices, out_dir, cache);

    DualStreamClassifier model(model_cfg, 0);
    load_checkpoint(run.checkpoint_dir, model);

    std::vector<TrainVideo> test_set;
    for (const auto& v : videos)
      if (folds.fold(v.subject_id) == fold) test_set.push_back(v);
    auto recs = evaluate_videos(model, test_set, slices, fold, cache);
    records.insert(records.end(), recs.begin(), recs.end());
  }

  EvalReport report = compute_metrics(records);
  report.seed = cfg.seed;
  return report;
}

}  // namespace asdvid
