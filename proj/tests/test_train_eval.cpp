#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "asdvid/checkpoint.hpp"
#include "asdvid/errors.hpp"
#include "asdvid/manifest.hpp"
#include "asdvid/model.hpp"
#include "asdvid/preprocess.hpp"
#include "asdvid/rng.hpp"
#include "asdvid/sampling.hpp"
#include "asdvid/synthetic.hpp"
#include "asdvid/train_eval.hpp"
#include "testutil.hpp"

using namespace asdvid;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// id scheme: a## are ASD subjects, n## are NT subjects
std::vector<std::pair<std::string, Label>> subject_pool(int n_asd, int n_nt) {
  std::vector<std::pair<std::string, Label>> subjects;
  for (int i = 0; i < n_asd; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "a%02d", i);
    subjects.emplace_back(buf, Label::ASD);
  }
  for (int i = 0; i < n_nt; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%02d", i);
    subjects.emplace_back(buf, Label::NT);
  }
  return subjects;
}

PredictionRecord record_of(int truth, int pred, int fold = -1) {
  static int counter = 0;
  PredictionRecord r;
  r.video_id = "v" + std::to_string(counter++);
  r.subject_id = "s" + r.video_id;
  r.fold_index = fold;
  r.true_label = truth;
  r.predicted = pred;
  r.aggregated = pred ? 0.75 : 0.25;
  r.slice_probs = {r.aggregated};
  return r;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.main.feature_dim = 4;
  cfg.fer.feature_dim = 4;
  cfg.transformer.layers = 1;
  cfg.transformer.heads = 2;
  cfg.transformer.mlp_ratio = 2;
  cfg.transformer.dropout = 0.0;
  cfg.max_seq_len = 5;  // slice_len 4 plus the cls slot
  return cfg;
}

// 4 subjects x 1 video rendered and preprocessed at postage-stamp size;
// enough to drive the real training loop in well under a second per epoch.
struct MiniDataset {
  testutil::TempDir dir{"train_eval"};
  DatasetManifest manifest;
  std::vector<TrainVideo> videos;

  MiniDataset() {
    SyntheticSpec spec;
    spec.n_subjects = 4;
    spec.videos_per_subject = 1;
    spec.frames_per_video = 24;
    spec.image_size = 48;
    spec.seed = 5;
    manifest = generate_synthetic(spec, dir.path() / "data");
    PreprocessOptions opts;
    opts.out_size = 16;
    for (const auto& rec : manifest.records)
      preprocess_video(rec, opts, dir.path() / "work");
    videos = collect_preprocessed(manifest, dir.path() / "work");
  }
};

SliceBatch random_batch(std::size_t slices, std::size_t len, std::size_t hw,
                        std::uint64_t seed) {
  SliceBatch b;
  b.num_slices = slices;
  b.slice_len = len;
  b.height = hw;
  b.width = hw;
  std::mt19937_64 rng = make_engine(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  b.main_frames.resize(slices * len * hw * hw * 3);
  b.fer_frames.resize(b.main_frames.size());
  for (auto& v : b.main_frames) v = u(rng);
  for (auto& v : b.fer_frames) v = u(rng);
  return b;
}

}  // namespace

TEST_CASE("cosine schedule hits its endpoints exactly and never increases") {
  TrainConfig cfg;  // base 1e-4, min 1e-5
  CHECK(lr_schedule(0, 1000, cfg) == 1e-4);
  CHECK(lr_schedule(1000, 1000, cfg) == 1e-5);
  CHECK(lr_schedule(0, 1, cfg) == 1e-4);
  CHECK(lr_schedule(1, 1, cfg) == 1e-5);

  for (std::int64_t total : {1, 2, 5, 17, 240, 1000}) {
    double prev = lr_schedule(0, total, cfg);
    for (std::int64_t s = 1; s <= total; ++s) {
      const double cur = lr_schedule(s, total, cfg);
      CHECK(cur <= prev);
      prev = cur;
    }
  }

  // halfway point sits at the arithmetic mean of the endpoints
  CHECK(lr_schedule(500, 1000, cfg) ==
        doctest::Approx(5.5e-5).epsilon(1e-12));

  // cosine symmetry: lr(s) + lr(T - s) == base + min
  for (std::int64_t s : {1, 7, 100, 499}) {
    CHECK(lr_schedule(s, 1000, cfg) + lr_schedule(1000 - s, 1000, cfg) ==
          doctest::Approx(1e-4 + 1e-5).epsilon(1e-12));
  }

  CHECK(testutil::kind_of([&] { lr_schedule(-1, 10, cfg); }) ==
        ErrorKind::OutOfRangeStep);
  CHECK(testutil::kind_of([&] { lr_schedule(11, 10, cfg); }) ==
        ErrorKind::OutOfRangeStep);
  CHECK(testutil::kind_of([&] { lr_schedule(0, 0, cfg); }) ==
        ErrorKind::OutOfRangeStep);
}

TEST_CASE("fold assignment laws hold over random subject pools") {
  std::mt19937_64 rng(123);
  bool seed_changed_something = false;
  for (int iter = 0; iter < 200; ++iter) {
    const int n_asd = 2 + int(rng() % 24);
    const int n_nt = 2 + int(rng() % 24);
    const int k = 2 + int(rng() % std::uint64_t(std::min(n_asd, n_nt) - 1));
    const std::uint64_t seed = rng();

    auto subjects = subject_pool(n_asd, n_nt);
    std::shuffle(subjects.begin(), subjects.end(), rng);
    const FoldAssignment folds = make_folds(subjects, k, seed);

    // partition: every subject appears once, fold index in range
    REQUIRE(folds.k == k);
    REQUIRE(folds.fold_of.size() == subjects.size());
    std::vector<std::vector<int>> per_class_counts(2, std::vector<int>(k, 0));
    for (const auto& [id, label] : subjects) {
      const int f = folds.fold(id);
      REQUIRE(f >= 0);
      REQUIRE(f < k);
      per_class_counts[std::size_t(label)][std::size_t(f)] += 1;
    }

    // stratification: per-class fold sizes differ by at most one
    for (int c = 0; c < 2; ++c) {
      const auto [lo, hi] = std::minmax_element(per_class_counts[c].begin(),
                                                per_class_counts[c].end());
      CHECK(*hi - *lo <= 1);
    }

    // input order must not matter
    std::shuffle(subjects.begin(), subjects.end(), rng);
    CHECK(make_folds(subjects, k, seed).fold_of == folds.fold_of);
    // reruns are deterministic
    CHECK(make_folds(subjects, k, seed).fold_of == folds.fold_of);
    if (make_folds(subjects, k, seed + 1).fold_of != folds.fold_of)
      seed_changed_something = true;
  }
  CHECK(seed_changed_something);
}

TEST_CASE("thirty subjects at five folds split six per fold, three per class") {
  const FoldAssignment folds = make_folds(subject_pool(15, 15), 5, 99);
  std::map<int, int> total, asd;
  for (const auto& [id, f] : folds.fold_of) {
    total[f] += 1;
    if (id[0] == 'a') asd[f] += 1;
  }
  REQUIRE(total.size() == 5);
  for (int f = 0; f < 5; ++f) {
    CHECK(total[f] == 6);
    CHECK(asd[f] == 3);
  }
}

TEST_CASE("fold assignment rejects degenerate requests") {
  auto subjects = subject_pool(6, 6);
  CHECK(testutil::kind_of([&] { make_folds(subjects, 1, 0); }) ==
        ErrorKind::TooFewSubjects);
  CHECK(testutil::kind_of([&] { make_folds(subjects, 0, 0); }) ==
        ErrorKind::TooFewSubjects);
  // a class with fewer subjects than folds cannot be stratified
  CHECK(testutil::kind_of([&] { make_folds(subject_pool(15, 4), 5, 0); }) ==
        ErrorKind::TooFewSubjects);
  CHECK(testutil::kind_of([&] { make_folds(subject_pool(4, 15), 5, 0); }) ==
        ErrorKind::TooFewSubjects);

  auto dup = subjects;
  dup.push_back(subjects.front());
  CHECK(testutil::kind_of([&] { make_folds(dup, 2, 0); }) ==
        ErrorKind::SchemaViolation);

  CHECK(testutil::kind_of([&] { FoldAssignment{}.fold("ghost"); }) ==
        ErrorKind::ConfigError);
}

TEST_CASE("cross entropy matches hand-computed values") {
  NDArray one({1, 2});
  one[0] = 0.25;
  one[1] = 0.75;
  CHECK(cross_entropy(one, {1}) == doctest::Approx(-std::log(0.75)));
  CHECK(cross_entropy(one, {0}) == doctest::Approx(-std::log(0.25)));

  NDArray sure({1, 2});
  sure[0] = 1.0;
  sure[1] = 0.0;
  CHECK(cross_entropy(sure, {0}) == 0.0);

  NDArray uniform({2, 2});
  for (std::size_t i = 0; i < 4; ++i) uniform[i] = 0.5;
  CHECK(cross_entropy(uniform, {0, 1}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  // a 0.9 hit costs about 0.10536
  NDArray batch({2, 2});
  batch[0] = 0.9;
  batch[1] = 0.1;
  batch[2] = 0.2;
  batch[3] = 0.8;
  CHECK(cross_entropy(batch, {0, 1}) ==
        doctest::Approx(0.5 * (0.105360515658 + 0.223143551314)).epsilon(1e-9));

  CHECK(testutil::kind_of([&] { cross_entropy(batch, {0}); }) ==
        ErrorKind::ShapeMismatch);
  CHECK(testutil::kind_of([&] { cross_entropy(NDArray({4}), {0, 1}); }) ==
        ErrorKind::ShapeMismatch);
  CHECK(testutil::kind_of([&] { cross_entropy(batch, {0, 2}); }) ==
        ErrorKind::InvalidLabel);
  CHECK(testutil::kind_of([&] { cross_entropy(batch, {-1, 1}); }) ==
        ErrorKind::InvalidLabel);
}

TEST_CASE("aggregation is a plain mean with order and singleton laws") {
  CHECK(aggregate_video({0.2, 0.4, 0.9}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(aggregate_video({0.37}) == 0.37);  // single slice is the identity

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> probs(1 + rng() % 12);
    for (auto& p : probs) p = u(rng);
    const double base = aggregate_video(probs);
    std::shuffle(probs.begin(), probs.end(), rng);
    CHECK(std::abs(aggregate_video(probs) - base) <= 1e-12);
  }

  CHECK(testutil::kind_of([&] { aggregate_video({}); }) ==
        ErrorKind::EmptyPredictionList);
}

TEST_CASE("binarize sends the 0.5 boundary to the positive class") {
  CHECK(binarize(0.5) == 1);
  CHECK(binarize(0.4999) == 0);
  CHECK(binarize(std::nextafter(0.5, 0.0)) == 0);
  CHECK(binarize(1.0) == 1);
  CHECK(binarize(0.0) == 0);
  CHECK(binarize(0.3, 0.3) == 1);
  CHECK(binarize(0.9, 0.95) == 0);
  CHECK(testutil::kind_of([&] { binarize(-0.001); }) ==
        ErrorKind::OutOfRangeProbability);
  CHECK(testutil::kind_of([&] { binarize(1.001); }) ==
        ErrorKind::OutOfRangeProbability);
}

TEST_CASE("metrics agree with a brute-force scorer on random record sets") {
  std::mt19937_64 rng(31337);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<PredictionRecord> records;
    for (std::size_t i = 0; i < n; ++i)
      records.push_back(record_of(int(rng() % 2), int(rng() % 2),
                                  int(rng() % 5) - 1));

    const EvalReport report = compute_metrics(records);

    auto brute = [&](int fold) {
      std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
      for (const auto& r : records) {
        if (fold >= 0 && r.fold_index != fold) continue;
        if (r.true_label == 1 && r.predicted == 1) ++tp;
        if (r.true_label == 0 && r.predicted == 1) ++fp;
        if (r.true_label == 0 && r.predicted == 0) ++tn;
        if (r.true_label == 1 && r.predicted == 0) ++fn;
      }
      MetricsBlock m;
      m.fold_index = fold;
      m.counts = {tp, fp, tn, fn};
      const std::int64_t total = tp + fp + tn + fn;
      m.accuracy = total ? double(tp + tn) / double(total) : 0.0;
      const std::int64_t denom = 2 * tp + fp + fn;
      m.f1 = denom ? 2.0 * double(tp) / double(denom) : 0.0;
      return m;
    };

    const MetricsBlock expect = brute(-1);
    CHECK(report.overall.counts.tp == expect.counts.tp);
    CHECK(report.overall.counts.fp == expect.counts.fp);
    CHECK(report.overall.counts.tn == expect.counts.tn);
    CHECK(report.overall.counts.fn == expect.counts.fn);
    CHECK(report.overall.accuracy == expect.accuracy);
    CHECK(report.overall.f1 == expect.f1);

    std::set<int> folds_present;
    for (const auto& r : records)
      if (r.fold_index >= 0) folds_present.insert(r.fold_index);
    REQUIRE(report.per_fold.size() == folds_present.size());
    std::size_t i = 0;
    for (int f : folds_present) {
      const MetricsBlock want = brute(f);
      const MetricsBlock& got = report.per_fold[i++];
      CHECK(got.fold_index == f);
      CHECK(got.counts.tp == want.counts.tp);
      CHECK(got.counts.fp == want.counts.fp);
      CHECK(got.counts.tn == want.counts.tn);
      CHECK(got.counts.fn == want.counts.fn);
      CHECK(got.accuracy == want.accuracy);
      CHECK(got.f1 == want.f1);
    }
  }

  CHECK(testutil::kind_of([&] { compute_metrics({}); }) ==
        ErrorKind::EmptyRecords);
}

TEST_CASE("textbook confusion table values come out exactly") {
  // TP=5, FP=1, FN=3, TN=2
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(record_of(1, 1));
  records.push_back(record_of(0, 1));
  for (int i = 0; i < 3; ++i) records.push_back(record_of(1, 0));
  for (int i = 0; i < 2; ++i) records.push_back(record_of(0, 0));

  const EvalReport report = compute_metrics(records);
  CHECK(report.overall.f1 == 10.0 / 14.0);
  CHECK(report.overall.accuracy == 7.0 / 11.0);
  CHECK(report.overall.counts.total() == 11);

  // 22 correct out of 27 prints as 0.8148 at four decimals
  std::vector<PredictionRecord> batch;
  for (int i = 0; i < 22; ++i) batch.push_back(record_of(i % 2, i % 2));
  for (int i = 0; i < 5; ++i) batch.push_back(record_of(i % 2, 1 - i % 2));
  const EvalReport r27 = compute_metrics(batch);
  CHECK(r27.overall.counts.total() == 27);
  CHECK(r27.overall.accuracy == 22.0 / 27.0);
  CHECK(std::round(r27.overall.accuracy * 10000.0) == 8148.0);

  // degenerate: no positives anywhere leaves f1 at 0, accuracy intact
  const EvalReport all_neg =
      compute_metrics({record_of(0, 0), record_of(0, 0)});
  CHECK(all_neg.overall.f1 == 0.0);
  CHECK(all_neg.overall.accuracy == 1.0);
}

TEST_CASE("eval reports round trip and stay byte-stable modulo the header") {
  testutil::TempDir dir("report");
  std::vector<PredictionRecord> records = {record_of(1, 1, 0),
                                           record_of(0, 1, 0),
                                           record_of(1, 0, 1),
                                           record_of(0, 0, 1)};
  records[0].slice_probs = {0.9, 0.8, 0.7};
  records[0].aggregated = 0.8;
  EvalReport report = compute_metrics(records);
  report.seed = 42;
  report.config_echo = nlohmann::ordered_json{{"note", "roundtrip"}};

  const auto path = dir / "report.json";
  write_eval_report(path, report);

  const std::string text = slurp(path);
  REQUIRE(!text.empty());
  CHECK(text[0] == '#');  // timestamp header line

  const EvalReport back = read_eval_report(path);
  CHECK(back.seed == 42);
  CHECK(back.config_echo.at("note") == "roundtrip");
  CHECK(back.overall.counts.tp == report.overall.counts.tp);
  CHECK(back.overall.accuracy == report.overall.accuracy);
  CHECK(back.overall.f1 == report.overall.f1);
  REQUIRE(back.per_fold.size() == report.per_fold.size());
  for (std::size_t i = 0; i < back.per_fold.size(); ++i) {
    CHECK(back.per_fold[i].fold_index == report.per_fold[i].fold_index);
    CHECK(back.per_fold[i].accuracy == report.per_fold[i].accuracy);
    CHECK(back.per_fold[i].f1 == report.per_fold[i].f1);
  }
  REQUIRE(back.records.size() == records.size());
  CHECK(back.records[0].video_id == records[0].video_id);
  CHECK(back.records[0].subject_id == records[0].subject_id);
  CHECK(back.records[0].fold_index == 0);
  CHECK(back.records[0].aggregated == 0.8);
  CHECK(back.records[0].slice_probs == std::vector<double>{0.9, 0.8, 0.7});

  // a rewrite only changes the header line
  const auto path2 = dir / "report2.json";
  write_eval_report(path2, report);
  const auto body = [](std::string s) { return s.substr(s.find('\n') + 1); };
  CHECK(body(slurp(path)) == body(slurp(path2)));

  CHECK(testutil::kind_of([&] { read_eval_report(dir / "absent.json"); }) ==
        ErrorKind::MissingFile);
  std::ofstream(dir / "garbage.json") << "# header\nnot json\n";
  CHECK(testutil::kind_of([&] { read_eval_report(dir / "garbage.json"); }) ==
        ErrorKind::SchemaViolation);
}

TEST_CASE("loss log is one step,lr,loss line per optimizer step") {
  testutil::TempDir dir("losslog");
  const std::vector<LossLogEntry> log = {
      {0, 1e-3, 0.7}, {1, 9.9e-4, 0.65}, {12345, 5.5e-5, 1.0 / 3.0}};
  const auto path = dir / "loss_log.csv";
  write_loss_log(path, log);

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "0,0.001,0.7");
  CHECK(lines[1] == "1,0.00099,0.65");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    long long step = -1;
    double lr = 0.0, loss = 0.0;
    REQUIRE(std::sscanf(lines[i].c_str(), "%lld,%lf,%lf", &step, &lr, &loss) ==
            3);
    CHECK(step == log[i].step);
    CHECK(lr == doctest::Approx(log[i].lr).epsilon(1e-10));
    CHECK(loss == doctest::Approx(log[i].loss).epsilon(1e-10));
  }
}

TEST_CASE("collect_preprocessed picks up exactly the preprocessed videos") {
  MiniDataset mini;
  REQUIRE(mini.videos.size() == 4);
  std::set<std::string> ids;
  for (const auto& v : mini.videos) {
    ids.insert(v.video_id);
    CHECK(!v.kept.empty());
    CHECK(std::filesystem::exists(v.main_dir));
    CHECK(std::filesystem::exists(v.fer_dir));
    const auto* rec = mini.manifest.find(v.video_id);
    REQUIRE(rec != nullptr);
    CHECK(v.subject_id == rec->subject_id);
    CHECK(v.label == rec->label);
  }
  CHECK(ids.size() == 4);

  // a video without kept_indices.txt was rejected upstream: skip it
  const auto dropped = mini.videos.front().video_id;
  std::filesystem::remove(mini.dir.path() / "work" / dropped /
                          "kept_indices.txt");
  const auto rest = collect_preprocessed(mini.manifest, mini.dir.path() / "work");
  CHECK(rest.size() == 3);
  for (const auto& v : rest) CHECK(v.video_id != dropped);

  CHECK(testutil::kind_of([&] {
          collect_preprocessed(mini.manifest, mini.dir.path() / "empty");
        }) == ErrorKind::EmptyRecords);
}

TEST_CASE("video fold assignment groups by subject and rejects label clashes") {
  MiniDataset mini;
  const FoldAssignment folds = folds_for_videos(mini.videos, 2, 17);
  CHECK(folds.k == 2);
  CHECK(folds.fold_of.size() == 4);  // one entry per subject
  // subject exclusivity is structural: every video of a subject shares the
  // subject's single fold value
  for (const auto& v : mini.videos)
    CHECK(folds.fold(v.subject_id) == folds.fold_of.at(v.subject_id));

  auto clash = mini.videos;
  clash.push_back(clash.front());
  clash.back().video_id = "imposter";
  clash.back().label = clash.back().label == Label::ASD ? Label::NT : Label::ASD;
  CHECK(testutil::kind_of([&] { folds_for_videos(clash, 2, 17); }) ==
        ErrorKind::SchemaViolation);
}

TEST_CASE("an untrained model scores close to chance") {
  std::mt19937_64 rng(404);
  for (int i = 0; i < 10; ++i) {
    DualStreamClassifier model(tiny_model(), rng());
    const SliceBatch batch = random_batch(4, 4, 8, rng());
    const double loss =
        cross_entropy(model.forward(batch), {0, 1, 0, 1});
    CHECK(loss > 0.60);
    CHECK(loss < 0.78);
  }
}

TEST_CASE("train_on_videos keeps the promised step ledger") {
  MiniDataset mini;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 11;
  SliceSpec slices;
  slices.num_slices = 1;
  slices.slice_len = 4;
  slices.seed = 3;

  FrameCache cache;
  DualStreamClassifier model(tiny_model(), derive_seed(11, "model-init"));
  const auto log = train_on_videos(model, mini.videos, cfg, slices, 11, &cache);

  // 4 videos / batch 2 -> 2 steps per epoch, 3 epochs
  REQUIRE(log.size() == 6);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].step == std::int64_t(i));
    CHECK(log[i].lr == lr_schedule(std::int64_t(i), 6, cfg));
    CHECK(std::isfinite(log[i].loss));
  }

  // the whole loop is deterministic given the seed
  DualStreamClassifier twin(tiny_model(), derive_seed(11, "model-init"));
  const auto log2 = train_on_videos(twin, mini.videos, cfg, slices, 11, &cache);
  REQUIRE(log2.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i)
    CHECK(log2[i].loss == log[i].loss);

  CHECK(testutil::kind_of([&] {
          DualStreamClassifier m(tiny_model(), 1);
          train_on_videos(m, {}, cfg, slices, 11);
        }) == ErrorKind::EmptyRecords);

  // poisoned parameters must abort loudly, not march on; the final bias
  // feeds the logits with no ReLU in between to swallow the NaN
  DualStreamClassifier sick(tiny_model(), 1);
  sick.params().back()->value[0] = std::nan("");
  CHECK(testutil::kind_of([&] {
          train_on_videos(sick, mini.videos, cfg, slices, 11, &cache);
        }) == ErrorKind::NonFiniteLoss);
}

TEST_CASE("fold training writes checkpoints and cross validation pools "
          "one record per video") {
  MiniDataset mini;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.k_folds = 2;
  cfg.seed = 21;
  SliceSpec slices;
  slices.num_slices = 1;
  slices.slice_len = 4;
  slices.seed = 3;
  const ModelConfig model_cfg = tiny_model();
  FrameCache cache;

  const FoldAssignment folds = folds_for_videos(mini.videos, 2, cfg.seed);
  const auto out = mini.dir.path() / "cv";

  const FoldRunResult run =
      train_fold(mini.videos, folds, 0, model_cfg, cfg, slices, out, &cache);
  CHECK(run.checkpoint_dir == out / "fold_0");
  CHECK(std::filesystem::exists(run.checkpoint_dir / "loss_log.csv"));
  CHECK(run.loss_log.size() == 1);  // 2 training videos, batch 4, 1 epoch

  DualStreamClassifier restored(model_cfg, 999);
  const CheckpointMeta meta = load_checkpoint(run.checkpoint_dir, restored);
  CHECK(meta.fold_index == 0);
  CHECK(meta.seed == cfg.seed);
  CHECK(meta.step == std::int64_t(run.loss_log.size()));

  CHECK(testutil::kind_of([&] {
          train_fold(mini.videos, folds, 2, model_cfg, cfg, slices, out);
        }) == ErrorKind::ConfigError);
  CHECK(testutil::kind_of([&] {
          train_fold(mini.videos, folds, -1, model_cfg, cfg, slices, out);
        }) == ErrorKind::ConfigError);

  const EvalReport report = run_cross_validation(mini.videos, model_cfg, cfg,
                                                 slices, out, &cache);
  CHECK(report.seed == cfg.seed);
  REQUIRE(report.records.size() == mini.videos.size());
  std::set<std::string> seen;
  for (const auto& rec : report.records) {
    seen.insert(rec.video_id);
    CHECK(rec.fold_index == folds.fold(rec.subject_id));
    CHECK(rec.aggregated >= 0.0);
    CHECK(rec.aggregated <= 1.0);
    CHECK(rec.predicted == binarize(rec.aggregated));
    CHECK(int(rec.slice_probs.size()) == slices.num_slices);
  }
  CHECK(seen.size() == mini.videos.size());
  CHECK(report.per_fold.size() == 2);
  CHECK(report.overall.counts.total() == 4);
  CHECK(std::filesystem::exists(out / "fold_0"));
  CHECK(std::filesystem::exists(out / "fold_1"));

  // held-out evaluation is deterministic for a fixed checkpoint
  std::vector<TrainVideo> test_set;
  for (const auto& v : mini.videos)
    if (folds.fold(v.subject_id) == 0) test_set.push_back(v);
  DualStreamClassifier model(model_cfg, 1);
  load_checkpoint(out / "fold_0", model);
  const auto a = evaluate_videos(model, test_set, slices, 0, &cache);
  const auto b = evaluate_videos(model, test_set, slices, 0, &cache);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].slice_probs == b[i].slice_probs);
    CHECK(a[i].aggregated == b[i].aggregated);
  }
}
