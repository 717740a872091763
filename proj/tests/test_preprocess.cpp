#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "asdvid/errors.hpp"
#include "asdvid/image.hpp"
#include "asdvid/manifest.hpp"
#include "asdvid/preprocess.hpp"
#include "asdvid/rng.hpp"
#include "asdvid/synthetic.hpp"
#include "testutil.hpp"

using namespace asdvid;
using testutil::TempDir;
using testutil::kind_of;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

FrameAnnotation pose_only(std::int64_t idx, double yaw, double pitch,
                          double roll) {
    FrameAnnotation a;
    a.frame_index = idx;
    a.bbox = {0, 0, 10, 10};
    a.yaw = yaw;
    a.pitch = pitch;
    a.roll = roll;
    return a;
}

}  // namespace

TEST_CASE("pose gate matches a brute-force conjunction scan") {
    auto rng = make_engine(derive_seed(11, "pose-oracle"));
    std::uniform_real_distribution<double> angle(-25.0, 25.0);
    PoseGate gate;  // [-10, 10]

    std::vector<FrameAnnotation> ann;
    ann.reserve(10000);
    for (int i = 0; i < 10000; ++i)
        ann.push_back(pose_only(i, angle(rng), angle(rng), angle(rng)));

    std::vector<std::int64_t> expect;
    for (const auto& a : ann) {
        const bool ok = a.yaw >= -10.0 && a.yaw <= 10.0 && a.pitch >= -10.0 &&
                        a.pitch <= 10.0 && a.roll >= -10.0 && a.roll <= 10.0;
        if (ok) expect.push_back(a.frame_index);
    }
    CHECK(filter_by_pose(ann, gate) == expect);
    CHECK(expect.size() > 100);          // the scan actually exercised both sides
    CHECK(expect.size() < ann.size());
}

TEST_CASE("pose gate boundaries are inclusive") {
    const double past_hi = std::nextafter(10.0, 11.0);
    const double past_lo = std::nextafter(-10.0, -11.0);
    std::vector<FrameAnnotation> ann = {
        pose_only(0, 10.0, -10.0, 0.0),    // exactly on both edges: kept
        pose_only(1, past_hi, 0.0, 0.0),   // just over: rejected
        pose_only(2, 0.0, past_lo, 0.0),   // just under: rejected
        pose_only(3, 0.0, 0.0, 10.0),      // edge roll: kept
    };
    CHECK(filter_by_pose(ann, PoseGate{}) ==
          std::vector<std::int64_t>{0, 3});
}

TEST_CASE("pose gate distinguishes empty input from full rejection") {
    CHECK(filter_by_pose({}, PoseGate{}).empty());
    std::vector<FrameAnnotation> ann = {pose_only(0, 45.0, 0.0, 0.0)};
    CHECK(kind_of([&] { filter_by_pose(ann, PoseGate{}); }) ==
          ErrorKind::AllFramesRejected);
    // An impossibly tight gate rejects everything with nonzero pose.
    PoseGate zero{0.0, 0.0};
    std::vector<FrameAnnotation> jittered = {pose_only(0, 0.01, 0.0, 0.0),
                                             pose_only(1, 0.0, -0.2, 0.0)};
    CHECK(kind_of([&] { filter_by_pose(jittered, zero); }) ==
          ErrorKind::AllFramesRejected);
}

TEST_CASE("crop_face extracts the padded square around the box") {
    // Frame: dark background with a bright 20x20 box at (30, 40).
    Image frame(100, 100);
    for (auto& v : frame.data) v = 10;
    for (int y = 40; y < 60; ++y)
        for (int x = 30; x < 50; ++x) {
            auto* p = frame.pixel(x, y);
            p[0] = p[1] = p[2] = 200;
        }
    BBox box{30, 40, 20, 20};

    // Zero margin, native size: everything in the crop is box interior.
    Image tight = crop_face(frame, box, 0.0, 20);
    CHECK(tight.width == 20);
    CHECK(tight.height == 20);
    CHECK(int(*tight.pixel(10, 10)) == 200);
    CHECK(int(*tight.pixel(1, 1)) == 200);

    // Margin 0.25 on each side: the center stays bright, corners show
    // background, and the output side obeys the requested out_size.
    Image padded = crop_face(frame, box, 0.25, 30);
    CHECK(padded.width == 30);
    CHECK(int(*padded.pixel(15, 15)) == 200);
    CHECK(int(*padded.pixel(0, 0)) == 10);
    CHECK(int(*padded.pixel(29, 29)) == 10);

    // A box hanging off the frame pads with black, not garbage.
    BBox corner{-10, -10, 20, 20};
    Image edge = crop_face(frame, corner, 0.0, 20);
    CHECK(int(*edge.pixel(2, 2)) == 0);     // off-frame region
    CHECK(int(*edge.pixel(15, 15)) == 10);  // in-frame background

    CHECK(kind_of([&] { crop_face(frame, BBox{5, 5, 0, 10}, 0.25, 20); }) ==
          ErrorKind::DegenerateBox);
    CHECK(kind_of([&] { crop_face(frame, BBox{5, 5, 10, -1}, 0.25, 20); }) ==
          ErrorKind::DegenerateBox);
}

TEST_CASE("similarity transforms compose with their inverses") {
    SimilarityTransform t;
    t.scale = 1.7;
    t.rotation = 0.4;
    t.tx = -12.0;
    t.ty = 31.0;
    const SimilarityTransform inv = t.inverse();
    auto rng = make_engine(3);
    std::uniform_real_distribution<double> coord(-100.0, 100.0);
    for (int i = 0; i < 50; ++i) {
        Point p{coord(rng), coord(rng)};
        Point back = inv.apply(t.apply(p));
        CHECK(back.x == doctest::Approx(p.x).epsilon(1e-9));
        CHECK(back.y == doctest::Approx(p.y).epsilon(1e-9));
    }
}

TEST_CASE("estimate_similarity recovers known transforms to 1e-6") {
    const AlignmentTemplate tmpl;
    auto rng = make_engine(derive_seed(19, "sim-oracle"));
    std::uniform_real_distribution<double> s_dist(0.5, 2.0);
    std::uniform_real_distribution<double> th_dist(-30.0 * kDeg, 30.0 * kDeg);
    std::uniform_real_distribution<double> t_dist(-40.0, 40.0);

    for (int trial = 0; trial < 200; ++trial) {
        SimilarityTransform truth;
        truth.scale = s_dist(rng);
        truth.rotation = th_dist(rng);
        truth.tx = t_dist(rng);
        truth.ty = t_dist(rng);

        Landmarks moved;
        for (std::size_t i = 0; i < kNumLandmarks; ++i)
            moved[i] = truth.apply(tmpl.points[i]);

        const SimilarityTransform est =
            estimate_similarity(tmpl.points, moved);
        CHECK(std::abs(est.scale - truth.scale) < 1e-6);
        CHECK(std::abs(est.rotation - truth.rotation) < 1e-6);
        CHECK(std::abs(est.tx - truth.tx) < 1e-6);
        CHECK(std::abs(est.ty - truth.ty) < 1e-6);

        // Fitting the reverse direction lands the moved points back on the
        // template to well under half a pixel.
        const SimilarityTransform back = estimate_similarity(moved, tmpl.points);
        for (std::size_t i = 0; i < kNumLandmarks; ++i) {
            Point w = back.apply(moved[i]);
            CHECK(std::abs(w.x - tmpl.points[i].x) < 0.5);
            CHECK(std::abs(w.y - tmpl.points[i].y) < 0.5);
        }
    }

    CHECK(estimate_similarity(tmpl.points, tmpl.points).scale ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(estimate_similarity(tmpl.points, tmpl.points).rotation ==
          doctest::Approx(0.0).epsilon(1e-12));

    Landmarks collapsed;
    for (auto& p : collapsed) p = {7.0, 7.0};
    CHECK(kind_of([&] { estimate_similarity(collapsed, tmpl.points); }) ==
          ErrorKind::DegenerateConfiguration);
}

TEST_CASE("align_face warps frame landmarks onto the template") {
    // Paint a frame whose value at (x, y) encodes position, warp it, and
    // check the template locations read back the frame-landmark values.
    const AlignmentTemplate tmpl;
    SimilarityTransform place;  // template -> frame
    place.scale = 0.8;
    place.rotation = 12.0 * kDeg;
    place.tx = 40.0;
    place.ty = 22.0;

    Landmarks frame_lms;
    for (std::size_t i = 0; i < kNumLandmarks; ++i)
        frame_lms[i] = place.apply(tmpl.points[i]);

    Image frame(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) {
            auto* p = frame.pixel(x, y);
            p[0] = std::uint8_t(x / 2);
            p[1] = std::uint8_t(y / 2);
            p[2] = 0;
        }

    const int out_size = 224;
    Image aligned = align_face(frame, frame_lms, tmpl, out_size);
    CHECK(aligned.width == out_size);
    CHECK(aligned.height == out_size);

    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
        const int ax = int(std::lround(tmpl.points[i].x));
        const int ay = int(std::lround(tmpl.points[i].y));
        const auto* p = aligned.pixel(ax, ay);
        // The gradient slope is 0.5/px and the template point was rounded to
        // the nearest pixel, so allow ~2 levels of slack.
        CHECK(std::abs(double(p[0]) - frame_lms[i].x / 2.0) < 2.5);
        CHECK(std::abs(double(p[1]) - frame_lms[i].y / 2.0) < 2.5);
    }
}

TEST_CASE("alignment template scales with the canvas") {
    const AlignmentTemplate base;
    const AlignmentTemplate half = base.scaled_to(112);
    CHECK(half.canvas == 112);
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
        CHECK(half.points[i].x == doctest::Approx(base.points[i].x / 2));
        CHECK(half.points[i].y == doctest::Approx(base.points[i].y / 2));
    }
    // Bilateral symmetry of the canonical layout about the vertical midline.
    CHECK(base.points[0].x + base.points[1].x == doctest::Approx(224.0));
    CHECK(base.points[3].x + base.points[4].x == doctest::Approx(224.0));
    CHECK(base.points[2].x == doctest::Approx(112.0));
}

TEST_CASE("kept index files round trip") {
    TempDir tmp("asdvid-kept");
    std::vector<std::int64_t> kept = {0, 3, 4, 9, 27};
    auto file = tmp / "kept_indices.txt";
    write_kept_indices(kept, file);
    CHECK(read_kept_indices(file) == kept);

    write_kept_indices({}, file);
    CHECK(read_kept_indices(file).empty());

    CHECK(kind_of([&] { read_kept_indices(tmp / "nope.txt"); }) ==
          ErrorKind::MissingFile);
}

TEST_CASE("preprocess_video writes both streams named by raw frame index") {
    TempDir tmp("asdvid-prep");
    SyntheticSpec spec;
    spec.n_subjects = 1;
    spec.videos_per_subject = 1;
    spec.frames_per_video = 24;
    spec.image_size = 96;
    spec.seed = 21;
    DatasetManifest m = generate_synthetic(spec, tmp / "data");
    const VideoRecord& rec = m.records.at(0);

    PreprocessOptions opt;
    opt.gate = {-3.0, 3.0};  // tight: with 4-degree jitter some frames fail
    opt.out_size = 48;

    auto result = preprocess_video(rec, opt, tmp / "work");
    CHECK(result.video_id == rec.video_id);
    CHECK(result.total_frames == 24);
    CHECK(!result.kept.empty());
    CHECK(result.kept.size() < 24);

    // The kept list equals an independent pass over the sidecar.
    CHECK(result.kept == filter_by_pose(load_sidecar(rec), opt.gate));

    const auto vdir = tmp / "work" / rec.video_id;
    CHECK(read_kept_indices(vdir / "kept_indices.txt") == result.kept);
    for (const auto idx : result.kept) {
        for (const char* stream : {"main", "fer"}) {
            Image img = read_ppm(vdir / stream / frame_filename(int(idx)));
            CHECK(img.width == opt.out_size);
            CHECK(img.height == opt.out_size);
        }
    }
    // Rejected raw indices have no files in either stream.
    std::vector<bool> is_kept(24, false);
    for (const auto idx : result.kept) is_kept[std::size_t(idx)] = true;
    for (int f = 0; f < 24; ++f) {
        if (is_kept[std::size_t(f)]) continue;
        CHECK(!std::filesystem::exists(vdir / "main" / frame_filename(f)));
        CHECK(!std::filesystem::exists(vdir / "fer" / frame_filename(f)));
    }

    // Reruns are byte-stable: preprocessing is deterministic.
    auto again = preprocess_video(rec, opt, tmp / "work2");
    CHECK(again.kept == result.kept);

    // The all-rejecting gate raises instead of writing an empty directory.
    PreprocessOptions zero = opt;
    zero.gate = {0.0, 0.0};
    CHECK(kind_of([&] { preprocess_video(rec, zero, tmp / "work3"); }) ==
          ErrorKind::AllFramesRejected);
}

TEST_CASE("verify_dataset spots missing frames and broken sidecars") {
    TempDir tmp("asdvid-verify");
    SyntheticSpec spec;
    spec.n_subjects = 2;
    spec.videos_per_subject = 1;
    spec.frames_per_video = 6;
    spec.image_size = 64;
    spec.seed = 33;
    DatasetManifest m = generate_synthetic(spec, tmp / "data");
    CHECK_NOTHROW(verify_dataset(m));

    // Remove one frame file: the per-video count no longer matches.
    const auto victim = m.records[0].frames_path / frame_filename(3);
    std::filesystem::remove(victim);
    CHECK(kind_of([&] { verify_dataset(m); }) == ErrorKind::SchemaViolation);

    // Restore the count with a dummy file; now break a sidecar instead.
    Image blank(spec.image_size, spec.image_size);
    write_ppm(blank, victim);
    CHECK_NOTHROW(verify_dataset(m));

    std::filesystem::remove(m.records[1].sidecar_path);
    CHECK(kind_of([&] { verify_dataset(m); }) == ErrorKind::MissingSidecar);
}
