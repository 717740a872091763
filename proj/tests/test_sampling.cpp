#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "asdvid/errors.hpp"
#include "asdvid/image.hpp"
#include "asdvid/rng.hpp"
#include "asdvid/sampling.hpp"
#include "testutil.hpp"

using namespace asdvid;
using testutil::TempDir;
using testutil::kind_of;

namespace {

std::vector<std::int64_t> iota_kept(std::size_t n) {
    std::vector<std::int64_t> kept(n);
    std::iota(kept.begin(), kept.end(), 0);
    return kept;
}

// Writes paired main/fer stream directories where every pixel of raw frame
// i has value i, so batch contents identify their source frame.
void write_streams(const std::filesystem::path& dir,
                   const std::vector<std::int64_t>& kept, int size) {
    std::filesystem::create_directories(dir / "main");
    std::filesystem::create_directories(dir / "fer");
    for (const auto idx : kept) {
        Image img(size, size);
        for (auto& v : img.data) v = std::uint8_t(idx);
        write_ppm(img, dir / "main" / frame_filename(int(idx)));
        for (auto& v : img.data) v = std::uint8_t(idx + 100);
        write_ppm(img, dir / "fer" / frame_filename(int(idx)));
    }
}

}  // namespace

TEST_CASE("slices are consecutive runs inside the kept sequence") {
    SliceSpec spec;
    spec.num_slices = 8;
    spec.slice_len = 16;
    spec.window = SampleWindow::Full;
    auto kept = iota_kept(50);
    auto rng = make_engine(1);
    auto slices = sample_slices("v", kept, spec, rng);
    REQUIRE(slices.size() == 8);
    for (const auto& s : slices) {
        CHECK(s.video_id == "v");
        REQUIRE(s.indices.size() == 16);
        CHECK(s.start <= 50 - 16);
        for (std::size_t i = 0; i < s.indices.size(); ++i)
            CHECK(s.indices[i] == s.start + i);
    }
}

TEST_CASE("too few kept frames raises VideoTooShort") {
    SliceSpec spec;
    spec.slice_len = 16;
    auto rng = make_engine(1);
    auto kept = iota_kept(15);
    CHECK(kind_of([&] { sample_slices("v", kept, spec, rng); }) ==
          ErrorKind::VideoTooShort);
    // Exactly slice_len frames is the shortest legal video: one start.
    kept = iota_kept(16);
    auto slices = sample_slices("v", kept, spec, rng);
    CHECK(slices.at(0).start == 0);
}

TEST_CASE("second-half window restricts starts and falls back when tight") {
    SliceSpec spec;
    spec.num_slices = 400;
    spec.slice_len = 10;
    spec.window = SampleWindow::SecondHalf;

    // n=40: starts live in [20, 30].
    {
        auto rng = make_engine(2);
        auto slices = sample_slices("v", iota_kept(40), spec, rng);
        std::set<std::size_t> starts;
        for (const auto& s : slices) {
            CHECK(s.start >= 20);
            CHECK(s.start <= 30);
            starts.insert(s.start);
        }
        // 400 draws over 11 possible values: all of them appear.
        CHECK(starts.size() == 11);
    }

    // n=12: the second half cannot hold a full slice (half=6 > last_start=2),
    // so sampling falls back to the full range [0, 2].
    {
        auto rng = make_engine(3);
        auto slices = sample_slices("v", iota_kept(12), spec, rng);
        std::set<std::size_t> starts;
        for (const auto& s : slices) starts.insert(s.start);
        CHECK(*starts.begin() == 0);
        CHECK(*starts.rbegin() == 2);
    }

    // n=20: half == last_start == 10, boundary case uses exactly one start.
    {
        auto rng = make_engine(4);
        auto slices = sample_slices("v", iota_kept(20), spec, rng);
        for (const auto& s : slices) CHECK(s.start == 10);
    }
}

TEST_CASE("slice sampling is reproducible from the engine seed") {
    SliceSpec spec;
    spec.num_slices = 6;
    spec.slice_len = 8;
    auto kept = iota_kept(64);

    auto r1 = make_engine(derive_seed(5, "slices", "v", 0));
    auto r2 = make_engine(derive_seed(5, "slices", "v", 0));
    auto a = sample_slices("v", kept, spec, r1);
    auto b = sample_slices("v", kept, spec, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].start == b[i].start);

    auto r3 = make_engine(derive_seed(5, "slices", "v", 1));
    auto c = sample_slices("v", kept, spec, r3);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].start != c[i].start) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("assemble_slice_batch loads both streams normalized to [0,1]") {
    TempDir tmp("asdvid-batch");
    // Kept sequence with a gap: raw frames 0,1,3,4,6,7 survive the gate.
    std::vector<std::int64_t> kept = {0, 1, 3, 4, 6, 7};
    write_streams(tmp.path(), kept, 4);

    Slice s;
    s.video_id = "v";
    s.start = 1;
    s.indices = {1, 2, 3};  // kept positions -> raw frames 1, 3, 4

    SliceBatch batch = assemble_slice_batch({s}, kept, tmp / "main", tmp / "fer");
    CHECK(batch.num_slices == 1);
    CHECK(batch.slice_len == 3);
    CHECK(batch.height == 4);
    CHECK(batch.width == 4);
    CHECK(batch.main_frames.size() == batch.fer_frames.size());
    CHECK(batch.main_frames.size() == 1 * 3 * 4 * 4 * 3);

    const std::int64_t raw[] = {1, 3, 4};
    for (std::size_t t = 0; t < 3; ++t) {
        const float* mf = batch.main_frame(0, t);
        const float* ff = batch.fer_frame(0, t);
        for (std::size_t i = 0; i < batch.frame_values(); ++i) {
            CHECK(mf[i] == doctest::Approx(raw[t] / 255.0).epsilon(1e-7));
            CHECK(ff[i] == doctest::Approx((raw[t] + 100) / 255.0).epsilon(1e-7));
        }
    }
}

TEST_CASE("assemble_slice_batch validates inputs") {
    TempDir tmp("asdvid-batch-err");
    std::vector<std::int64_t> kept = {0, 1, 2};
    write_streams(tmp.path(), kept, 4);

    Slice good;
    good.video_id = "v";
    good.indices = {0, 1};

    // Position beyond the kept range.
    Slice oob = good;
    oob.indices = {1, 7};
    CHECK(kind_of([&] {
              assemble_slice_batch({oob}, kept, tmp / "main", tmp / "fer");
          }) == ErrorKind::MissingFrameFile);

    // Unequal slice lengths in one batch.
    Slice longer = good;
    longer.indices = {0, 1, 2};
    CHECK(kind_of([&] {
              assemble_slice_batch({good, longer}, kept, tmp / "main",
                                   tmp / "fer");
          }) == ErrorKind::ShapeMismatch);

    // A missing file surfaces as MissingFrameFile via the reader.
    std::filesystem::remove(tmp / "fer" / frame_filename(1));
    CHECK(kind_of([&] {
              assemble_slice_batch({good}, kept, tmp / "main", tmp / "fer");
          }) == ErrorKind::MissingFrameFile);

    // Empty slice list: a well-formed empty batch, not an error.
    CHECK(assemble_slice_batch({}, kept, tmp / "main", tmp / "fer").num_slices ==
          0);
}

TEST_CASE("frame cache serves repeat reads and reports its footprint") {
    TempDir tmp("asdvid-cache");
    std::vector<std::int64_t> kept = {0, 1};
    write_streams(tmp.path(), kept, 4);

    FrameCache cache;
    const Image& first = cache.get(tmp / "main" / frame_filename(0));
    CHECK(cache.bytes() == first.data.size());
    const Image& again = cache.get(tmp / "main" / frame_filename(0));
    CHECK(&first == &again);          // served from cache, no second decode
    CHECK(cache.bytes() == first.data.size());

    cache.get(tmp / "main" / frame_filename(1));
    CHECK(cache.bytes() == 2 * first.data.size());
    cache.clear();
    CHECK(cache.bytes() == 0);

    // Deleting the file after caching shows reads bypass the filesystem.
    FrameCache warm;
    warm.get(tmp / "fer" / frame_filename(0));
    std::filesystem::remove(tmp / "fer" / frame_filename(0));
    CHECK_NOTHROW(warm.get(tmp / "fer" / frame_filename(0)));
}

TEST_CASE("concat stacks batches in argument order") {
    TempDir tmp("asdvid-concat");
    std::vector<std::int64_t> kept = {0, 1, 2, 3};
    write_streams(tmp.path(), kept, 4);

    Slice a, b;
    a.video_id = "a";
    a.indices = {0, 1};
    b.video_id = "b";
    b.indices = {2, 3};
    auto ba = assemble_slice_batch({a}, kept, tmp / "main", tmp / "fer");
    auto bb = assemble_slice_batch({b}, kept, tmp / "main", tmp / "fer");

    SliceBatch cat = concat_slice_batches({ba, bb});
    CHECK(cat.num_slices == 2);
    CHECK(cat.slice_len == 2);
    // Slice 0 carries a's frames, slice 1 carries b's.
    CHECK(cat.main_frame(0, 0)[0] == doctest::Approx(0.0));
    CHECK(cat.main_frame(0, 1)[0] == doctest::Approx(1 / 255.0));
    CHECK(cat.main_frame(1, 0)[0] == doctest::Approx(2 / 255.0));
    CHECK(cat.main_frame(1, 1)[0] == doctest::Approx(3 / 255.0));

    // Mismatched shapes refuse to concatenate.
    SliceBatch odd = ba;
    odd.slice_len = 1;
    odd.main_frames.resize(odd.num_slices * 1 * odd.frame_values());
    odd.fer_frames.resize(odd.num_slices * 1 * odd.frame_values());
    CHECK(kind_of([&] { concat_slice_batches({ba, odd}); }) ==
          ErrorKind::ShapeMismatch);

    // Empty input gives an empty batch.
    CHECK(concat_slice_batches({}).num_slices == 0);
}
