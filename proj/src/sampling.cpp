#include "asdvid/sampling.hpp"

#include <numeric>

#include "asdvid/errors.hpp"

namespace asdvid {

std::vector<Slice> sample_slices(const std::string& video_id,
                                 const std::vector<std::int64_t>& kept,
                                 const SliceSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = kept.size();
  const std::size_t len = std::size_t(spec.slice_len);
  if (n < len)
    fail(ErrorKind::VideoTooShort,
         video_id + ": " + std::to_string(n) + " kept frames < slice_len " +
             std::to_string(spec.slice_len));

  const std::size_t last_start = n - len;
  std::size_t first_start = 0;
  if (spec.window == SampleWindow::SecondHalf) {
    const std::size_t half = n / 2;
    if (half <= last_start) first_start = half;  // else fall back to full
  }

  std::uniform_int_distribution<std::size_t> pick(first_start, last_start);
  std::vector<Slice> slices;
  slices.reserve(std::size_t(spec.num_slices));
  for (int i = 0; i < spec.num_slices; ++i) {
    Slice s;
    s.video_id = video_id;
    s.start = pick(rng);
    s.indices.resize(len);
    std::iota(s.indices.begin(), s.indices.end(), s.start);
    slices.push_back(std::move(s));
  }
  return slices;
}

const Image& FrameCache::get(const std::filesystem::path& path) {
  const std::string key = path.string();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  Image img = read_ppm(path);
  bytes_ += img.data.size();
  return cache_.emplace(key, std::move(img)).first->second;
}

void FrameCache::clear() {
  cache_.clear();
  bytes_ = 0;
}

namespace {

void fill_stream(std::vector<float>& dst, std::size_t frame_slot,
                 std::size_t frame_values, const Image& img) {
  float* out = dst.data() + frame_slot * frame_values;
  const std::uint8_t* src = img.data.data();
  for (std::size_t i = 0; i < frame_values; ++i)
    out[i] = float(src[i]) * (1.0f / 255.0f);
}

}  // namespace

SliceBatch assemble_slice_batch(const std::vector<Slice>& slices,
                                const std::vector<std::int64_t>& kept,
                                const std::filesystem::path& main_dir,
                                const std::filesystem::path& fer_dir,
                                FrameCache* cache) {
  SliceBatch batch;
  if (slices.empty()) return batch;
  batch.num_slices = slices.size();
  batch.slice_len = slices.front().indices.size();

  FrameCache local;
  FrameCache& frames = cache ? *cache : local;

  std::size_t slot = 0;
  for (const auto& slice : slices) {
    if (slice.indices.size() != batch.slice_len)
      fail(ErrorKind::ShapeMismatch, "slices of unequal length in one batch");
    for (const auto pos : slice.indices) {
      if (pos >= kept.size())
        fail(ErrorKind::MissingFrameFile,
             slice.video_id + ": kept position " + std::to_string(pos) +
                 " out of range");
      const int raw = int(kept[pos]);
      const Image& main_img = frames.get(main_dir / frame_filename(raw));
      const Image& fer_img = frames.get(fer_dir / frame_filename(raw));
      if (batch.height == 0) {
        batch.height = std::size_t(main_img.height);
        batch.width = std::size_t(main_img.width);
        const std::size_t total =
            batch.num_slices * batch.slice_len * batch.frame_values();
        batch.main_frames.assign(total, 0.0f);
        batch.fer_frames.assign(total, 0.0f);
      }
      if (std::size_t(main_img.height) != batch.height ||
          std::size_t(main_img.width) != batch.width ||
          std::size_t(fer_img.height) != batch.height ||
          std::size_t(fer_img.width) != batch.width)
        fail(ErrorKind::ShapeMismatch,
             slice.video_id + ": inconsistent frame dimensions");
      fill_stream(batch.main_frames, slot, batch.frame_values(), main_img);
      fill_stream(batch.fer_frames, slot, batch.frame_values(), fer_img);
      ++slot;
    }
  }
  return batch;
}

SliceBatch concat_slice_batches(const std::vector<SliceBatch>& batches) {
  SliceBatch out;
  for (const auto& b : batches) {
    if (b.num_slices == 0) continue;
    if (out.num_slices == 0) {
      out.slice_len = b.slice_len;
      out.height = b.height;
      out.width = b.width;
    } else if (b.slice_len != out.slice_len || b.height != out.height ||
               b.width != out.width) {
      fail(ErrorKind::ShapeMismatch, "cannot concat mismatched slice batches");
    }
    out.num_slices += b.num_slices;
    out.main_frames.insert(out.main_frames.end(), b.main_frames.begin(),
                           b.main_frames.end());
    out.fer_frames.insert(out.fer_frames.end(), b.fer_frames.begin(),
                          b.fer_frames.end());
  }
  return out;
}

}  // namespace asdvid
