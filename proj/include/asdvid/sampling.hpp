#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "asdvid/image.hpp"
#include "asdvid/types.hpp"

namespace asdvid {

enum class SampleWindow { Full, SecondHalf };

struct SliceSpec {
  int num_slices = 2;
  int slice_len = 16;
  SampleWindow window = SampleWindow::SecondHalf;
  std::uint64_t seed = 0;
};

// One fixed-length run of consecutive kept frames. `indices` are positions
// in the kept sequence (not raw frame numbers); the kept list maps them
// back to files.
struct Slice {
  std::string video_id;
  std::size_t start = 0;
  std::vector<std::size_t> indices;
};

// Starts are drawn uniformly from the valid range of the chosen window;
// SecondHalf restricts starts to the back half of the kept sequence when
// that subrange admits one, else falls back to the full range.
std::vector<Slice> sample_slices(const std::string& video_id,
                                 const std::vector<std::int64_t>& kept,
                                 const SliceSpec& spec, std::mt19937_64& rng);

// Paired image stacks, shape (num_slices, slice_len, H, W, 3), channel
// values normalized to [0, 1].
struct SliceBatch {
  std::size_t num_slices = 0;
  std::size_t slice_len = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> main_frames;
  std::vector<float> fer_frames;

  std::size_t frame_values() const { return height * width * 3; }
  float* main_frame(std::size_t s, std::size_t t) {
    return main_frames.data() + (s * slice_len + t) * frame_values();
  }
  const float* main_frame(std::size_t s, std::size_t t) const {
    return main_frames.data() + (s * slice_len + t) * frame_values();
  }
  float* fer_frame(std::size_t s, std::size_t t) {
    return fer_frames.data() + (s * slice_len + t) * frame_values();
  }
  const float* fer_frame(std::size_t s, std::size_t t) const {
    return fer_frames.data() + (s * slice_len + t) * frame_values();
  }
};

// Keeps decoded frames in memory across training steps; preprocessed
// streams for a desk-scale run fit comfortably in RAM.
class FrameCache {
 public:
  const Image& get(const std::filesystem::path& path);
  void clear();
  std::size_t bytes() const { return bytes_; }

 private:
  std::map<std::string, Image> cache_;
  std::size_t bytes_ = 0;
};

SliceBatch assemble_slice_batch(const std::vector<Slice>& slices,
                                const std::vector<std::int64_t>& kept,
                                const std::filesystem::path& main_dir,
                                const std::filesystem::path& fer_dir,
                                FrameCache* cache = nullptr);

// Concatenates per-video batches into one training batch, slices stacked
// in argument order.
SliceBatch concat_slice_batches(const std::vector<SliceBatch>& batches);

}  // namespace asdvid
