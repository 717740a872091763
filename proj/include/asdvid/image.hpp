#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace asdvid {

// Interleaved 8-bit RGB raster. Frames move through the pipeline as plain
// PPM (P6) files so every stage is diffable and byte-reproducible.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width * 3, row-major RGB

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(std::size_t(w) * h * 3, 0) {}

  std::uint8_t* pixel(int x, int y) {
    return data.data() + (std::size_t(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (std::size_t(y) * width + x) * 3;
  }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
};

void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// Bilinear sample at real-valued (x, y); coordinates outside the raster
// contribute black. `out` receives 3 channels in [0, 255].
void sample_bilinear(const Image& img, double x, double y, double out[3]);

// Same, but clamps (x, y) to the raster (border replicate).
void sample_bilinear_clamp(const Image& img, double x, double y, double out[3]);

// Bilinear resize to (out_w, out_h) using pixel-center alignment.
Image resize_bilinear(const Image& img, int out_w, int out_h);

std::filesystem::path frame_filename(int frame_index);

}  // namespace asdvid
