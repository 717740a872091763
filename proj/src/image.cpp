#include "asdvid/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "asdvid/errors.hpp"

namespace asdvid {

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoFailure, "cannot open for write: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            std::streamsize(img.data.size()));
  if (!out) fail(ErrorKind::IoFailure, "short write: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFrameFile, path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    fail(ErrorKind::IoFailure, "not an 8-bit P6 ppm: " + path.string());
  in.get();  // single whitespace after header
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()),
          std::streamsize(img.data.size()));
  if (in.gcount() != std::streamsize(img.data.size()))
    fail(ErrorKind::IoFailure, "truncated ppm: " + path.string());
  return img;
}

void sample_bilinear(const Image& img, double x, double y, double out[3]) {
  out[0] = out[1] = out[2] = 0.0;
  const int x0 = int(std::floor(x));
  const int y0 = int(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy,
                       fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0 || !img.in_bounds(xs[k], ys[k])) continue;
    const std::uint8_t* p = img.pixel(xs[k], ys[k]);
    out[0] += w[k] * p[0];
    out[1] += w[k] * p[1];
    out[2] += w[k] * p[2];
  }
}

void sample_bilinear_clamp(const Image& img, double x, double y,
                           double out[3]) {
  x = std::min(double(img.width - 1), std::max(0.0, x));
  y = std::min(double(img.height - 1), std::max(0.0, y));
  sample_bilinear(img, x, y, out);
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  Image out(out_w, out_h);
  const double sx = double(img.width) / out_w;
  const double sy = double(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      // map output pixel center into source pixel-center coordinates
      const double src_x = (x + 0.5) * sx - 0.5;
      const double src_y = (y + 0.5) * sy - 0.5;
      double rgb[3];
      sample_bilinear_clamp(img, src_x, src_y, rgb);
      std::uint8_t* p = out.pixel(x, y);
      for (int c = 0; c < 3; ++c)
        p[c] = std::uint8_t(std::lround(std::min(255.0, std::max(0.0, rgb[c]))));
    }
  }
  return out;
}

std::filesystem::path frame_filename(int frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.ppm", frame_index);
  return buf;
}

}  // namespace asdvid
