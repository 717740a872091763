#include "asdvid/preprocess.hpp"

#include <cmath>
#include <fstream>

#include "asdvid/errors.hpp"
#include "asdvid/manifest.hpp"

namespace asdvid {

AlignmentTemplate AlignmentTemplate::scaled_to(int out_size) const {
  AlignmentTemplate t = *this;
  if (out_size != canvas) {
    const double s = double(out_size) / canvas;
    for (auto& p : t.points) {
      p.x *= s;
      p.y *= s;
    }
    t.canvas = out_size;
  }
  return t;
}

Point SimilarityTransform::apply(const Point& p) const {
  const double c = std::cos(rotation), s = std::sin(rotation);
  return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  const double c = std::cos(inv.rotation), s = std::sin(inv.rotation);
  inv.tx = -inv.scale * (c * tx - s * ty);
  inv.ty = -inv.scale * (s * tx + c * ty);
  return inv;
}

std::vector<std::int64_t> filter_by_pose(
    const std::vector<FrameAnnotation>& annotations, const PoseGate& gate) {
  std::vector<std::int64_t> kept;
  auto in_gate = [&](double a) { return a >= gate.min_deg && a <= gate.max_deg; };
  for (const auto& a : annotations) {
    if (in_gate(a.yaw) && in_gate(a.pitch) && in_gate(a.roll))
      kept.push_back(a.frame_index);
  }
  if (!annotations.empty() && kept.empty())
    fail(ErrorKind::AllFramesRejected,
         "pose gate [" + std::to_string(gate.min_deg) + ", " +
             std::to_string(gate.max_deg) + "] rejected all " +
             std::to_string(annotations.size()) + " frames");
  return kept;
}

Image crop_face(const Image& frame, const BBox& bbox, double margin,
                int out_size) {
  if (!(bbox.w > 0.0) || !(bbox.h > 0.0))
    fail(ErrorKind::DegenerateBox, "bbox w and h must be positive");
  const double side_f = std::max(bbox.w, bbox.h) * (1.0 + 2.0 * margin);
  const double cx = bbox.x + bbox.w / 2.0;
  const double cy = bbox.y + bbox.h / 2.0;

  // integer-aligned square region centered on the box; outside pixels black
  const int side = std::max(1, int(std::lround(side_f)));
  const int x0 = int(std::lround(cx - side_f / 2.0));
  const int y0 = int(std::lround(cy - side_f / 2.0));

  Image square(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int sx = x0 + x, sy = y0 + y;
      if (!frame.in_bounds(sx, sy)) continue;
      const std::uint8_t* src = frame.pixel(sx, sy);
      std::uint8_t* dst = square.pixel(x, y);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return resize_bilinear(square, out_size, out_size);
}

SimilarityTransform estimate_similarity(const Landmarks& src,
                                        const Landmarks& dst) {
  // Least squares over a = s cos(theta), b = s sin(theta), t; with points
  // centered this decouples into closed-form expressions.
  const double n = double(kNumLandmarks);
  Point src_mean{0, 0}, dst_mean{0, 0};
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    src_mean.x += src[i].x / n;
    src_mean.y += src[i].y / n;
    dst_mean.x += dst[i].x / n;
    dst_mean.y += dst[i].y / n;
  }
  double var = 0.0, dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const double sx = src[i].x - src_mean.x, sy = src[i].y - src_mean.y;
    const double dx = dst[i].x - dst_mean.x, dy = dst[i].y - dst_mean.y;
    var += sx * sx + sy * sy;
    dot += sx * dx + sy * dy;
    cross += sx * dy - sy * dx;
  }
  if (var <= 1e-12)
    fail(ErrorKind::DegenerateConfiguration,
         "source landmarks are (nearly) coincident");
  const double a = dot / var;
  const double b = cross / var;
  SimilarityTransform t;
  t.scale = std::sqrt(a * a + b * b);
  if (t.scale <= 0.0)
    fail(ErrorKind::DegenerateConfiguration,
         "estimated similarity collapses to scale 0");
  t.rotation = std::atan2(b, a);
  // t = dst_mean - s R src_mean
  const double c = std::cos(t.rotation), s = std::sin(t.rotation);
  t.tx = dst_mean.x - t.scale * (c * src_mean.x - s * src_mean.y);
  t.ty = dst_mean.y - t.scale * (s * src_mean.x + c * src_mean.y);
  return t;
}

Image align_face(const Image& frame, const Landmarks& landmarks,
                 const AlignmentTemplate& tmpl, int out_size) {
  const AlignmentTemplate scaled = tmpl.scaled_to(out_size);
  const SimilarityTransform fwd = estimate_similarity(landmarks, scaled.points);
  const SimilarityTransform inv = fwd.inverse();

  Image out(out_size, out_size);
  for (int y = 0; y < out_size; ++y) {
    for (int x = 0; x < out_size; ++x) {
      const Point src = inv.apply({double(x), double(y)});
      double rgb[3];
      sample_bilinear(frame, src.x, src.y, rgb);
      std::uint8_t* p = out.pixel(x, y);
      for (int c = 0; c < 3; ++c)
        p[c] = std::uint8_t(std::lround(std::min(255.0, std::max(0.0, rgb[c]))));
    }
  }
  return out;
}

VideoPreprocessResult preprocess_video(const VideoRecord& record,
                                       const PreprocessOptions& options,
                                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto annotations = load_sidecar(record);
  VideoPreprocessResult result;
  result.video_id = record.video_id;
  result.total_frames = annotations.size();
  result.kept = filter_by_pose(annotations, options.gate);

  const fs::path video_dir = out_dir / record.video_id;
  const fs::path main_dir = video_dir / "main";
  const fs::path fer_dir = video_dir / "fer";
  std::error_code ec;
  fs::create_directories(main_dir, ec);
  fs::create_directories(fer_dir, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + video_dir.string());

  const AlignmentTemplate tmpl;
  for (const auto idx : result.kept) {
    const auto& a = annotations[std::size_t(idx)];
    const Image frame = read_ppm(record.frames_path / frame_filename(int(idx)));
    write_ppm(crop_face(frame, a.bbox, options.crop_margin, options.out_size),
              main_dir / frame_filename(int(idx)));
    write_ppm(align_face(frame, a.landmarks, tmpl, options.out_size),
              fer_dir / frame_filename(int(idx)));
  }
  write_kept_indices(result.kept, video_dir / "kept_indices.txt");
  return result;
}

std::vector<std::int64_t> read_kept_indices(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::MissingFile, file.string());
  std::vector<std::int64_t> kept;
  std::int64_t v;
  while (in >> v) kept.push_back(v);
  return kept;
}

void write_kept_indices(const std::vector<std::int64_t>& kept,
                        const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) fail(ErrorKind::IoFailure, "cannot open for write: " + file.string());
  for (const auto v : kept) out << v << "\n";
  if (!out) fail(ErrorKind::IoFailure, "short write: " + file.string());
}

void verify_dataset(const DatasetManifest& manifest) {
  namespace fs = std::filesystem;
  for (const auto& r : manifest.records) {
    if (!fs::is_directory(r.frames_path))
      fail(ErrorKind::MissingFile,
           "frames directory missing for " + r.video_id + ": " +
               r.frames_path.string());
    std::int64_t present = 0;
    for (const auto& e : fs::directory_iterator(r.frames_path)) {
      if (e.path().extension() == ".ppm") ++present;
    }
    if (present != r.frame_count)
      fail(ErrorKind::SchemaViolation,
           r.video_id + ": frame_count " + std::to_string(r.frame_count) +
               " but " + std::to_string(present) + " frame files present");
    const auto annotations = load_sidecar(r);  // coverage checked inside
    if (r.frame_count > 0) {
      const Image first = read_ppm(r.frames_path / frame_filename(0));
      for (const auto& a : annotations) {
        for (const auto& p : a.landmarks) {
          if (p.x < 0 || p.y < 0 || p.x >= first.width || p.y >= first.height)
            fail(ErrorKind::MalformedAnnotation,
                 r.video_id + " frame " + std::to_string(a.frame_index) +
                     ": landmark outside frame bounds");
        }
      }
    }
  }
}

}  // namespace asdvid
