#pragma once

#include <filesystem>
#include <vector>

#include "asdvid/image.hpp"
#include "asdvid/types.hpp"

namespace asdvid {

// Inclusive per-frame head-pose filter; a frame survives only if yaw,
// pitch and roll all lie in [min_deg, max_deg].
struct PoseGate {
  double min_deg = -10.0;
  double max_deg = 10.0;
};

// Canonical 5-point layout on the aligned canvas, bilaterally symmetric
// about x = canvas/2. Coordinates are for a 224x224 canvas and are scaled
// when a different output size is requested.
struct AlignmentTemplate {
  Landmarks points = {{{80.0, 92.0},
                       {144.0, 92.0},
                       {112.0, 128.0},
                       {88.0, 160.0},
                       {136.0, 160.0}}};
  int canvas = 224;

  AlignmentTemplate scaled_to(int out_size) const;
};

// scale * R(theta) * p + t
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  Point apply(const Point& p) const;
  SimilarityTransform inverse() const;
};

std::vector<std::int64_t> filter_by_pose(
    const std::vector<FrameAnnotation>& annotations, const PoseGate& gate);

Image crop_face(const Image& frame, const BBox& bbox, double margin,
                int out_size);

// Closed-form least-squares similarity fitting src onto dst.
SimilarityTransform estimate_similarity(const Landmarks& src,
                                        const Landmarks& dst);

Image align_face(const Image& frame, const Landmarks& landmarks,
                 const AlignmentTemplate& tmpl, int out_size);

struct PreprocessOptions {
  PoseGate gate;
  double crop_margin = 0.25;
  int out_size = 224;
};

struct VideoPreprocessResult {
  std::string video_id;
  std::size_t total_frames = 0;
  std::vector<std::int64_t> kept;  // raw frame indices that passed the gate
};

// Emits, under out_dir/<video_id>/: kept_indices.txt plus main/ (cropped)
// and fer/ (aligned) image directories, names mirroring raw frame indices.
// Throws AllFramesRejected when the gate leaves nothing.
VideoPreprocessResult preprocess_video(const VideoRecord& record,
                                       const PreprocessOptions& options,
                                       const std::filesystem::path& out_dir);

std::vector<std::int64_t> read_kept_indices(const std::filesystem::path& file);
void write_kept_indices(const std::vector<std::int64_t>& kept,
                        const std::filesystem::path& file);

// Cheap dataset-level checks pulled out of load_manifest: frames present
// and counted, sidecars complete, landmarks inside frame bounds.
void verify_dataset(const DatasetManifest& manifest);

}  // namespace asdvid
