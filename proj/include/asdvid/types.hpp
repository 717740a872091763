#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace asdvid {

// Binary task labels. ASD is the positive class everywhere downstream.
enum class Label : int { NT = 0, ASD = 1 };

enum class Sense { Taste, Smell };

const char* to_string(Label label);
const char* to_string(Sense sense);
Label label_from_int(int v);           // throws InvalidLabel
Sense sense_from_string(const std::string& s);  // throws SchemaViolation

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Landmark order is fixed: left eye, right eye, nose tip, left mouth
// corner, right mouth corner.
constexpr std::size_t kNumLandmarks = 5;
using Landmarks = std::array<Point, kNumLandmarks>;

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct VideoRecord {
  std::string video_id;
  std::string subject_id;
  Label label = Label::NT;
  Sense sense = Sense::Taste;
  std::string stimulus;
  std::filesystem::path frames_path;
  std::int64_t frame_count = 0;
  double fps = 0.0;
  std::filesystem::path sidecar_path;
};

// Per-frame face box, landmarks and head pose, produced outside the
// pipeline (any detector works) and consumed here as data.
struct FrameAnnotation {
  std::int64_t frame_index = 0;
  BBox bbox;
  Landmarks landmarks;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

struct DatasetManifest {
  int schema_version = 1;
  std::vector<VideoRecord> records;

  const VideoRecord* find(const std::string& video_id) const;
};

// Controls the synthetic dataset generator. The two classes are told apart
// by the oscillation frequency of the rendered face, so the task is
// learnable from temporal context but not from any single frame.
struct SyntheticSpec {
  int n_subjects = 10;
  int videos_per_subject = 3;
  int frames_per_video = 64;
  // Deliberately incommensurate with the 2 s slice window (1.4 and 4.2
  // cycles per slice): oscillations must not average out exactly over a
  // slice, or the rate difference becomes invisible to pooled read-outs.
  std::map<Label, double> class_motion_frequency = {{Label::NT, 0.7},
                                                    {Label::ASD, 2.1}};
  int image_size = 160;
  double fps = 8.0;
  double pose_jitter_deg = 2.5;  // std-dev of yaw/pitch/roll noise
  std::uint64_t seed = 7;

  void validate() const;  // throws InvalidSpec
};

}  // namespace asdvid
