#pragma once

#include <filesystem>

#include "asdvid/types.hpp"

namespace asdvid {

// Renders a schematic-face dataset under `out_dir`:
//   out_dir/frames/<video_id>/frame_%06d.ppm
//   out_dir/sidecars/<video_id>.jsonl
//   out_dir/manifest.jsonl
// Face position and mouth aperture oscillate at the class's motion
// frequency; sidecars carry exact ground-truth boxes, landmarks and pose
// angles. Output is byte-reproducible for a fixed seed.
DatasetManifest generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir);

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void write_synthetic_spec(const SyntheticSpec& spec,
                          const std::filesystem::path& path);

}  // namespace asdvid
