#pragma once

#include <filesystem>
#include <vector>

#include "asdvid/types.hpp"

namespace asdvid {

// Manifest and sidecar files are UTF-8 JSON lines, one record per line.
// A manifest starts with a header line carrying the schema version.

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);

// Returns one annotation per frame index, sorted ascending and gap-free
// over 0..frame_count-1.
std::vector<FrameAnnotation> load_sidecar(const VideoRecord& record);

void write_sidecar(const std::vector<FrameAnnotation>& annotations,
                   const std::filesystem::path& path);

}  // namespace asdvid
