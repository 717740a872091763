#include "asdvid/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "asdvid/errors.hpp"

namespace asdvid {

namespace {

using json = nlohmann::ordered_json;

json parse_line(const std::string& line, const std::filesystem::path& path,
                int line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(ErrorKind::SchemaViolation,
         path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
  return j;
}

// Pulls a required key, rejecting anything of the wrong type; errors name
// the offending field and line.
const json& field(const json& j, const char* key,
                  const std::filesystem::path& path, int line_no) {
  auto it = j.find(key);
  if (it == j.end())
    fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                         std::to_string(line_no) +
                                         ": missing field '" + key + "'");
  return *it;
}

void check_known_fields(const json& j, const std::set<std::string>& known,
                        const std::filesystem::path& path, int line_no) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": unknown field '" + it.key() + "'");
  }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());

  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::set<std::string> seen_ids;
  static const std::set<std::string> known = {
      "video_id", "subject_id", "label",       "sense",      "stimulus",
      "frames_path", "frame_count", "fps",     "sidecar_path"};

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    if (!have_header) {
      if (!j.contains("schema_version"))
        fail(ErrorKind::SchemaViolation,
             path.string() + ":1: first line must carry schema_version");
      manifest.schema_version = j.at("schema_version").get<int>();
      have_header = true;
      continue;
    }
    check_known_fields(j, known, path, line_no);
    VideoRecord r;
    try {
      r.video_id = field(j, "video_id", path, line_no).get<std::string>();
      r.subject_id = field(j, "subject_id", path, line_no).get<std::string>();
      r.label = label_from_int(field(j, "label", path, line_no).get<int>());
      r.sense =
          sense_from_string(field(j, "sense", path, line_no).get<std::string>());
      r.stimulus = field(j, "stimulus", path, line_no).get<std::string>();
      r.frames_path = field(j, "frames_path", path, line_no).get<std::string>();
      r.frame_count =
          field(j, "frame_count", path, line_no).get<std::int64_t>();
      r.fps = field(j, "fps", path, line_no).get<double>();
      r.sidecar_path =
          field(j, "sidecar_path", path, line_no).get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                           std::to_string(line_no) + ": " +
                                           e.what());
    }
    if (r.video_id.empty())
      fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": empty video_id");
    if (r.frame_count < 0)
      fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": negative frame_count");
    if (!(r.fps > 0.0))
      fail(ErrorKind::SchemaViolation, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": fps must be positive");
    if (!seen_ids.insert(r.video_id).second)
      fail(ErrorKind::DuplicateVideoId, r.video_id + " (line " +
                                            std::to_string(line_no) + " of " +
                                            path.string() + ")");
    // Paths in the file are relative to the manifest; resolve them so the
    // dataset directory is relocatable.
    const auto base = path.parent_path();
    if (r.frames_path.is_relative()) r.frames_path = base / r.frames_path;
    if (r.sidecar_path.is_relative()) r.sidecar_path = base / r.sidecar_path;
    manifest.records.push_back(std::move(r));
  }
  if (!have_header)
    fail(ErrorKind::SchemaViolation, path.string() + ": empty manifest file");
  return manifest;
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoFailure, "cannot open for write: " + path.string());
  json header;
  header["schema_version"] = manifest.schema_version;
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) {
    json j;
    j["video_id"] = r.video_id;
    j["subject_id"] = r.subject_id;
    j["label"] = int(r.label);
    j["sense"] = to_string(r.sense);
    j["stimulus"] = r.stimulus;
    j["frames_path"] = r.frames_path.generic_string();
    j["frame_count"] = r.frame_count;
    j["fps"] = r.fps;
    j["sidecar_path"] = r.sidecar_path.generic_string();
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrorKind::IoFailure, "short write: " + path.string());
}

std::vector<FrameAnnotation> load_sidecar(const VideoRecord& record) {
  const auto& path = record.sidecar_path;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingSidecar, path.string());

  std::vector<FrameAnnotation> annotations;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    FrameAnnotation a;
    try {
      a.frame_index = j.at("frame_index").get<std::int64_t>();
      auto bbox = j.at("bbox");
      if (!bbox.is_array() || bbox.size() != 4)
        fail(ErrorKind::MalformedAnnotation,
             path.string() + ":" + std::to_string(line_no) +
                 ": bbox must be [x,y,w,h]");
      a.bbox = {bbox[0].get<double>(), bbox[1].get<double>(),
                bbox[2].get<double>(), bbox[3].get<double>()};
      auto lms = j.at("landmarks");
      if (!lms.is_array() || lms.size() != kNumLandmarks)
        fail(ErrorKind::MalformedAnnotation,
             path.string() + ":" + std::to_string(line_no) + ": expected " +
                 std::to_string(kNumLandmarks) + " landmark points, got " +
                 std::to_string(lms.size()));
      for (std::size_t i = 0; i < kNumLandmarks; ++i) {
        if (!lms[i].is_array() || lms[i].size() != 2)
          fail(ErrorKind::MalformedAnnotation,
               path.string() + ":" + std::to_string(line_no) +
                   ": landmark must be [x,y]");
        a.landmarks[i] = {lms[i][0].get<double>(), lms[i][1].get<double>()};
      }
      a.yaw = j.at("yaw").get<double>();
      a.pitch = j.at("pitch").get<double>();
      a.roll = j.at("roll").get<double>();
    } catch (const json::exception& e) {
      fail(ErrorKind::MalformedAnnotation, path.string() + ":" +
                                               std::to_string(line_no) + ": " +
                                               e.what());
    }
    if (a.frame_index < 0)
      fail(ErrorKind::MalformedAnnotation,
           path.string() + ":" + std::to_string(line_no) +
               ": negative frame_index");
    if (!(a.bbox.w > 0.0) || !(a.bbox.h > 0.0))
      fail(ErrorKind::MalformedAnnotation,
           path.string() + ":" + std::to_string(line_no) +
               ": bbox w and h must be positive");
    if (!std::isfinite(a.yaw) || !std::isfinite(a.pitch) ||
        !std::isfinite(a.roll))
      fail(ErrorKind::MalformedAnnotation,
           path.string() + ":" + std::to_string(line_no) +
               ": pose angles must be finite");
    annotations.push_back(a);
  }

  std::sort(annotations.begin(), annotations.end(),
            [](const FrameAnnotation& a, const FrameAnnotation& b) {
              return a.frame_index < b.frame_index;
            });
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto idx = annotations[i].frame_index;
    if (idx > std::int64_t(i))
      fail(ErrorKind::FrameCoverageGap,
           "first missing frame index " + std::to_string(i) + " in " +
               path.string());
    if (idx < std::int64_t(i))
      fail(ErrorKind::MalformedAnnotation,
           "duplicate frame index " + std::to_string(idx) + " in " +
               path.string());
  }
  if (std::int64_t(annotations.size()) < record.frame_count)
    fail(ErrorKind::FrameCoverageGap,
         "first missing frame index " + std::to_string(annotations.size()) +
             " in " + path.string());
  if (std::int64_t(annotations.size()) > record.frame_count)
    fail(ErrorKind::MalformedAnnotation,
         path.string() + ": has " + std::to_string(annotations.size()) +
             " annotations for frame_count " +
             std::to_string(record.frame_count));
  return annotations;
}

void write_sidecar(const std::vector<FrameAnnotation>& annotations,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoFailure, "cannot open for write: " + path.string());
  for (const auto& a : annotations) {
    json j;
    j["frame_index"] = a.frame_index;
    j["bbox"] = {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h};
    json lms = json::array();
    for (const auto& p : a.landmarks) lms.push_back({p.x, p.y});
    j["landmarks"] = lms;
    j["yaw"] = a.yaw;
    j["pitch"] = a.pitch;
    j["roll"] = a.roll;
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrorKind::IoFailure, "short write: " + path.string());
}

}  // namespace asdvid
