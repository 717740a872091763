#include "asdvid/types.hpp"

#include <cmath>

#include "asdvid/errors.hpp"

namespace asdvid {

const char* to_string(Label label) {
  return label == Label::ASD ? "ASD" : "NT";
}

const char* to_string(Sense sense) {
  return sense == Sense::Taste ? "taste" : "smell";
}

Label label_from_int(int v) {
  if (v == 0) return Label::NT;
  if (v == 1) return Label::ASD;
  fail(ErrorKind::InvalidLabel, "label must be 0 or 1, got " + std::to_string(v));
}

Sense sense_from_string(const std::string& s) {
  if (s == "taste") return Sense::Taste;
  if (s == "smell") return Sense::Smell;
  fail(ErrorKind::SchemaViolation, "unknown sense: " + s);
}

const VideoRecord* DatasetManifest::find(const std::string& video_id) const {
  for (const auto& r : records)
    if (r.video_id == video_id) return &r;
  return nullptr;
}

void SyntheticSpec::validate() const {
  if (n_subjects <= 0 || videos_per_subject <= 0 || frames_per_video <= 0 ||
      image_size <= 0)
    fail(ErrorKind::InvalidSpec, "all counts must be positive");
  if (fps <= 0.0) fail(ErrorKind::InvalidSpec, "fps must be positive");
  if (pose_jitter_deg < 0.0)
    fail(ErrorKind::InvalidSpec, "pose_jitter_deg must be nonnegative");
  auto nt = class_motion_frequency.find(Label::NT);
  auto asd = class_motion_frequency.find(Label::ASD);
  if (nt == class_motion_frequency.end() || asd == class_motion_frequency.end())
    fail(ErrorKind::InvalidSpec, "class_motion_frequency must cover NT and ASD");
  if (nt->second <= 0.0 || asd->second <= 0.0)
    fail(ErrorKind::InvalidSpec, "motion frequencies must be positive");
  if (nt->second == asd->second)
    fail(ErrorKind::InvalidSpec,
         "class motion frequencies must differ between NT and ASD");
}

}  // namespace asdvid
