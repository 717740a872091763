#include "asdvid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "asdvid/errors.hpp"
#include "asdvid/image.hpp"
#include "asdvid/manifest.hpp"
#include "asdvid/rng.hpp"

namespace asdvid {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kTasteStimuli[] = {"sucrose", "caffeine", "salt",
                                         "citric_acid", "quinine"};
constexpr const char* kSmellStimuli[] = {"cabbage",  "peppermint", "garlic",
                                         "caramel",  "mushroom",   "citrus",
                                         "vanilla",  "fish"};

struct Rgb {
  std::uint8_t r, g, b;
};

// Stable per-subject appearance; videos of one subject look alike, which
// is what makes subject-exclusive folds meaningful.
struct SubjectLook {
  double face_rx;      // face half-width, px
  Rgb skin, background;
  double eye_scale;    // relative eye radius
  double mouth_width;  // relative mouth half-width
};

// Ranges are deliberately tight: subject identity must stay visible but
// small next to the motion amplitudes, or appearance becomes a second
// class separator among the handful of training subjects and the model
// shortcuts on it instead of on motion rate.
SubjectLook draw_subject_look(std::mt19937_64& rng, int image_size) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SubjectLook look;
  look.face_rx = (0.175 + 0.015 * u01(rng)) * image_size;
  look.skin = {std::uint8_t(205 + 12 * u01(rng)),
               std::uint8_t(160 + 10 * u01(rng)),
               std::uint8_t(122 + 8 * u01(rng))};
  const auto bg = std::uint8_t(70 + 12 * u01(rng));
  look.background = {bg, bg, std::uint8_t(bg + 8)};
  look.eye_scale = 0.135 + 0.02 * u01(rng);
  look.mouth_width = 0.52 + 0.06 * u01(rng);
  return look;
}

struct FaceState {
  double cx, cy;      // face center, px
  double scale = 1.0; // apparent size multiplier (approach/recede)
  double eye = 1.0;   // eyelid cycle: relative eye radius
  double aperture;    // mouth openness in [0, 1]
  double yaw, pitch, roll;  // degrees
};

// Exact geometry shared by the renderer and the sidecar writer.
struct FaceGeometry {
  Point left_eye, right_eye, nose, mouth_left, mouth_right;
  double rx, ry;        // face half-axes
  double eye_r, nose_r;
  double mouth_cx, mouth_cy, mouth_rx, mouth_ry;
  double cos_r, sin_r;

  FaceGeometry(const SubjectLook& look, const FaceState& st) {
    rx = look.face_rx * st.scale;
    ry = 1.25 * rx;
    eye_r = look.eye_scale * rx * st.eye;
    nose_r = 0.09 * rx;
    const double roll_rad = st.roll * std::numbers::pi / 180.0;
    cos_r = std::cos(roll_rad);
    sin_r = std::sin(roll_rad);
    const double nose_dx = (st.yaw / 30.0) * 0.22 * rx;
    const double nose_dy = 0.12 * ry + (st.pitch / 30.0) * 0.10 * ry;
    mouth_cx = 0.0;
    mouth_cy = 0.52 * ry + (st.pitch / 30.0) * 0.06 * ry;
    mouth_rx = look.mouth_width * rx;
    // Wide aperture swing: the mouth is the one class-frequency carrier
    // that survives both exact-box cropping and landmark alignment, so its
    // footprint has to move enough pixels for a from-scratch encoder to
    // pick up.
    mouth_ry = (0.05 + 0.42 * st.aperture) * ry;

    auto place = [&](double fx, double fy) -> Point {
      return {st.cx + cos_r * fx - sin_r * fy, st.cy + sin_r * fx + cos_r * fy};
    };
    left_eye = place(-0.42 * rx, -0.30 * ry);
    right_eye = place(0.42 * rx, -0.30 * ry);
    nose = place(nose_dx, nose_dy);
    mouth_left = place(-mouth_rx, mouth_cy);
    mouth_right = place(mouth_rx, mouth_cy);
  }

  // Rotated-ellipse axis-aligned bounding box of the face outline.
  BBox bbox(const FaceState& st) const {
    const double ex =
        std::sqrt(rx * rx * cos_r * cos_r + ry * ry * sin_r * sin_r);
    const double ey =
        std::sqrt(rx * rx * sin_r * sin_r + ry * ry * cos_r * cos_r);
    return {st.cx - ex, st.cy - ey, 2 * ex, 2 * ey};
  }
};

void render_frame(Image& img, const SubjectLook& look, const FaceState& st) {
  const FaceGeometry g(look, st);
  const Rgb eye_color{28, 30, 44};
  const Rgb nose_color{std::uint8_t(look.skin.r * 3 / 4),
                       std::uint8_t(look.skin.g * 3 / 4),
                       std::uint8_t(look.skin.b * 3 / 4)};
  const Rgb mouth_color{118, 32, 42};

  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // into face-local (unrotated) coordinates
      const double dx = x - st.cx;
      const double dy = y - st.cy;
      const double fx = g.cos_r * dx + g.sin_r * dy;
      const double fy = -g.sin_r * dx + g.cos_r * dy;

      Rgb c = look.background;
      const double face_d =
          (fx * fx) / (g.rx * g.rx) + (fy * fy) / (g.ry * g.ry);
      if (face_d <= 1.0) {
        c = look.skin;
        auto inside_circle = [&](double cx0, double cy0, double r) {
          const double ddx = fx - cx0, ddy = fy - cy0;
          return ddx * ddx + ddy * ddy <= r * r;
        };
        if (inside_circle(-0.42 * g.rx, -0.30 * g.ry, g.eye_r) ||
            inside_circle(0.42 * g.rx, -0.30 * g.ry, g.eye_r)) {
          c = eye_color;
        } else if (inside_circle((st.yaw / 30.0) * 0.22 * g.rx,
                                 0.12 * g.ry + (st.pitch / 30.0) * 0.10 * g.ry,
                                 g.nose_r)) {
          c = nose_color;
        } else {
          const double mx = fx - g.mouth_cx, my = fy - g.mouth_cy;
          if ((mx * mx) / (g.mouth_rx * g.mouth_rx) +
                  (my * my) / (g.mouth_ry * g.mouth_ry) <=
              1.0)
            c = mouth_color;
        }
      }
      std::uint8_t* p = img.pixel(x, y);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
  }
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  fs::create_directories(out_dir / "sidecars", ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + out_dir.string());

  DatasetManifest manifest;
  const double two_pi = 2.0 * std::numbers::pi;

  for (int s = 0; s < spec.n_subjects; ++s) {
    char sid[16];
    std::snprintf(sid, sizeof(sid), "S%03d", s);
    const Label label = (s % 2 == 0) ? Label::NT : Label::ASD;
    const double freq = spec.class_motion_frequency.at(label);

    auto subject_rng =
        make_engine(derive_seed(spec.seed, "subject-look", std::uint64_t(s)));
    const SubjectLook look = draw_subject_look(subject_rng, spec.image_size);

    for (int v = 0; v < spec.videos_per_subject; ++v) {
      char vid[32];
      std::snprintf(vid, sizeof(vid), "%s_V%02d", sid, v);
      const int video_index = s * spec.videos_per_subject + v;
      auto rng = make_engine(
          derive_seed(spec.seed, "video", std::uint64_t(video_index)));
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      std::normal_distribution<double> pose_noise(0.0, spec.pose_jitter_deg);

      const double phase_pos = two_pi * u01(rng);
      const double phase_ap = two_pi * u01(rng);
      const double phase_roll = two_pi * u01(rng);
      const double phase_scale = two_pi * u01(rng);
      const double phase_eye = two_pi * u01(rng);
      const double amp = (0.035 + 0.02 * u01(rng)) * spec.image_size;
      const double roll_amp = 4.0 + 2.0 * u01(rng);    // degrees
      const double scale_amp = 0.13 + 0.05 * u01(rng);
      const double eye_amp = 0.30 + 0.15 * u01(rng);
      const double cx0 = spec.image_size * (0.5 + 0.04 * (u01(rng) - 0.5));
      const double cy0 = spec.image_size * (0.5 + 0.04 * (u01(rng) - 0.5));

      const fs::path frames_dir = out_dir / "frames" / vid;
      fs::create_directories(frames_dir, ec);
      if (ec) fail(ErrorKind::IoFailure, "cannot create " + frames_dir.string());

      // Position, mouth aperture, eyelids, head roll and apparent size all
      // cycle at the class frequency; amplitudes and phases are per-video
      // draws with class-independent ranges, so rate is the only label
      // signal.
      std::vector<FaceState> states(std::size_t(spec.frames_per_video));
      for (int t = 0; t < spec.frames_per_video; ++t) {
        const double tau = two_pi * freq * t / spec.fps;
        FaceState& st = states[std::size_t(t)];
        st.cx = cx0 + amp * std::sin(tau + phase_pos);
        st.cy = cy0 + 0.6 * amp * std::cos(tau + phase_pos);
        st.scale = 1.0 + scale_amp * std::sin(tau + phase_scale);
        st.eye = 1.0 + eye_amp * std::sin(tau + phase_eye);
        st.aperture = 0.5 + 0.5 * std::sin(tau + phase_ap);
        st.yaw = pose_noise(rng);
        st.pitch = pose_noise(rng);
        st.roll = roll_amp * std::sin(tau + phase_roll) + pose_noise(rng);
      }

      // The detector box keeps one size for the whole video (the largest
      // extent seen) and only re-centers per frame. Cropping with it
      // stabilizes position but leaves roll and size changes visible in the
      // crop; a per-frame tight box would cancel the size cycle entirely.
      double ext_x = 0.0, ext_y = 0.0;
      for (const FaceState& st : states) {
        const BBox b = FaceGeometry(look, st).bbox(st);
        ext_x = std::max(ext_x, b.w / 2.0);
        ext_y = std::max(ext_y, b.h / 2.0);
      }

      std::vector<FrameAnnotation> annotations;
      annotations.reserve(states.size());
      Image img(spec.image_size, spec.image_size);
      for (int t = 0; t < spec.frames_per_video; ++t) {
        const FaceState& st = states[std::size_t(t)];
        render_frame(img, look, st);
        write_ppm(img, frames_dir / frame_filename(t));

        const FaceGeometry g(look, st);
        FrameAnnotation a;
        a.frame_index = t;
        a.bbox = {st.cx - ext_x, st.cy - ext_y, 2.0 * ext_x, 2.0 * ext_y};
        a.landmarks = {g.left_eye, g.right_eye, g.nose, g.mouth_left,
                       g.mouth_right};
        a.yaw = st.yaw;
        a.pitch = st.pitch;
        a.roll = st.roll;
        annotations.push_back(a);
      }

      const fs::path sidecar = out_dir / "sidecars" / (std::string(vid) + ".jsonl");
      write_sidecar(annotations, sidecar);

      VideoRecord r;
      r.video_id = vid;
      r.subject_id = sid;
      r.label = label;
      r.sense = (v % 2 == 0) ? Sense::Taste : Sense::Smell;
      const auto n_taste = std::size(kTasteStimuli);
      const auto n_smell = std::size(kSmellStimuli);
      r.stimulus = (r.sense == Sense::Taste)
                       ? kTasteStimuli[std::size_t(video_index) % n_taste]
                       : kSmellStimuli[std::size_t(video_index) % n_smell];
      r.frames_path = fs::path("frames") / vid;
      r.frame_count = spec.frames_per_video;
      r.fps = spec.fps;
      r.sidecar_path = fs::path("sidecars") / (std::string(vid) + ".jsonl");
      manifest.records.push_back(std::move(r));
    }
  }

  write_manifest(manifest, out_dir / "manifest.jsonl");
  // Echo the generating spec next to the data so a dataset directory is
  // self-describing and exactly re-creatable.
  write_synthetic_spec(spec, out_dir / "spec.json");
  // Reload so returned paths are resolved exactly as consumers will see them.
  return load_manifest(out_dir / "manifest.jsonl");
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(ErrorKind::InvalidSpec, "not a JSON object: " + path.string());
  static const std::set<std::string> known = {
      "n_subjects", "videos_per_subject", "frames_per_video",
      "class_motion_frequency", "image_size", "fps", "pose_jitter_deg", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      fail(ErrorKind::InvalidSpec,
           path.string() + ": unknown field '" + it.key() + "'");
  SyntheticSpec spec;
  try {
    if (j.contains("n_subjects")) spec.n_subjects = j["n_subjects"].get<int>();
    if (j.contains("videos_per_subject"))
      spec.videos_per_subject = j["videos_per_subject"].get<int>();
    if (j.contains("frames_per_video"))
      spec.frames_per_video = j["frames_per_video"].get<int>();
    if (j.contains("class_motion_frequency")) {
      const auto& f = j["class_motion_frequency"];
      spec.class_motion_frequency.clear();
      if (f.contains("NT"))
        spec.class_motion_frequency[Label::NT] = f["NT"].get<double>();
      if (f.contains("ASD"))
        spec.class_motion_frequency[Label::ASD] = f["ASD"].get<double>();
    }
    if (j.contains("image_size")) spec.image_size = j["image_size"].get<int>();
    if (j.contains("fps")) spec.fps = j["fps"].get<double>();
    if (j.contains("pose_jitter_deg"))
      spec.pose_jitter_deg = j["pose_jitter_deg"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidSpec, path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void write_synthetic_spec(const SyntheticSpec& spec,
                          const std::filesystem::path& path) {
  json j;
  j["n_subjects"] = spec.n_subjects;
  j["videos_per_subject"] = spec.videos_per_subject;
  j["frames_per_video"] = spec.frames_per_video;
  j["class_motion_frequency"] = {
      {"NT", spec.class_motion_frequency.at(Label::NT)},
      {"ASD", spec.class_motion_frequency.at(Label::ASD)}};
  j["image_size"] = spec.image_size;
  j["fps"] = spec.fps;
  j["pose_jitter_deg"] = spec.pose_jitter_deg;
  j["seed"] = spec.seed;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoFailure, "cannot open for write: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorKind::IoFailure, "short write: " + path.string());
}

}  // namespace asdvid
