#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "asdvid/model.hpp"
#include "asdvid/preprocess.hpp"
#include "asdvid/sampling.hpp"
#include "asdvid/train_eval.hpp"

namespace asdvid {

// One configuration file drives every pipeline command; the JSON layout
// mirrors these field names exactly.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path workdir;     // preprocess output root
  std::filesystem::path checkpoint;  // checkpoint root (fold_<i> inside)
  std::filesystem::path report;      // evaluation report output
  SliceSpec slices;
  PoseGate pose_gate;
  double crop_margin = 0.25;
  int out_size = 224;
  ModelConfig model;
  TrainConfig train;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Parses `key=value` with a dotted key path (e.g. train.epochs=3) into the
// JSON tree; the value is read as a JSON literal, falling back to a string.
void apply_config_override(nlohmann::json& j, const std::string& assignment);

// Loads the file, applies overrides in order, resolves relative paths
// against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

std::string to_string(SampleWindow w);
SampleWindow sample_window_from_string(const std::string& s);

}  // namespace asdvid
