#include "asdvid/config.hpp"

#include <fstream>

#include "asdvid/errors.hpp"
#include "asdvid/json_util.hpp"

namespace asdvid {

std::string to_string(SampleWindow w) {
  return w == SampleWindow::Full ? "full" : "second_half";
}

SampleWindow sample_window_from_string(const std::string& s) {
  if (s == "full") return SampleWindow::Full;
  if (s == "second_half") return SampleWindow::SecondHalf;
  fail(ErrorKind::ConfigError, "unknown sample window '" + s + "'");
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  return {{"manifest", cfg.manifest.string()},
          {"workdir", cfg.workdir.string()},
          {"checkpoint", cfg.checkpoint.string()},
          {"report", cfg.report.string()},
          {"slices",
           {{"num_slices", cfg.slices.num_slices},
            {"slice_len", cfg.slices.slice_len},
            {"window", to_string(cfg.slices.window)},
            {"seed", cfg.slices.seed}}},
          {"pose_gate",
           {{"min_deg", cfg.pose_gate.min_deg},
            {"max_deg", cfg.pose_gate.max_deg}}},
          {"crop_margin", cfg.crop_margin},
          {"out_size", cfg.out_size},
          {"model", model_config_to_json(cfg.model)},
          {"train", train_config_to_json(cfg.train)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown_fields(j,
                        {"manifest", "workdir", "checkpoint", "report",
                         "slices", "pose_gate", "crop_margin", "out_size",
                         "model", "train"},
                        "run config");
  RunConfig cfg;
  if (j.contains("manifest"))
    cfg.manifest = j.at("manifest").get<std::string>();
  if (j.contains("workdir")) cfg.workdir = j.at("workdir").get<std::string>();
  if (j.contains("checkpoint"))
    cfg.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("report")) cfg.report = j.at("report").get<std::string>();
  if (j.contains("slices")) {
    const auto& s = j.at("slices");
    reject_unknown_fields(s, {"num_slices", "slice_len", "window", "seed"},
                          "slices");
    if (s.contains("num_slices"))
      cfg.slices.num_slices = s.at("num_slices").get<int>();
    if (s.contains("slice_len"))
      cfg.slices.slice_len = s.at("slice_len").get<int>();
    if (s.contains("window"))
      cfg.slices.window =
          sample_window_from_string(s.at("window").get<std::string>());
    if (s.contains("seed")) cfg.slices.seed = s.at("seed").get<std::uint64_t>();
    if (cfg.slices.num_slices < 1 || cfg.slices.slice_len < 1)
      fail(ErrorKind::ConfigError, "slices: counts must be >= 1");
  }
  if (j.contains("pose_gate")) {
    const auto& g = j.at("pose_gate");
    reject_unknown_fields(g, {"min_deg", "max_deg"}, "pose_gate");
    if (g.contains("min_deg"))
      cfg.pose_gate.min_deg = g.at("min_deg").get<double>();
    if (g.contains("max_deg"))
      cfg.pose_gate.max_deg = g.at("max_deg").get<double>();
    if (!(cfg.pose_gate.min_deg <= cfg.pose_gate.max_deg))
      fail(ErrorKind::ConfigError, "pose_gate: min_deg must be <= max_deg");
  }
  if (j.contains("crop_margin"))
    cfg.crop_margin = j.at("crop_margin").get<double>();
  if (j.contains("out_size")) cfg.out_size = j.at("out_size").get<int>();
  if (cfg.crop_margin < 0.0)
    fail(ErrorKind::ConfigError, "crop_margin must be >= 0");
  if (cfg.out_size < 1) fail(ErrorKind::ConfigError, "out_size must be >= 1");
  if (j.contains("model"))
    cfg.model = model_config_from_json(j.at("model"));
  else
    cfg.model.validate();
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  return cfg;
}

void apply_config_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(ErrorKind::ConfigError,
         "override must look like key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings stay strings

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty())
      fail(ErrorKind::ConfigError, "bad override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "config file " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    fail(ErrorKind::ConfigError, path.string() + ": invalid JSON");
  for (const auto& ov : overrides) apply_config_override(j, ov);

  RunConfig cfg = run_config_from_json(j);
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(cfg.manifest);
  resolve(cfg.workdir);
  resolve(cfg.checkpoint);
  resolve(cfg.report);
  return cfg;
}

}  // namespace asdvid
