#include "asdvid/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "asdvid/errors.hpp"

namespace asdvid {

namespace {

constexpr char kParamsMagic[4] = {'A', 'V', 'C', 'P'};
constexpr char kOptimMagic[4] = {'A', 'V', 'O', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in)
    fail(ErrorKind::CheckpointMismatch, "truncated checkpoint reading " + what);
  return v;
}

void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* p, std::size_t n,
                  const std::string& what) {
  in.read(reinterpret_cast<char*>(p), std::streamsize(n * sizeof(double)));
  if (!in)
    fail(ErrorKind::CheckpointMismatch, "truncated checkpoint reading " + what);
}

std::ifstream open_input(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p))
    fail(ErrorKind::MissingFile, "missing checkpoint file " + p.string());
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::IoFailure, "cannot open " + p.string());
  return in;
}

void check_magic(std::ifstream& in, const char (&magic)[4],
                 const std::filesystem::path& p) {
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0)
    fail(ErrorKind::CheckpointMismatch,
         p.string() + ": bad magic, not a checkpoint blob");
  auto version = read_pod<std::uint32_t>(in, "format version");
  if (version != kFormatVersion)
    fail(ErrorKind::CheckpointMismatch,
         p.string() + ": unsupported format version " + std::to_string(version));
}

nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in = open_input(p);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    fail(ErrorKind::SchemaViolation, p.string() + ": invalid JSON");
  return j;
}

void write_text_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + p.string());
  out << body;
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + p.string());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     DualStreamClassifier& model, const nn::AdamW* opt,
                     const CheckpointMeta& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    fail(ErrorKind::IoFailure,
         "cannot create checkpoint dir " + dir.string() + ": " + ec.message());

  write_text_file(dir / "model_config.json",
                  model_config_to_json(model.config()).dump(2) + "\n");

  const std::vector<nn::Parameter*> params = model.params();
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot write params.bin");
    out.write(kParamsMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, std::uint64_t(params.size()));
    for (const nn::Parameter* p : params) {
      write_pod(out, std::uint32_t(p->name.size()));
      out.write(p->name.data(), std::streamsize(p->name.size()));
      write_pod(out, std::uint32_t(p->value.ndim()));
      for (std::size_t i = 0; i < p->value.ndim(); ++i)
        write_pod(out, std::uint64_t(p->value.dim(i)));
      write_doubles(out, p->value.data(), p->value.size());
    }
    if (!out) fail(ErrorKind::IoFailure, "write failed for params.bin");
  }

  if (opt) {
    std::ofstream out(dir / "optim.bin", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot write optim.bin");
    out.write(kOptimMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, std::int64_t(opt->step_count()));
    write_pod(out, std::uint64_t(opt->first_moments().size()));
    for (std::size_t i = 0; i < opt->first_moments().size(); ++i) {
      const auto& m = opt->first_moments()[i];
      const auto& v = opt->second_moments()[i];
      write_pod(out, std::uint64_t(m.size()));
      write_doubles(out, m.data(), m.size());
      write_doubles(out, v.data(), v.size());
    }
    if (!out) fail(ErrorKind::IoFailure, "write failed for optim.bin");
  }

  nlohmann::ordered_json mj = {{"fold_index", meta.fold_index},
                               {"seed", meta.seed},
                               {"step", meta.step},
                               {"param_count", meta.param_count}};
  write_text_file(dir / "meta.json", mj.dump(2) + "\n");
}

ModelConfig load_checkpoint_config(const std::filesystem::path& dir) {
  return model_config_from_json(read_json_file(dir / "model_config.json"));
}

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& dir) {
  nlohmann::json j = read_json_file(dir / "meta.json");
  CheckpointMeta meta;
  meta.fold_index = j.value("fold_index", -1);
  meta.seed = j.value("seed", std::uint64_t(0));
  meta.step = j.value("step", std::int64_t(0));
  meta.param_count = j.value("param_count", std::uint64_t(0));
  return meta;
}

CheckpointMeta load_checkpoint(const std::filesystem::path& dir,
                               DualStreamClassifier& model, nn::AdamW* opt) {
  const ModelConfig stored = load_checkpoint_config(dir);
  if (model_config_to_json(stored).dump() !=
      model_config_to_json(model.config()).dump())
    fail(ErrorKind::CheckpointMismatch,
         "checkpoint model_config does not match the configured model");

  const std::filesystem::path params_path = dir / "params.bin";
  std::ifstream in = open_input(params_path);
  check_magic(in, kParamsMagic, params_path);
  const auto count = read_pod<std::uint64_t>(in, "parameter count");
  std::vector<nn::Parameter*> params = model.params();
  if (count != params.size())
    fail(ErrorKind::CheckpointMismatch,
         "checkpoint has " + std::to_string(count) + " tensors, model has " +
             std::to_string(params.size()));
  for (nn::Parameter* p : params) {
    const auto name_len = read_pod<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) fail(ErrorKind::CheckpointMismatch, "truncated parameter name");
    if (name != p->name)
      fail(ErrorKind::CheckpointMismatch,
           "parameter order mismatch: checkpoint '" + name + "' vs model '" +
               p->name + "'");
    const auto ndim = read_pod<std::uint32_t>(in, "rank of " + name);
    std::vector<std::size_t> dims(ndim);
    for (auto& d : dims)
      d = std::size_t(read_pod<std::uint64_t>(in, "dims of " + name));
    if (dims != p->value.shape())
      fail(ErrorKind::CheckpointMismatch, "shape mismatch for " + name);
    read_doubles(in, p->value.data(), p->value.size(), name);
  }

  if (opt) {
    const std::filesystem::path optim_path = dir / "optim.bin";
    std::ifstream oin = open_input(optim_path);
    check_magic(oin, kOptimMagic, optim_path);
    const auto step = read_pod<std::int64_t>(oin, "optimizer step");
    const auto n = read_pod<std::uint64_t>(oin, "optimizer tensor count");
    std::vector<std::vector<double>> m(n), v(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto sz = read_pod<std::uint64_t>(oin, "optimizer tensor size");
      m[i].resize(sz);
      v[i].resize(sz);
      read_doubles(oin, m[i].data(), sz, "first moment");
      read_doubles(oin, v[i].data(), sz, "second moment");
    }
    opt->restore(step, std::move(m), std::move(v));
  }

  return load_checkpoint_meta(dir);
}

}  // namespace asdvid
