#pragma once

#include <cstdint>
#include <filesystem>

#include "asdvid/model.hpp"
#include "asdvid/nn/adamw.hpp"

namespace asdvid {

// A checkpoint directory fully determines inference behavior:
//   model_config.json  configuration echo
//   params.bin         named parameter tensors ("AVCP")
//   optim.bin          optimizer moments + step ("AVOP"), training resume
//   meta.json          fold_index, seed, step, param_count
struct CheckpointMeta {
  int fold_index = -1;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::uint64_t param_count = 0;
};

void save_checkpoint(const std::filesystem::path& dir,
                     DualStreamClassifier& model, const nn::AdamW* opt,
                     const CheckpointMeta& meta);

ModelConfig load_checkpoint_config(const std::filesystem::path& dir);
CheckpointMeta load_checkpoint_meta(const std::filesystem::path& dir);

// Restores parameters (and optimizer state when `opt` is non-null) into an
// already-constructed model. Any disagreement in configuration, parameter
// names, or shapes raises CheckpointMismatch.
CheckpointMeta load_checkpoint(const std::filesystem::path& dir,
                               DualStreamClassifier& model,
                               nn::AdamW* opt = nullptr);

}  // namespace asdvid
