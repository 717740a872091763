#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "asdvid/array.hpp"
#include "asdvid/nn/encoder.hpp"
#include "asdvid/nn/transformer.hpp"
#include "asdvid/sampling.hpp"

namespace asdvid {

enum class BackboneKind { ToyConv, Pluggable };

std::string to_string(BackboneKind k);
BackboneKind backbone_kind_from_string(const std::string& s);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::ToyConv;
  std::size_t feature_dim = 64;
  std::string pluggable_id;  // registry id, used when kind == Pluggable
  std::string weights_path;  // optional external reference, recorded only
};

struct ModelConfig {
  BackboneConfig main;
  BackboneConfig fer;
  nn::TransformerConfig transformer;
  std::size_t max_seq_len = 17;  // slice_len + 1
  std::size_t num_classes = 2;

  std::size_t fused_dim() const { return main.feature_dim + fer.feature_dim; }
  void validate() const;
};

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Activations captured by a training forward pass; owned by the caller and
// consumed by backward().
struct ForwardContext {
  NDArray main_feat;  // (B,T,D1)
  NDArray fer_feat;   // (B,T,D2)
  NDArray fused;      // (B,T,D)
  nn::TransformerContext decoder;
  NDArray cls;      // (B,D)
  NDArray fc1_pre;  // (B,D)
  NDArray fc1_act;  // (B,D)
  NDArray logits;   // (B,2)
  NDArray probs;    // (B,2)
};

// Movement stream + expression stream -> per-frame concatenation -> temporal
// transformer -> two-class MLP head. One instance owns all parameters;
// inference entry points are const and deterministic.
class DualStreamClassifier {
 public:
  DualStreamClassifier(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Stable enumeration order: main encoder, fer encoder, decoder, head.
  std::vector<nn::Parameter*> params();
  std::size_t param_count() const;
  void zero_grad();

  NDArray encode_main(const SliceBatch& batch) const;
  NDArray encode_fer(const SliceBatch& batch) const;
  static NDArray fuse(const NDArray& main_f, const NDArray& fer_f);
  NDArray temporal_decode(const NDArray& fused,
                          nn::AttentionDiagnostics* diag = nullptr) const;
  NDArray classify(const NDArray& embedding) const;

  // Inference: dropout off, per-slice class probabilities (B,2).
  NDArray forward(const SliceBatch& batch,
                  nn::AttentionDiagnostics* diag = nullptr) const;

  // Training: dropout driven by `dropout_rng`, activations captured in ctx.
  // Returns probabilities (B,2); ctx.logits holds the pre-softmax values.
  NDArray forward_train(const SliceBatch& batch, std::mt19937_64& dropout_rng,
                        ForwardContext& ctx) const;

  // d_logits: (B,2) gradient w.r.t. the logits. Accumulates parameter
  // gradients, including both frame encoders (which recompute per frame).
  void backward(const SliceBatch& batch, const NDArray& d_logits,
                const ForwardContext& ctx);

 private:
  NDArray encode_stream(const nn::FrameEncoder& enc, const SliceBatch& batch,
                        bool fer) const;
  NDArray head_forward(const NDArray& embedding, NDArray* fc1_pre,
                       NDArray* fc1_act, NDArray* logits) const;

  ModelConfig cfg_;
  std::unique_ptr<nn::FrameEncoder> main_enc_;
  std::unique_ptr<nn::FrameEncoder> fer_enc_;
  std::unique_ptr<nn::TemporalTransformer> decoder_;
  nn::Parameter head_fc1_w_, head_fc1_b_;  // (D,D), (D)
  nn::Parameter head_fc2_w_, head_fc2_b_;  // (D,2), (2)
};

}  // namespace asdvid
