#pragma once

#include <random>
#include <vector>

#include "asdvid/array.hpp"
#include "asdvid/nn/params.hpp"

namespace asdvid::nn {

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  double dropout = 0.1;
};

// Per-head attention probabilities, one (B, H, S, S) array per layer.
struct AttentionDiagnostics {
  std::vector<NDArray> per_layer;
};

// Activation capture for one block; owned by the caller across a
// forward/backward pair.
struct TransformerLayerContext {
  NDArray input;                          // (B,S,D)
  NDArray ln1_out, ln1_mean, ln1_rstd;    // (B,S,D), (B,S), (B,S)
  NDArray qkv;                            // (B,S,3D)
  NDArray probs;                          // (B,H,S,S)
  NDArray heads_ctx;                      // (B,S,D)
  NDArray attn_drop;                      // (B,S,D) mask, empty when off
  NDArray after_attn;                     // (B,S,D)
  NDArray ln2_out, ln2_mean, ln2_rstd;
  NDArray fc1_pre, fc1_act;               // (B,S,RD)
  NDArray mlp_drop;                       // (B,S,D) mask, empty when off
};

struct TransformerContext {
  std::size_t batch = 0;
  std::size_t seq = 0;
  NDArray input_drop;  // (B,S,D) mask, empty when off
  std::vector<TransformerLayerContext> layers;
  NDArray final_in;                 // (B,S,D)
  NDArray final_mean, final_rstd;   // (B) — stats of the cls rows only
};

// Pre-norm encoder over the temporal axis. A learned classification token
// is prepended, learned positional embeddings added, and the final-layer
// classification-token embedding returned as the sequence summary.
class TemporalTransformer {
 public:
  TemporalTransformer(std::size_t model_dim, std::size_t max_seq_len,
                      const TransformerConfig& cfg, std::mt19937_64& init_rng);
  ~TemporalTransformer();

  std::size_t model_dim() const { return dim_; }
  std::size_t max_seq_len() const { return max_seq_len_; }

  // fused: (B, T, D) -> (B, D). Dropout is active only when `train`; ctx,
  // when given, captures activations for backward(); diag, when given,
  // receives attention probabilities.
  NDArray forward(const NDArray& fused, bool train, std::mt19937_64* rng,
                  TransformerContext* ctx,
                  AttentionDiagnostics* diag = nullptr) const;

  // d_cls: (B, D); returns gradient w.r.t. the fused input and accumulates
  // parameter gradients.
  NDArray backward(const NDArray& d_cls, const TransformerContext& ctx);

  void collect_params(std::vector<Parameter*>& out);

 private:
  struct Layer {
    Parameter ln1_g, ln1_b;
    Parameter qkv_w, qkv_b;  // (D, 3D), (3D)
    Parameter out_w, out_b;  // (D, D), (D)
    Parameter ln2_g, ln2_b;
    Parameter fc1_w, fc1_b;  // (D, R*D), (R*D)
    Parameter fc2_w, fc2_b;  // (R*D, D), (D)
  };

  std::size_t dim_;
  std::size_t max_seq_len_;
  TransformerConfig cfg_;
  Parameter cls_token_;  // (D)
  Parameter pos_emb_;    // (max_seq_len, D)
  std::vector<Layer> layers_;
  Parameter final_g_, final_b_;
};

}  // namespace asdvid::nn
