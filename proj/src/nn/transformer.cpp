#include "asdvid/nn/transformer.hpp"

#include <cmath>
#include <cstring>

#include "asdvid/errors.hpp"
#include "asdvid/nn/ops.hpp"

namespace asdvid::nn {

namespace {

// y[R x N] (+)= x[R x K] * w[K x N] + b
void linear_fwd(const double* x, const double* w, const double* b, double* y,
                std::size_t rows, std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(y + r * out, b, out * sizeof(double));
  gemm_nn(y, x, w, rows, in, out);
}

// dx += dy * w^T, dw += x^T * dy, db += colsum(dy)
void linear_bwd(const double* x, const double* w, const double* dy, double* dx,
                double* dw, double* db, std::size_t rows, std::size_t in,
                std::size_t out) {
  gemm_nt(dx, dy, w, rows, out, in);
  gemm_tn(dw, x, dy, in, rows, out);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dy + r * out;
    for (std::size_t j = 0; j < out; ++j) db[j] += row[j];
  }
}

void make_dropout_mask(NDArray& mask, std::vector<std::size_t> shape, double p,
                       std::mt19937_64& rng) {
  mask = NDArray(std::move(shape));
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = keep(rng) ? scale : 0.0;
}

void apply_mask(double* x, const NDArray& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) x[i] *= mask[i];
}

}  // namespace

TemporalTransformer::TemporalTransformer(std::size_t model_dim,
                                         std::size_t max_seq_len,
                                         const TransformerConfig& cfg,
                                         std::mt19937_64& rng)
    : dim_(model_dim),
      max_seq_len_(max_seq_len),
      cfg_(cfg),
      cls_token_("decoder.cls", {model_dim}),
      pos_emb_("decoder.pos", {max_seq_len, model_dim}),
      final_g_("decoder.final_ln.g", {model_dim}),
      final_b_("decoder.final_ln.b", {model_dim}) {
  if (cfg.heads == 0 || model_dim % cfg.heads != 0)
    fail(ErrorKind::ConfigError,
         "model_dim " + std::to_string(model_dim) +
             " must be divisible by heads " + std::to_string(cfg.heads));
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    fail(ErrorKind::ConfigError, "dropout must be in [0, 1)");

  init_normal(cls_token_, 0.02, rng);
  // Positional embeddings are learned but start from the fixed sinusoidal
  // pattern rather than small noise.  Frame features barely differ along a
  // slice at init, so with near-uniform attention the cls read-out is close
  // to a plain time average, which erases the motion frequency the classes
  // differ by.  A sinusoidal basis tags each value vector with its position,
  // turning that same read-out into a bank of Fourier-like projections; the
  // rate signal is then linearly visible from step one instead of depending
  // on lucky noise in the position table.  The 0.3 amplitude keeps the
  // position code comparable to, not dominant over, typical encoder output.
  constexpr double kPosScale = 0.3;
  for (std::size_t t = 0; t < max_seq_len; ++t)
    for (std::size_t i = 0; 2 * i < model_dim; ++i) {
      const double angle =
          double(t) / std::pow(10000.0, double(2 * i) / double(model_dim));
      pos_emb_.value[t * model_dim + 2 * i] = kPosScale * std::sin(angle);
      if (2 * i + 1 < model_dim)
        pos_emb_.value[t * model_dim + 2 * i + 1] = kPosScale * std::cos(angle);
    }
  init_constant(final_g_, 1.0);
  init_constant(final_b_, 0.0);

  const std::size_t d = model_dim;
  const std::size_t hid = cfg.mlp_ratio * d;
  auto glorot = [&](Parameter& p, std::size_t fan_in, std::size_t fan_out) {
    init_normal(p, std::sqrt(2.0 / double(fan_in + fan_out)), rng);
  };
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = "decoder.layer" + std::to_string(l);
    Layer layer{
        {pre + ".ln1.g", {d}},      {pre + ".ln1.b", {d}},
        {pre + ".attn.qkv.w", {d, 3 * d}}, {pre + ".attn.qkv.b", {3 * d}},
        {pre + ".attn.out.w", {d, d}},     {pre + ".attn.out.b", {d}},
        {pre + ".ln2.g", {d}},      {pre + ".ln2.b", {d}},
        {pre + ".mlp.fc1.w", {d, hid}},    {pre + ".mlp.fc1.b", {hid}},
        {pre + ".mlp.fc2.w", {hid, d}},    {pre + ".mlp.fc2.b", {d}},
    };
    init_constant(layer.ln1_g, 1.0);
    init_constant(layer.ln2_g, 1.0);
    glorot(layer.qkv_w, d, 3 * d);
    glorot(layer.out_w, d, d);
    glorot(layer.fc1_w, d, hid);
    glorot(layer.fc2_w, hid, d);
    layers_.push_back(std::move(layer));
  }
}

TemporalTransformer::~TemporalTransformer() = default;

NDArray TemporalTransformer::forward(const NDArray& fused, bool train,
                                     std::mt19937_64* rng,
                                     TransformerContext* ctx,
                                     AttentionDiagnostics* diag) const {
  if (fused.ndim() != 3 || fused.dim(2) != dim_)
    fail(ErrorKind::ShapeMismatch,
         "decoder input must be (B,T," + std::to_string(dim_) + "), got " +
             fused.shape_str());
  const std::size_t b_n = fused.dim(0);
  const std::size_t t_n = fused.dim(1);
  const std::size_t s_n = t_n + 1;
  const std::size_t d = dim_;
  if (s_n > max_seq_len_)
    fail(ErrorKind::SequenceTooLong,
         "sequence length " + std::to_string(s_n) + " exceeds max_seq_len " +
             std::to_string(max_seq_len_));
  const bool use_dropout = train && cfg_.dropout > 0.0;
  if (use_dropout && rng == nullptr)
    fail(ErrorKind::ConfigError, "training forward needs a dropout rng");

  const std::size_t heads = cfg_.heads;
  const std::size_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
  const std::size_t rows = b_n * s_n;

  TransformerContext local;
  TransformerContext& c = ctx ? *ctx : local;
  c.batch = b_n;
  c.seq = s_n;
  c.layers.assign(cfg_.layers, {});

  // assemble tokens: [cls | frames] + positional embeddings
  NDArray x({b_n, s_n, d});
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t s = 0; s < s_n; ++s) {
      double* row = x.data() + (b * s_n + s) * d;
      const double* pos = pos_emb_.value.data() + s * d;
      if (s == 0) {
        for (std::size_t j = 0; j < d; ++j)
          row[j] = cls_token_.value[j] + pos[j];
      } else {
        const double* f = fused.data() + (b * t_n + (s - 1)) * d;
        for (std::size_t j = 0; j < d; ++j) row[j] = f[j] + pos[j];
      }
    }
  }
  if (use_dropout) {
    make_dropout_mask(c.input_drop, {b_n, s_n, d}, cfg_.dropout, *rng);
    apply_mask(x.data(), c.input_drop);
  }

  if (diag) diag->per_layer.clear();

  std::vector<double> q_h(s_n * dh), k_h(s_n * dh), v_h(s_n * dh);
  std::vector<double> scores(s_n * s_n), ctx_h(s_n * dh);

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Layer& layer = layers_[l];
    TransformerLayerContext& lc = c.layers[l];
    lc.input = x;

    lc.ln1_out = NDArray({b_n, s_n, d});
    lc.ln1_mean = NDArray({b_n, s_n});
    lc.ln1_rstd = NDArray({b_n, s_n});
    layernorm_fwd(x.data(), layer.ln1_g.value.data(), layer.ln1_b.value.data(),
                  rows, d, lc.ln1_out.data(), lc.ln1_mean.data(),
                  lc.ln1_rstd.data());

    lc.qkv = NDArray({b_n, s_n, 3 * d});
    linear_fwd(lc.ln1_out.data(), layer.qkv_w.value.data(),
               layer.qkv_b.value.data(), lc.qkv.data(), rows, d, 3 * d);

    lc.probs = NDArray({b_n, heads, s_n, s_n});
    lc.heads_ctx = NDArray({b_n, s_n, d});
    for (std::size_t b = 0; b < b_n; ++b) {
      const double* qkv_b = lc.qkv.data() + b * s_n * 3 * d;
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t s = 0; s < s_n; ++s) {
          const double* row = qkv_b + s * 3 * d + h * dh;
          std::memcpy(q_h.data() + s * dh, row, dh * sizeof(double));
          std::memcpy(k_h.data() + s * dh, row + d, dh * sizeof(double));
          std::memcpy(v_h.data() + s * dh, row + 2 * d, dh * sizeof(double));
        }
        std::fill(scores.begin(), scores.end(), 0.0);
        gemm_nt(scores.data(), q_h.data(), k_h.data(), s_n, dh, s_n);
        for (double& v : scores) v *= inv_sqrt_dh;
        softmax_rows(scores.data(), s_n, s_n);
        std::memcpy(lc.probs.data() + (b * heads + h) * s_n * s_n,
                    scores.data(), s_n * s_n * sizeof(double));
        std::fill(ctx_h.begin(), ctx_h.end(), 0.0);
        gemm_nn(ctx_h.data(), scores.data(), v_h.data(), s_n, s_n, dh);
        for (std::size_t s = 0; s < s_n; ++s)
          std::memcpy(lc.heads_ctx.data() + (b * s_n + s) * d + h * dh,
                      ctx_h.data() + s * dh, dh * sizeof(double));
      }
    }
    if (diag) diag->per_layer.push_back(lc.probs);

    NDArray attn_out({b_n, s_n, d});
    linear_fwd(lc.heads_ctx.data(), layer.out_w.value.data(),
               layer.out_b.value.data(), attn_out.data(), rows, d, d);
    if (use_dropout) {
      make_dropout_mask(lc.attn_drop, {b_n, s_n, d}, cfg_.dropout, *rng);
      apply_mask(attn_out.data(), lc.attn_drop);
    }

    lc.after_attn = NDArray({b_n, s_n, d});
    for (std::size_t i = 0; i < rows * d; ++i)
      lc.after_attn[i] = x[i] + attn_out[i];

    lc.ln2_out = NDArray({b_n, s_n, d});
    lc.ln2_mean = NDArray({b_n, s_n});
    lc.ln2_rstd = NDArray({b_n, s_n});
    layernorm_fwd(lc.after_attn.data(), layer.ln2_g.value.data(),
                  layer.ln2_b.value.data(), rows, d, lc.ln2_out.data(),
                  lc.ln2_mean.data(), lc.ln2_rstd.data());

    const std::size_t hid = cfg_.mlp_ratio * d;
    lc.fc1_pre = NDArray({b_n, s_n, hid});
    linear_fwd(lc.ln2_out.data(), layer.fc1_w.value.data(),
               layer.fc1_b.value.data(), lc.fc1_pre.data(), rows, d, hid);
    lc.fc1_act = NDArray({b_n, s_n, hid});
    for (std::size_t i = 0; i < rows * hid; ++i)
      lc.fc1_act[i] = gelu(lc.fc1_pre[i]);

    NDArray mlp_out({b_n, s_n, d});
    linear_fwd(lc.fc1_act.data(), layer.fc2_w.value.data(),
               layer.fc2_b.value.data(), mlp_out.data(), rows, hid, d);
    if (use_dropout) {
      make_dropout_mask(lc.mlp_drop, {b_n, s_n, d}, cfg_.dropout, *rng);
      apply_mask(mlp_out.data(), lc.mlp_drop);
    }

    NDArray next({b_n, s_n, d});
    for (std::size_t i = 0; i < rows * d; ++i)
      next[i] = lc.after_attn[i] + mlp_out[i];
    x = std::move(next);
  }

  c.final_in = x;
  c.final_mean = NDArray({b_n});
  c.final_rstd = NDArray({b_n});
  NDArray cls_out({b_n, d});
  for (std::size_t b = 0; b < b_n; ++b) {
    layernorm_fwd(x.data() + b * s_n * d, final_g_.value.data(),
                  final_b_.value.data(), 1, d, cls_out.data() + b * d,
                  c.final_mean.data() + b, c.final_rstd.data() + b);
  }
  return cls_out;
}

NDArray TemporalTransformer::backward(const NDArray& d_cls,
                                      const TransformerContext& c) {
  const std::size_t b_n = c.batch;
  const std::size_t s_n = c.seq;
  const std::size_t t_n = s_n - 1;
  const std::size_t d = dim_;
  const std::size_t heads = cfg_.heads;
  const std::size_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
  const std::size_t rows = b_n * s_n;

  NDArray d_x({b_n, s_n, d});
  for (std::size_t b = 0; b < b_n; ++b) {
    layernorm_bwd(c.final_in.data() + b * s_n * d, final_g_.value.data(),
                  d_cls.data() + b * d, c.final_mean.data() + b,
                  c.final_rstd.data() + b, 1, d, d_x.data() + b * s_n * d,
                  final_g_.grad.data(), final_b_.grad.data());
  }

  std::vector<double> q_h(s_n * dh), k_h(s_n * dh), v_h(s_n * dh);
  std::vector<double> d_q(s_n * dh), d_k(s_n * dh), d_v(s_n * dh);
  std::vector<double> d_probs(s_n * s_n), d_scores(s_n * s_n),
      d_ctx(s_n * dh);

  for (std::size_t l = cfg_.layers; l-- > 0;) {
    Layer& layer = layers_[l];
    const TransformerLayerContext& lc = c.layers[l];
    const std::size_t hid = cfg_.mlp_ratio * d;

    // x_out = after_attn + drop(mlp(ln2(after_attn)))
    NDArray d_mlp_out = d_x;  // gradient into the mlp branch
    if (lc.mlp_drop.size()) apply_mask(d_mlp_out.data(), lc.mlp_drop);

    NDArray d_fc1_act({b_n, s_n, hid});
    linear_bwd(lc.fc1_act.data(), layer.fc2_w.value.data(), d_mlp_out.data(),
               d_fc1_act.data(), layer.fc2_w.grad.data(),
               layer.fc2_b.grad.data(), rows, hid, d);
    NDArray d_fc1_pre({b_n, s_n, hid});
    for (std::size_t i = 0; i < rows * hid; ++i)
      d_fc1_pre[i] = d_fc1_act[i] * gelu_grad(lc.fc1_pre[i]);

    NDArray d_ln2_out({b_n, s_n, d});
    linear_bwd(lc.ln2_out.data(), layer.fc1_w.value.data(), d_fc1_pre.data(),
               d_ln2_out.data(), layer.fc1_w.grad.data(),
               layer.fc1_b.grad.data(), rows, d, hid);

    NDArray d_after_attn = d_x;  // residual path
    layernorm_bwd(lc.after_attn.data(), layer.ln2_g.value.data(),
                  d_ln2_out.data(), lc.ln2_mean.data(), lc.ln2_rstd.data(),
                  rows, d, d_after_attn.data(), layer.ln2_g.grad.data(),
                  layer.ln2_b.grad.data());

    // after_attn = input + drop(attn_out)
    NDArray d_attn_out = d_after_attn;
    if (lc.attn_drop.size()) apply_mask(d_attn_out.data(), lc.attn_drop);

    NDArray d_heads_ctx({b_n, s_n, d});
    linear_bwd(lc.heads_ctx.data(), layer.out_w.value.data(),
               d_attn_out.data(), d_heads_ctx.data(), layer.out_w.grad.data(),
               layer.out_b.grad.data(), rows, d, d);

    NDArray d_qkv({b_n, s_n, 3 * d});
    for (std::size_t b = 0; b < b_n; ++b) {
      const double* qkv_b = lc.qkv.data() + b * s_n * 3 * d;
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t s = 0; s < s_n; ++s) {
          const double* row = qkv_b + s * 3 * d + h * dh;
          std::memcpy(q_h.data() + s * dh, row, dh * sizeof(double));
          std::memcpy(k_h.data() + s * dh, row + d, dh * sizeof(double));
          std::memcpy(v_h.data() + s * dh, row + 2 * d, dh * sizeof(double));
          std::memcpy(d_ctx.data() + s * dh,
                      d_heads_ctx.data() + (b * s_n + s) * d + h * dh,
                      dh * sizeof(double));
        }
        const double* probs = lc.probs.data() + (b * heads + h) * s_n * s_n;

        // ctx = P V
        std::fill(d_probs.begin(), d_probs.end(), 0.0);
        gemm_nt(d_probs.data(), d_ctx.data(), v_h.data(), s_n, dh, s_n);
        std::fill(d_v.begin(), d_v.end(), 0.0);
        gemm_tn(d_v.data(), probs, d_ctx.data(), s_n, s_n, dh);

        // softmax backward
        for (std::size_t i = 0; i < s_n; ++i) {
          const double* p_row = probs + i * s_n;
          const double* dp_row = d_probs.data() + i * s_n;
          double dot = 0.0;
          for (std::size_t j = 0; j < s_n; ++j) dot += p_row[j] * dp_row[j];
          double* ds_row = d_scores.data() + i * s_n;
          for (std::size_t j = 0; j < s_n; ++j)
            ds_row[j] = p_row[j] * (dp_row[j] - dot);
        }

        // scores = Q K^T / sqrt(dh)
        std::fill(d_q.begin(), d_q.end(), 0.0);
        gemm_nn(d_q.data(), d_scores.data(), k_h.data(), s_n, s_n, dh);
        std::fill(d_k.begin(), d_k.end(), 0.0);
        gemm_tn(d_k.data(), d_scores.data(), q_h.data(), s_n, s_n, dh);
        for (std::size_t i = 0; i < s_n * dh; ++i) {
          d_q[i] *= inv_sqrt_dh;
          d_k[i] *= inv_sqrt_dh;
        }

        for (std::size_t s = 0; s < s_n; ++s) {
          double* out = d_qkv.data() + (b * s_n + s) * 3 * d + h * dh;
          std::memcpy(out, d_q.data() + s * dh, dh * sizeof(double));
          std::memcpy(out + d, d_k.data() + s * dh, dh * sizeof(double));
          std::memcpy(out + 2 * d, d_v.data() + s * dh, dh * sizeof(double));
        }
      }
    }

    NDArray d_ln1_out({b_n, s_n, d});
    linear_bwd(lc.ln1_out.data(), layer.qkv_w.value.data(), d_qkv.data(),
               d_ln1_out.data(), layer.qkv_w.grad.data(),
               layer.qkv_b.grad.data(), rows, d, 3 * d);

    NDArray d_input = d_after_attn;  // residual path
    layernorm_bwd(lc.input.data(), layer.ln1_g.value.data(), d_ln1_out.data(),
                  lc.ln1_mean.data(), lc.ln1_rstd.data(), rows, d,
                  d_input.data(), layer.ln1_g.grad.data(),
                  layer.ln1_b.grad.data());

    d_x = std::move(d_input);
  }

  if (c.input_drop.size()) apply_mask(d_x.data(), c.input_drop);

  // token -> (cls, pos, fused) gradients
  NDArray d_fused({b_n, t_n, dim_});
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t s = 0; s < s_n; ++s) {
      const double* row = d_x.data() + (b * s_n + s) * d;
      double* pos = pos_emb_.grad.data() + s * d;
      for (std::size_t j = 0; j < d; ++j) pos[j] += row[j];
      if (s == 0) {
        for (std::size_t j = 0; j < d; ++j) cls_token_.grad[j] += row[j];
      } else {
        std::memcpy(d_fused.data() + (b * t_n + (s - 1)) * d, row,
                    d * sizeof(double));
      }
    }
  }
  return d_fused;
}

void TemporalTransformer::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&cls_token_);
  out.push_back(&pos_emb_);
  for (auto& l : layers_) {
    out.push_back(&l.ln1_g);
    out.push_back(&l.ln1_b);
    out.push_back(&l.qkv_w);
    out.push_back(&l.qkv_b);
    out.push_back(&l.out_w);
    out.push_back(&l.out_b);
    out.push_back(&l.ln2_g);
    out.push_back(&l.ln2_b);
    out.push_back(&l.fc1_w);
    out.push_back(&l.fc1_b);
    out.push_back(&l.fc2_w);
    out.push_back(&l.fc2_b);
  }
  out.push_back(&final_g_);
  out.push_back(&final_b_);
}

}  // namespace asdvid::nn
