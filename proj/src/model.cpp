#include "asdvid/model.hpp"

#include <cmath>
#include <cstring>

#include "asdvid/errors.hpp"
#include "asdvid/json_util.hpp"
#include "asdvid/nn/ops.hpp"
#include "asdvid/rng.hpp"

namespace asdvid {

using nn::Parameter;

std::string to_string(BackboneKind k) {
  return k == BackboneKind::ToyConv ? "toy_conv" : "pluggable";
}

BackboneKind backbone_kind_from_string(const std::string& s) {
  if (s == "toy_conv") return BackboneKind::ToyConv;
  if (s == "pluggable") return BackboneKind::Pluggable;
  fail(ErrorKind::ConfigError, "unknown backbone kind '" + s + "'");
}

void ModelConfig::validate() const {
  if (main.feature_dim < 1 || fer.feature_dim < 1)
    fail(ErrorKind::ConfigError, "backbone feature_dim must be >= 1");
  if (num_classes != 2)
    fail(ErrorKind::ConfigError, "num_classes must be 2");
  if (transformer.heads == 0 || fused_dim() % transformer.heads != 0)
    fail(ErrorKind::ConfigError,
         "fused_dim " + std::to_string(fused_dim()) +
             " must be divisible by transformer heads " +
             std::to_string(transformer.heads));
  if (max_seq_len < 2)
    fail(ErrorKind::ConfigError, "max_seq_len must be >= 2");
  if (main.kind == BackboneKind::Pluggable && main.pluggable_id.empty())
    fail(ErrorKind::ConfigError, "main backbone: pluggable_id required");
  if (fer.kind == BackboneKind::Pluggable && fer.pluggable_id.empty())
    fail(ErrorKind::ConfigError, "fer backbone: pluggable_id required");
}

namespace {

nlohmann::ordered_json backbone_to_json(const BackboneConfig& b) {
  return {{"kind", to_string(b.kind)},
          {"feature_dim", b.feature_dim},
          {"pluggable_id", b.pluggable_id},
          {"weights_path", b.weights_path}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j,
                                  const std::string& where) {
  reject_unknown_fields(j, {"kind", "feature_dim", "pluggable_id", "weights_path"},
                        where);
  BackboneConfig b;
  if (j.contains("kind"))
    b.kind = backbone_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("feature_dim"))
    b.feature_dim = j.at("feature_dim").get<std::size_t>();
  if (j.contains("pluggable_id"))
    b.pluggable_id = j.at("pluggable_id").get<std::string>();
  if (j.contains("weights_path"))
    b.weights_path = j.at("weights_path").get<std::string>();
  return b;
}

std::unique_ptr<nn::FrameEncoder> make_encoder(const BackboneConfig& b,
                                               const std::string& prefix,
                                               std::uint64_t seed) {
  if (b.kind == BackboneKind::Pluggable)
    return nn::make_registered_encoder(b.pluggable_id, b.feature_dim, seed);
  std::mt19937_64 rng = make_engine(seed);
  return std::make_unique<nn::ToyConvEncoder>(prefix, b.feature_dim, rng);
}

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  return {{"main", backbone_to_json(cfg.main)},
          {"fer", backbone_to_json(cfg.fer)},
          {"transformer",
           {{"layers", cfg.transformer.layers},
            {"heads", cfg.transformer.heads},
            {"mlp_ratio", cfg.transformer.mlp_ratio},
            {"dropout", cfg.transformer.dropout}}},
          {"max_seq_len", cfg.max_seq_len},
          {"num_classes", cfg.num_classes}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown_fields(
      j, {"main", "fer", "transformer", "max_seq_len", "num_classes"},
      "model config");
  ModelConfig cfg;
  if (j.contains("main")) cfg.main = backbone_from_json(j.at("main"), "main");
  if (j.contains("fer")) cfg.fer = backbone_from_json(j.at("fer"), "fer");
  if (j.contains("transformer")) {
    const auto& t = j.at("transformer");
    reject_unknown_fields(t, {"layers", "heads", "mlp_ratio", "dropout"},
                          "model.transformer");
    if (t.contains("layers"))
      cfg.transformer.layers = t.at("layers").get<std::size_t>();
    if (t.contains("heads"))
      cfg.transformer.heads = t.at("heads").get<std::size_t>();
    if (t.contains("mlp_ratio"))
      cfg.transformer.mlp_ratio = t.at("mlp_ratio").get<std::size_t>();
    if (t.contains("dropout"))
      cfg.transformer.dropout = t.at("dropout").get<double>();
  }
  if (j.contains("max_seq_len"))
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  if (j.contains("num_classes"))
    cfg.num_classes = j.at("num_classes").get<std::size_t>();
  cfg.validate();
  return cfg;
}

DualStreamClassifier::DualStreamClassifier(const ModelConfig& cfg,
                                           std::uint64_t seed)
    : cfg_(cfg),
      head_fc1_w_("head.fc1.w", {cfg.fused_dim(), cfg.fused_dim()}),
      head_fc1_b_("head.fc1.b", {cfg.fused_dim()}),
      head_fc2_w_("head.fc2.w", {cfg.fused_dim(), cfg.num_classes}),
      head_fc2_b_("head.fc2.b", {cfg.num_classes}) {
  cfg_.validate();
  main_enc_ = make_encoder(cfg_.main, "main", derive_seed(seed, "encoder-main"));
  fer_enc_ = make_encoder(cfg_.fer, "fer", derive_seed(seed, "encoder-fer"));
  if (main_enc_->feature_dim() != cfg_.main.feature_dim ||
      fer_enc_->feature_dim() != cfg_.fer.feature_dim)
    fail(ErrorKind::ConfigError, "encoder feature_dim does not match config");

  std::mt19937_64 dec_rng = make_engine(derive_seed(seed, "decoder"));
  decoder_ = std::make_unique<nn::TemporalTransformer>(
      cfg_.fused_dim(), cfg_.max_seq_len, cfg_.transformer, dec_rng);

  std::mt19937_64 head_rng = make_engine(derive_seed(seed, "head"));
  const std::size_t d = cfg_.fused_dim();
  nn::init_normal(head_fc1_w_, std::sqrt(2.0 / double(d + d)), head_rng);
  // small output-layer init: logits start near zero, so an untrained model
  // predicts close to (0.5, 0.5) and the first loss sits near ln 2
  nn::init_normal(head_fc2_w_, 0.01, head_rng);
}

std::vector<Parameter*> DualStreamClassifier::params() {
  std::vector<Parameter*> out;
  main_enc_->collect_params(out);
  fer_enc_->collect_params(out);
  decoder_->collect_params(out);
  out.push_back(&head_fc1_w_);
  out.push_back(&head_fc1_b_);
  out.push_back(&head_fc2_w_);
  out.push_back(&head_fc2_b_);
  return out;
}

std::size_t DualStreamClassifier::param_count() const {
  auto* self = const_cast<DualStreamClassifier*>(this);
  std::size_t n = 0;
  for (const Parameter* p : self->params()) n += p->value.size();
  return n;
}

void DualStreamClassifier::zero_grad() {
  for (Parameter* p : params()) p->zero_grad();
}

NDArray DualStreamClassifier::encode_stream(const nn::FrameEncoder& enc,
                                            const SliceBatch& batch,
                                            bool fer) const {
  const std::size_t b_n = batch.num_slices;
  const std::size_t t_n = batch.slice_len;
  const std::size_t d = enc.feature_dim();
  NDArray out({b_n, t_n, d});
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t t = 0; t < t_n; ++t) {
      const float* frame = fer ? batch.fer_frame(b, t) : batch.main_frame(b, t);
      enc.forward(frame, batch.height, batch.width, &out.at3(b, t, 0));
    }
  }
  return out;
}

NDArray DualStreamClassifier::encode_main(const SliceBatch& batch) const {
  return encode_stream(*main_enc_, batch, false);
}

NDArray DualStreamClassifier::encode_fer(const SliceBatch& batch) const {
  return encode_stream(*fer_enc_, batch, true);
}

NDArray DualStreamClassifier::fuse(const NDArray& main_f, const NDArray& fer_f) {
  if (main_f.ndim() != 3 || fer_f.ndim() != 3 ||
      main_f.dim(0) != fer_f.dim(0) || main_f.dim(1) != fer_f.dim(1))
    fail(ErrorKind::ShapeMismatch, "fuse: (B,T) mismatch between streams: " +
                                       main_f.shape_str() + " vs " +
                                       fer_f.shape_str());
  const std::size_t b_n = main_f.dim(0);
  const std::size_t t_n = main_f.dim(1);
  const std::size_t d1 = main_f.dim(2);
  const std::size_t d2 = fer_f.dim(2);
  NDArray fused({b_n, t_n, d1 + d2});
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t t = 0; t < t_n; ++t) {
      const std::size_t row = b * t_n + t;
      std::memcpy(fused.data() + row * (d1 + d2), main_f.data() + row * d1,
                  d1 * sizeof(double));
      std::memcpy(fused.data() + row * (d1 + d2) + d1, fer_f.data() + row * d2,
                  d2 * sizeof(double));
    }
  }
  return fused;
}

NDArray DualStreamClassifier::temporal_decode(
    const NDArray& fused, nn::AttentionDiagnostics* diag) const {
  return decoder_->forward(fused, /*train=*/false, nullptr, nullptr, diag);
}

NDArray DualStreamClassifier::head_forward(const NDArray& embedding,
                                           NDArray* fc1_pre, NDArray* fc1_act,
                                           NDArray* logits) const {
  const std::size_t d = cfg_.fused_dim();
  const std::size_t c = cfg_.num_classes;
  if (embedding.ndim() != 2 || embedding.dim(1) != d)
    fail(ErrorKind::ShapeMismatch, "classify input: got " +
                                       embedding.shape_str() + ", expected (B," +
                                       std::to_string(d) + ")");
  const std::size_t b_n = embedding.dim(0);

  NDArray pre({b_n, d});
  for (std::size_t b = 0; b < b_n; ++b)
    std::memcpy(pre.data() + b * d, head_fc1_b_.value.data(),
                d * sizeof(double));
  nn::gemm_nn(pre.data(), embedding.data(), head_fc1_w_.value.data(), b_n, d,
              d);
  NDArray act({b_n, d});
  for (std::size_t i = 0; i < b_n * d; ++i) act[i] = nn::gelu(pre[i]);

  NDArray lg({b_n, c});
  for (std::size_t b = 0; b < b_n; ++b)
    std::memcpy(lg.data() + b * c, head_fc2_b_.value.data(),
                c * sizeof(double));
  nn::gemm_nn(lg.data(), act.data(), head_fc2_w_.value.data(), b_n, d, c);

  NDArray probs = lg;
  nn::softmax_rows(probs.data(), b_n, c);

  if (fc1_pre) *fc1_pre = std::move(pre);
  if (fc1_act) *fc1_act = std::move(act);
  if (logits) *logits = std::move(lg);
  return probs;
}

NDArray DualStreamClassifier::classify(const NDArray& embedding) const {
  return head_forward(embedding, nullptr, nullptr, nullptr);
}

NDArray DualStreamClassifier::forward(const SliceBatch& batch,
                                      nn::AttentionDiagnostics* diag) const {
  NDArray fused = fuse(encode_main(batch), encode_fer(batch));
  NDArray cls = decoder_->forward(fused, false, nullptr, nullptr, diag);
  return classify(cls);
}

NDArray DualStreamClassifier::forward_train(const SliceBatch& batch,
                                            std::mt19937_64& dropout_rng,
                                            ForwardContext& ctx) const {
  ctx.main_feat = encode_main(batch);
  ctx.fer_feat = encode_fer(batch);
  ctx.fused = fuse(ctx.main_feat, ctx.fer_feat);
  ctx.cls = decoder_->forward(ctx.fused, /*train=*/true, &dropout_rng,
                              &ctx.decoder);
  ctx.probs = head_forward(ctx.cls, &ctx.fc1_pre, &ctx.fc1_act, &ctx.logits);
  return ctx.probs;
}

void DualStreamClassifier::backward(const SliceBatch& batch,
                                    const NDArray& d_logits,
                                    const ForwardContext& ctx) {
  const std::size_t d = cfg_.fused_dim();
  const std::size_t c = cfg_.num_classes;
  if (d_logits.ndim() != 2 || d_logits.dim(1) != c)
    fail(ErrorKind::ShapeMismatch,
         "backward d_logits: got " + d_logits.shape_str());
  const std::size_t b_n = d_logits.dim(0);

  // head
  NDArray d_act({b_n, d});
  nn::gemm_nt(d_act.data(), d_logits.data(), head_fc2_w_.value.data(), b_n, c,
              d);
  nn::gemm_tn(head_fc2_w_.grad.data(), ctx.fc1_act.data(), d_logits.data(), d,
              b_n, c);
  for (std::size_t b = 0; b < b_n; ++b)
    for (std::size_t j = 0; j < c; ++j)
      head_fc2_b_.grad[j] += d_logits[b * c + j];

  NDArray d_pre({b_n, d});
  for (std::size_t i = 0; i < b_n * d; ++i)
    d_pre[i] = d_act[i] * nn::gelu_grad(ctx.fc1_pre[i]);

  NDArray d_cls({b_n, d});
  nn::gemm_nt(d_cls.data(), d_pre.data(), head_fc1_w_.value.data(), b_n, d, d);
  nn::gemm_tn(head_fc1_w_.grad.data(), ctx.cls.data(), d_pre.data(), d, b_n,
              d);
  for (std::size_t b = 0; b < b_n; ++b)
    for (std::size_t j = 0; j < d; ++j) head_fc1_b_.grad[j] += d_pre[b * d + j];

  // decoder
  NDArray d_fused = decoder_->backward(d_cls, ctx.decoder);

  // split per stream and push through the frame encoders
  const std::size_t d1 = cfg_.main.feature_dim;
  const std::size_t d2 = cfg_.fer.feature_dim;
  const std::size_t t_n = batch.slice_len;
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t t = 0; t < t_n; ++t) {
      const double* row = &d_fused.at3(b, t, 0);
      main_enc_->backward(batch.main_frame(b, t), batch.height, batch.width,
                          row);
      fer_enc_->backward(batch.fer_frame(b, t), batch.height, batch.width,
                         row + d1);
    }
  }
  (void)d2;
}

}  // namespace asdvid
