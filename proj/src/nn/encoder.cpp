#include "asdvid/nn/encoder.hpp"

#include <cmath>
#include <map>

#include "asdvid/errors.hpp"
#include "asdvid/nn/ops.hpp"

namespace asdvid::nn {

ToyConvEncoder::ToyConvEncoder(const std::string& name_prefix,
                               std::size_t feature_dim,
                               std::mt19937_64& init_rng)
    : feature_dim_(feature_dim) {
  if (feature_dim == 0)
    fail(ErrorKind::ConfigError, "feature_dim must be >= 1");
  channels_.resize(kNumBlocks);
  for (std::size_t i = 0; i < kNumBlocks; ++i)
    channels_[i] = std::max<std::size_t>(1, feature_dim >> (kNumBlocks - 1 - i));
  channels_.back() = feature_dim;

  std::size_t in_c = 3;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    const std::size_t out_c = channels_[i];
    const std::size_t patch = in_c * 9;
    weights_.emplace_back(name_prefix + ".conv" + std::to_string(i + 1) + ".w",
                          std::vector<std::size_t>{out_c, patch});
    biases_.emplace_back(name_prefix + ".conv" + std::to_string(i + 1) + ".b",
                         std::vector<std::size_t>{out_c});
    // He initialization for the ReLU blocks
    init_normal(weights_.back(), std::sqrt(2.0 / double(patch)), init_rng);
    init_constant(biases_.back(), 0.0);
    in_c = out_c;
  }
}

struct ToyConvEncoder::Workspace {
  // activations kept per layer for the backward pass
  std::vector<std::vector<double>> inputs;  // input map of each block (CHW)
  std::vector<std::vector<double>> preact;  // pre-ReLU output of each block
  std::vector<Conv2dShape> shapes;
  std::vector<double> stem_in;   // CHW float->double converted frame
  std::size_t stem_h = 0, stem_w = 0;
  std::size_t gap_h = 0, gap_w = 0;
};

void ToyConvEncoder::run_forward(const float* frame, std::size_t h,
                                 std::size_t w, Workspace& ws) const {
  // interleaved HWC [0,1] -> planar CHW
  ws.stem_in.resize(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c) {
    double* plane = ws.stem_in.data() + c * h * w;
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = double(frame[i * 3 + c]);
  }

  const std::size_t pool = std::min({kStemPool, h, w});
  ws.stem_h = h / pool;
  ws.stem_w = w / pool;
  if (ws.stem_h == 0 || ws.stem_w == 0)
    fail(ErrorKind::ShapeMismatch, "frame too small for encoder stem");

  ws.inputs.assign(kNumBlocks, {});
  ws.preact.assign(kNumBlocks, {});
  ws.shapes.assign(kNumBlocks, Conv2dShape{});

  ws.inputs[0].resize(3 * ws.stem_h * ws.stem_w);
  avgpool_fwd(ws.stem_in.data(), 3, h, w, pool, ws.inputs[0].data());

  std::size_t in_c = 3, in_h = ws.stem_h, in_w = ws.stem_w;
  std::vector<double> col;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    Conv2dShape s{in_c, in_h, in_w, channels_[i]};
    ws.shapes[i] = s;
    const std::size_t oh = s.out_h(), ow = s.out_w();
    col.resize(s.patch() * oh * ow);
    im2col(s, ws.inputs[i].data(), col.data());

    ws.preact[i].assign(s.out_c * oh * ow, 0.0);
    gemm_nn(ws.preact[i].data(), weights_[i].value.data(), col.data(), s.out_c,
            s.patch(), oh * ow);
    for (std::size_t c = 0; c < s.out_c; ++c) {
      const double b = biases_[i].value[c];
      double* row = ws.preact[i].data() + c * oh * ow;
      for (std::size_t j = 0; j < oh * ow; ++j) row[j] += b;
    }

    if (i + 1 < kNumBlocks) {
      ws.inputs[i + 1] = ws.preact[i];
      relu_fwd(ws.inputs[i + 1].data(), ws.inputs[i + 1].size());
    }
    in_c = s.out_c;
    in_h = oh;
    in_w = ow;
  }
  ws.gap_h = in_h;
  ws.gap_w = in_w;
}

void ToyConvEncoder::forward(const float* frame, std::size_t h, std::size_t w,
                             double* feature) const {
  Workspace ws;
  run_forward(frame, h, w, ws);
  // final ReLU then global average pool
  const std::size_t hw = ws.gap_h * ws.gap_w;
  const double inv = 1.0 / double(hw);
  const auto& last = ws.preact.back();
  for (std::size_t c = 0; c < feature_dim_; ++c) {
    double acc = 0.0;
    const double* row = last.data() + c * hw;
    for (std::size_t j = 0; j < hw; ++j) acc += std::max(0.0, row[j]);
    feature[c] = acc * inv;
  }
}

void ToyConvEncoder::backward(const float* frame, std::size_t h, std::size_t w,
                              const double* d_feature) {
  Workspace ws;
  run_forward(frame, h, w, ws);

  const std::size_t hw = ws.gap_h * ws.gap_w;
  const double inv = 1.0 / double(hw);

  // d(pre-ReLU of last block) from GAP(ReLU(.))
  std::vector<double> d_out(feature_dim_ * hw, 0.0);
  const auto& last = ws.preact.back();
  for (std::size_t c = 0; c < feature_dim_; ++c) {
    const double g = d_feature[c] * inv;
    const double* pre = last.data() + c * hw;
    double* row = d_out.data() + c * hw;
    for (std::size_t j = 0; j < hw; ++j)
      if (pre[j] > 0.0) row[j] = g;
  }

  std::vector<double> col, d_col, d_in;
  for (std::size_t i = kNumBlocks; i-- > 0;) {
    const Conv2dShape& s = ws.shapes[i];
    const std::size_t oh = s.out_h(), ow = s.out_w();
    const std::size_t nsp = oh * ow;

    col.resize(s.patch() * nsp);
    im2col(s, ws.inputs[i].data(), col.data());

    // dW += d_out * col^T ; db += rowsum(d_out)
    gemm_nt(weights_[i].grad.data(), d_out.data(), col.data(), s.out_c, nsp,
            s.patch());
    for (std::size_t c = 0; c < s.out_c; ++c) {
      double acc = 0.0;
      const double* row = d_out.data() + c * nsp;
      for (std::size_t j = 0; j < nsp; ++j) acc += row[j];
      biases_[i].grad[c] += acc;
    }

    if (i == 0) break;  // input gradient not needed below the first block

    // d_col = W^T * d_out, then scatter back and apply the ReLU mask of
    // the previous block.
    d_col.assign(s.patch() * nsp, 0.0);
    gemm_tn(d_col.data(), weights_[i].value.data(), d_out.data(), s.patch(),
            s.out_c, nsp);
    d_in.assign(s.in_c * s.in_h * s.in_w, 0.0);
    col2im_add(s, d_col.data(), d_in.data());

    const auto& prev_pre = ws.preact[i - 1];
    d_out.assign(prev_pre.size(), 0.0);
    relu_bwd_add(prev_pre.data(), d_in.data(), d_out.data(), prev_pre.size());
  }
}

void ToyConvEncoder::collect_params(std::vector<Parameter*>& out) {
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
}

namespace {
std::map<std::string, EncoderFactory>& encoder_registry() {
  static std::map<std::string, EncoderFactory> registry;
  return registry;
}
}  // namespace

void register_frame_encoder(const std::string& id, EncoderFactory factory) {
  encoder_registry()[id] = std::move(factory);
}

bool frame_encoder_registered(const std::string& id) {
  return encoder_registry().count(id) > 0;
}

std::unique_ptr<FrameEncoder> make_registered_encoder(const std::string& id,
                                                      std::size_t feature_dim,
                                                      std::uint64_t seed) {
  auto it = encoder_registry().find(id);
  if (it == encoder_registry().end())
    fail(ErrorKind::ConfigError,
         "no frame encoder registered under id '" + id + "'");
  return it->second(feature_dim, seed);
}

}  // namespace asdvid::nn
