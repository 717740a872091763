#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "asdvid/nn/params.hpp"

namespace asdvid::nn {

// Per-frame spatial encoder: one RGB frame in, one feature vector out.
// Implementations must be stateless across frames (no temporal mixing);
// forward() is const and safe for concurrent callers.
class FrameEncoder {
 public:
  virtual ~FrameEncoder() = default;

  virtual std::size_t feature_dim() const = 0;

  // frame: interleaved RGB floats in [0,1], h*w*3 values.
  virtual void forward(const float* frame, std::size_t h, std::size_t w,
                       double* feature) const = 0;

  // Recomputes the forward pass for `frame` and accumulates parameter
  // gradients from d_feature (length feature_dim()).
  virtual void backward(const float* frame, std::size_t h, std::size_t w,
                        const double* d_feature) = 0;

  virtual void collect_params(std::vector<Parameter*>& out) = 0;
};

// The default backbone: fixed 4x average-pool stem, four stride-2 3x3
// conv blocks with ReLU, then global average pooling. Channel widths grow
// to feature_dim. Sized so a full train run stays desk-scale on a CPU.
class ToyConvEncoder : public FrameEncoder {
 public:
  ToyConvEncoder(const std::string& name_prefix, std::size_t feature_dim,
                 std::mt19937_64& init_rng);

  std::size_t feature_dim() const override { return feature_dim_; }
  void forward(const float* frame, std::size_t h, std::size_t w,
               double* feature) const override;
  void backward(const float* frame, std::size_t h, std::size_t w,
                const double* d_feature) override;
  void collect_params(std::vector<Parameter*>& out) override;

  static constexpr std::size_t kNumBlocks = 4;
  static constexpr std::size_t kStemPool = 4;

 private:
  struct Workspace;
  void run_forward(const float* frame, std::size_t h, std::size_t w,
                   Workspace& ws) const;

  std::size_t feature_dim_;
  std::vector<std::size_t> channels_;  // per block output channels
  std::vector<Parameter> weights_;     // [out_c x in_c*9] per block
  std::vector<Parameter> biases_;      // [out_c] per block
};

using EncoderFactory = std::function<std::unique_ptr<FrameEncoder>(
    std::size_t feature_dim, std::uint64_t seed)>;

// Registry for external per-frame encoders selected with kind=pluggable.
void register_frame_encoder(const std::string& id, EncoderFactory factory);
bool frame_encoder_registered(const std::string& id);
std::unique_ptr<FrameEncoder> make_registered_encoder(const std::string& id,
                                                      std::size_t feature_dim,
                                                      std::uint64_t seed);

}  // namespace asdvid::nn
