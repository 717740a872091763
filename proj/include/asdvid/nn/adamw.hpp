#pragma once

#include <cstdint>
#include <vector>

#include "asdvid/nn/params.hpp"

namespace asdvid::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// AdamW with decoupled weight decay:
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   p -= lr * (mhat / (sqrt(vhat) + eps) + wd * p)
// Decay is applied uniformly to every parameter tensor.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, const AdamWConfig& cfg);

  // Applies one update from the accumulated gradients; increments the step.
  void step(double lr);

  std::int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& params() const { return params_; }

  // Moment access for checkpointing; order matches params().
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::int64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace asdvid::nn
