#include "asdvid/nn/adamw.hpp"

#include <cmath>

#include "asdvid/errors.hpp"

namespace asdvid::nn {

AdamW::AdamW(std::vector<Parameter*> params, const AdamWConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                          cfg_.weight_decay * p.value[j]);
    }
  }
}

void AdamW::restore(std::int64_t step, std::vector<std::vector<double>> m,
                    std::vector<std::vector<double>> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    fail(ErrorKind::CheckpointMismatch,
         "optimizer state tensor count does not match model");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].size() != params_[i]->value.size() ||
        v[i].size() != params_[i]->value.size())
      fail(ErrorKind::CheckpointMismatch,
           "optimizer state size mismatch for " + params_[i]->name);
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace asdvid::nn
