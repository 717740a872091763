#pragma once

#include <random>
#include <string>
#include <vector>

#include "asdvid/array.hpp"

namespace asdvid::nn {

struct Parameter {
  std::string name;
  NDArray value;
  NDArray grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 0.0;
  }
};

inline void init_normal(Parameter& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = dist(rng);
}

inline void init_constant(Parameter& p, double v) {
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = v;
}

}  // namespace asdvid::nn
