#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "asdvid/errors.hpp"

namespace asdvid {

// Dense row-major n-d array of doubles. Deliberately minimal: the numeric
// kernels work on raw pointers, this just carries shape through module
// boundaries.
class NDArray {
 public:
  NDArray() = default;

  explicit NDArray(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, 0.0);
  }

  NDArray(std::initializer_list<std::size_t> shape)
      : NDArray(std::vector<std::size_t>(shape)) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Flat accessor for the common 3-d (B, T, D) layout.
  double& at3(std::size_t b, std::size_t t, std::size_t d) {
    return data_[(b * shape_[1] + t) * shape_[2] + d];
  }
  double at3(std::size_t b, std::size_t t, std::size_t d) const {
    return data_[(b * shape_[1] + t) * shape_[2] + d];
  }

  bool same_shape(const NDArray& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline void require_shape(const NDArray& a, std::vector<std::size_t> expect,
                          const std::string& what) {
  if (a.shape() != expect) {
    NDArray e(std::move(expect));
    fail(ErrorKind::ShapeMismatch,
         what + ": got " + a.shape_str() + ", expected " + e.shape_str());
  }
}

}  // namespace asdvid
