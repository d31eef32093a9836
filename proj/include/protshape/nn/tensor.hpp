// Dense row-major tensor of doubles. The whole engine runs in 64-bit
// precision; desk scale makes speed secondary to gradient-check headroom.

#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "protshape/errors.hpp"

namespace protshape::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> values)
      : shape(std::move(s)), v(std::move(values)) {
    if (count(shape) != v.size())
      throw ShapeMismatch("tensor values do not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }
  static Tensor zeros(std::vector<std::size_t> s) {
    const std::size_t n = count(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor scalar(double x) { return Tensor({std::size_t(1)}, {x}); }

  std::size_t size() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

}  // namespace protshape::nn
