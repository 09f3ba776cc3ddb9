#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "nomen/errors.hpp"

namespace nomen::nn {

/// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> dims)
      : shape(dims), data(numel_of(shape), 0.0) {}
  explicit Tensor(std::vector<std::size_t> dims)
      : shape(std::move(dims)), data(numel_of(shape), 0.0) {}

  static std::size_t numel_of(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double* row_ptr(std::size_t r) { return data.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline Tensor zeros_like(const Tensor& t) {
  Tensor z;
  z.shape = t.shape;
  z.data.assign(t.data.size(), 0.0);
  return z;
}

inline void check_matrix(const Tensor& t, std::size_t rows, std::size_t cols,
                         const char* what) {
  if (t.shape.size() != 2 || t.shape[0] != rows || t.shape[1] != cols) {
    throw ShapeMismatch(std::string(what) + ": expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace nomen::nn
