#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nomen/errors.hpp"

namespace nomen {

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

/// Class-probability vector in taxonomy order.
struct ProbVector {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
  std::size_t argmax() const { return argmax_index(p); }

  /// Enforces the simplex constraint: entries in [0,1], sum within tolerance
  /// of 1.
  static ProbVector validated(std::vector<double> values,
                              double tolerance = 1e-9) {
    double sum = 0.0;
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("probability entry outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw Error("probabilities sum to " + std::to_string(sum) +
                  ", expected 1");
    }
    return ProbVector{std::move(values)};
  }
};

}  // namespace nomen
