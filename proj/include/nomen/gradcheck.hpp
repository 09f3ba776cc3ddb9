#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nomen/adam.hpp"
#include "nomen/tensor.hpp"

namespace nomen::nn {

struct GradCheckBlock {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t parameter_count = 0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;

  double max_rel_error() const {
    double worst = 0.0;
    for (const GradCheckBlock& b : blocks) {
      worst = std::max(worst, b.max_rel_error);
    }
    return worst;
  }

  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

/// Compares analytic gradients against central finite differences, scalar by
/// scalar, and reports the worst relative error per parameter block. The
/// model must expose parameters(), forward_backward(...) and a deterministic
/// loss(...); dropout is disabled for both gradient routes.
template <typename Model>
GradCheckReport gradcheck(Model& model,
                          const std::vector<typename Model::Input>& inputs,
                          const std::vector<int>& labels,
                          double fd_step = 1e-5) {
  std::vector<ParamRef> params = model.parameters();
  std::vector<Tensor> grads = zero_grads_for(params);
  model.forward_backward(inputs, labels, grads, nullptr);

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& block = *params[i].tensor;
    double worst = 0.0;
    for (std::size_t j = 0; j < block.data.size(); ++j) {
      const double saved = block.data[j];
      block.data[j] = saved + fd_step;
      const double loss_plus = model.loss(inputs, labels);
      block.data[j] = saved - fd_step;
      const double loss_minus = model.loss(inputs, labels);
      block.data[j] = saved;
      const double fd = (loss_plus - loss_minus) / (2.0 * fd_step);
      const double analytic = grads[i].data[j];
      const double rel = std::abs(analytic - fd) /
                         std::max({1.0, std::abs(analytic), std::abs(fd)});
      worst = std::max(worst, rel);
    }
    report.blocks.push_back(
        GradCheckBlock{params[i].name, worst, block.data.size()});
  }
  return report;
}

}  // namespace nomen::nn
