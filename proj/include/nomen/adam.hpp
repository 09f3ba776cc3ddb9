#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nomen/errors.hpp"
#include "nomen/tensor.hpp"

namespace nomen::nn {

/// Named view of one trainable tensor inside a model.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

inline std::vector<Tensor> zero_grads_for(const std::vector<ParamRef>& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const ParamRef& p : params) grads.push_back(zeros_like(*p.tensor));
  return grads;
}

struct AdamConfig {
  double learning_rate = 0.0025;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are laid out parallel to the
/// parameter list handed to the constructor.
class AdamState {
 public:
  AdamState(const AdamConfig& config, const std::vector<ParamRef>& params)
      : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const ParamRef& p : params) {
      m_.push_back(zeros_like(*p.tensor));
      v_.push_back(zeros_like(*p.tensor));
    }
  }

  const AdamConfig& config() const { return config_; }
  std::size_t step_count() const { return step_; }

  void step(const std::vector<ParamRef>& params,
            const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ShapeMismatch("adam: parameter/gradient list size changed");
    }
    ++step_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i].tensor;
      const Tensor& g = grads[i];
      if (!p.same_shape(m_[i]) || !g.same_shape(m_[i])) {
        throw ShapeMismatch("adam: shape mismatch in block " + params[i].name);
      }
      for (std::size_t j = 0; j < p.data.size(); ++j) {
        const double gj = g.data[j];
        m_[i].data[j] = b1 * m_[i].data[j] + (1.0 - b1) * gj;
        v_[i].data[j] = b2 * v_[i].data[j] + (1.0 - b2) * gj * gj;
        const double m_hat = m_[i].data[j] / bc1;
        const double v_hat = v_[i].data[j] / bc2;
        p.data[j] -=
            config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
  }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace nomen::nn
