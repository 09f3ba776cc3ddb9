#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nomen/errors.hpp"
#include "nomen/layers.hpp"
#include "nomen/model.hpp"
#include "nomen/rng.hpp"
#include "nomen/tensor.hpp"

namespace nomen::nn {

struct MlpConfig {
  std::size_t input_size = 39;
  std::vector<std::size_t> hidden_sizes = {64};  // relu layers; may be empty
  std::size_t num_classes = 17;

  void validate() const {
    if (input_size < 1 || num_classes < 2) {
      throw InvalidConfig("mlp needs input_size >= 1 and num_classes >= 2");
    }
    for (std::size_t s : hidden_sizes) {
      if (s < 1) throw InvalidConfig("hidden layer size must be >= 1");
    }
  }
};

/// Feed-forward softmax classifier over dense feature vectors.
class MlpModel {
 public:
  using Input = std::vector<double>;

  MlpConfig config;
  std::vector<DenseLayerParams> hidden;
  DenseLayerParams head;

  static MlpModel skeleton(const MlpConfig& config) {
    config.validate();
    MlpModel m;
    m.config = config;
    std::size_t in = config.input_size;
    for (std::size_t size : config.hidden_sizes) {
      DenseLayerParams layer;
      layer.in_size = in;
      layer.out_size = size;
      layer.weight = Tensor{size, in};
      layer.bias = Tensor{size};
      layer.activation = Activation::kRelu;
      m.hidden.push_back(std::move(layer));
      in = size;
    }
    m.head.in_size = in;
    m.head.out_size = config.num_classes;
    m.head.weight = Tensor{config.num_classes, in};
    m.head.bias = Tensor{config.num_classes};
    m.head.activation = Activation::kSoftmax;
    return m;
  }

  static MlpModel build(const MlpConfig& config, std::uint64_t seed) {
    MlpModel m = skeleton(config);
    Rng rng(seed);
    std::size_t in = config.input_size;
    for (DenseLayerParams& layer : m.hidden) {
      layer = DenseLayerParams::init(in, layer.out_size, Activation::kRelu, rng);
      in = layer.out_size;
    }
    m.head = DenseLayerParams::init(in, config.num_classes,
                                    Activation::kSoftmax, rng);
    return m;
  }

  std::size_t num_classes() const { return config.num_classes; }

  std::size_t parameter_count() const {
    std::size_t total = head.parameter_count();
    for (const DenseLayerParams& layer : hidden) {
      total += layer.parameter_count();
    }
    return total;
  }

  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      const std::string prefix = "hidden" + std::to_string(l) + ".";
      refs.push_back({prefix + "weight", &hidden[l].weight});
      refs.push_back({prefix + "bias", &hidden[l].bias});
    }
    refs.push_back({"output.weight", &head.weight});
    refs.push_back({"output.bias", &head.bias});
    return refs;
  }

  std::vector<ConstParamRef> const_parameters() const {
    auto& self = const_cast<MlpModel&>(*this);
    std::vector<ConstParamRef> refs;
    for (const ParamRef& r : self.parameters()) {
      refs.push_back({r.name, r.tensor});
    }
    return refs;
  }

  Tensor batch_tensor(std::span<const Input> inputs) const {
    Tensor x{inputs.size(), config.input_size};
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      if (inputs[b].size() != config.input_size) {
        throw ShapeMismatch("feature vector width != input_size");
      }
      for (std::size_t k = 0; k < config.input_size; ++k) {
        x.at(b, k) = inputs[b][k];
      }
    }
    return x;
  }

  double forward_backward(std::span<const Input> inputs,
                          std::span<const int> labels,
                          std::vector<Tensor>& grads, Rng* /*dropout_rng*/) {
    std::vector<DenseCache> caches;
    caches.reserve(hidden.size() + 1);
    Tensor x = batch_tensor(inputs);
    for (DenseLayerParams& layer : hidden) {
      caches.push_back(dense_forward_cached(layer, x));
      x = caches.back().output;
    }
    caches.push_back(dense_forward_cached(head, x));
    const Tensor& probs = caches.back().output;
    const double loss_value = sparse_crossentropy(probs, labels);

    std::vector<DenseGrads> layer_grads;
    for (const DenseLayerParams& layer : hidden) {
      layer_grads.push_back(DenseGrads::zeros_for(layer));
    }
    DenseGrads head_grads = DenseGrads::zeros_for(head);
    const Tensor dlogits = crossentropy_softmax_dlogits(probs, labels);
    Tensor dx =
        dense_backward_from_pre(head, caches.back(), dlogits, head_grads);
    for (std::size_t l = hidden.size(); l-- > 0;) {
      dx = dense_backward(hidden[l], caches[l], dx, layer_grads[l]);
    }

    grads.clear();
    for (DenseGrads& g : layer_grads) {
      grads.push_back(std::move(g.weight));
      grads.push_back(std::move(g.bias));
    }
    grads.push_back(std::move(head_grads.weight));
    grads.push_back(std::move(head_grads.bias));
    return loss_value;
  }

  Tensor predict_probs(std::span<const Input> inputs) const {
    Tensor x = batch_tensor(inputs);
    for (const DenseLayerParams& layer : hidden) x = dense_forward(layer, x);
    return dense_forward(head, x);
  }

  double loss(std::span<const Input> inputs, std::span<const int> labels) const {
    return sparse_crossentropy(predict_probs(inputs), labels);
  }
};

}  // namespace nomen::nn
