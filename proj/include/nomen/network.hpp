#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nomen/adam.hpp"
#include "nomen/errors.hpp"
#include "nomen/layers.hpp"
#include "nomen/rng.hpp"
#include "nomen/tensor.hpp"

namespace nomen::nn {

/// Stacked LSTM layers with a softmax output layer reading the final step's
/// hidden state. The stack may be empty, in which case the head consumes the
/// last input step directly.
struct LstmStack {
  std::vector<LstmLayerParams> layers;
  DenseLayerParams head;

  static LstmStack skeleton(std::size_t input_size,
                            const std::vector<std::size_t>& lstm_sizes,
                            std::size_t num_classes) {
    LstmStack stack;
    std::size_t in = input_size;
    for (const std::size_t size : lstm_sizes) {
      LstmLayerParams layer;
      layer.input_size = in;
      layer.hidden_size = size;
      const std::size_t concat = in + size;
      layer.w_input = Tensor{size, concat};
      layer.w_forget = Tensor{size, concat};
      layer.w_output = Tensor{size, concat};
      layer.w_cell = Tensor{size, concat};
      layer.b_input = Tensor{size};
      layer.b_forget = Tensor{size};
      layer.b_output = Tensor{size};
      layer.b_cell = Tensor{size};
      stack.layers.push_back(std::move(layer));
      in = size;
    }
    stack.head.in_size = in;
    stack.head.out_size = num_classes;
    stack.head.weight = Tensor{num_classes, in};
    stack.head.bias = Tensor{num_classes};
    stack.head.activation = Activation::kSoftmax;
    return stack;
  }

  static LstmStack build(std::size_t input_size,
                         const std::vector<std::size_t>& lstm_sizes,
                         std::size_t num_classes, Rng& rng) {
    LstmStack stack;
    std::size_t in = input_size;
    for (const std::size_t size : lstm_sizes) {
      stack.layers.push_back(LstmLayerParams::init(in, size, rng));
      in = size;
    }
    stack.head =
        DenseLayerParams::init(in, num_classes, Activation::kSoftmax, rng);
    return stack;
  }

  std::size_t parameter_count() const {
    std::size_t total = head.parameter_count();
    for (const LstmLayerParams& layer : layers) {
      total += layer.parameter_count();
    }
    return total;
  }

  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = "lstm" + std::to_string(l) + ".";
      LstmLayerParams& p = layers[l];
      refs.push_back({prefix + "w_input", &p.w_input});
      refs.push_back({prefix + "w_forget", &p.w_forget});
      refs.push_back({prefix + "w_output", &p.w_output});
      refs.push_back({prefix + "w_cell", &p.w_cell});
      refs.push_back({prefix + "b_input", &p.b_input});
      refs.push_back({prefix + "b_forget", &p.b_forget});
      refs.push_back({prefix + "b_output", &p.b_output});
      refs.push_back({prefix + "b_cell", &p.b_cell});
    }
    refs.push_back({"output.weight", &head.weight});
    refs.push_back({"output.bias", &head.bias});
    return refs;
  }
};

/// Recorded activations of one batch pass through an LstmStack.
struct LstmStackTape {
  bool recorded = false;
  std::vector<Tensor> input_steps;
  std::vector<LstmSequenceCache> layer_caches;
  DenseCache head_cache;
  Tensor probs;  // B x K
  std::size_t batch = 0;
};

/// Forward pass over per-step batched inputs (x_steps[t] is B x input_size).
/// Dropout applies only when a generator is supplied.
inline LstmStackTape stack_forward(const LstmStack& stack,
                                   std::vector<Tensor> x_steps,
                                   double dropout_rate, Rng* dropout_rng) {
  if (x_steps.empty()) throw ShapeMismatch("empty input sequence");
  LstmStackTape tape;
  tape.batch = x_steps[0].rows();
  tape.input_steps = std::move(x_steps);
  const bool training = dropout_rng != nullptr;
  const std::vector<Tensor>* feed = &tape.input_steps;
  for (const LstmLayerParams& layer : stack.layers) {
    tape.layer_caches.push_back(
        lstm_forward_batch(layer, *feed, dropout_rate, training, dropout_rng));
    feed = &tape.layer_caches.back().hidden;
  }
  const Tensor& last_hidden = feed->back();
  tape.head_cache = dense_forward_cached(stack.head, last_hidden);
  tape.probs = tape.head_cache.output;
  tape.recorded = true;
  return tape;
}

/// Exact reverse-mode gradients of the recorded batch's mean crossentropy,
/// in LstmStack::parameters() order. Dropout masks recorded during the
/// forward pass are reused.
inline std::vector<Tensor> stack_backward(const LstmStack& stack,
                                          const LstmStackTape& tape,
                                          std::span<const int> labels) {
  if (!tape.recorded) {
    throw NoRecordedForward("backward requested without a recorded forward");
  }
  std::vector<LstmGrads> layer_grads;
  layer_grads.reserve(stack.layers.size());
  for (const LstmLayerParams& layer : stack.layers) {
    layer_grads.push_back(LstmGrads::zeros_for(layer));
  }
  DenseGrads head_grads = DenseGrads::zeros_for(stack.head);

  const Tensor dlogits = crossentropy_softmax_dlogits(tape.probs, labels);
  Tensor dlast =
      dense_backward_from_pre(stack.head, tape.head_cache, dlogits, head_grads);

  if (!stack.layers.empty()) {
    const std::size_t steps = tape.input_steps.size();
    // only the last step of the top layer feeds the head
    std::vector<Tensor> dh(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      dh[t] = Tensor{tape.batch, stack.layers.back().hidden_size};
    }
    dh[steps - 1] = std::move(dlast);
    for (std::size_t l = stack.layers.size(); l-- > 0;) {
      dh = lstm_backward_batch(stack.layers[l], tape.layer_caches[l], dh,
                               layer_grads[l]);
    }
  }

  std::vector<Tensor> grads;
  grads.reserve(8 * stack.layers.size() + 2);
  for (LstmGrads& g : layer_grads) {
    grads.push_back(std::move(g.w_input));
    grads.push_back(std::move(g.w_forget));
    grads.push_back(std::move(g.w_output));
    grads.push_back(std::move(g.w_cell));
    grads.push_back(std::move(g.b_input));
    grads.push_back(std::move(g.b_forget));
    grads.push_back(std::move(g.b_output));
    grads.push_back(std::move(g.b_cell));
  }
  grads.push_back(std::move(head_grads.weight));
  grads.push_back(std::move(head_grads.bias));
  return grads;
}

/// Thin classifier over raw step sequences (each sample a seq_len x
/// input_size tensor); the vehicle for gradient checks on arbitrary shapes.
class SequenceClassifier {
 public:
  using Input = Tensor;

  std::size_t input_size = 0;
  std::size_t seq_len = 0;
  double dropout_rate = 0.0;
  LstmStack stack;

  static SequenceClassifier build(std::size_t input_size, std::size_t seq_len,
                                  const std::vector<std::size_t>& lstm_sizes,
                                  std::size_t num_classes, std::uint64_t seed) {
    SequenceClassifier c;
    c.input_size = input_size;
    c.seq_len = seq_len;
    Rng rng(seed);
    c.stack = LstmStack::build(input_size, lstm_sizes, num_classes, rng);
    return c;
  }

  std::size_t num_classes() const { return stack.head.out_size; }
  std::vector<ParamRef> parameters() { return stack.parameters(); }

  std::vector<Tensor> batch_steps(std::span<const Tensor> inputs) const {
    std::vector<Tensor> x_steps(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) {
      x_steps[t] = Tensor{inputs.size(), input_size};
    }
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      if (inputs[b].rows() != seq_len || inputs[b].cols() != input_size) {
        throw ShapeMismatch("sample is not seq_len x input_size");
      }
      for (std::size_t t = 0; t < seq_len; ++t) {
        for (std::size_t k = 0; k < input_size; ++k) {
          x_steps[t].at(b, k) = inputs[b].at(t, k);
        }
      }
    }
    return x_steps;
  }

  double forward_backward(std::span<const Tensor> inputs,
                          std::span<const int> labels,
                          std::vector<Tensor>& grads, Rng* dropout_rng) {
    const LstmStackTape tape =
        stack_forward(stack, batch_steps(inputs), dropout_rate, dropout_rng);
    const double loss_value = sparse_crossentropy(tape.probs, labels);
    grads = stack_backward(stack, tape, labels);
    return loss_value;
  }

  double loss(std::span<const Tensor> inputs, std::span<const int> labels) const {
    const LstmStackTape tape =
        stack_forward(stack, batch_steps(inputs), dropout_rate, nullptr);
    return sparse_crossentropy(tape.probs, labels);
  }

  Tensor predict_probs(std::span<const Tensor> inputs) const {
    return stack_forward(stack, batch_steps(inputs), dropout_rate, nullptr)
        .probs;
  }
};

}  // namespace nomen::nn
