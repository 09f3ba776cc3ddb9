#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nomen/errors.hpp"
#include "nomen/name_codec.hpp"
#include "nomen/network.hpp"
#include "nomen/prob.hpp"
#include "nomen/rng.hpp"
#include "nomen/taxonomy.hpp"
#include "nomen/tensor.hpp"

namespace nomen {

struct ModelConfig {
  std::vector<std::size_t> lstm_sizes = {512, 256, 64};
  double dropout_rate = 0.2;
  std::size_t num_classes = 17;
  std::size_t input_channels = Alphabet::kSize;
  std::size_t max_seq_len = kMaxNameLen;

  void validate() const {
    if (lstm_sizes.empty()) throw InvalidConfig("lstm_sizes must not be empty");
    for (const std::size_t s : lstm_sizes) {
      if (s < 1) throw InvalidConfig("lstm layer size must be >= 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw InvalidConfig("dropout_rate must lie in [0,1)");
    }
    if (num_classes < 2) throw InvalidConfig("need at least 2 classes");
    if (input_channels < 1 || max_seq_len < 1) {
      throw InvalidConfig("input_channels and max_seq_len must be >= 1");
    }
  }
};

struct TrainProvenance {
  std::size_t epochs_run = 0;
  double best_validation_accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct ConstParamRef {
  std::string name;
  const nn::Tensor* tensor;
};

/// The name classifier: one-hot character rows feed the LSTM stack, the top
/// layer's final hidden state feeds a softmax over the origin classes.
class LstmModel {
 public:
  using Input = EncodedName;

  ModelConfig config;
  nn::LstmStack stack;
  std::vector<std::string> class_names;
  TrainProvenance provenance;

  /// Zero-valued parameter skeleton with the configured shapes.
  static LstmModel skeleton(const ModelConfig& config,
                            std::vector<std::string> class_names) {
    config.validate();
    if (class_names.size() != config.num_classes) {
      throw InvalidConfig("taxonomy size != num_classes");
    }
    LstmModel m;
    m.config = config;
    m.class_names = std::move(class_names);
    m.stack = nn::LstmStack::skeleton(config.input_channels, config.lstm_sizes,
                                      config.num_classes);
    return m;
  }

  /// Fresh Glorot-initialized model; deterministic for a given seed.
  static LstmModel build(const ModelConfig& config,
                         const OriginTaxonomy& taxonomy, std::uint64_t seed) {
    LstmModel m = skeleton(config, taxonomy.classes());
    nn::Rng rng(seed);
    m.stack = nn::LstmStack::build(config.input_channels, config.lstm_sizes,
                                   config.num_classes, rng);
    m.provenance.seed = seed;
    return m;
  }

  std::size_t num_classes() const { return config.num_classes; }
  std::size_t parameter_count() const { return stack.parameter_count(); }

  std::vector<nn::ParamRef> parameters() { return stack.parameters(); }

  std::vector<ConstParamRef> const_parameters() const {
    auto& self = const_cast<LstmModel&>(*this);
    std::vector<ConstParamRef> refs;
    for (const nn::ParamRef& r : self.parameters()) {
      refs.push_back({r.name, r.tensor});
    }
    return refs;
  }

  std::vector<nn::Tensor> one_hot_steps(
      std::span<const EncodedName> inputs) const {
    std::vector<nn::Tensor> x_steps(config.max_seq_len);
    for (std::size_t t = 0; t < config.max_seq_len; ++t) {
      x_steps[t] = nn::Tensor{inputs.size(), config.input_channels};
      for (std::size_t b = 0; b < inputs.size(); ++b) {
        x_steps[t].at(b, inputs[b].channels()[t]) = 1.0;
      }
    }
    return x_steps;
  }

  double forward_backward(std::span<const EncodedName> inputs,
                          std::span<const int> labels,
                          std::vector<nn::Tensor>& grads,
                          nn::Rng* dropout_rng) {
    const nn::LstmStackTape tape = nn::stack_forward(
        stack, one_hot_steps(inputs), config.dropout_rate, dropout_rng);
    const double loss_value = nn::sparse_crossentropy(tape.probs, labels);
    grads = nn::stack_backward(stack, tape, labels);
    return loss_value;
  }

  double loss(std::span<const EncodedName> inputs,
              std::span<const int> labels) const {
    const nn::LstmStackTape tape = nn::stack_forward(
        stack, one_hot_steps(inputs), config.dropout_rate, nullptr);
    return nn::sparse_crossentropy(tape.probs, labels);
  }

  /// Deterministic batched inference; every row is a valid probability
  /// vector and is independent of batch composition.
  nn::Tensor predict_probs(std::span<const EncodedName> inputs) const {
    constexpr std::size_t kChunk = 256;
    nn::Tensor probs{inputs.size(), config.num_classes};
    for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
      const std::size_t count = std::min(kChunk, inputs.size() - start);
      const nn::LstmStackTape tape =
          nn::stack_forward(stack, one_hot_steps(inputs.subspan(start, count)),
                            config.dropout_rate, nullptr);
      for (std::size_t b = 0; b < count; ++b) {
        for (std::size_t k = 0; k < config.num_classes; ++k) {
          probs.at(start + b, k) = tape.probs.at(b, k);
        }
      }
    }
    return probs;
  }

  std::vector<ProbVector> predict(std::span<const EncodedName> inputs) const {
    const nn::Tensor probs = predict_probs(inputs);
    std::vector<ProbVector> out;
    out.reserve(inputs.size());
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      out.push_back(ProbVector{std::vector<double>(
          probs.row_ptr(b), probs.row_ptr(b) + config.num_classes)});
    }
    return out;
  }
};

inline std::size_t count_parameters(const LstmModel& model) {
  return model.parameter_count();
}

}  // namespace nomen
