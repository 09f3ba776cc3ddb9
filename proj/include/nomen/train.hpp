#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "nomen/adam.hpp"
#include "nomen/errors.hpp"
#include "nomen/model.hpp"
#include "nomen/prob.hpp"
#include "nomen/rng.hpp"

namespace nomen {

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t max_epochs = 50;
  std::size_t early_stopping_patience = 7;
  double learning_rate = 0.0025;
  std::uint64_t seed = 42;
  /// Final-fit mode: train for exactly this many epochs without early
  /// stopping; the only mode in which the validation set may be empty.
  std::optional<std::size_t> fixed_epochs;

  void validate() const {
    if (batch_size < 1 || max_epochs < 1 || early_stopping_patience < 1) {
      throw InvalidConfig("batch_size, max_epochs and patience must be >= 1");
    }
    if (fixed_epochs && *fixed_epochs < 1) {
      throw InvalidConfig("fixed_epochs must be >= 1 when set");
    }
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_accuracy = 0.0;  // NaN when no validation set
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0.0;
};

/// Argmax accuracy over a labeled set, evaluated in chunks.
template <typename Model>
double accuracy(const Model& model,
                const std::vector<typename Model::Input>& inputs,
                const std::vector<int>& labels, std::size_t chunk = 256) {
  if (inputs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const std::size_t count = std::min(chunk, inputs.size() - start);
    const nn::Tensor probs = model.predict_probs(
        std::span<const typename Model::Input>(inputs).subspan(start, count));
    for (std::size_t b = 0; b < count; ++b) {
      const std::span<const double> row(probs.row_ptr(b), probs.cols());
      if (argmax_index(row) == static_cast<std::size_t>(labels[start + b])) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

namespace detail {

template <typename Model>
std::vector<std::vector<double>> snapshot_parameters(Model& model) {
  std::vector<std::vector<double>> snap;
  for (const nn::ParamRef& p : model.parameters()) snap.push_back(p.tensor->data);
  return snap;
}

template <typename Model>
void restore_parameters(Model& model,
                        const std::vector<std::vector<double>>& snap) {
  const std::vector<nn::ParamRef> params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].tensor->data = snap[i];
  }
}

}  // namespace detail

/// Mini-batch Adam with per-epoch seeded shuffling. With a validation set the
/// loop monitors validation accuracy, stops after `patience` epochs without a
/// strict improvement and restores the best epoch's parameters. In fixed-epoch
/// mode it runs to the requested epoch count and keeps the final parameters.
template <typename Model>
TrainHistory fit(Model& model, const std::vector<typename Model::Input>& train_x,
                 const std::vector<int>& train_y,
                 const std::vector<typename Model::Input>& val_x,
                 const std::vector<int>& val_y, const TrainConfig& tc) {
  tc.validate();
  if (train_x.empty()) throw EmptyTrainingSet("no training samples");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    throw ShapeMismatch("sample/label count mismatch");
  }
  const auto num_classes = static_cast<int>(model.num_classes());
  for (const int y : train_y) {
    if (y < 0 || y >= num_classes) {
      throw ClassIndexOutOfRange("label " + std::to_string(y));
    }
  }
  for (const int y : val_y) {
    if (y < 0 || y >= num_classes) {
      throw ClassIndexOutOfRange("label " + std::to_string(y));
    }
  }
  if (!tc.fixed_epochs && val_x.empty()) {
    throw InvalidConfig(
        "early stopping needs a validation set; set fixed_epochs to train "
        "without one");
  }

  const std::size_t total_epochs =
      tc.fixed_epochs ? *tc.fixed_epochs : tc.max_epochs;
  nn::Rng shuffle_rng(tc.seed);
  nn::Rng dropout_rng(tc.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<nn::ParamRef> params = model.parameters();
  nn::AdamConfig adam_config;
  adam_config.learning_rate = tc.learning_rate;
  nn::AdamState adam(adam_config, params);

  TrainHistory history;
  double best_acc = -std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  std::vector<std::vector<double>> best_params;

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<typename Model::Input> batch_x;
  std::vector<int> batch_y;
  std::vector<nn::Tensor> grads;

  for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t count = std::min(tc.batch_size, order.size() - start);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = 0; i < count; ++i) {
        batch_x.push_back(train_x[order[start + i]]);
        batch_y.push_back(train_y[order[start + i]]);
      }
      const double batch_loss =
          model.forward_backward(batch_x, batch_y, grads, &dropout_rng);
      adam.step(params, grads);
      loss_sum += batch_loss * static_cast<double>(count);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_x.size());
    stats.validation_accuracy =
        val_x.empty() ? std::numeric_limits<double>::quiet_NaN()
                      : accuracy(model, val_x, val_y, tc.batch_size);
    history.epochs.push_back(stats);

    if (!tc.fixed_epochs) {
      if (stats.validation_accuracy > best_acc) {
        best_acc = stats.validation_accuracy;
        history.best_epoch = epoch;
        epochs_since_best = 0;
        best_params = detail::snapshot_parameters(model);
      } else {
        ++epochs_since_best;
        if (epochs_since_best >= tc.early_stopping_patience) break;
      }
    }
  }

  if (!tc.fixed_epochs) {
    detail::restore_parameters(model, best_params);
    history.best_validation_accuracy = best_acc;
  } else {
    history.best_epoch = history.epochs.size();
    history.best_validation_accuracy =
        history.epochs.empty() ? 0.0
                               : history.epochs.back().validation_accuracy;
  }
  return history;
}

/// Trains the name classifier and records provenance on the model.
inline TrainHistory train_model(LstmModel& model,
                                const std::vector<EncodedName>& train_x,
                                const std::vector<int>& train_y,
                                const std::vector<EncodedName>& val_x,
                                const std::vector<int>& val_y,
                                const TrainConfig& tc) {
  TrainHistory history = fit(model, train_x, train_y, val_x, val_y, tc);
  model.provenance.epochs_run = history.epochs.size();
  model.provenance.best_validation_accuracy = history.best_validation_accuracy;
  model.provenance.seed = tc.seed;
  return history;
}

}  // namespace nomen
