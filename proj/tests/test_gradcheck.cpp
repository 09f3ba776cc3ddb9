#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "nomen/gradcheck.hpp"
#include "nomen/mlp.hpp"
#include "nomen/network.hpp"
#include "nomen/rng.hpp"

using namespace nomen::nn;

namespace {

std::vector<std::vector<double>> random_features(std::size_t n, std::size_t dim,
                                                 Rng& rng) {
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& row : out) {
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  }
  return out;
}

std::vector<Tensor> random_sequences(std::size_t n, std::size_t seq_len,
                                     std::size_t dim, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t{seq_len, dim};
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<int> random_labels(std::size_t n, int k, Rng& rng) {
  std::vector<int> out(n);
  for (int& y : out) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return out;
}

}  // namespace

TEST_CASE("dense softmax classifier passes gradcheck", "[gradcheck]") {
  MlpConfig config;
  config.input_size = 10;
  config.hidden_sizes = {};
  config.num_classes = 4;
  MlpModel model = MlpModel::build(config, 21);
  Rng rng(22);
  const auto x = random_features(6, 10, rng);
  const auto y = random_labels(6, 4, rng);
  const GradCheckReport report = gradcheck(model, x, y);
  REQUIRE(report.max_rel_error() < 1e-6);
}

TEST_CASE("mlp with relu hidden layer passes gradcheck", "[gradcheck]") {
  MlpConfig config;
  config.input_size = 7;
  config.hidden_sizes = {5};
  config.num_classes = 3;
  MlpModel model = MlpModel::build(config, 31);
  Rng rng(32);
  const auto x = random_features(5, 7, rng);
  const auto y = random_labels(5, 3, rng);
  const GradCheckReport report = gradcheck(model, x, y);
  REQUIRE(report.max_rel_error() < 1e-5);
}

TEST_CASE("single lstm layer passes gradcheck", "[gradcheck]") {
  SequenceClassifier model = SequenceClassifier::build(4, 5, {3}, 3, 41);
  Rng rng(42);
  const auto x = random_sequences(4, 5, 4, rng);
  const auto y = random_labels(4, 3, rng);
  const GradCheckReport report = gradcheck(model, x, y);
  REQUIRE(report.max_rel_error() < 1e-5);
}

TEST_CASE("stacked lstm passes gradcheck", "[gradcheck]") {
  SequenceClassifier model = SequenceClassifier::build(6, 6, {8, 4}, 3, 51);
  Rng rng(52);
  const auto x = random_sequences(3, 6, 6, rng);
  const auto y = random_labels(3, 3, rng);
  const GradCheckReport report = gradcheck(model, x, y);
  REQUIRE(report.max_rel_error() < 1e-5);
}

TEST_CASE("gradients vanish for parameters the loss ignores", "[gradcheck]") {
  // with relu inputs clamped to zero, the first hidden column never fires
  MlpConfig config;
  config.input_size = 2;
  config.hidden_sizes = {2};
  config.num_classes = 2;
  MlpModel model = MlpModel::skeleton(config);
  // hidden row 0 sees only input 0; keep weights that never activate it
  model.hidden[0].weight.at(0, 0) = -1.0;
  model.hidden[0].weight.at(1, 1) = 1.0;
  model.head.weight.at(0, 0) = 0.5;
  model.head.weight.at(1, 1) = -0.5;
  const std::vector<std::vector<double>> x = {{1.0, 2.0}};
  const std::vector<int> y = {1};
  std::vector<ParamRef> params = model.parameters();
  std::vector<Tensor> grads;
  model.forward_backward(x, y, grads, nullptr);
  // hidden unit 0 output is relu(-1) = 0 with zero local slope, so its
  // incoming weights get exactly zero gradient
  REQUIRE(grads[0].at(0, 0) == 0.0);
  REQUIRE(grads[0].at(0, 1) == 0.0);
}

namespace {

/// Delegates to an MlpModel but corrupts one gradient entry.
struct CorruptedModel {
  using Input = std::vector<double>;
  MlpModel inner;

  std::size_t num_classes() const { return inner.num_classes(); }
  std::vector<ParamRef> parameters() { return inner.parameters(); }
  double forward_backward(std::span<const Input> x, std::span<const int> y,
                          std::vector<Tensor>& grads, Rng* rng) {
    const double loss = inner.forward_backward(x, y, grads, rng);
    grads[0].data[0] += 0.1;
    return loss;
  }
  double loss(std::span<const Input> x, std::span<const int> y) const {
    return inner.loss(x, y);
  }
};

}  // namespace

TEST_CASE("gradcheck detects an injected gradient fault", "[gradcheck]") {
  MlpConfig config;
  config.input_size = 4;
  config.hidden_sizes = {};
  config.num_classes = 3;
  CorruptedModel model{MlpModel::build(config, 61)};
  Rng rng(62);
  const auto x = random_features(4, 4, rng);
  const auto y = random_labels(4, 3, rng);
  const GradCheckReport report = gradcheck(model, x, y);
  REQUIRE_FALSE(report.passed(1e-5));
  REQUIRE(report.max_rel_error() > 0.01);
}

TEST_CASE("bptt through frozen dropout masks matches finite differences",
          "[gradcheck]") {
  Rng init(71);
  LstmLayerParams p = LstmLayerParams::init(3, 2, init);
  const std::size_t steps = 4;
  const std::size_t batch = 2;
  Rng data_rng(72);
  std::vector<Tensor> x_steps(steps);
  for (Tensor& x : x_steps) {
    x = Tensor{batch, 3};
    for (double& v : x.data) v = data_rng.uniform(-1.0, 1.0);
  }
  // freeze one set of masks, then differentiate the masked forward
  Rng mask_rng(73);
  const std::vector<Tensor> masks =
      lstm_forward_batch(p, x_steps, 0.5, true, &mask_rng).dropout_masks;

  std::vector<Tensor> coeff(steps);  // loss = sum_t sum_bk coeff * h
  for (Tensor& c : coeff) {
    c = Tensor{batch, 2};
    for (double& v : c.data) v = data_rng.uniform(-1.0, 1.0);
  }
  const auto loss_of = [&]() {
    const LstmSequenceCache cache =
        lstm_forward_batch(p, x_steps, 0.5, true, nullptr, &masks);
    double loss = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < cache.hidden[t].data.size(); ++i) {
        loss += coeff[t].data[i] * cache.hidden[t].data[i];
      }
    }
    return loss;
  };

  const LstmSequenceCache cache =
      lstm_forward_batch(p, x_steps, 0.5, true, nullptr, &masks);
  LstmGrads grads = LstmGrads::zeros_for(p);
  lstm_backward_batch(p, cache, coeff, grads);

  std::vector<std::pair<Tensor*, Tensor*>> blocks = {
      {&p.w_input, &grads.w_input},   {&p.w_forget, &grads.w_forget},
      {&p.w_output, &grads.w_output}, {&p.w_cell, &grads.w_cell},
      {&p.b_input, &grads.b_input},   {&p.b_forget, &grads.b_forget},
      {&p.b_output, &grads.b_output}, {&p.b_cell, &grads.b_cell}};
  const double h = 1e-6;
  for (auto& [param, grad] : blocks) {
    for (std::size_t j = 0; j < param->data.size(); ++j) {
      const double saved = param->data[j];
      param->data[j] = saved + h;
      const double up = loss_of();
      param->data[j] = saved - h;
      const double down = loss_of();
      param->data[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      REQUIRE(grad->data[j] == Catch::Approx(fd).margin(1e-6));
    }
  }
}

TEST_CASE("backward without a recorded forward is rejected", "[gradcheck]") {
  SequenceClassifier model = SequenceClassifier::build(3, 4, {2}, 2, 81);
  LstmStackTape tape;  // never ran forward
  const std::vector<int> labels = {0};
  REQUIRE_THROWS_AS(stack_backward(model.stack, tape, labels),
                    nomen::NoRecordedForward);
}

TEST_CASE("gradient exactness holds across 20 random seeds", "[gradcheck]") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    SequenceClassifier lstm = SequenceClassifier::build(3, 4, {4}, 3, seed);
    Rng rng(seed ^ 0x5bd1e995);
    const auto xs = random_sequences(3, 4, 3, rng);
    const auto ys = random_labels(3, 3, rng);
    const GradCheckReport lstm_report = gradcheck(lstm, xs, ys);
    CAPTURE(seed);
    REQUIRE(lstm_report.max_rel_error() < 1e-5);

    MlpConfig config;
    config.input_size = 5;
    config.hidden_sizes = {4};
    config.num_classes = 3;
    MlpModel mlp = MlpModel::build(config, seed);
    const auto xf = random_features(4, 5, rng);
    const auto yf = random_labels(4, 3, rng);
    REQUIRE(gradcheck(mlp, xf, yf).max_rel_error() < 1e-5);
  }
}
