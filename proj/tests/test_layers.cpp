#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nomen/layers.hpp"
#include "nomen/rng.hpp"
#include "nomen/tensor.hpp"

using namespace nomen::nn;

namespace {

LstmLayerParams scalar_lstm() {
  // i=1, c=1 with hand-set gate weights
  LstmLayerParams p;
  p.input_size = 1;
  p.hidden_size = 1;
  p.w_input = Tensor{1, 2};
  p.w_forget = Tensor{1, 2};
  p.w_output = Tensor{1, 2};
  p.w_cell = Tensor{1, 2};
  p.b_input = Tensor{1};
  p.b_forget = Tensor{1};
  p.b_output = Tensor{1};
  p.b_cell = Tensor{1};
  p.w_input.data = {0.5, 0.1};
  p.b_input.data = {0.0};
  p.w_forget.data = {0.3, -0.2};
  p.b_forget.data = {1.0};
  p.w_output.data = {-0.4, 0.25};
  p.b_output.data = {0.1};
  p.w_cell.data = {0.7, 0.6};
  p.b_cell.data = {-0.05};
  return p;
}

}  // namespace

TEST_CASE("zero-weight lstm is a fixed point at zero", "[layers]") {
  LstmLayerParams p;
  p.input_size = 3;
  p.hidden_size = 2;
  for (Tensor* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell}) {
    *w = Tensor{2, 5};
  }
  for (Tensor* b : {&p.b_input, &p.b_forget, &p.b_output, &p.b_cell}) {
    *b = Tensor{2};
  }
  Rng rng(1);
  Tensor sequence{4, 3};
  for (double& v : sequence.data) v = rng.uniform(-2.0, 2.0);
  const Tensor h = lstm_forward(p, sequence, 0.0, false, rng);
  REQUIRE(h.rows() == 4);
  REQUIRE(h.cols() == 2);
  for (const double v : h.data) REQUIRE(v == 0.0);
}

TEST_CASE("scalar lstm matches a hand-executed recurrence", "[layers]") {
  const LstmLayerParams p = scalar_lstm();
  Tensor sequence{2, 1};
  sequence.data = {1.0, 1.0};
  Rng rng(2);
  const Tensor h = lstm_forward(p, sequence, 0.0, false, rng);

  // independent straight-line evaluation of the gate equations
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double h_prev = 0.0;
  double c_prev = 0.0;
  std::vector<double> expected;
  for (int t = 0; t < 2; ++t) {
    const double x = 1.0;
    const double i_g = sig(0.0 + 0.5 * x + 0.1 * h_prev);
    const double f_g = sig(1.0 + 0.3 * x + -0.2 * h_prev);
    const double o_g = sig(0.1 + -0.4 * x + 0.25 * h_prev);
    const double g_g = std::tanh(-0.05 + 0.7 * x + 0.6 * h_prev);
    const double c_new = f_g * c_prev + i_g * g_g;
    const double h_new = o_g * std::tanh(c_new);
    expected.push_back(h_new);
    h_prev = h_new;
    c_prev = c_new;
  }
  REQUIRE(h.at(0, 0) == Catch::Approx(expected[0]).margin(1e-15));
  REQUIRE(h.at(1, 0) == Catch::Approx(expected[1]).margin(1e-15));
}

TEST_CASE("dropout rate zero is inert regardless of mode", "[layers]") {
  Rng init(3);
  const LstmLayerParams p = LstmLayerParams::init(4, 3, init);
  Tensor sequence{5, 4};
  Rng data_rng(4);
  for (double& v : sequence.data) v = data_rng.uniform(-1.0, 1.0);
  Rng rng_a(7);
  Rng rng_b(8);
  const Tensor train_mode = lstm_forward(p, sequence, 0.0, true, rng_a);
  const Tensor eval_mode = lstm_forward(p, sequence, 0.0, false, rng_b);
  REQUIRE(train_mode.data == eval_mode.data);
}

TEST_CASE("lstm rejects mismatched input width", "[layers]") {
  Rng rng(5);
  const LstmLayerParams p = LstmLayerParams::init(4, 3, rng);
  Tensor sequence{5, 3};
  REQUIRE_THROWS_AS(lstm_forward(p, sequence, 0.0, false, rng),
                    nomen::ShapeMismatch);
}

TEST_CASE("inverted dropout preserves expected pre-activation", "[layers]") {
  Rng init(11);
  const LstmLayerParams p = LstmLayerParams::init(6, 1, init);
  const double rate = 0.4;
  std::vector<Tensor> x_steps(1, Tensor{1, 6});
  Rng data_rng(12);
  for (double& v : x_steps[0].data) v = data_rng.uniform(0.5, 1.5);

  // clean pre-activation of the input gate (zero initial hidden state)
  double clean = p.b_input.data[0];
  double mask_variance = 0.0;
  for (std::size_t k = 0; k < 6; ++k) {
    const double term = p.w_input.at(0, k) * x_steps[0].data[k];
    clean += term;
    mask_variance += term * term * rate / (1.0 - rate);
  }

  Rng mask_rng(13);
  const int trials = 4000;
  double mean = 0.0;
  for (int t = 0; t < trials; ++t) {
    const LstmSequenceCache cache =
        lstm_forward_batch(p, x_steps, rate, true, &mask_rng);
    double z = p.b_input.data[0];
    for (std::size_t k = 0; k < 6; ++k) {
      z += p.w_input.at(0, k) * x_steps[0].data[k] *
           cache.dropout_masks[0].data[k];
    }
    mean += z;
  }
  mean /= trials;
  const double standard_error = std::sqrt(mask_variance / trials);
  REQUIRE(std::abs(mean - clean) < 3.0 * standard_error);
}

TEST_CASE("dense identity passes input through", "[layers]") {
  DenseLayerParams p;
  p.in_size = 3;
  p.out_size = 3;
  p.weight = Tensor{3, 3};
  p.bias = Tensor{3};
  p.activation = Activation::kIdentity;
  for (std::size_t i = 0; i < 3; ++i) p.weight.at(i, i) = 1.0;
  Tensor x{2, 3};
  x.data = {1.0, -2.0, 3.0, 0.5, 0.0, -0.25};
  const Tensor y = dense_forward(p, x);
  REQUIRE(y.data == x.data);
}

TEST_CASE("softmax of zero logits is uniform", "[layers]") {
  DenseLayerParams p;
  p.in_size = 4;
  p.out_size = 17;
  p.weight = Tensor{17, 4};
  p.bias = Tensor{17};
  p.activation = Activation::kSoftmax;
  Tensor x{1, 4};
  x.data = {1.0, 2.0, 3.0, 4.0};
  const Tensor y = dense_forward(p, x);
  for (std::size_t k = 0; k < 17; ++k) {
    REQUIRE(y.at(0, k) == Catch::Approx(1.0 / 17.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax of [ln 2, ln 1] is [2/3, 1/3]", "[layers]") {
  Tensor logits{1, 2};
  logits.data = {std::log(2.0), 0.0};
  softmax_rows(logits);
  REQUIRE(logits.at(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
  REQUIRE(logits.at(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("softmax rows sum to one with entries in (0,1)", "[layers]") {
  Rng rng(19);
  Tensor logits{8, 17};
  for (double& v : logits.data) v = rng.uniform(-20.0, 20.0);
  softmax_rows(logits);
  for (std::size_t r = 0; r < 8; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 17; ++c) {
      const double v = logits.at(r, c);
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("crossentropy of certain predictions is zero", "[layers]") {
  Tensor probs{2, 3};
  probs.data = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  const std::vector<int> labels = {0, 2};
  REQUIRE(sparse_crossentropy(probs, labels) == 0.0);
}

TEST_CASE("crossentropy of uniform 17-way probabilities is ln 17", "[layers]") {
  Tensor probs{1, 17};
  probs.fill(1.0 / 17.0);
  const std::vector<int> labels = {5};
  REQUIRE(sparse_crossentropy(probs, labels) ==
          Catch::Approx(std::log(17.0)).epsilon(1e-12));
}

TEST_CASE("crossentropy clamps zero probabilities", "[layers]") {
  Tensor probs{1, 2};
  probs.data = {0.0, 1.0};
  const std::vector<int> labels = {0};
  REQUIRE(sparse_crossentropy(probs, labels) ==
          Catch::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("crossentropy rejects out-of-range labels", "[layers]") {
  Tensor probs{1, 3};
  probs.fill(1.0 / 3.0);
  const std::vector<int> high = {3};
  const std::vector<int> low = {-1};
  REQUIRE_THROWS_AS(sparse_crossentropy(probs, high), nomen::LabelOutOfRange);
  REQUIRE_THROWS_AS(sparse_crossentropy(probs, low), nomen::LabelOutOfRange);
}

TEST_CASE("dense softmax backward matches finite differences", "[layers]") {
  // loss = sum_j coeff_j * y_j exercises the full softmax Jacobian
  Rng rng(23);
  DenseLayerParams p = DenseLayerParams::init(4, 3, Activation::kSoftmax, rng);
  Tensor x{2, 4};
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor coeff{2, 3};
  for (double& v : coeff.data) v = rng.uniform(-1.0, 1.0);

  const auto loss_of = [&]() {
    const Tensor y = dense_forward(p, x);
    double loss = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      loss += coeff.data[i] * y.data[i];
    }
    return loss;
  };

  DenseGrads grads = DenseGrads::zeros_for(p);
  const DenseCache cache = dense_forward_cached(p, x);
  dense_backward(p, cache, coeff, grads);

  const double h = 1e-6;
  for (std::size_t j = 0; j < p.weight.data.size(); ++j) {
    const double saved = p.weight.data[j];
    p.weight.data[j] = saved + h;
    const double up = loss_of();
    p.weight.data[j] = saved - h;
    const double down = loss_of();
    p.weight.data[j] = saved;
    const double fd = (up - down) / (2.0 * h);
    REQUIRE(grads.weight.data[j] == Catch::Approx(fd).margin(1e-7));
  }
}

TEST_CASE("identity dense backward is the outer-product formula", "[layers]") {
  // 2x2 case with loss = 0.5 * sum((y - t)^2): dW = (y - t)^T x, db = y - t
  DenseLayerParams p;
  p.in_size = 2;
  p.out_size = 2;
  p.weight = Tensor{2, 2};
  p.bias = Tensor{2};
  p.activation = Activation::kIdentity;
  p.weight.data = {0.7, -0.3, 0.2, 0.5};
  p.bias.data = {0.1, -0.2};
  Tensor x{1, 2};
  x.data = {1.5, -2.0};
  Tensor target{1, 2};
  target.data = {0.25, 0.75};

  const DenseCache cache = dense_forward_cached(p, x);
  Tensor dout{1, 2};
  for (std::size_t j = 0; j < 2; ++j) {
    dout.data[j] = cache.output.data[j] - target.data[j];
  }
  DenseGrads grads = DenseGrads::zeros_for(p);
  const Tensor dx = dense_backward(p, cache, dout, grads);

  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < 2; ++k) {
      REQUIRE(grads.weight.at(j, k) == dout.data[j] * x.data[k]);
    }
    REQUIRE(grads.bias.data[j] == dout.data[j]);
  }
  // dx = W^T (y - t)
  for (std::size_t k = 0; k < 2; ++k) {
    REQUIRE(dx.data[k] ==
            dout.data[0] * p.weight.at(0, k) + dout.data[1] * p.weight.at(1, k));
  }
}

TEST_CASE("dense and lstm reject invalid inputs", "[layers]") {
  Rng rng(91);
  const DenseLayerParams dense =
      DenseLayerParams::init(3, 2, Activation::kIdentity, rng);
  Tensor wrong{2, 4};
  REQUIRE_THROWS_AS(dense_forward(dense, wrong), nomen::ShapeMismatch);

  const LstmLayerParams lstm = LstmLayerParams::init(3, 2, rng);
  Tensor sequence{4, 3};
  REQUIRE_THROWS_AS(lstm_forward(lstm, sequence, 1.0, true, rng),
                    nomen::InvalidConfig);
}
