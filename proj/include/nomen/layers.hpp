#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nomen/errors.hpp"
#include "nomen/rng.hpp"
#include "nomen/tensor.hpp"

namespace nomen::nn {

enum class Activation { kSoftmax, kRelu, kIdentity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kSoftmax: return "softmax";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void glorot_fill(Tensor& w, std::size_t fan_in, std::size_t fan_out,
                        Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  for (double& v : w.data) v = rng.uniform(-limit, limit);
}

/// Row-wise softmax with max-subtraction.
inline void softmax_rows(Tensor& t) {
  const std::size_t n = t.rows();
  const std::size_t k = t.cols();
  for (std::size_t r = 0; r < n; ++r) {
    double* row = t.row_ptr(r);
    double m = row[0];
    for (std::size_t c = 1; c < k; ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      row[c] = std::exp(row[c] - m);
      sum += row[c];
    }
    for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
  }
}

namespace detail {

// out[b] = in[b] . w[j] for every row j of w; w is row-major (out_dim x
// in_dim), so both operands of each dot product are contiguous.
inline void affine_rows(const Tensor& in, const Tensor& w, const Tensor& bias,
                        Tensor& out) {
  const std::size_t batch = in.rows();
  const std::size_t in_dim = in.cols();
  const std::size_t out_dim = w.rows();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* x = in.row_ptr(b);
    double* y = out.row_ptr(b);
    for (std::size_t j = 0; j < out_dim; ++j) {
      const double* wj = w.row_ptr(j);
      double acc = bias.data[j];
      for (std::size_t k = 0; k < in_dim; ++k) acc += x[k] * wj[k];
      y[j] = acc;
    }
  }
}

// dw[j] += sum_b dpre[b][j] * in[b]; db[j] += sum_b dpre[b][j];
// din[b] += sum_j dpre[b][j] * w[j]
inline void affine_backward(const Tensor& in, const Tensor& w,
                            const Tensor& dpre, Tensor& dw, Tensor& db,
                            Tensor* din) {
  const std::size_t batch = in.rows();
  const std::size_t in_dim = in.cols();
  const std::size_t out_dim = w.rows();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* x = in.row_ptr(b);
    const double* g = dpre.row_ptr(b);
    for (std::size_t j = 0; j < out_dim; ++j) {
      const double gj = g[j];
      if (gj == 0.0) continue;
      double* dwj = dw.row_ptr(j);
      for (std::size_t k = 0; k < in_dim; ++k) dwj[k] += gj * x[k];
      db.data[j] += gj;
    }
    if (din != nullptr) {
      double* dx = din->row_ptr(b);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double gj = g[j];
        if (gj == 0.0) continue;
        const double* wj = w.row_ptr(j);
        for (std::size_t k = 0; k < in_dim; ++k) dx[k] += gj * wj[k];
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

struct DenseLayerParams {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  Tensor weight;  // out_size x in_size
  Tensor bias;    // out_size
  Activation activation = Activation::kIdentity;

  static DenseLayerParams init(std::size_t in, std::size_t out, Activation act,
                               Rng& rng) {
    DenseLayerParams p;
    p.in_size = in;
    p.out_size = out;
    p.weight = Tensor{out, in};
    p.bias = Tensor{out};
    p.activation = act;
    glorot_fill(p.weight, in, out, rng);
    return p;
  }

  std::size_t parameter_count() const { return out_size * (in_size + 1); }
};

struct DenseGrads {
  Tensor weight;
  Tensor bias;

  static DenseGrads zeros_for(const DenseLayerParams& p) {
    return DenseGrads{zeros_like(p.weight), zeros_like(p.bias)};
  }
};

struct DenseCache {
  Tensor input;   // B x in
  Tensor pre;     // B x out, pre-activation
  Tensor output;  // B x out
};

inline DenseCache dense_forward_cached(const DenseLayerParams& p,
                                       const Tensor& input) {
  if (input.cols() != p.in_size) {
    throw ShapeMismatch("dense input width " + std::to_string(input.cols()) +
                        " != " + std::to_string(p.in_size));
  }
  DenseCache cache;
  cache.input = input;
  cache.pre = Tensor{input.rows(), p.out_size};
  detail::affine_rows(input, p.weight, p.bias, cache.pre);
  cache.output = cache.pre;
  switch (p.activation) {
    case Activation::kSoftmax:
      softmax_rows(cache.output);
      break;
    case Activation::kRelu:
      for (double& v : cache.output.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kIdentity:
      break;
  }
  return cache;
}

/// activation(W x + b) for a batch of row vectors.
inline Tensor dense_forward(const DenseLayerParams& p, const Tensor& input) {
  return dense_forward_cached(p, input).output;
}

/// Backward from a gradient with respect to the pre-activation.
inline Tensor dense_backward_from_pre(const DenseLayerParams& p,
                                      const DenseCache& cache,
                                      const Tensor& dpre, DenseGrads& grads) {
  Tensor dinput{cache.input.rows(), p.in_size};
  detail::affine_backward(cache.input, p.weight, dpre, grads.weight, grads.bias,
                          &dinput);
  return dinput;
}

/// Backward from a gradient with respect to the layer output; applies the
/// activation Jacobian (full softmax Jacobian in the softmax case).
inline Tensor dense_backward(const DenseLayerParams& p, const DenseCache& cache,
                             const Tensor& doutput, DenseGrads& grads) {
  Tensor dpre = doutput;
  const std::size_t batch = doutput.rows();
  const std::size_t out = p.out_size;
  switch (p.activation) {
    case Activation::kSoftmax:
      for (std::size_t b = 0; b < batch; ++b) {
        const double* y = cache.output.row_ptr(b);
        const double* dy = doutput.row_ptr(b);
        double inner = 0.0;
        for (std::size_t j = 0; j < out; ++j) inner += dy[j] * y[j];
        double* dp = dpre.row_ptr(b);
        for (std::size_t j = 0; j < out; ++j) dp[j] = y[j] * (dy[j] - inner);
      }
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < dpre.data.size(); ++i) {
        if (cache.pre.data[i] <= 0.0) dpre.data[i] = 0.0;
      }
      break;
    case Activation::kIdentity:
      break;
  }
  return dense_backward_from_pre(p, cache, dpre, grads);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline constexpr double kProbFloor = 1e-12;

/// Mean over the batch of -log p[label], probabilities clamped at 1e-12.
inline double sparse_crossentropy(const Tensor& probs,
                                  std::span<const int> labels) {
  if (probs.rows() != labels.size()) {
    throw ShapeMismatch("probability rows != label count");
  }
  const std::size_t k = probs.cols();
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw LabelOutOfRange("label " + std::to_string(label) + " for " +
                            std::to_string(k) + " classes");
    }
    total += -std::log(std::max(probs.at(b, static_cast<std::size_t>(label)),
                                kProbFloor));
  }
  return total / static_cast<double>(labels.size());
}

/// Exact gradient of sparse_crossentropy(softmax(logits), labels) with respect
/// to the logits: (p - onehot) / B. Rows whose target probability sits at the
/// clamp floor contribute nothing (the clamped loss is locally constant).
inline Tensor crossentropy_softmax_dlogits(const Tensor& probs,
                                           std::span<const int> labels) {
  if (probs.rows() != labels.size()) {
    throw ShapeMismatch("probability rows != label count");
  }
  const std::size_t k = probs.cols();
  const double inv_batch = 1.0 / static_cast<double>(labels.size());
  Tensor dlogits{probs.rows(), k};
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto label = static_cast<std::size_t>(labels[b]);
    if (probs.at(b, label) <= kProbFloor) continue;
    const double* p = probs.row_ptr(b);
    double* d = dlogits.row_ptr(b);
    for (std::size_t c = 0; c < k; ++c) d[c] = p[c] * inv_batch;
    d[label] -= inv_batch;
  }
  return dlogits;
}

// ---------------------------------------------------------------------------
// LSTM layer
// ---------------------------------------------------------------------------

/// Per-gate weights over the concatenated [x_t, h_{t-1}] input. Gate order
/// everywhere is: input, forget, output, cell candidate.
struct LstmLayerParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_input, w_forget, w_output, w_cell;  // hidden x (input + hidden)
  Tensor b_input, b_forget, b_output, b_cell;  // hidden

  static LstmLayerParams init(std::size_t input, std::size_t hidden, Rng& rng) {
    LstmLayerParams p;
    p.input_size = input;
    p.hidden_size = hidden;
    const std::size_t concat = input + hidden;
    for (Tensor* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell}) {
      *w = Tensor{hidden, concat};
      glorot_fill(*w, concat, hidden, rng);
    }
    for (Tensor* b : {&p.b_input, &p.b_forget, &p.b_output, &p.b_cell}) {
      *b = Tensor{hidden};
    }
    p.b_forget.fill(1.0);  // standard stabilizer for early training
    return p;
  }

  std::size_t parameter_count() const {
    return 4 * (hidden_size * (input_size + hidden_size) + hidden_size);
  }
};

struct LstmGrads {
  Tensor w_input, w_forget, w_output, w_cell;
  Tensor b_input, b_forget, b_output, b_cell;

  static LstmGrads zeros_for(const LstmLayerParams& p) {
    return LstmGrads{zeros_like(p.w_input),  zeros_like(p.w_forget),
                     zeros_like(p.w_output), zeros_like(p.w_cell),
                     zeros_like(p.b_input),  zeros_like(p.b_forget),
                     zeros_like(p.b_output), zeros_like(p.b_cell)};
  }
};

struct LstmStepCache {
  Tensor concat;       // B x (i+c): dropped-out input, then h_{t-1}
  Tensor gate_input;   // B x c, post-sigmoid
  Tensor gate_forget;  // B x c, post-sigmoid
  Tensor gate_output;  // B x c, post-sigmoid
  Tensor gate_cell;    // B x c, post-tanh candidate
  Tensor cell;         // B x c, c_t
  Tensor cell_tanh;    // B x c, tanh(c_t)
};

struct LstmSequenceCache {
  std::vector<LstmStepCache> steps;
  std::vector<Tensor> dropout_masks;  // per step B x i, entries 0 or 1/(1-rate)
  std::vector<Tensor> hidden;         // per step B x c
  std::size_t batch = 0;
};

/// Runs the gate recurrence over a batched step sequence (x_steps[t] is
/// B x input_size). Initial hidden and cell states are zero. When training
/// with a positive dropout rate, inverted dropout is applied to the
/// non-recurrent input connections; masks are recorded for backward. When
/// fixed_masks is supplied those masks are used instead of drawing new ones.
inline LstmSequenceCache lstm_forward_batch(
    const LstmLayerParams& p, const std::vector<Tensor>& x_steps,
    double dropout_rate, bool training, Rng* rng,
    const std::vector<Tensor>* fixed_masks = nullptr) {
  const std::size_t steps = x_steps.size();
  const std::size_t batch = steps == 0 ? 0 : x_steps[0].rows();
  const std::size_t in = p.input_size;
  const std::size_t hid = p.hidden_size;
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidConfig("dropout rate must lie in [0,1)");
  }
  for (const Tensor& x : x_steps) {
    if (x.cols() != in || x.rows() != batch) {
      throw ShapeMismatch("lstm input step is not B x " + std::to_string(in));
    }
  }
  const bool use_dropout =
      (training && dropout_rate > 0.0) || fixed_masks != nullptr;

  LstmSequenceCache cache;
  cache.batch = batch;
  cache.steps.reserve(steps);
  cache.hidden.reserve(steps);

  Tensor h_prev{batch, hid};
  Tensor c_prev{batch, hid};
  const double keep_scale = 1.0 / (1.0 - dropout_rate);

  for (std::size_t t = 0; t < steps; ++t) {
    LstmStepCache sc;
    sc.concat = Tensor{batch, in + hid};

    Tensor mask;
    if (use_dropout) {
      if (fixed_masks != nullptr) {
        mask = (*fixed_masks)[t];
      } else {
        mask = Tensor{batch, in};
        for (double& v : mask.data) {
          v = rng->uniform01() < dropout_rate ? 0.0 : keep_scale;
        }
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = x_steps[t].row_ptr(b);
      double* row = sc.concat.row_ptr(b);
      if (use_dropout) {
        const double* m = mask.row_ptr(b);
        for (std::size_t k = 0; k < in; ++k) row[k] = x[k] * m[k];
      } else {
        for (std::size_t k = 0; k < in; ++k) row[k] = x[k];
      }
      const double* h = h_prev.row_ptr(b);
      for (std::size_t k = 0; k < hid; ++k) row[in + k] = h[k];
    }
    if (use_dropout) cache.dropout_masks.push_back(std::move(mask));

    sc.gate_input = Tensor{batch, hid};
    sc.gate_forget = Tensor{batch, hid};
    sc.gate_output = Tensor{batch, hid};
    sc.gate_cell = Tensor{batch, hid};
    detail::affine_rows(sc.concat, p.w_input, p.b_input, sc.gate_input);
    detail::affine_rows(sc.concat, p.w_forget, p.b_forget, sc.gate_forget);
    detail::affine_rows(sc.concat, p.w_output, p.b_output, sc.gate_output);
    detail::affine_rows(sc.concat, p.w_cell, p.b_cell, sc.gate_cell);
    for (double& v : sc.gate_input.data) v = sigmoid(v);
    for (double& v : sc.gate_forget.data) v = sigmoid(v);
    for (double& v : sc.gate_output.data) v = sigmoid(v);
    for (double& v : sc.gate_cell.data) v = std::tanh(v);

    sc.cell = Tensor{batch, hid};
    sc.cell_tanh = Tensor{batch, hid};
    Tensor h{batch, hid};
    for (std::size_t idx = 0; idx < batch * hid; ++idx) {
      const double c_new = sc.gate_forget.data[idx] * c_prev.data[idx] +
                           sc.gate_input.data[idx] * sc.gate_cell.data[idx];
      sc.cell.data[idx] = c_new;
      const double ct = std::tanh(c_new);
      sc.cell_tanh.data[idx] = ct;
      h.data[idx] = sc.gate_output.data[idx] * ct;
    }
    c_prev = sc.cell;
    h_prev = h;
    cache.hidden.push_back(std::move(h));
    cache.steps.push_back(std::move(sc));
  }
  return cache;
}

/// Backpropagation through time. dh_steps[t] is the loss gradient with
/// respect to the hidden state emitted at step t (may be all-zero for steps
/// that do not feed the loss directly). Accumulates parameter gradients and
/// returns the gradients with respect to the layer inputs, chained through
/// the recorded dropout masks.
inline std::vector<Tensor> lstm_backward_batch(const LstmLayerParams& p,
                                               const LstmSequenceCache& cache,
                                               const std::vector<Tensor>& dh_steps,
                                               LstmGrads& grads) {
  const std::size_t steps = cache.steps.size();
  if (dh_steps.size() != steps) {
    throw ShapeMismatch("dh step count != forward step count");
  }
  const std::size_t batch = cache.batch;
  const std::size_t in = p.input_size;
  const std::size_t hid = p.hidden_size;

  std::vector<Tensor> dx_steps(steps);
  Tensor dh_next{batch, hid};  // gradient flowing in from step t+1
  Tensor dc_next{batch, hid};
  const Tensor zero_state{batch, hid};

  Tensor da_input{batch, hid}, da_forget{batch, hid}, da_output{batch, hid},
      da_cell{batch, hid};
  for (std::size_t ti = steps; ti-- > 0;) {
    const LstmStepCache& sc = cache.steps[ti];
    const Tensor& c_prev_t = ti == 0 ? zero_state : cache.steps[ti - 1].cell;

    for (std::size_t idx = 0; idx < batch * hid; ++idx) {
      const double dh = dh_steps[ti].data[idx] + dh_next.data[idx];
      const double o = sc.gate_output.data[idx];
      const double ct = sc.cell_tanh.data[idx];
      const double dc = dc_next.data[idx] + dh * o * (1.0 - ct * ct);
      const double i_g = sc.gate_input.data[idx];
      const double f_g = sc.gate_forget.data[idx];
      const double g_g = sc.gate_cell.data[idx];

      da_output.data[idx] = dh * ct * o * (1.0 - o);
      da_input.data[idx] = dc * g_g * i_g * (1.0 - i_g);
      da_forget.data[idx] = dc * c_prev_t.data[idx] * f_g * (1.0 - f_g);
      da_cell.data[idx] = dc * i_g * (1.0 - g_g * g_g);
      dc_next.data[idx] = dc * f_g;
    }

    Tensor dconcat{batch, in + hid};
    detail::affine_backward(sc.concat, p.w_input, da_input, grads.w_input,
                            grads.b_input, &dconcat);
    detail::affine_backward(sc.concat, p.w_forget, da_forget, grads.w_forget,
                            grads.b_forget, &dconcat);
    detail::affine_backward(sc.concat, p.w_output, da_output, grads.w_output,
                            grads.b_output, &dconcat);
    detail::affine_backward(sc.concat, p.w_cell, da_cell, grads.w_cell,
                            grads.b_cell, &dconcat);

    Tensor dx{batch, in};
    const bool masked = !cache.dropout_masks.empty();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* dcat = dconcat.row_ptr(b);
      double* dxb = dx.row_ptr(b);
      if (masked) {
        const double* m = cache.dropout_masks[ti].row_ptr(b);
        for (std::size_t k = 0; k < in; ++k) dxb[k] = dcat[k] * m[k];
      } else {
        for (std::size_t k = 0; k < in; ++k) dxb[k] = dcat[k];
      }
      double* dhn = dh_next.row_ptr(b);
      for (std::size_t k = 0; k < hid; ++k) dhn[k] = dcat[in + k];
    }
    dx_steps[ti] = std::move(dx);
  }
  return dx_steps;
}

/// Single-sequence convenience wrapper: sequence is T x input_size, result is
/// the T x hidden_size per-step hidden states.
inline Tensor lstm_forward(const LstmLayerParams& p, const Tensor& sequence,
                           double dropout_rate, bool training, Rng& rng) {
  if (sequence.shape.size() != 2 || sequence.cols() != p.input_size) {
    throw ShapeMismatch("sequence width != lstm input size");
  }
  const std::size_t steps = sequence.rows();
  std::vector<Tensor> x_steps(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    x_steps[t] = Tensor{1, p.input_size};
    for (std::size_t k = 0; k < p.input_size; ++k) {
      x_steps[t].data[k] = sequence.at(t, k);
    }
  }
  const LstmSequenceCache cache =
      lstm_forward_batch(p, x_steps, dropout_rate, training, &rng);
  Tensor out{steps, p.hidden_size};
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < p.hidden_size; ++k) {
      out.at(t, k) = cache.hidden[t].data[k];
    }
  }
  return out;
}

}  // namespace nomen::nn
