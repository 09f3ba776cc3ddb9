#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nomen/csv.hpp"
#include "nomen/errors.hpp"
#include "nomen/prob.hpp"

namespace nomen {

/// K x K counts; rows index the true class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(std::size_t classes = 0)
      : k(classes), counts(classes * classes, 0) {}

  std::int64_t& at(std::size_t truth, std::size_t predicted) {
    return counts[truth * k + predicted];
  }
  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * k + predicted];
  }

  std::int64_t total() const {
    std::int64_t n = 0;
    for (const std::int64_t c : counts) n += c;
    return n;
  }
};

inline ConfusionMatrix confusion_from_labels(std::span<const int> truth,
                                             std::span<const int> predicted,
                                             std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw LengthMismatch("label lists differ in length");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || static_cast<std::size_t>(t) >= num_classes || p < 0 ||
        static_cast<std::size_t>(p) >= num_classes) {
      throw LabelOutOfRange("label pair (" + std::to_string(t) + "," +
                            std::to_string(p) + ")");
    }
    ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return cm;
}

/// Tallies argmax predictions against true labels; argmax ties resolve to the
/// lowest class index.
inline ConfusionMatrix confusion(std::span<const int> truth,
                                 std::span<const ProbVector> predictions) {
  if (truth.size() != predictions.size()) {
    throw LengthMismatch("labels and predictions differ in length");
  }
  const std::size_t k = predictions.empty() ? 0 : predictions[0].size();
  std::vector<int> predicted;
  predicted.reserve(predictions.size());
  for (const ProbVector& p : predictions) {
    if (p.size() != k) throw LengthMismatch("ragged prediction vectors");
    predicted.push_back(static_cast<int>(p.argmax()));
  }
  return confusion_from_labels(truth, predicted, k);
}

struct ClassMetrics {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::int64_t> support;  // true-class counts
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::int64_t total = 0;
};

/// Precision, recall and F1 per class plus the support-weighted overall
/// scores. Undefined ratios (0/0) are scored as 0.
inline ClassMetrics scores(const ConfusionMatrix& cm) {
  if (cm.k == 0 || cm.total() == 0) {
    throw EmptyMatrix("confusion matrix holds no samples");
  }
  ClassMetrics m;
  m.precision.resize(cm.k);
  m.recall.resize(cm.k);
  m.f1.resize(cm.k);
  m.support.resize(cm.k);
  for (std::size_t c = 0; c < cm.k; ++c) {
    std::int64_t row_sum = 0;
    std::int64_t col_sum = 0;
    for (std::size_t j = 0; j < cm.k; ++j) {
      row_sum += cm.at(c, j);
      col_sum += cm.at(j, c);
    }
    const std::int64_t diag = cm.at(c, c);
    m.support[c] = row_sum;
    m.precision[c] =
        col_sum == 0 ? 0.0
                     : static_cast<double>(diag) / static_cast<double>(col_sum);
    m.recall[c] =
        row_sum == 0 ? 0.0
                     : static_cast<double>(diag) / static_cast<double>(row_sum);
    const double pr = m.precision[c] + m.recall[c];
    m.f1[c] = pr == 0.0 ? 0.0 : 2.0 * m.precision[c] * m.recall[c] / pr;
  }
  m.total = cm.total();
  for (std::size_t c = 0; c < cm.k; ++c) {
    const double w =
        static_cast<double>(m.support[c]) / static_cast<double>(m.total);
    m.weighted_precision += w * m.precision[c];
    m.weighted_recall += w * m.recall[c];
    m.weighted_f1 += w * m.f1[c];
  }
  return m;
}

/// Machine-readable report: one row per class plus a final `__overall__` row
/// with the frequency-weighted scores.
inline void write_metrics_csv(std::ostream& os, const ClassMetrics& metrics,
                              std::span<const std::string> class_names) {
  csv::write_row(os, std::vector<std::string>{"class", "precision", "recall",
                                              "f1", "support"});
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    csv::write_row(os, std::vector<std::string>{
                           class_names[c], csv::format_double(metrics.precision[c]),
                           csv::format_double(metrics.recall[c]),
                           csv::format_double(metrics.f1[c]),
                           std::to_string(metrics.support[c])});
  }
  csv::write_row(os, std::vector<std::string>{
                         "__overall__", csv::format_double(metrics.weighted_precision),
                         csv::format_double(metrics.weighted_recall),
                         csv::format_double(metrics.weighted_f1),
                         std::to_string(metrics.total)});
}

}  // namespace nomen
