#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nomen/csv.hpp"
#include "nomen/errors.hpp"
#include "nomen/name_codec.hpp"
#include "nomen/rng.hpp"
#include "nomen/taxonomy.hpp"

namespace nomen {

enum class NameSource { kAthletes, kPseudoLabeled, kSynthetic };

inline const char* name_source_label(NameSource s) {
  switch (s) {
    case NameSource::kAthletes: return "athletes";
    case NameSource::kPseudoLabeled: return "pseudo_labeled";
    case NameSource::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

struct LabeledName {
  std::string raw_name;
  int label = 0;
  NameSource source = NameSource::kSynthetic;
};

/// Reads a labeled-names CSV (header `name,label[,source]`). Duplicate rows
/// are kept; every name must survive normalization.
inline std::vector<LabeledName> load_labeled_csv(const std::string& path,
                                                 const OriginTaxonomy& taxonomy) {
  const csv::Table table = csv::read_file(path);
  if (table.header.size() < 2 || table.header[0] != "name" ||
      table.header[1] != "label" ||
      (table.header.size() == 3 && table.header[2] != "source") ||
      table.header.size() > 3) {
    throw ParseError(1, "expected header name,label[,source]");
  }
  if (table.rows.empty()) throw EmptyFile(path + " has no data rows");

  std::vector<LabeledName> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    if (row.size() != table.header.size()) {
      throw ParseError(line, "expected " + std::to_string(table.header.size()) +
                                 " fields, got " + std::to_string(row.size()));
    }
    LabeledName rec;
    rec.raw_name = row[0];
    try {
      normalize(rec.raw_name);
    } catch (const EmptyAfterNormalization&) {
      throw ParseError(line, "name does not survive normalization: \"" +
                                 rec.raw_name + "\"");
    }
    rec.label = taxonomy.index_of(row[1]);
    if (rec.label < 0) {
      throw UnknownLabel("line " + std::to_string(line) + ": unknown label \"" +
                         row[1] + "\"");
    }
    if (row.size() == 3 && !row[2].empty()) {
      if (row[2] == "athletes") {
        rec.source = NameSource::kAthletes;
      } else if (row[2] == "pseudo_labeled") {
        rec.source = NameSource::kPseudoLabeled;
      } else if (row[2] == "synthetic") {
        rec.source = NameSource::kSynthetic;
      } else {
        throw ParseError(line, "unknown source tag \"" + row[2] + "\"");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct SplitSpec {
  double test_fraction = 0.10;
  double validation_fraction = 0.15;  // of the remainder after the test cut
  std::uint64_t seed = 42;
};

namespace detail {

/// ceil(fraction * n), evaluated exactly in integer arithmetic at 1e-6
/// fraction resolution so the cut sizes cannot drift with floating-point
/// rounding.
inline std::size_t ceil_fraction(double fraction, std::size_t n) {
  const auto numerator =
      static_cast<std::uint64_t>(std::llround(fraction * 1e6));
  const std::uint64_t product = static_cast<std::uint64_t>(n) * numerator;
  return static_cast<std::size_t>((product + 999999) / 1000000);
}

}  // namespace detail

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

/// Seeded shuffle, then two ceiling cuts: test = ceil(tf*N) samples, then
/// validation = ceil(vf * remainder); the rest is training data.
template <typename T>
Split<T> split(const std::vector<T>& data, const SplitSpec& spec) {
  if (data.size() < 3) throw TooFewSamples("need at least 3 samples to split");
  if (spec.test_fraction < 0.0 || spec.test_fraction >= 1.0 ||
      spec.validation_fraction < 0.0 || spec.validation_fraction >= 1.0) {
    throw InvalidConfig("split fractions must lie in [0,1)");
  }
  const std::size_t n = data.size();
  const std::size_t n_test = detail::ceil_fraction(spec.test_fraction, n);
  const std::size_t n_validation =
      detail::ceil_fraction(spec.validation_fraction, n - n_test);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Rng rng(spec.seed);
  rng.shuffle(order);

  Split<T> out;
  out.test.reserve(n_test);
  out.validation.reserve(n_validation);
  out.train.reserve(n - n_test - n_validation);
  for (std::size_t i = 0; i < n; ++i) {
    const T& item = data[order[i]];
    if (i < n_test) {
      out.test.push_back(item);
    } else if (i < n_test + n_validation) {
      out.validation.push_back(item);
    } else {
      out.train.push_back(item);
    }
  }
  return out;
}

/// Per class, draws min(target, class size) samples uniformly without
/// replacement; classes are visited in taxonomy order and picks keep their
/// original dataset order.
inline std::vector<LabeledName> stratified_sample(
    const std::vector<LabeledName>& data, std::size_t per_class_target,
    std::size_t num_classes, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto label = static_cast<std::size_t>(data[i].label);
    if (label < num_classes) by_class[label].push_back(i);
  }
  nn::Rng rng(seed);
  std::vector<LabeledName> out;
  for (std::vector<std::size_t>& indices : by_class) {
    if (indices.size() > per_class_target) {
      rng.shuffle(indices);
      indices.resize(per_class_target);
      std::sort(indices.begin(), indices.end());
    }
    for (std::size_t idx : indices) out.push_back(data[idx]);
  }
  return out;
}

struct ClassDistribution {
  std::vector<std::size_t> counts;
  std::vector<double> fractions;
  std::size_t total = 0;
};

inline ClassDistribution class_distribution(std::span<const LabeledName> data,
                                            std::size_t num_classes) {
  ClassDistribution dist;
  dist.counts.assign(num_classes, 0);
  dist.fractions.assign(num_classes, 0.0);
  for (const LabeledName& rec : data) {
    const auto label = static_cast<std::size_t>(rec.label);
    if (label >= num_classes) {
      throw LabelOutOfRange("label " + std::to_string(rec.label));
    }
    ++dist.counts[label];
  }
  dist.total = data.size();
  if (dist.total > 0) {
    for (std::size_t k = 0; k < num_classes; ++k) {
      dist.fractions[k] =
          static_cast<double>(dist.counts[k]) / static_cast<double>(dist.total);
    }
  }
  return dist;
}

}  // namespace nomen
