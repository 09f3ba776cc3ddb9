#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nomen/csv.hpp"
#include "nomen/errors.hpp"
#include "nomen/metrics.hpp"
#include "nomen/mlp.hpp"
#include "nomen/prob.hpp"
#include "nomen/taxonomy.hpp"
#include "nomen/train.hpp"

namespace nomen {

inline constexpr std::size_t kLeafCount = 39;

/// The 39 leaf nationalities of the external name-classification service, in
/// the order probability columns appear in leaf-vector CSV files. The first
/// 31 carry crosswalk targets; the remaining 8 are representable but have no
/// origin mapping.
inline const std::array<std::string, kLeafCount>& leaf_nationalities() {
  static const std::array<std::string, kLeafCount> leaves = {
      "Celtic-English",
      "Muslim, Pakistanis, Bangladesh",
      "Muslim, Maghreb",
      "Muslim, Pakistanis, Pakistan",
      "Muslim, ArabianPeninsula",
      "European, SouthSlavs",
      "EastAsian, Chinese",
      "European, Baltics",
      "European, EastEuropean",
      "European, French",
      "European, German",
      "Hispanic, Portuguese",
      "Hispanic, Spanish",
      "SouthAsian",
      "European, Italian, Italy",
      "European, Italian, Romania",
      "EastAsian, Japan",
      "EastAsian, South Korea",
      "Muslim, Persian",
      "Nordic, Scandinavian, Denmark",
      "Nordic, Finland",
      "Nordic, Scandinavian, Sweden",
      "Nordic, Scandinavian, Norway",
      "European, Russian",
      "EastAsian, Indochina, Thailand",
      "EastAsian, Indochina, Vietnam",
      "EastAsian, Indochina, Cambodia",
      "EastAsian, Indochina, Myanmar",
      "EastAsian, Malay, Malaysia",
      "EastAsian, Malay, Indonesia",
      "Muslim, Turkic, Turkey",
      "Greek",
      "Jewish",
      "Hispanic, Philippines",
      "Muslim, Turkic, CentralAsian",
      "Muslim, Nubian",
      "African, SubSaharanAfrica",
      "African, EastAfrican",
      "African, WestAfrican",
  };
  return leaves;
}

inline int leaf_index_of(const std::string& name) {
  const auto& leaves = leaf_nationalities();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i] == name) return static_cast<int>(i);
  }
  return -1;
}

/// A name's 39 leaf-nationality probabilities plus an optional true origin
/// label (-1 when unlabeled).
struct LeafVector {
  std::string name;
  int label = -1;
  std::array<double, kLeafCount> p{};

  static LeafVector validated(std::string name, int label,
                              std::array<double, kLeafCount> p,
                              double tolerance = 1e-6) {
    double sum = 0.0;
    for (const double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("leaf probability outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw Error("leaf probabilities sum to " + std::to_string(sum));
    }
    return LeafVector{std::move(name), label, p};
  }
};

/// Leaf nationality -> origin class mapping; -1 marks unmapped leaves.
struct Crosswalk {
  std::array<int, kLeafCount> leaf_to_origin;

  Crosswalk() { leaf_to_origin.fill(-1); }

  bool is_mapped(std::size_t leaf) const { return leaf_to_origin[leaf] >= 0; }

  /// The manual crosswalk over the first 31 leaves.
  static Crosswalk defaults(const OriginTaxonomy& taxonomy) {
    static constexpr std::array<const char*, 31> targets = {
        "Anglo-Saxon",      // Celtic-English
        "Arabic",           // Muslim, Pakistanis, Bangladesh
        "Arabic",           // Muslim, Maghreb
        "Arabic",           // Muslim, Pakistanis, Pakistan
        "Arabic",           // Muslim, ArabianPeninsula
        "Balkans",          // European, SouthSlavs
        "Chinese",          // EastAsian, Chinese
        "East-Europe",      // European, Baltics
        "East-Europe",      // European, EastEuropean
        "French",           // European, French
        "German",           // European, German
        "Hispanic-Iberian", // Hispanic, Portuguese
        "Hispanic-Iberian", // Hispanic, Spanish
        "India",            // SouthAsian
        "Italian",          // European, Italian, Italy
        "Italian",          // European, Italian, Romania
        "Japanese",         // EastAsian, Japan
        "Korean",           // EastAsian, South Korea
        "Persian",          // Muslim, Persian
        "Scandinavian",     // Nordic, Scandinavian, Denmark
        "Scandinavian",     // Nordic, Finland
        "Scandinavian",     // Nordic, Scandinavian, Sweden
        "Scandinavian",     // Nordic, Scandinavian, Norway
        "Slavic-Russian",   // European, Russian
        "South-East Asia",  // EastAsian, Indochina, Thailand
        "South-East Asia",  // EastAsian, Indochina, Vietnam
        "South-East Asia",  // EastAsian, Indochina, Cambodia
        "South-East Asia",  // EastAsian, Indochina, Myanmar
        "South-East Asia",  // EastAsian, Malay, Malaysia
        "South-East Asia",  // EastAsian, Malay, Indonesia
        "Turkish",          // Muslim, Turkic, Turkey
    };
    Crosswalk cw;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const int origin = taxonomy.index_of(targets[i]);
      if (origin < 0) throw InvalidConfig("crosswalk target not in taxonomy");
      cw.leaf_to_origin[i] = origin;
    }
    return cw;
  }
};

/// Origin of the highest mapped leaf with positive mass; ties resolve to the
/// lowest leaf index.
inline int crosswalk_highest(const LeafVector& leaf, const Crosswalk& cw) {
  int best_leaf = -1;
  double best_p = 0.0;
  for (std::size_t i = 0; i < kLeafCount; ++i) {
    if (!cw.is_mapped(i)) continue;
    if (leaf.p[i] > best_p) {
      best_p = leaf.p[i];
      best_leaf = static_cast<int>(i);
    }
  }
  if (best_leaf < 0) {
    throw Unclassifiable("no probability mass on mapped leaves for \"" +
                         leaf.name + "\"");
  }
  return cw.leaf_to_origin[static_cast<std::size_t>(best_leaf)];
}

struct GroupedPrediction {
  int origin = -1;
  std::vector<double> grouped;  // renormalized per-origin mass
};

/// Sums leaf mass per origin, renormalizes over the mapped mass and returns
/// the argmax origin; ties resolve to the lowest class index.
inline GroupedPrediction crosswalk_grouped(const LeafVector& leaf,
                                           const Crosswalk& cw,
                                           std::size_t num_classes) {
  GroupedPrediction out;
  out.grouped.assign(num_classes, 0.0);
  double mapped_mass = 0.0;
  for (std::size_t i = 0; i < kLeafCount; ++i) {
    if (!cw.is_mapped(i)) continue;
    out.grouped[static_cast<std::size_t>(cw.leaf_to_origin[i])] += leaf.p[i];
    mapped_mass += leaf.p[i];
  }
  if (mapped_mass <= 0.0) {
    throw Unclassifiable("no probability mass on mapped leaves for \"" +
                         leaf.name + "\"");
  }
  for (double& v : out.grouped) v /= mapped_mass;
  out.origin = static_cast<int>(argmax_index(out.grouped));
  return out;
}

// ---------------------------------------------------------------------------
// Confidence metrics and the threshold grid
// ---------------------------------------------------------------------------

struct ConfidenceMetrics {
  double p_high = 0.0;   // highest class probability
  double delta = 0.0;    // gap to the runner-up
  double entropy = 0.0;  // Shannon entropy, natural log
};

inline ConfidenceMetrics confidence(std::span<const double> probs) {
  ConfidenceMetrics m;
  double best = 0.0;
  double second = 0.0;
  for (const double v : probs) {
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
    if (v > 0.0) m.entropy -= v * std::log(v);
  }
  m.p_high = best;
  m.delta = best - second;
  return m;
}

inline ConfidenceMetrics confidence(const ProbVector& probs) {
  return confidence(std::span<const double>(probs.p));
}

/// One cell of the threshold grid; unset fields impose no constraint.
struct ThresholdCombo {
  std::optional<double> min_p_high;
  std::optional<double> min_delta;
  std::optional<double> max_entropy;

  bool keeps(const ConfidenceMetrics& m) const {
    if (min_p_high && m.p_high < *min_p_high) return false;
    if (min_delta && m.delta < *min_delta) return false;
    if (max_entropy && m.entropy > *max_entropy) return false;
    return true;
  }
};

struct ThresholdSets {
  std::vector<std::optional<double>> p_high;
  std::vector<std::optional<double>> delta;
  std::vector<std::optional<double>> entropy;

  static ThresholdSets defaults() {
    ThresholdSets sets;
    sets.p_high = {std::nullopt, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70};
    sets.delta = {std::nullopt, 0.2, 0.3, 0.4, 0.5};
    sets.entropy = {1.75, 2.0, std::nullopt};
    return sets;
  }
};

/// Cartesian product of the three threshold sets in deterministic order:
/// p_high-major, then delta, then entropy.
inline std::vector<ThresholdCombo> threshold_grid(
    const ThresholdSets& sets = ThresholdSets::defaults()) {
  std::vector<ThresholdCombo> grid;
  grid.reserve(sets.p_high.size() * sets.delta.size() * sets.entropy.size());
  for (const auto& p : sets.p_high) {
    for (const auto& d : sets.delta) {
      for (const auto& e : sets.entropy) {
        grid.push_back(ThresholdCombo{p, d, e});
      }
    }
  }
  return grid;
}

/// Indices of the samples a combo retains (every non-empty constraint is
/// inclusive).
inline std::vector<std::size_t> apply_combo(
    std::span<const ConfidenceMetrics> metrics, const ThresholdCombo& combo) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (combo.keeps(metrics[i])) kept.push_back(i);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Grid scoring
// ---------------------------------------------------------------------------

/// Labeled, classified sample on which the grid is evaluated.
struct GridSample {
  int true_label = 0;
  int predicted = 0;
  ConfidenceMetrics conf;
};

struct ComboScore {
  // raw metrics
  double weighted_f1 = 0.0;
  double retained_fraction = 0.0;
  double share_variance = 0.0;       // variance of origin shares in the subset
  double smallest_two_share = 0.0;   // combined share of the two smallest classes
  // min-max standardized, oriented so that larger is better
  double f1_scaled = 0.0;
  double fraction_scaled = 0.0;
  double variance_scaled = 0.0;      // inverted: 1 at the lowest variance
  double smallest_two_scaled = 0.0;
  double weighted_score = 0.0;
  std::size_t subset_size = 0;
  bool empty = false;
};

struct ScoreWeights {
  double f1 = 0.5;
  double fraction = 0.25;
  double variance = 0.125;
  double smallest_two = 0.125;

  void validate() const {
    const double sum = f1 + fraction + variance + smallest_two;
    if (f1 < 0 || fraction < 0 || variance < 0 || smallest_two < 0 ||
        std::abs(sum - 1.0) > 1e-9) {
      throw InvalidWeights("weights must be nonnegative and sum to 1");
    }
  }
};

struct GridEvaluation {
  std::vector<ThresholdCombo> combos;
  std::vector<ComboScore> scores;
  std::vector<std::size_t> ranking;  // combo indices, best first
  std::size_t best_index = 0;
};

namespace detail {

inline void raw_metrics(const std::vector<GridSample>& samples,
                        const std::vector<std::size_t>& kept,
                        std::size_t baseline_size, std::size_t num_classes,
                        ComboScore& score) {
  score.subset_size = kept.size();
  score.retained_fraction =
      static_cast<double>(kept.size()) / static_cast<double>(baseline_size);
  if (kept.empty()) {
    score.empty = true;
    return;
  }
  std::vector<int> truth;
  std::vector<int> predicted;
  truth.reserve(kept.size());
  predicted.reserve(kept.size());
  for (const std::size_t i : kept) {
    truth.push_back(samples[i].true_label);
    predicted.push_back(samples[i].predicted);
  }
  const ClassMetrics m =
      scores(confusion_from_labels(truth, predicted, num_classes));
  score.weighted_f1 = m.weighted_f1;

  std::vector<double> shares(num_classes, 0.0);
  for (const int t : truth) {
    shares[static_cast<std::size_t>(t)] += 1.0 / static_cast<double>(kept.size());
  }
  const double mean = 1.0 / static_cast<double>(num_classes);
  double variance = 0.0;
  for (const double s : shares) variance += (s - mean) * (s - mean);
  score.share_variance = variance / static_cast<double>(num_classes);

  std::sort(shares.begin(), shares.end());
  score.smallest_two_share = shares[0] + (num_classes > 1 ? shares[1] : 0.0);
}

/// Min-max over the non-empty combos; a metric that is constant across the
/// grid standardizes to 0.5 everywhere.
struct MinMax {
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;

  void feed(double v) {
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double scale(double v) const {
    if (!any || hi == lo) return 0.5;
    return (v - lo) / (hi - lo);
  }
};

}  // namespace detail

inline double combo_weighted_score(const ComboScore& s, const ScoreWeights& w) {
  if (s.empty) return 0.0;
  return w.f1 * s.f1_scaled + w.fraction * s.fraction_scaled +
         w.variance * s.variance_scaled + w.smallest_two * s.smallest_two_scaled;
}

namespace detail {

inline std::vector<std::size_t> rank_by_score(
    const std::vector<ComboScore>& scores,
    const std::vector<double>& weighted) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (weighted[a] != weighted[b]) {
                       return weighted[a] > weighted[b];
                     }
                     // ties: higher retained fraction, then grid order
                     if (scores[a].retained_fraction !=
                         scores[b].retained_fraction) {
                       return scores[a].retained_fraction >
                              scores[b].retained_fraction;
                     }
                     return a < b;
                   });
  return order;
}

}  // namespace detail

/// Scores every combo of the grid on a labeled sample: weighted F1 of the
/// surviving subset, retained fraction against the baseline, variance of the
/// origin shares and the combined share of the two smallest classes, each
/// min-max standardized across the grid (empty subsets score 0 and stay out
/// of the min-max ranges) and combined with the given weights.
inline GridEvaluation evaluate_grid(
    const std::vector<GridSample>& samples, std::size_t baseline_size,
    std::size_t num_classes,
    const std::vector<ThresholdCombo>& combos,
    const ScoreWeights& weights = ScoreWeights{}) {
  weights.validate();
  if (baseline_size == 0) baseline_size = samples.size();

  GridEvaluation eval;
  eval.combos = combos;
  eval.scores.resize(combos.size());

  std::vector<ConfidenceMetrics> conf;
  conf.reserve(samples.size());
  for (const GridSample& s : samples) conf.push_back(s.conf);

  detail::MinMax f1_range, fraction_range, variance_range, smallest_range;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const std::vector<std::size_t> kept = apply_combo(conf, combos[i]);
    detail::raw_metrics(samples, kept, baseline_size, num_classes,
                        eval.scores[i]);
    if (!eval.scores[i].empty) {
      f1_range.feed(eval.scores[i].weighted_f1);
      fraction_range.feed(eval.scores[i].retained_fraction);
      variance_range.feed(eval.scores[i].share_variance);
      smallest_range.feed(eval.scores[i].smallest_two_share);
    }
  }
  std::vector<double> weighted(combos.size(), 0.0);
  for (std::size_t i = 0; i < combos.size(); ++i) {
    ComboScore& s = eval.scores[i];
    if (s.empty) continue;
    s.f1_scaled = f1_range.scale(s.weighted_f1);
    s.fraction_scaled = fraction_range.scale(s.retained_fraction);
    s.variance_scaled = 1.0 - variance_range.scale(s.share_variance);
    s.smallest_two_scaled = smallest_range.scale(s.smallest_two_share);
    s.weighted_score = combo_weighted_score(s, weights);
    weighted[i] = s.weighted_score;
  }
  eval.ranking = detail::rank_by_score(eval.scores, weighted);
  eval.best_index = eval.ranking.front();
  return eval;
}

/// Rank (1 = best) of a target combo under alternative weighting schemes;
/// each scheme re-weights the already-standardized metrics.
inline std::vector<std::size_t> robustness_ranks(
    const GridEvaluation& eval, std::span<const ScoreWeights> schemes,
    std::size_t target_combo) {
  std::vector<std::size_t> ranks;
  ranks.reserve(schemes.size());
  for (const ScoreWeights& weights : schemes) {
    weights.validate();
    std::vector<double> weighted(eval.scores.size(), 0.0);
    for (std::size_t i = 0; i < eval.scores.size(); ++i) {
      weighted[i] = combo_weighted_score(eval.scores[i], weights);
    }
    const std::vector<std::size_t> order =
        detail::rank_by_score(eval.scores, weighted);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (order[pos] == target_combo) {
        ranks.push_back(pos + 1);
        break;
      }
    }
  }
  return ranks;
}

/// The 26 alternative weighting schemes used for the robustness check: the 12
/// distinct permutations of (0.5, 0.25, 0.125, 0.125), the 12 of
/// (0.4, 0.3, 0.15, 0.15), the uniform scheme, and an F1-heavy
/// (0.7, 0.1, 0.1, 0.1).
inline std::vector<ScoreWeights> default_weight_schemes() {
  std::vector<ScoreWeights> schemes;
  const auto add_permutations = [&](std::array<double, 4> base) {
    std::sort(base.begin(), base.end());
    do {
      schemes.push_back(ScoreWeights{base[0], base[1], base[2], base[3]});
    } while (std::next_permutation(base.begin(), base.end()));
  };
  add_permutations({0.5, 0.25, 0.125, 0.125});
  add_permutations({0.4, 0.3, 0.15, 0.15});
  schemes.push_back(ScoreWeights{0.25, 0.25, 0.25, 0.25});
  schemes.push_back(ScoreWeights{0.7, 0.1, 0.1, 0.1});
  return schemes;
}

// ---------------------------------------------------------------------------
// Learned mapper
// ---------------------------------------------------------------------------

struct MapperConfig {
  std::vector<std::size_t> hidden_sizes = {64};
};

/// Trains the feed-forward mapper from leaf vectors to origin classes with
/// the shared training loop (same early-stopping contract as the name
/// classifier).
inline nn::MlpModel train_mapper(const std::vector<LeafVector>& train,
                                 const std::vector<LeafVector>& validation,
                                 const OriginTaxonomy& taxonomy,
                                 const MapperConfig& config,
                                 const TrainConfig& tc) {
  if (train.empty()) throw EmptyTrainingSet("no mapper training samples");
  nn::MlpConfig mlp_config;
  mlp_config.input_size = kLeafCount;
  mlp_config.hidden_sizes = config.hidden_sizes;
  mlp_config.num_classes = taxonomy.size();
  nn::MlpModel model = nn::MlpModel::build(mlp_config, tc.seed);

  const auto to_features = [](const std::vector<LeafVector>& rows) {
    std::vector<std::vector<double>> x;
    x.reserve(rows.size());
    for (const LeafVector& r : rows) {
      x.emplace_back(r.p.begin(), r.p.end());
    }
    return x;
  };
  const auto to_labels = [](const std::vector<LeafVector>& rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (const LeafVector& r : rows) y.push_back(r.label);
    return y;
  };
  fit(model, to_features(train), to_labels(train), to_features(validation),
      to_labels(validation), tc);
  return model;
}

// ---------------------------------------------------------------------------
// Leaf-vector CSV ingestion
// ---------------------------------------------------------------------------

/// Header: `name[,label],<39 leaf columns in leaf_nationalities() order>`.
/// Probabilities must satisfy the simplex constraint within 1e-6.
inline std::vector<LeafVector> load_leaf_csv(const std::string& path,
                                             const OriginTaxonomy& taxonomy) {
  const csv::Table table = csv::read_file(path);
  const auto& leaves = leaf_nationalities();
  if (table.header.empty() || table.header[0] != "name") {
    throw ParseError(1, "expected first column \"name\"");
  }
  const bool has_label = table.header.size() > 1 && table.header[1] == "label";
  const std::size_t first_leaf = has_label ? 2 : 1;
  if (table.header.size() != first_leaf + kLeafCount) {
    throw ParseError(1, "expected " + std::to_string(kLeafCount) +
                            " leaf-probability columns");
  }
  for (std::size_t i = 0; i < kLeafCount; ++i) {
    if (table.header[first_leaf + i] != leaves[i]) {
      throw ParseError(1, "leaf column " + std::to_string(i) +
                              " must be \"" + leaves[i] + "\"");
    }
  }
  if (table.rows.empty()) throw EmptyFile(path + " has no data rows");

  std::vector<LeafVector> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    if (row.size() != table.header.size()) {
      throw ParseError(line, "wrong field count");
    }
    int label = -1;
    if (has_label && !row[1].empty()) {
      label = taxonomy.index_of(row[1]);
      if (label < 0) {
        throw UnknownLabel("line " + std::to_string(line) +
                           ": unknown label \"" + row[1] + "\"");
      }
    }
    std::array<double, kLeafCount> p{};
    for (std::size_t i = 0; i < kLeafCount; ++i) {
      p[i] = csv::parse_double(row[first_leaf + i], line, "probability");
    }
    try {
      out.push_back(LeafVector::validated(row[0], label, p));
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  }
  return out;
}

}  // namespace nomen
