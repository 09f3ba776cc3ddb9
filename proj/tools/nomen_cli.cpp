// nomen: character-level name-origin classification toolkit.
//
// Subcommands cover the full batch workflow: train an LSTM classifier on a
// labeled-names CSV, evaluate it, classify new names, build pseudo-labeled
// training data from leaf-nationality probability vectors, aggregate
// classified inventor corpora into prevalence series, and run the
// finite-difference gradient suite. Every artifact-producing run writes a
// run.meta.json sidecar with the resolved configuration, the seed and input
// checksums, so any artifact can be reproduced byte for byte.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nomen/nomen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInputError = 3;
constexpr int kExitNumericalFailure = 4;

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nomen::IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string fnv_hex(const std::string& path) {
  const std::uint64_t hash = nomen::fnv1a64(read_file_bytes(path));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

json load_json_file(const std::string& path) {
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw nomen::ParseError(1, std::string("bad JSON in ") + path + ": " +
                                   e.what());
  }
}

/// Declarative run configuration: `model` and `train` sections, optional
/// taxonomy/threshold/weight-scheme overrides. Flags take precedence over
/// file values, file values over defaults.
struct RunConfig {
  nomen::ModelConfig model;
  nomen::TrainConfig train;
  std::string taxonomy_file;
  std::string weights_file;
  nomen::ThresholdSets thresholds = nomen::ThresholdSets::defaults();
  json raw = json::object();

  static RunConfig from_file(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    const json j = load_json_file(path);
    rc.raw = j;
    try {
      if (j.contains("model")) {
        const json& m = j.at("model");
        if (m.contains("lstm_sizes")) {
          rc.model.lstm_sizes = m.at("lstm_sizes").get<std::vector<std::size_t>>();
        }
        if (m.contains("dropout_rate")) {
          rc.model.dropout_rate = m.at("dropout_rate").get<double>();
        }
        if (m.contains("num_classes")) {
          rc.model.num_classes = m.at("num_classes").get<std::size_t>();
        }
      }
      if (j.contains("train")) {
        const json& t = j.at("train");
        if (t.contains("batch_size")) {
          rc.train.batch_size = t.at("batch_size").get<std::size_t>();
        }
        if (t.contains("max_epochs")) {
          rc.train.max_epochs = t.at("max_epochs").get<std::size_t>();
        }
        if (t.contains("early_stopping_patience")) {
          rc.train.early_stopping_patience =
              t.at("early_stopping_patience").get<std::size_t>();
        }
        if (t.contains("learning_rate")) {
          rc.train.learning_rate = t.at("learning_rate").get<double>();
        }
        if (t.contains("fixed_epochs")) {
          rc.train.fixed_epochs = t.at("fixed_epochs").get<std::size_t>();
        }
        if (t.contains("seed")) {
          rc.train.seed = t.at("seed").get<std::uint64_t>();
        }
      }
      if (j.contains("taxonomy_file")) {
        rc.taxonomy_file = j.at("taxonomy_file").get<std::string>();
      }
      if (j.contains("weights_file")) {
        rc.weights_file = j.at("weights_file").get<std::string>();
      }
      if (j.contains("thresholds")) {
        const json& t = j.at("thresholds");
        const auto parse_set = [&](const char* key,
                                   std::vector<std::optional<double>>& out) {
          if (!t.contains(key)) return;
          out.clear();
          for (const json& v : t.at(key)) {
            if (v.is_null()) {
              out.push_back(std::nullopt);
            } else {
              out.push_back(v.get<double>());
            }
          }
          if (out.empty()) {
            throw nomen::InvalidConfig(std::string("empty threshold set ") +
                                       key);
          }
        };
        parse_set("p_high", rc.thresholds.p_high);
        parse_set("delta", rc.thresholds.delta);
        parse_set("entropy", rc.thresholds.entropy);
      }
    } catch (const json::exception& e) {
      throw nomen::ParseError(1, std::string("bad config: ") + e.what());
    }
    return rc;
  }
};

nomen::OriginTaxonomy load_taxonomy(const std::string& path) {
  if (path.empty()) return nomen::OriginTaxonomy::defaults();
  const json j = load_json_file(path);
  try {
    std::vector<std::string> classes =
        j.at("classes").get<std::vector<std::string>>();
    std::vector<std::string> non_western;
    if (j.contains("non_western")) {
      non_western = j.at("non_western").get<std::vector<std::string>>();
    }
    std::map<std::string, std::vector<std::string>> countries;
    if (j.contains("countries")) {
      countries = j.at("countries")
                      .get<std::map<std::string, std::vector<std::string>>>();
    }
    return nomen::OriginTaxonomy(std::move(classes), std::move(non_western),
                                 std::move(countries));
  } catch (const json::exception& e) {
    throw nomen::ParseError(1, std::string("bad taxonomy file: ") + e.what());
  }
}

json threshold_sets_json(const nomen::ThresholdSets& sets) {
  const auto dump = [](const std::vector<std::optional<double>>& values) {
    json out = json::array();
    for (const auto& v : values) {
      if (v) {
        out.push_back(*v);
      } else {
        out.push_back(nullptr);
      }
    }
    return out;
  };
  return json{{"p_high", dump(sets.p_high)},
              {"delta", dump(sets.delta)},
              {"entropy", dump(sets.entropy)}};
}

json model_config_json(const nomen::ModelConfig& c) {
  return json{{"lstm_sizes", c.lstm_sizes},
              {"dropout_rate", c.dropout_rate},
              {"num_classes", c.num_classes},
              {"input_channels", c.input_channels},
              {"max_seq_len", c.max_seq_len}};
}

json train_config_json(const nomen::TrainConfig& c) {
  json j{{"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"early_stopping_patience", c.early_stopping_patience},
         {"learning_rate", c.learning_rate},
         {"seed", c.seed}};
  if (c.fixed_epochs) j["fixed_epochs"] = *c.fixed_epochs;
  return j;
}

/// Sidecar written into every output directory.
struct Sidecar {
  std::string subcommand;
  std::uint64_t seed = 0;
  json resolved_config = json::object();
  std::map<std::string, std::string> inputs;  // path -> fnv1a64 hex
  std::vector<std::string> outputs;
  json extra = json::object();

  void add_input(const std::string& path) { inputs[path] = fnv_hex(path); }

  void write(const fs::path& out_dir) const {
    json j{{"version", kVersion},
           {"subcommand", subcommand},
           {"seed", seed},
           {"resolved_config", resolved_config},
           {"inputs", inputs},
           {"outputs", outputs}};
    if (!extra.empty()) j["details"] = extra;
    std::ofstream out(out_dir / "run.meta.json", std::ios::trunc);
    if (!out) throw nomen::IoError("cannot write run.meta.json");
    out << j.dump(2) << "\n";
  }
};

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw nomen::InvalidConfig("--out is required");
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw nomen::IoError("cannot create " + out + ": " + ec.message());
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw nomen::IoError("cannot write " + path.string());
  return out;
}

void encode_labeled(const std::vector<nomen::LabeledName>& rows,
                    std::vector<nomen::EncodedName>& x, std::vector<int>& y) {
  x.clear();
  y.clear();
  x.reserve(rows.size());
  y.reserve(rows.size());
  for (const nomen::LabeledName& rec : rows) {
    x.push_back(nomen::encode(nomen::normalize(rec.raw_name)));
    y.push_back(rec.label);
  }
}

void write_history_csv(const fs::path& path,
                       const nomen::TrainHistory& history) {
  std::ofstream out = open_output(path);
  nomen::csv::write_row(out, std::vector<std::string>{
                                 "epoch", "train_loss", "validation_accuracy"});
  for (const nomen::EpochStats& e : history.epochs) {
    nomen::csv::write_row(
        out, std::vector<std::string>{std::to_string(e.epoch),
                                      nomen::csv::format_double(e.train_loss),
                                      nomen::csv::format_double(
                                          e.validation_accuracy)});
  }
}

void write_predictions_csv(const fs::path& path,
                           const std::vector<std::string>& names,
                           const std::vector<nomen::ProbVector>& probs,
                           const std::vector<std::string>& class_names) {
  std::ofstream out = open_output(path);
  std::vector<std::string> header = {"name", "predicted"};
  header.insert(header.end(), class_names.begin(), class_names.end());
  nomen::csv::write_row(out, header);
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::string> row = {names[i], class_names[probs[i].argmax()]};
    for (const double v : probs[i].p) {
      row.push_back(nomen::csv::format_double(v));
    }
    nomen::csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  double val_fraction = 0.15;
  double test_fraction = 0.10;
  std::uint64_t seed = 42;
  bool seed_given = false;
};

int run_train(const TrainArgs& args) {
  RunConfig rc = RunConfig::from_file(args.config);
  if (args.seed_given) rc.train.seed = args.seed;
  const nomen::OriginTaxonomy taxonomy = load_taxonomy(rc.taxonomy_file);
  rc.model.num_classes = taxonomy.size();

  const auto rows = nomen::load_labeled_csv(args.data, taxonomy);
  nomen::SplitSpec split_spec;
  split_spec.test_fraction = args.test_fraction;
  split_spec.validation_fraction = args.val_fraction;
  split_spec.seed = rc.train.seed;
  const auto parts = nomen::split(rows, split_spec);

  std::vector<nomen::EncodedName> train_x, val_x, test_x;
  std::vector<int> train_y, val_y, test_y;
  encode_labeled(parts.train, train_x, train_y);
  encode_labeled(parts.validation, val_x, val_y);
  encode_labeled(parts.test, test_x, test_y);

  nomen::LstmModel model =
      nomen::LstmModel::build(rc.model, taxonomy, rc.train.seed);
  const nomen::TrainHistory history =
      nomen::train_model(model, train_x, train_y, val_x, val_y, rc.train);

  const fs::path out_dir = ensure_out_dir(args.out);
  nomen::save_model(model, (out_dir / "model.nom").string());
  write_history_csv(out_dir / "history.csv", history);

  Sidecar sidecar;
  sidecar.subcommand = "train";
  sidecar.seed = rc.train.seed;
  sidecar.resolved_config = {
      {"model", model_config_json(rc.model)},
      {"train", train_config_json(rc.train)},
      {"split",
       {{"test_fraction", split_spec.test_fraction},
        {"validation_fraction", split_spec.validation_fraction},
        {"sizes",
         {{"train", parts.train.size()},
          {"validation", parts.validation.size()},
          {"test", parts.test.size()}}}}},
      {"taxonomy", taxonomy.classes()}};
  sidecar.add_input(args.data);
  if (!args.config.empty()) sidecar.add_input(args.config);
  sidecar.outputs = {"model.nom", "history.csv"};
  sidecar.extra = {
      {"epochs_run", history.epochs.size()},
      {"best_epoch", history.best_epoch},
      {"best_validation_accuracy", history.best_validation_accuracy}};

  if (!test_x.empty()) {
    const auto probs = model.predict(test_x);
    const auto metrics = nomen::scores(nomen::confusion(test_y, probs));
    std::ofstream out = open_output(out_dir / "test_metrics.csv");
    nomen::write_metrics_csv(out, metrics, taxonomy.classes());
    sidecar.outputs.push_back("test_metrics.csv");
    sidecar.extra["test_weighted_f1"] = metrics.weighted_f1;
  }
  sidecar.write(out_dir);
  std::cout << "trained " << model.parameter_count() << " parameters over "
            << history.epochs.size() << " epochs; best validation accuracy "
            << history.best_validation_accuracy << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string out;
};

int run_evaluate(const EvaluateArgs& args) {
  const nomen::LstmModel model = nomen::load_model(args.model);
  const nomen::OriginTaxonomy taxonomy(model.class_names);
  const auto rows = nomen::load_labeled_csv(args.data, taxonomy);
  std::vector<nomen::EncodedName> x;
  std::vector<int> y;
  encode_labeled(rows, x, y);
  const auto probs = model.predict(x);
  const auto metrics = nomen::scores(nomen::confusion(y, probs));

  const fs::path out_dir = ensure_out_dir(args.out);
  {
    std::ofstream out = open_output(out_dir / "metrics.csv");
    nomen::write_metrics_csv(out, metrics, taxonomy.classes());
  }
  Sidecar sidecar;
  sidecar.subcommand = "evaluate";
  sidecar.seed = model.provenance.seed;
  sidecar.resolved_config = {{"model_file", args.model},
                             {"taxonomy", taxonomy.classes()}};
  sidecar.add_input(args.model);
  sidecar.add_input(args.data);
  sidecar.outputs = {"metrics.csv"};
  sidecar.extra = {{"samples", rows.size()},
                   {"weighted_f1", metrics.weighted_f1},
                   {"weighted_precision", metrics.weighted_precision},
                   {"weighted_recall", metrics.weighted_recall}};
  sidecar.write(out_dir);
  std::cout << "weighted F1 " << metrics.weighted_f1 << " over " << rows.size()
            << " names\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string model;
  std::string names;
  std::string out;
};

int run_classify(const ClassifyArgs& args) {
  const nomen::LstmModel model = nomen::load_model(args.model);
  const nomen::csv::Table table = nomen::csv::read_file(args.names);
  if (table.header.empty() || table.header[0] != "name") {
    throw nomen::ParseError(1, "expected first column \"name\"");
  }
  if (table.rows.empty()) throw nomen::EmptyFile(args.names);
  std::vector<std::string> names;
  std::vector<nomen::EncodedName> x;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& raw = table.rows[r][0];
    try {
      x.push_back(nomen::encode(nomen::normalize(raw)));
    } catch (const nomen::EmptyAfterNormalization&) {
      throw nomen::ParseError(table.row_lines[r],
                              "name does not survive normalization: \"" + raw +
                                  "\"");
    }
    names.push_back(raw);
  }
  const auto probs = model.predict(x);

  const fs::path out_dir = ensure_out_dir(args.out);
  write_predictions_csv(out_dir / "predictions.csv", names, probs,
                        model.class_names);
  Sidecar sidecar;
  sidecar.subcommand = "classify";
  sidecar.seed = model.provenance.seed;
  sidecar.resolved_config = {{"model_file", args.model},
                             {"taxonomy", model.class_names}};
  sidecar.add_input(args.model);
  sidecar.add_input(args.names);
  sidecar.outputs = {"predictions.csv"};
  sidecar.extra = {{"names", names.size()}};
  sidecar.write(out_dir);
  std::cout << "classified " << names.size() << " names\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

struct FilterArgs {
  std::string leaf_data;
  std::string weights;
  std::string config;
  std::string out;
  std::size_t baseline_size = 0;
  std::uint64_t seed = 42;
  bool seed_given = false;
};

std::string combo_field(const std::optional<double>& v) {
  return v ? nomen::csv::format_double(*v) : "none";
}

int run_filter(const FilterArgs& args) {
  RunConfig rc = RunConfig::from_file(args.config);
  if (args.seed_given) rc.train.seed = args.seed;
  const nomen::OriginTaxonomy taxonomy = load_taxonomy(rc.taxonomy_file);

  nomen::ScoreWeights weights;
  std::vector<nomen::ScoreWeights> schemes = nomen::default_weight_schemes();
  const std::string weights_path =
      args.weights.empty() ? rc.weights_file : args.weights;
  if (!weights_path.empty()) {
    const json j = load_json_file(weights_path);
    try {
      if (j.contains("score_weights")) {
        const auto w = j.at("score_weights").get<std::vector<double>>();
        if (w.size() != 4) {
          throw nomen::InvalidWeights("score_weights needs 4 entries");
        }
        weights = nomen::ScoreWeights{w[0], w[1], w[2], w[3]};
      }
      if (j.contains("robustness_schemes")) {
        schemes.clear();
        for (const auto& s :
             j.at("robustness_schemes").get<std::vector<std::vector<double>>>()) {
          if (s.size() != 4) {
            throw nomen::InvalidWeights("each scheme needs 4 entries");
          }
          schemes.push_back(nomen::ScoreWeights{s[0], s[1], s[2], s[3]});
        }
      }
    } catch (const json::exception& e) {
      throw nomen::ParseError(1, std::string("bad weights file: ") + e.what());
    }
  }
  weights.validate();
  for (const nomen::ScoreWeights& s : schemes) s.validate();

  const auto all_rows = nomen::load_leaf_csv(args.leaf_data, taxonomy);
  std::vector<nomen::LeafVector> labeled;
  for (const nomen::LeafVector& row : all_rows) {
    if (row.label >= 0) labeled.push_back(row);
  }
  if (labeled.size() < 10) {
    throw nomen::EmptyTrainingSet(
        "filter needs at least 10 labeled leaf vectors; got " +
        std::to_string(labeled.size()));
  }

  // 20% held out for grid scoring; a validation slice of the remainder
  // drives the mapper's early stopping
  nomen::SplitSpec split_spec;
  split_spec.test_fraction = 0.20;
  split_spec.validation_fraction = 0.15;
  split_spec.seed = rc.train.seed;
  const auto parts = nomen::split(labeled, split_spec);

  const nomen::nn::MlpModel mapper = nomen::train_mapper(
      parts.train, parts.validation, taxonomy, nomen::MapperConfig{}, rc.train);

  const auto features_of = [](const std::vector<nomen::LeafVector>& rows) {
    std::vector<std::vector<double>> f;
    f.reserve(rows.size());
    for (const nomen::LeafVector& r : rows) {
      f.emplace_back(r.p.begin(), r.p.end());
    }
    return f;
  };

  // score the grid on the held-out 20%
  std::vector<nomen::GridSample> samples;
  {
    const nomen::nn::Tensor probs =
        mapper.predict_probs(features_of(parts.test));
    for (std::size_t i = 0; i < parts.test.size(); ++i) {
      nomen::GridSample s;
      s.true_label = parts.test[i].label;
      const std::span<const double> row(probs.row_ptr(i), probs.cols());
      s.predicted = static_cast<int>(nomen::argmax_index(row));
      s.conf = nomen::confidence(row);
      samples.push_back(s);
    }
  }
  const std::size_t baseline =
      args.baseline_size > 0 ? args.baseline_size : samples.size();
  const auto combos = nomen::threshold_grid(rc.thresholds);
  const nomen::GridEvaluation eval =
      nomen::evaluate_grid(samples, baseline, taxonomy.size(), combos, weights);
  const nomen::ThresholdCombo& best = eval.combos[eval.best_index];
  const auto ranks = nomen::robustness_ranks(eval, schemes, eval.best_index);

  const fs::path out_dir = ensure_out_dir(args.out);
  {
    std::ofstream out = open_output(out_dir / "grid_report.csv");
    nomen::csv::write_row(
        out, std::vector<std::string>{
                 "min_p_high", "min_delta", "max_entropy", "subset_size",
                 "weighted_f1", "retained_fraction", "share_variance",
                 "smallest_two_share", "f1_scaled", "fraction_scaled",
                 "variance_scaled", "smallest_two_scaled", "weighted_score",
                 "rank", "selected"});
    std::vector<std::size_t> rank_of(eval.scores.size(), 0);
    for (std::size_t pos = 0; pos < eval.ranking.size(); ++pos) {
      rank_of[eval.ranking[pos]] = pos + 1;
    }
    for (std::size_t i = 0; i < eval.combos.size(); ++i) {
      const nomen::ComboScore& s = eval.scores[i];
      nomen::csv::write_row(
          out,
          std::vector<std::string>{
              combo_field(eval.combos[i].min_p_high),
              combo_field(eval.combos[i].min_delta),
              combo_field(eval.combos[i].max_entropy),
              std::to_string(s.subset_size),
              nomen::csv::format_double(s.weighted_f1),
              nomen::csv::format_double(s.retained_fraction),
              nomen::csv::format_double(s.share_variance),
              nomen::csv::format_double(s.smallest_two_share),
              nomen::csv::format_double(s.f1_scaled),
              nomen::csv::format_double(s.fraction_scaled),
              nomen::csv::format_double(s.variance_scaled),
              nomen::csv::format_double(s.smallest_two_scaled),
              nomen::csv::format_double(s.weighted_score),
              std::to_string(rank_of[i]),
              i == eval.best_index ? "1" : "0"});
    }
  }
  {
    std::ofstream out = open_output(out_dir / "robustness.csv");
    nomen::csv::write_row(out, std::vector<std::string>{
                                   "scheme", "w_f1", "w_fraction", "w_variance",
                                   "w_smallest_two", "selected_combo_rank"});
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      nomen::csv::write_row(
          out, std::vector<std::string>{
                   std::to_string(i + 1),
                   nomen::csv::format_double(schemes[i].f1),
                   nomen::csv::format_double(schemes[i].fraction),
                   nomen::csv::format_double(schemes[i].variance),
                   nomen::csv::format_double(schemes[i].smallest_two),
                   std::to_string(ranks[i])});
    }
  }

  // pseudo-label every input row with the mapper and keep the survivors
  std::size_t survivors = 0;
  {
    const nomen::nn::Tensor probs =
        mapper.predict_probs(features_of(all_rows));
    std::ofstream out = open_output(out_dir / "pseudo_labeled.csv");
    nomen::csv::write_row(out,
                          std::vector<std::string>{"name", "label", "source"});
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
      const std::span<const double> row(probs.row_ptr(i), probs.cols());
      const nomen::ConfidenceMetrics conf = nomen::confidence(row);
      if (!best.keeps(conf)) continue;
      nomen::csv::write_row(
          out, std::vector<std::string>{
                   all_rows[i].name,
                   taxonomy.name(nomen::argmax_index(row)), "pseudo_labeled"});
      ++survivors;
    }
  }

  Sidecar sidecar;
  sidecar.subcommand = "filter";
  sidecar.seed = rc.train.seed;
  sidecar.resolved_config = {
      {"train", train_config_json(rc.train)},
      {"thresholds", threshold_sets_json(rc.thresholds)},
      {"score_weights",
       {weights.f1, weights.fraction, weights.variance, weights.smallest_two}},
      {"baseline_size", baseline},
      {"taxonomy", taxonomy.classes()}};
  sidecar.add_input(args.leaf_data);
  if (!args.config.empty()) sidecar.add_input(args.config);
  if (!weights_path.empty()) sidecar.add_input(weights_path);
  sidecar.outputs = {"grid_report.csv", "robustness.csv", "pseudo_labeled.csv"};
  sidecar.extra = {
      {"selected_combo",
       {{"min_p_high", best.min_p_high ? json(*best.min_p_high) : json()},
        {"min_delta", best.min_delta ? json(*best.min_delta) : json()},
        {"max_entropy", best.max_entropy ? json(*best.max_entropy) : json()}}},
      {"selected_score", eval.scores[eval.best_index].weighted_score},
      {"grid_size", eval.combos.size()},
      {"scored_samples", samples.size()},
      {"survivors", survivors},
      {"input_rows", all_rows.size()}};
  sidecar.write(out_dir);
  std::cout << "selected combo (p_high>=" << combo_field(best.min_p_high)
            << ", delta>=" << combo_field(best.min_delta)
            << ", entropy<=" << combo_field(best.max_entropy) << "); kept "
            << survivors << " of " << all_rows.size() << " rows\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string inventors;
  std::string group_by = "country";
  std::string model;
  std::string out;
  std::string config;
  std::string region_map;
  std::string dominant_map;
  std::string home_map;
};

int run_aggregate(const AggregateArgs& args) {
  RunConfig rc = RunConfig::from_file(args.config);
  std::optional<nomen::LstmModel> model;
  if (!args.model.empty()) model = nomen::load_model(args.model);
  // an explicitly configured taxonomy wins; otherwise the model's own, which
  // picks up the default non-western subset when it matches the default
  // class list
  const nomen::OriginTaxonomy taxonomy =
      !rc.taxonomy_file.empty() ? load_taxonomy(rc.taxonomy_file)
      : model && model->class_names != nomen::OriginTaxonomy::defaults().classes()
          ? nomen::OriginTaxonomy(model->class_names)
          : nomen::OriginTaxonomy::defaults();

  nomen::GroupBy group_by;
  if (args.group_by == "country") {
    group_by = nomen::GroupBy::kCountry;
  } else if (args.group_by == "tech_field") {
    group_by = nomen::GroupBy::kTechField;
  } else if (args.group_by == "region") {
    group_by = nomen::GroupBy::kRegion;
  } else if (args.group_by == "global") {
    group_by = nomen::GroupBy::kGlobal;
  } else {
    throw nomen::InvalidConfig(
        "--group-by must be country|tech_field|region|global");
  }

  nomen::InventorCsv data = nomen::load_inventor_csv(args.inventors, taxonomy);
  std::uint64_t seed = 42;
  if (!data.has_predictions) {
    if (!model) {
      throw nomen::InvalidConfig(
          "input has no probability columns; --model is required");
    }
    if (model->class_names != taxonomy.classes()) {
      throw nomen::InvalidConfig(
          "model taxonomy differs from the configured taxonomy");
    }
    seed = model->provenance.seed;
    std::vector<nomen::EncodedName> x;
    x.reserve(data.records.size());
    for (const nomen::InventorRecord& rec : data.records) {
      x.push_back(nomen::encode(nomen::normalize(rec.raw_name)));
    }
    const auto probs = model->predict(x);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      data.records[i].prediction = probs[i];
    }
  }

  std::map<std::string, std::string> region_map;
  if (group_by == nomen::GroupBy::kRegion) {
    if (args.region_map.empty()) {
      throw nomen::InvalidConfig("--group-by region needs --region-map");
    }
    const json j = load_json_file(args.region_map);
    try {
      region_map = j.get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
      throw nomen::ParseError(1, std::string("bad region map: ") + e.what());
    }
  }

  const nomen::PrevalenceSeries series =
      prevalence(data.records, group_by, taxonomy,
                 group_by == nomen::GroupBy::kRegion ? &region_map : nullptr);

  const fs::path out_dir = ensure_out_dir(args.out);
  {
    std::ofstream out = open_output(out_dir / "prevalence.csv");
    nomen::write_series_csv(out, series, taxonomy);
  }
  Sidecar sidecar;
  sidecar.subcommand = "aggregate";
  sidecar.seed = seed;
  sidecar.resolved_config = {{"group_by", args.group_by},
                             {"taxonomy", taxonomy.classes()}};
  sidecar.add_input(args.inventors);
  if (!args.model.empty()) sidecar.add_input(args.model);
  if (!args.config.empty()) sidecar.add_input(args.config);
  sidecar.outputs = {"prevalence.csv"};

  if (!taxonomy.non_western_classes().empty()) {
    const auto aggregate = nomen::aggregate_subset(
        series, taxonomy.non_western_classes(), taxonomy);
    std::ofstream out = open_output(out_dir / "nonwestern.csv");
    nomen::write_scalar_series_csv(out, aggregate, series, "non-western");
    sidecar.outputs.push_back("nonwestern.csv");
  }
  if (!args.dominant_map.empty()) {
    const json j = load_json_file(args.dominant_map);
    std::map<std::string, std::string> dominant;
    try {
      dominant = j.get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
      throw nomen::ParseError(1, std::string("bad dominant map: ") + e.what());
    }
    const auto extracted = nomen::dominant_series(series, dominant, taxonomy);
    std::ofstream out = open_output(out_dir / "dominant.csv");
    nomen::write_scalar_series_csv(out, extracted, series, "dominant");
    sidecar.outputs.push_back("dominant.csv");
    sidecar.add_input(args.dominant_map);
  }
  if (!args.home_map.empty()) {
    const json j = load_json_file(args.home_map);
    std::map<int, std::set<std::string>> homes;
    std::vector<int> origins;
    try {
      for (const auto& [origin, countries] :
           j.get<std::map<std::string, std::vector<std::string>>>()) {
        const int idx = taxonomy.index_of(origin);
        if (idx < 0) throw nomen::UnknownOrigin("unknown origin " + origin);
        homes[idx] = std::set<std::string>(countries.begin(), countries.end());
        origins.push_back(idx);
      }
    } catch (const json::exception& e) {
      throw nomen::ParseError(1, std::string("bad home map: ") + e.what());
    }
    const auto split = nomen::location_split(data.records, origins, homes);
    std::ofstream out = open_output(out_dir / "location_split.csv");
    nomen::csv::write_row(out, std::vector<std::string>{
                                   "origin", "year", "domestic", "abroad",
                                   "domestic_share"});
    for (const auto& [key, cell] : split) {
      nomen::csv::write_row(
          out, std::vector<std::string>{
                   taxonomy.name(static_cast<std::size_t>(key.first)),
                   std::to_string(key.second), std::to_string(cell.domestic),
                   std::to_string(cell.abroad),
                   nomen::csv::format_double(cell.domestic_share())});
    }
    sidecar.outputs.push_back("location_split.csv");
    sidecar.add_input(args.home_map);
  }
  sidecar.extra = {{"records", data.records.size()},
                   {"cells", series.size()},
                   {"predictions_computed", !data.has_predictions}};
  sidecar.write(out_dir);
  std::cout << "aggregated " << data.records.size() << " records into "
            << series.size() << " cells\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
  double tolerance = 1e-5;
  std::uint64_t seed = 42;
};

int run_gradcheck(const GradcheckArgs& args) {
  using nomen::nn::GradCheckReport;
  using nomen::nn::Rng;
  using nomen::nn::Tensor;

  bool all_passed = true;
  const auto report_lines = [&](const std::string& label,
                                const GradCheckReport& report) {
    const bool ok = report.passed(args.tolerance);
    all_passed = all_passed && ok;
    std::cout << (ok ? "[pass] " : "[FAIL] ") << label
              << ": max relative error " << report.max_rel_error() << "\n";
    for (const auto& block : report.blocks) {
      std::cout << "       " << block.name << ": " << block.max_rel_error
                << " (" << block.parameter_count << " parameters)\n";
    }
  };

  {
    nomen::nn::MlpConfig config;
    config.input_size = 10;
    config.hidden_sizes = {};
    config.num_classes = 4;
    nomen::nn::MlpModel model = nomen::nn::MlpModel::build(config, args.seed);
    Rng rng(args.seed + 1);
    std::vector<std::vector<double>> x(6, std::vector<double>(10));
    std::vector<int> y(6);
    for (auto& row : x) {
      for (double& v : row) v = rng.uniform(-1.0, 1.0);
    }
    for (int& v : y) v = static_cast<int>(rng.below(4));
    report_lines("dense softmax (10 -> 4)", nomen::nn::gradcheck(model, x, y));
  }
  const auto sequence_case = [&](const std::string& label, std::size_t input,
                                 std::size_t steps,
                                 const std::vector<std::size_t>& sizes,
                                 std::size_t classes, std::size_t batch) {
    nomen::nn::SequenceClassifier model = nomen::nn::SequenceClassifier::build(
        input, steps, sizes, classes, args.seed);
    Rng rng(args.seed + 2);
    std::vector<Tensor> x;
    std::vector<int> y;
    for (std::size_t b = 0; b < batch; ++b) {
      Tensor t{steps, input};
      for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
      x.push_back(std::move(t));
      y.push_back(static_cast<int>(rng.below(classes)));
    }
    report_lines(label, nomen::nn::gradcheck(model, x, y));
  };
  sequence_case("lstm (i=4, c=3, T=5)", 4, 5, {3}, 3, 4);
  sequence_case("stacked lstm (c=[8,4])", 6, 6, {8, 4}, 3, 3);

  // no output directory; the resolved run configuration goes to stdout
  const json resolved{{"version", kVersion},
                      {"subcommand", "gradcheck"},
                      {"seed", args.seed},
                      {"resolved_config", {{"tolerance", args.tolerance},
                                           {"fd_step", 1e-5}}}};
  std::cout << resolved.dump() << "\n";
  if (!all_passed) {
    std::cout << "gradient check FAILED at tolerance " << args.tolerance
              << "\n";
    return kExitNumericalFailure;
  }
  std::cout << "all gradient checks passed at tolerance " << args.tolerance
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"name-origin classification toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "fit the name classifier");
  train->add_option("--data", train_args.data, "labeled names CSV")
      ->required();
  train->add_option("--val-fraction", train_args.val_fraction,
                    "validation fraction of the post-test remainder");
  train->add_option("--test-fraction", train_args.test_fraction,
                    "held-out test fraction");
  train->add_option("--config", train_args.config, "run configuration JSON");
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--seed", train_args.seed, "random seed (default 42)");

  EvaluateArgs evaluate_args;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score a model on labeled names");
  evaluate->add_option("--model", evaluate_args.model, "model file")
      ->required();
  evaluate->add_option("--data", evaluate_args.data, "labeled names CSV")
      ->required();
  evaluate->add_option("--out", evaluate_args.out, "output directory")
      ->required();

  ClassifyArgs classify_args;
  CLI::App* classify =
      app.add_subcommand("classify", "predict origins for a list of names");
  classify->add_option("--model", classify_args.model, "model file")
      ->required();
  classify->add_option("--names", classify_args.names, "names CSV")
      ->required();
  classify->add_option("--out", classify_args.out, "output directory")
      ->required();

  FilterArgs filter_args;
  CLI::App* filter = app.add_subcommand(
      "filter", "select confidence thresholds and emit pseudo-labeled names");
  filter->add_option("--leaf-data", filter_args.leaf_data,
                     "leaf-probability CSV")
      ->required();
  filter->add_option("--baseline-size", filter_args.baseline_size,
                     "baseline sample size for the retained fraction");
  filter->add_option("--weights", filter_args.weights,
                     "weight-scheme JSON file");
  filter->add_option("--config", filter_args.config, "run configuration JSON");
  filter->add_option("--out", filter_args.out, "output directory")->required();
  filter->add_option("--seed", filter_args.seed, "random seed (default 42)");

  AggregateArgs aggregate_args;
  CLI::App* aggregate = app.add_subcommand(
      "aggregate", "aggregate classified inventors into prevalence series");
  aggregate->add_option("--inventors", aggregate_args.inventors,
                        "inventor CSV")
      ->required();
  aggregate
      ->add_option("--group-by", aggregate_args.group_by,
                   "country|tech_field|region|global")
      ->required();
  aggregate->add_option("--model", aggregate_args.model,
                        "model file (when the CSV has no probabilities)");
  aggregate->add_option("--out", aggregate_args.out, "output directory")
      ->required();
  aggregate->add_option("--config", aggregate_args.config,
                        "run configuration JSON");
  aggregate->add_option("--region-map", aggregate_args.region_map,
                        "country-to-region JSON map");
  aggregate->add_option("--dominant-map", aggregate_args.dominant_map,
                        "group-to-origin JSON map");
  aggregate->add_option("--home-map", aggregate_args.home_map,
                        "origin-to-home-countries JSON map");

  GradcheckArgs gradcheck_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--tolerance", gradcheck_args.tolerance,
                        "max relative error (default 1e-5)");
  gradcheck->add_option("--seed", gradcheck_args.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  train_args.seed_given = train->count("--seed") > 0;
  filter_args.seed_given = filter->count("--seed") > 0;

  try {
    if (*train) return run_train(train_args);
    if (*evaluate) return run_evaluate(evaluate_args);
    if (*classify) return run_classify(classify_args);
    if (*filter) return run_filter(filter_args);
    if (*aggregate) return run_aggregate(aggregate_args);
    if (*gradcheck) return run_gradcheck(gradcheck_args);
  } catch (const nomen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
