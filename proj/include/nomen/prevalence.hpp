#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nomen/csv.hpp"
#include "nomen/errors.hpp"
#include "nomen/prob.hpp"
#include "nomen/taxonomy.hpp"

namespace nomen {

struct InventorRecord {
  std::string inventor_id;
  std::string raw_name;
  std::string country;
  std::string tech_field;
  int priority_year = 0;
  ProbVector prediction;
};

enum class GroupBy { kCountry, kTechField, kRegion, kGlobal };

inline const char* group_by_label(GroupBy g) {
  switch (g) {
    case GroupBy::kCountry: return "country";
    case GroupBy::kTechField: return "tech_field";
    case GroupBy::kRegion: return "region";
    case GroupBy::kGlobal: return "global";
  }
  return "global";
}

struct SeriesKey {
  std::string group;
  int year = 0;

  auto operator<=>(const SeriesKey&) const = default;
};

struct PrevalenceCell {
  std::vector<double> values;  // per-origin prevalence, taxonomy order
  std::size_t n = 0;           // inventor records in the cell
};

using PrevalenceSeries = std::map<SeriesKey, PrevalenceCell>;

/// Mean predicted class probability per (group, year) cell:
/// value_k = sum_i prediction_i[k] / N. Empty cells never appear.
inline PrevalenceSeries prevalence(
    std::span<const InventorRecord> records, GroupBy group_by,
    const OriginTaxonomy& taxonomy,
    const std::map<std::string, std::string>* region_of_country = nullptr) {
  if (group_by == GroupBy::kRegion && region_of_country == nullptr) {
    throw InvalidConfig("region grouping needs a country-to-region mapping");
  }
  const std::size_t k = taxonomy.size();
  PrevalenceSeries series;
  for (const InventorRecord& rec : records) {
    if (rec.prediction.size() != k) {
      throw ShapeMismatch("prediction size != taxonomy size");
    }
    SeriesKey key;
    key.year = rec.priority_year;
    switch (group_by) {
      case GroupBy::kCountry:
        key.group = rec.country;
        break;
      case GroupBy::kTechField:
        key.group = rec.tech_field;
        break;
      case GroupBy::kRegion: {
        const auto it = region_of_country->find(rec.country);
        if (it == region_of_country->end()) {
          throw MissingMapping("no region for country \"" + rec.country + "\"");
        }
        key.group = it->second;
        break;
      }
      case GroupBy::kGlobal:
        key.group = "global";
        break;
    }
    PrevalenceCell& cell = series[key];
    if (cell.values.empty()) cell.values.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) cell.values[c] += rec.prediction.p[c];
    ++cell.n;
  }
  for (auto& [key, cell] : series) {
    for (double& v : cell.values) v /= static_cast<double>(cell.n);
  }
  return series;
}

/// Per-cell sum of the prevalence values of an origin subset.
inline std::map<SeriesKey, double> aggregate_subset(
    const PrevalenceSeries& series, std::span<const std::string> subset,
    const OriginTaxonomy& taxonomy) {
  std::vector<std::size_t> indices;
  for (const std::string& name : subset) {
    const int idx = taxonomy.index_of(name);
    if (idx < 0) throw UnknownOrigin("unknown origin \"" + name + "\"");
    indices.push_back(static_cast<std::size_t>(idx));
  }
  std::map<SeriesKey, double> out;
  for (const auto& [key, cell] : series) {
    double sum = 0.0;
    for (const std::size_t idx : indices) sum += cell.values[idx];
    out[key] = sum;
  }
  return out;
}

/// Extracts each group's mapped origin from its series (e.g. the share of the
/// historically dominant origin per country).
inline std::map<SeriesKey, double> dominant_series(
    const PrevalenceSeries& series,
    const std::map<std::string, std::string>& origin_of_group,
    const OriginTaxonomy& taxonomy) {
  std::map<SeriesKey, double> out;
  for (const auto& [key, cell] : series) {
    const auto it = origin_of_group.find(key.group);
    if (it == origin_of_group.end()) {
      throw MissingMapping("no dominant origin mapped for group \"" +
                           key.group + "\"");
    }
    const int idx = taxonomy.index_of(it->second);
    if (idx < 0) throw UnknownOrigin("unknown origin \"" + it->second + "\"");
    out[key] = cell.values[static_cast<std::size_t>(idx)];
  }
  return out;
}

struct LocationCell {
  std::size_t domestic = 0;
  std::size_t abroad = 0;

  double domestic_share() const {
    const std::size_t total = domestic + abroad;
    return total == 0 ? 0.0
                      : static_cast<double>(domestic) /
                            static_cast<double>(total);
  }
};

struct InventorCsv {
  std::vector<InventorRecord> records;
  bool has_predictions = false;
};

/// Reads an inventor CSV (header `inventor_id,name,country,tech_field,
/// priority_year[,p_1..p_K]`). When probability columns are absent the
/// records come back with empty predictions for the caller to fill via the
/// classifier.
inline InventorCsv load_inventor_csv(const std::string& path,
                                     const OriginTaxonomy& taxonomy) {
  const csv::Table table = csv::read_file(path);
  const std::vector<std::string> base = {"inventor_id", "name", "country",
                                         "tech_field", "priority_year"};
  if (table.header.size() < base.size()) {
    throw ParseError(1, "expected header inventor_id,name,country,tech_field,"
                        "priority_year[,p_1..]");
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (table.header[i] != base[i]) {
      throw ParseError(1, "column " + std::to_string(i + 1) + " must be " +
                              base[i]);
    }
  }
  const std::size_t k = taxonomy.size();
  InventorCsv out;
  if (table.header.size() == base.size() + k) {
    for (std::size_t c = 0; c < k; ++c) {
      const std::string expected = "p_" + std::to_string(c + 1);
      if (table.header[base.size() + c] != expected) {
        throw ParseError(1, "probability column " + std::to_string(c + 1) +
                                " must be " + expected);
      }
    }
    out.has_predictions = true;
  } else if (table.header.size() != base.size()) {
    throw ParseError(1, "expected exactly " + std::to_string(k) +
                            " probability columns");
  }
  if (table.rows.empty()) throw EmptyFile(path + " has no data rows");

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    if (row.size() != table.header.size()) {
      throw ParseError(line, "wrong field count");
    }
    InventorRecord rec;
    rec.inventor_id = row[0];
    rec.raw_name = row[1];
    rec.country = row[2];
    rec.tech_field = row[3];
    if (rec.country.empty()) throw ParseError(line, "empty country code");
    rec.priority_year =
        static_cast<int>(csv::parse_int(row[4], line, "priority_year"));
    if (rec.priority_year < 1000 || rec.priority_year > 3000) {
      throw ParseError(line, "priority_year out of range");
    }
    if (out.has_predictions) {
      std::vector<double> p(k);
      for (std::size_t c = 0; c < k; ++c) {
        p[c] = csv::parse_double(row[base.size() + c], line, "probability");
      }
      try {
        rec.prediction = ProbVector::validated(std::move(p));
      } catch (const Error& e) {
        throw ParseError(line, e.what());
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

/// Tidy series CSV: `group,year,origin,value,n`, one row per origin per cell.
inline void write_series_csv(std::ostream& os, const PrevalenceSeries& series,
                             const OriginTaxonomy& taxonomy) {
  csv::write_row(os, std::vector<std::string>{"group", "year", "origin",
                                              "value", "n"});
  for (const auto& [key, cell] : series) {
    for (std::size_t k = 0; k < taxonomy.size(); ++k) {
      csv::write_row(os, std::vector<std::string>{
                             key.group, std::to_string(key.year),
                             taxonomy.name(k), csv::format_double(cell.values[k]),
                             std::to_string(cell.n)});
    }
  }
}

/// Same schema for a scalar per-cell series under a synthetic origin label.
inline void write_scalar_series_csv(std::ostream& os,
                                    const std::map<SeriesKey, double>& series,
                                    const PrevalenceSeries& counts,
                                    const std::string& origin_label) {
  csv::write_row(os, std::vector<std::string>{"group", "year", "origin",
                                              "value", "n"});
  for (const auto& [key, value] : series) {
    const auto it = counts.find(key);
    const std::size_t n = it == counts.end() ? 0 : it->second.n;
    csv::write_row(os, std::vector<std::string>{
                           key.group, std::to_string(key.year), origin_label,
                           csv::format_double(value), std::to_string(n)});
  }
}

/// Per (origin, year) domestic/abroad tallies for the requested origins. An
/// inventor counts toward the origin with the highest prediction; it is
/// domestic when its residence country belongs to that origin's home set.
/// Records whose argmax origin is not requested are ignored.
inline std::map<std::pair<int, int>, LocationCell> location_split(
    std::span<const InventorRecord> records, std::span<const int> origins,
    const std::map<int, std::set<std::string>>& home_countries) {
  std::set<int> requested;
  for (const int origin : origins) {
    if (home_countries.find(origin) == home_countries.end()) {
      throw MissingHomeSet("no home countries for origin index " +
                           std::to_string(origin));
    }
    requested.insert(origin);
  }
  std::map<std::pair<int, int>, LocationCell> out;
  for (const InventorRecord& rec : records) {
    const int origin = static_cast<int>(rec.prediction.argmax());
    if (requested.find(origin) == requested.end()) continue;
    LocationCell& cell = out[{origin, rec.priority_year}];
    if (home_countries.at(origin).count(rec.country) > 0) {
      ++cell.domestic;
    } else {
      ++cell.abroad;
    }
  }
  return out;
}

}  // namespace nomen
