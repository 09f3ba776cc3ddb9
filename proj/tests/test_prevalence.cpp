#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "nomen/prevalence.hpp"
#include "nomen/rng.hpp"

using namespace nomen;

namespace {

const OriginTaxonomy& tax() { return OriginTaxonomy::defaults(); }

ProbVector one_hot17(const std::string& origin) {
  std::vector<double> p(17, 0.0);
  p[static_cast<std::size_t>(tax().index_of(origin))] = 1.0;
  return ProbVector{p};
}

ProbVector half_half(const std::string& a, const std::string& b) {
  std::vector<double> p(17, 0.0);
  p[static_cast<std::size_t>(tax().index_of(a))] = 0.5;
  p[static_cast<std::size_t>(tax().index_of(b))] = 0.5;
  return ProbVector{p};
}

InventorRecord make_record(const std::string& id, const std::string& country,
                           int year, ProbVector p,
                           const std::string& field = "Computer Technology") {
  InventorRecord rec;
  rec.inventor_id = id;
  rec.raw_name = "inventor " + id;
  rec.country = country;
  rec.tech_field = field;
  rec.priority_year = year;
  rec.prediction = std::move(p);
  return rec;
}

std::vector<InventorRecord> random_corpus(std::size_t n, nn::Rng& rng) {
  const std::vector<std::string> countries = {"US", "DE", "JP", "CN"};
  const std::vector<std::string> fields = {"Computer Technology", "Transport"};
  std::vector<InventorRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    records.push_back(make_record(
        std::to_string(i), countries[rng.below(countries.size())],
        1990 + static_cast<int>(rng.below(5)),
        ProbVector{rng.dirichlet(std::vector<double>(17, 0.3))},
        fields[rng.below(fields.size())]));
  }
  return records;
}

}  // namespace

TEST_CASE("two-inventor cell averages the class probabilities",
          "[prevalence]") {
  const std::vector<InventorRecord> records = {
      make_record("a", "US", 2000, one_hot17("Chinese")),
      make_record("b", "US", 2000, half_half("Chinese", "German"))};
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kCountry, tax());
  REQUIRE(series.size() == 1);
  const PrevalenceCell& cell = series.at(SeriesKey{"US", 2000});
  REQUIRE(cell.n == 2);
  REQUIRE(cell.values[static_cast<std::size_t>(tax().index_of("Chinese"))] ==
          0.75);
  REQUIRE(cell.values[static_cast<std::size_t>(tax().index_of("German"))] ==
          0.25);
}

TEST_CASE("single inventor's series equals its probability vector",
          "[prevalence]") {
  const ProbVector p = half_half("French", "Italian");
  const std::vector<InventorRecord> records = {
      make_record("solo", "FR", 1999, p)};
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kCountry, tax());
  REQUIRE(series.at(SeriesKey{"FR", 1999}).values == p.p);
}

TEST_CASE("unanimous one-hot predictions give prevalence one", "[prevalence]") {
  std::vector<InventorRecord> records;
  for (int i = 0; i < 5; ++i) {
    records.push_back(make_record(std::to_string(i), "JP", 2001,
                                  one_hot17("Japanese")));
  }
  const PrevalenceSeries series = prevalence(records, GroupBy::kGlobal, tax());
  REQUIRE(series.at(SeriesKey{"global", 2001})
              .values[static_cast<std::size_t>(tax().index_of("Japanese"))] ==
          1.0);
}

TEST_CASE("every cell's values sum to one", "[prevalence]") {
  nn::Rng rng(7);
  const auto records = random_corpus(200, rng);
  for (const GroupBy g : {GroupBy::kCountry, GroupBy::kTechField,
                          GroupBy::kGlobal}) {
    const PrevalenceSeries series = prevalence(records, g, tax());
    REQUIRE_FALSE(series.empty());
    for (const auto& [key, cell] : series) {
      REQUIRE(cell.n > 0);
      double sum = 0.0;
      for (const double v : cell.values) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        sum += v;
      }
      REQUIRE(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("disjoint unions average with cell-count weights", "[prevalence]") {
  nn::Rng rng(11);
  auto part_a = random_corpus(120, rng);
  auto part_b = random_corpus(80, rng);
  std::vector<InventorRecord> both = part_a;
  both.insert(both.end(), part_b.begin(), part_b.end());

  const PrevalenceSeries sa = prevalence(part_a, GroupBy::kCountry, tax());
  const PrevalenceSeries sb = prevalence(part_b, GroupBy::kCountry, tax());
  const PrevalenceSeries su = prevalence(both, GroupBy::kCountry, tax());
  for (const auto& [key, cell] : su) {
    const auto ia = sa.find(key);
    const auto ib = sb.find(key);
    const std::size_t na = ia == sa.end() ? 0 : ia->second.n;
    const std::size_t nb = ib == sb.end() ? 0 : ib->second.n;
    REQUIRE(cell.n == na + nb);
    for (std::size_t k = 0; k < 17; ++k) {
      const double va = na == 0 ? 0.0 : ia->second.values[k];
      const double vb = nb == 0 ? 0.0 : ib->second.values[k];
      const double expected =
          (va * static_cast<double>(na) + vb * static_cast<double>(nb)) /
          static_cast<double>(na + nb);
      REQUIRE(cell.values[k] == Catch::Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("region grouping uses the country lookup", "[prevalence]") {
  const std::map<std::string, std::string> regions = {
      {"US", "Americas"}, {"DE", "Europe"}, {"FR", "Europe"}};
  const std::vector<InventorRecord> records = {
      make_record("a", "DE", 2000, one_hot17("German")),
      make_record("b", "FR", 2000, one_hot17("French")),
      make_record("c", "US", 2000, one_hot17("Anglo-Saxon"))};
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kRegion, tax(), &regions);
  REQUIRE(series.count(SeriesKey{"Europe", 2000}) == 1);
  REQUIRE(series.at(SeriesKey{"Europe", 2000}).n == 2);

  const std::vector<InventorRecord> unknown = {
      make_record("d", "XX", 2000, one_hot17("German"))};
  REQUIRE_THROWS_AS(prevalence(unknown, GroupBy::kRegion, tax(), &regions),
                    MissingMapping);
  REQUIRE_THROWS_AS(prevalence(records, GroupBy::kRegion, tax(), nullptr),
                    InvalidConfig);
}

TEST_CASE("prediction width must match the taxonomy", "[prevalence]") {
  InventorRecord bad = make_record("x", "US", 2000, one_hot17("German"));
  bad.prediction.p.resize(5);
  const std::vector<InventorRecord> records = {bad};
  REQUIRE_THROWS_AS(prevalence(records, GroupBy::kCountry, tax()),
                    ShapeMismatch);
}

TEST_CASE("subset aggregation sums the member origins", "[prevalence]") {
  const std::vector<InventorRecord> records = {
      make_record("a", "US", 2000, one_hot17("Chinese")),
      make_record("b", "US", 2000, half_half("Chinese", "German"))};
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kCountry, tax());

  // the full taxonomy sums to one
  const auto full = aggregate_subset(series, tax().classes(), tax());
  REQUIRE(full.at(SeriesKey{"US", 2000}) == Catch::Approx(1.0).margin(1e-12));

  // the empty subset sums to zero
  const std::vector<std::string> none;
  REQUIRE(aggregate_subset(series, none, tax()).at(SeriesKey{"US", 2000}) ==
          0.0);

  // the default non-western subset captures the Chinese mass
  const auto non_western =
      aggregate_subset(series, tax().non_western_classes(), tax());
  REQUIRE(non_western.at(SeriesKey{"US", 2000}) == 0.75);

  const std::vector<std::string> bogus = {"Atlantis"};
  REQUIRE_THROWS_AS(aggregate_subset(series, bogus, tax()), UnknownOrigin);
}

TEST_CASE("subset aggregation is additive over disjoint subsets",
          "[prevalence]") {
  nn::Rng rng(13);
  const auto records = random_corpus(100, rng);
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kCountry, tax());
  const std::vector<std::string> first = {"Chinese", "German", "French"};
  const std::vector<std::string> second = {"Japanese", "Korean"};
  std::vector<std::string> both = first;
  both.insert(both.end(), second.begin(), second.end());
  const auto sa = aggregate_subset(series, first, tax());
  const auto sb = aggregate_subset(series, second, tax());
  const auto su = aggregate_subset(series, both, tax());
  for (const auto& [key, value] : su) {
    REQUIRE(value == Catch::Approx(sa.at(key) + sb.at(key)).margin(1e-12));
  }
}

TEST_CASE("dominant series extracts the mapped origin column", "[prevalence]") {
  const std::vector<InventorRecord> records = {
      make_record("a", "US", 2000, half_half("Anglo-Saxon", "Chinese")),
      make_record("b", "US", 2001, one_hot17("Anglo-Saxon")),
      make_record("c", "DE", 2000, half_half("German", "French")),
      make_record("d", "DE", 2000, one_hot17("German"))};
  const PrevalenceSeries series =
      prevalence(records, GroupBy::kCountry, tax());
  const std::map<std::string, std::string> dominant = {
      {"US", "Anglo-Saxon"}, {"DE", "German"}};
  const auto extracted = dominant_series(series, dominant, tax());
  REQUIRE(extracted.at(SeriesKey{"US", 2000}) == 0.5);
  REQUIRE(extracted.at(SeriesKey{"US", 2001}) == 1.0);
  REQUIRE(extracted.at(SeriesKey{"DE", 2000}) == 0.75);

  const std::map<std::string, std::string> partial = {{"US", "Anglo-Saxon"}};
  REQUIRE_THROWS_AS(dominant_series(series, partial, tax()), MissingMapping);
}

TEST_CASE("location split tallies domestic and abroad inventors",
          "[prevalence]") {
  const int chinese = tax().index_of("Chinese");
  const int indian = tax().index_of("India");
  const std::map<int, std::set<std::string>> homes = {{chinese, {"CN"}},
                                                      {indian, {"IN"}}};
  const std::vector<int> origins = {chinese, indian};
  const std::vector<InventorRecord> records = {
      make_record("a", "CN", 2000, one_hot17("Chinese")),
      make_record("b", "US", 2000, one_hot17("Chinese")),
      make_record("c", "US", 2000, one_hot17("Chinese")),
      make_record("d", "IN", 2000, one_hot17("India")),
      make_record("e", "DE", 2000, one_hot17("German"))};  // ignored
  const auto split = location_split(records, origins, homes);
  REQUIRE(split.at({chinese, 2000}).domestic == 1);
  REQUIRE(split.at({chinese, 2000}).abroad == 2);
  REQUIRE(split.at({chinese, 2000}).domestic_share() ==
          Catch::Approx(1.0 / 3.0));
  REQUIRE(split.at({indian, 2000}).domestic == 1);
  REQUIRE(split.at({indian, 2000}).abroad == 0);
  REQUIRE(split.count({tax().index_of("German"), 2000}) == 0);

  const std::vector<int> unmapped = {tax().index_of("German")};
  REQUIRE_THROWS_AS(location_split(records, unmapped, homes), MissingHomeSet);
}

TEST_CASE("argmax decides the origin for location splits", "[prevalence]") {
  const int chinese = tax().index_of("Chinese");
  const std::map<int, std::set<std::string>> homes = {{chinese, {"CN"}}};
  std::vector<double> p(17, 0.0);
  p[static_cast<std::size_t>(chinese)] = 0.6;
  p[static_cast<std::size_t>(tax().index_of("German"))] = 0.4;
  const std::vector<InventorRecord> records = {
      make_record("a", "CN", 1995, ProbVector{p})};
  const std::vector<int> origins = {chinese};
  const auto split = location_split(records, origins, homes);
  REQUIRE(split.at({chinese, 1995}).domestic == 1);
}
