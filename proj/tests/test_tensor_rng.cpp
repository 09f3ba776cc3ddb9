#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "nomen/rng.hpp"
#include "nomen/tensor.hpp"

using nomen::nn::Rng;
using nomen::nn::Tensor;

TEST_CASE("tensor shape bookkeeping", "[tensor]") {
  Tensor t{3, 4};
  REQUIRE(t.numel() == 12);
  REQUIRE(t.rows() == 3);
  REQUIRE(t.cols() == 4);
  t.at(2, 3) = 5.0;
  REQUIRE(t.data[11] == 5.0);
  REQUIRE(t.all_finite());
  t.at(0, 0) = std::nan("");
  REQUIRE_FALSE(t.all_finite());
}

TEST_CASE("rng is reproducible per seed", "[rng]") {
  Rng a(123);
  Rng b(123);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.uniform01() == b.uniform01());
  }
  Rng c(124);
  bool differs = false;
  Rng a2(123);
  for (int i = 0; i < 10; ++i) {
    if (a2.uniform01() != c.uniform01()) differs = true;
  }
  REQUIRE(differs);
}

TEST_CASE("uniform below is in range and roughly uniform", "[rng]") {
  Rng rng(9);
  std::vector<int> hits(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.below(10);
    REQUIRE(v < 10);
    ++hits[static_cast<std::size_t>(v)];
  }
  for (const int h : hits) {
    REQUIRE(h > 800);
    REQUIRE(h < 1200);
  }
}

TEST_CASE("normal draws have plausible moments", "[rng]") {
  Rng rng(11);
  const int n = 20000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double variance = sum_sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.03);
  REQUIRE(std::abs(variance - 1.0) < 0.05);
}

TEST_CASE("dirichlet draws live on the simplex", "[rng]") {
  Rng rng(13);
  const std::vector<double> alpha = {0.3, 1.0, 2.5, 0.7};
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> d = rng.dirichlet(alpha);
    double sum = 0.0;
    for (const double v : d) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("shuffle permutes without loss", "[rng]") {
  Rng rng(17);
  std::vector<int> items(50);
  std::iota(items.begin(), items.end(), 0);
  const std::vector<int> original = items;
  rng.shuffle(items);
  REQUIRE(items != original);  // astronomically unlikely to match
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == original);
}
