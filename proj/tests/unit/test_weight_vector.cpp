#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>
#include <vector>

#include "fedq/weight_vector.hpp"

using namespace fedq;

TEST_SUITE("weight_vector") {
  TEST_CASE("single layer by default") {
    WeightVector w({1.0, -2.0, 3.0});
    CHECK(w.size() == 3);
    CHECK(w.layer_count() == 1);
    CHECK(w.layers()[0] == LayerRange{0, 3});
    CHECK(w[1] == -2.0);
  }

  TEST_CASE("layers must partition the index range") {
    CHECK_NOTHROW(WeightVector({1, 2, 3, 4}, {{0, 1}, {1, 4}}));
    CHECK_THROWS_AS(WeightVector({1, 2, 3, 4}, {{0, 1}, {2, 4}}), std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({1, 2, 3, 4}, {{0, 2}, {1, 4}}), std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({1, 2, 3, 4}, {{0, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({1, 2}, {{0, 0}, {0, 2}}), std::invalid_argument);
  }

  TEST_CASE("values must be finite") {
    CHECK_THROWS_AS(WeightVector({1.0, std::numeric_limits<double>::quiet_NaN()}),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);
  }

  TEST_CASE("layered zeros and layer views") {
    const std::vector<std::size_t> sizes{2, 3};
    auto w = WeightVector::zeros_layered(sizes);
    CHECK(w.size() == 5);
    CHECK(w.layer(1).size() == 3);
    w.layer(1)[0] = 7.0;
    CHECK(w[2] == 7.0);
    CHECK_THROWS(w.layer(2));
  }

  TEST_CASE("with_values keeps layers") {
    WeightVector w({1, 2, 3}, {{0, 1}, {1, 3}});
    const auto v = w.with_values({4, 5, 6});
    CHECK(v.layers() == w.layers());
    CHECK(v[2] == 6.0);
    CHECK_THROWS_AS(w.with_values({1.0}), std::invalid_argument);
  }

  TEST_CASE("norms") {
    const std::vector<double> a{3.0, -4.0}, b{0.0, 0.0};
    CHECK(inf_norm(a) == 4.0);
    CHECK(squared_norm(a) == 25.0);
    CHECK(squared_distance(a, b) == 25.0);
    CHECK(dot(a, a) == 25.0);
    CHECK(inf_norm(std::vector<double>{}) == 0.0);
  }
}
