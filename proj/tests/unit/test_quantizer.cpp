#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fedq/quantizer.hpp"
#include "fedq/rng.hpp"

using namespace fedq;

namespace {

RandomStream rng_for(std::uint64_t seed) { return RandomStream::derive(seed, 0, 0, StreamKind::Probe); }

// Reference grid moments written from scratch: locate the interval by scanning
// the 2^B points and weight the endpoints by proximity.
struct RefMoments {
  double mean;
  double var;
};
RefMoments reference_moments(double w, double M, int B) {
  const int n = (1 << B) - 1;
  std::vector<double> pts;
  for (int i = 0; i <= n; ++i) pts.push_back(-M + 2.0 * M * i / n);
  for (int i = 0; i < n; ++i) {
    if (w >= pts[i] && w <= pts[i + 1]) {
      const double p = (w - pts[i]) / (pts[i + 1] - pts[i]);
      const double mean = (1 - p) * pts[i] + p * pts[i + 1];
      const double var = (1 - p) * (pts[i] - w) * (pts[i] - w) + p * (pts[i + 1] - w) * (pts[i + 1] - w);
      return {mean, var};
    }
  }
  return {std::numeric_limits<double>::quiet_NaN(), 0.0};
}

}  // namespace

TEST_SUITE("quantizer") {
  TEST_CASE("round_nearest") {
    CHECK(round_nearest(1.2) == 1);
    CHECK(round_nearest(1.5) == 2);
    CHECK(round_nearest(-0.5) == 0);
    CHECK(round_nearest(-1.5) == -1);
    CHECK(round_nearest(-1.6) == -2);
    CHECK_THROWS_AS(round_nearest(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
    CHECK_THROWS_AS(round_nearest(std::numeric_limits<double>::infinity()), std::invalid_argument);
  }

  TEST_CASE("round_stochastic") {
    auto rng = rng_for(1);
    for (int i = 0; i < 1000; ++i) CHECK(round_stochastic(3.0, rng) == 3);

    int ones = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto r = round_stochastic(0.25, rng);
      REQUIRE((r == 0 || r == 1));
      ones += static_cast<int>(r);
    }
    // Binomial(n, 0.25): SD = sqrt(n * 0.25 * 0.75) ~ 137.
    CHECK(std::abs(ones - 25000) < 4 * 137);

    double sum = 0.0;
    for (int i = 0; i < 1'000'000; ++i) sum += static_cast<double>(round_stochastic(0.7, rng));
    CHECK(std::abs(sum / 1e6 - 0.7) < 0.002);

    CHECK_THROWS_AS(round_stochastic(std::numeric_limits<double>::quiet_NaN(), rng),
                    std::invalid_argument);
  }

  TEST_CASE("clamp_limit") {
    CHECK(clamp_limit(8, 3) == 3);
    CHECK(clamp_limit(-4, 3) == -4);
    CHECK(clamp_limit(-9, 3) == -4);
    CHECK(clamp_limit(2, 3) == 2);
    CHECK(clamp_limit(1, 1) == 0);
    CHECK(clamp_limit(-1, 1) == -1);
  }

  TEST_CASE("quantize_pipeline hand traces") {
    auto rng = rng_for(2);
    const auto spec = QuantizerSpec::tuned(3, 4.0, Rounding::Nearest);
    auto c = quantize_pipeline(0.3, spec, rng);
    CHECK(c.codeword == 1);
    CHECK(c.value == 0.25);
    c = quantize_pipeline(2.0, spec, rng);
    CHECK(c.codeword == 3);
    CHECK(c.value == 0.75);
    c = quantize_pipeline(0.0, spec, rng);
    CHECK(c.codeword == 0);
    CHECK(c.value == 0.0);
    // Huge inputs saturate instead of overflowing the integer conversion.
    c = quantize_pipeline(1e300, spec, rng);
    CHECK(c.codeword == 3);
    c = quantize_pipeline(-1e300, spec, rng);
    CHECK(c.codeword == -4);
  }

  TEST_CASE("spec invariants") {
    CHECK_NOTHROW(QuantizerSpec::native(3, Rounding::Nearest).validate());
    CHECK(QuantizerSpec::native(3, Rounding::Nearest).gain == 4.0);
    auto bad = QuantizerSpec::native(3, Rounding::Nearest);
    bad.gain = 5.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    auto one = QuantizerSpec::enhanced_one_bit(2.0, Rounding::Stochastic);
    CHECK_NOTHROW(one.validate());
    one.bits = 2;
    CHECK_THROWS_AS(one.validate(), std::invalid_argument);
    CHECK_THROWS_AS(QuantizerSpec::tuned(0, 1.0, Rounding::Nearest).validate(), std::invalid_argument);
    CHECK_THROWS_AS(QuantizerSpec::tuned(3, 0.0, Rounding::Nearest).validate(), std::invalid_argument);
    CHECK(QuantizerSpec::tuned(3, 4.0, Rounding::Nearest).range_bound() == 1.0);
  }

  TEST_CASE("pipeline range and NR idempotence") {
    auto rng = rng_for(3);
    auto draw = rng_for(4);
    for (int B = 1; B <= 8; ++B) {
      const double G = std::ldexp(1.0, B - 1) * (0.5 + draw.uniform() * 4);
      for (auto rounding : {Rounding::Nearest, Rounding::Stochastic}) {
        const auto spec = QuantizerSpec::tuned(B, G, rounding);
        for (int i = 0; i < 200; ++i) {
          const double w = 10.0 * (2 * draw.uniform() - 1);
          const auto c = quantize_pipeline(w, spec, rng);
          CHECK(c.codeword >= -(std::int64_t{1} << (B - 1)));
          CHECK(c.codeword <= (std::int64_t{1} << (B - 1)) - 1);
          CHECK(c.value == static_cast<double>(c.codeword) / G);
          if (rounding == Rounding::Nearest) {
            CHECK(quantize_pipeline(c.value, spec, rng).value == c.value);
          }
        }
      }
    }
  }

  TEST_CASE("grid geometry") {
    for (int B = 1; B <= 8; ++B) {
      const GridSpec g{2.0, B};
      const auto n = g.interval_count();
      CHECK(n == (1u << B) - 1);
      CHECK(g.point(0) == -2.0);
      CHECK(g.point(n) == 2.0);
      for (std::uint64_t i = 0; i <= n; ++i) {
        CHECK(g.point(i) == doctest::Approx(-2.0 + 4.0 * i / n).epsilon(1e-14));
        CHECK(g.point(n - i) == -g.point(i));
      }
      CHECK(g.step() == doctest::Approx(4.0 / n));
    }
    CHECK_THROWS_AS((GridSpec{0.0, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((GridSpec{1.0, 0}.validate()), std::invalid_argument);
  }

  TEST_CASE("grid stochastic rounding examples") {
    auto rng = rng_for(5);
    const GridSpec g2{1.0, 2};
    for (int i = 0; i < 100; ++i) CHECK(quantize_grid_sr(1.0 / 3.0, g2, rng) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto b13 = grid_bracket(1.0 / 3.0, g2);
    CHECK(b13.mse(1.0 / 3.0) < 1e-30);

    const auto b0 = grid_bracket(0.0, g2);
    CHECK(b0.low == doctest::Approx(-1.0 / 3.0));
    CHECK(b0.high == doctest::Approx(1.0 / 3.0));
    CHECK(b0.p_high == doctest::Approx(0.5));
    CHECK(std::abs(b0.mean()) < 1e-15);
    CHECK(b0.mse(0.0) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));

    const GridSpec g1{1.0, 1};
    const auto b4 = grid_bracket(0.4, g1);
    CHECK(b4.low == -1.0);
    CHECK(b4.high == 1.0);
    CHECK(b4.p_high == doctest::Approx(0.7));
    int up = 0;
    for (int i = 0; i < 100000; ++i) {
      const double q = quantize_grid_sr(0.4, g1, rng);
      REQUIRE((q == -1.0 || q == 1.0));
      up += q > 0;
    }
    CHECK(std::abs(up - 70000) < 4 * 145);  // SD = sqrt(1e5 * 0.21)

    CHECK_THROWS_AS(quantize_grid_sr(1.01, g1, rng), std::out_of_range);
    CHECK_THROWS_AS(quantize_grid_sr(-1.5, g2, rng), std::out_of_range);
    CHECK(quantize_grid_sr(1.0, g2, rng) == 1.0);
    CHECK(quantize_grid_sr(-1.0, g2, rng) == -1.0);
  }

  TEST_CASE("grid moments agree with a reference and respect the variance bound") {
    auto draw = rng_for(6);
    for (int B = 1; B <= 8; ++B) {
      for (double M : {0.5, 1.0, 4.0}) {
        const double bound = std::pow(M / ((1 << B) - 1), 2);
        for (int i = 0; i < 1000; ++i) {
          const double w = M * (2 * draw.uniform() - 1);
          const auto b = grid_bracket(w, GridSpec{M, B});
          const auto ref = reference_moments(w, M, B);
          REQUIRE(std::abs(b.mean() - w) < 1e-12);
          REQUIRE(std::abs(ref.mean - w) < 1e-12);
          REQUIRE(b.mse(w) == doctest::Approx(ref.var).epsilon(1e-9).scale(bound));
          REQUIRE(b.mse(w) <= bound * (1 + 1e-12));
          REQUIRE(b.low >= -M);
          REQUIRE(b.high <= M);
        }
      }
    }
  }

  TEST_CASE("grid codewords decode to the sampled point") {
    auto rng = rng_for(7);
    for (int B = 1; B <= 6; ++B) {
      const double G = 3.0;
      const auto spec = QuantizerSpec::tuned(B, G, Rounding::Stochastic, Grid::SymmetricGrid);
      const double M = spec.range_bound();
      std::vector<double> v;
      for (int i = 0; i < 50; ++i) v.push_back(M * (2 * rng.uniform() - 1));
      const auto q = quantize_vector(v, spec, rng);
      CHECK(q.codebook == Codebook::SymmetricGrid);
      const auto deq = q.dequantize();
      const GridSpec grid{M, B};
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto b = grid_bracket(v[i], grid);
        CHECK((deq[i] == b.low || deq[i] == b.high));
        CHECK(q.codewords[i] >= -(std::int64_t{1} << (B - 1)));
        CHECK(q.codewords[i] <= (std::int64_t{1} << (B - 1)) - 1);
      }
    }
  }

  TEST_CASE("enhanced one-bit quantizer") {
    auto rng = rng_for(8);
    CHECK(one_bit_probability(0.0, 4.0) == 0.5);
    CHECK(one_bit_probability(0.25, 4.0) == 1.0);
    CHECK(one_bit_probability(-0.25, 4.0) == 0.0);
    for (int i = 0; i < 100; ++i) CHECK(quantize_one_bit(0.25, 4.0, Rounding::Stochastic, rng) == 0.25);
    CHECK(quantize_one_bit(-0.2, 1.0, Rounding::Nearest, rng) == -1.0);
    CHECK(quantize_one_bit(0.0, 1.0, Rounding::Nearest, rng) == 1.0);
    CHECK(quantize_one_bit(0.3, 2.0, Rounding::Nearest, rng) == 0.5);

    const double G = 2.0;
    double prev = -1.0;
    for (double w = -1.0; w <= 1.0; w += 0.01) {
      const double p = one_bit_probability(w, G);
      CHECK(p >= prev);
      prev = p;
      const double expectation = p / G - (1 - p) / G;
      CHECK(expectation == doctest::Approx(std::clamp(w, -1 / G, 1 / G)).epsilon(1e-12).scale(1.0));
    }

    const auto spec = QuantizerSpec::enhanced_one_bit(G, Rounding::Stochastic);
    const std::vector<double> v{0.5, -0.5, 0.1, -0.1};
    const auto q = quantize_vector(v, spec, rng);
    CHECK(q.codebook == Codebook::OneBit);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK((q.codewords[i] == 0 || q.codewords[i] == -1));
      CHECK(std::abs(q.decode(q.codewords[i])) == 0.5);
    }
    CHECK(q.decode(0) == 0.5);
    CHECK(q.decode(-1) == -0.5);
  }

  TEST_CASE("quantize_vector") {
    auto rng = rng_for(9);
    const auto spec = QuantizerSpec::tuned(3, 4.0, Rounding::Nearest);
    const auto z = quantize_vector(std::vector<double>(5, 0.0), spec, rng);
    CHECK(z.codewords == std::vector<std::int64_t>(5, 0));
    const auto q = quantize_vector(std::vector<double>{0.3, 2.0}, spec, rng);
    CHECK(q.codewords == std::vector<std::int64_t>{1, 3});
    CHECK(q.gain == 4.0);
    CHECK(q.bits == 3);

    const auto sr = QuantizerSpec::tuned(4, 8.0, Rounding::Stochastic, Grid::SymmetricGrid);
    std::vector<double> v;
    auto draw = rng_for(10);
    for (int i = 0; i < 64; ++i) v.push_back(2 * draw.uniform() - 1);
    auto r1 = rng_for(11);
    auto r2 = rng_for(11);
    const auto a = quantize_vector(v, sr, r1);
    const auto b = quantize_vector(v, sr, r2);
    CHECK(a.codewords == b.codewords);
    CHECK(a.gain == b.gain);
  }

  TEST_CASE("dt_gain") {
    CHECK(dt_gain(std::vector<double>{0.5, -0.1}, 4) == 16.0);
    CHECK(dt_gain(std::vector<double>{-1.0, 0.3}, 1) == 1.0);
    CHECK(dt_gain(std::vector<double>{0.125}, 3) == 32.0);
    CHECK(dt_gain(std::vector<double>{0.0, 0.0}, 5) == 16.0);

    auto draw = rng_for(12);
    for (int B = 1; B <= 12; ++B) {
      for (int i = 0; i < 100; ++i) {
        std::vector<double> d(8);
        for (double& x : d) x = draw.normal() * std::exp(4 * draw.normal());
        const double G = dt_gain(d, B);
        const double top = std::ldexp(1.0, B - 1);
        // G * ||d|| equals 2^(B-1) up to the rounding of one division and one product.
        CHECK(std::abs(G * inf_norm(d) - top) <= 2 * std::numeric_limits<double>::epsilon() * top);
      }
    }
  }

  TEST_CASE("abs_percentile90 index rule") {
    // n = 10: index ceil(9) - 1 = 8 of the ascending |w|.
    const std::vector<double> w{-0.1, 0.2, 0.3, -0.4, 0.5, 0.6, -0.7, 0.8, 0.9, 1.0};
    CHECK(abs_percentile90(w) == 0.9);
    // n = 3: index ceil(2.7) - 1 = 2.
    CHECK(abs_percentile90(std::vector<double>{3.0, -1.0, 2.0}) == 3.0);
    CHECK(abs_percentile90(std::vector<double>{-5.0}) == 5.0);
  }

  TEST_CASE("layered gains") {
    // Ten values whose 90th percentile of |w| is 0.05.
    std::vector<double> layer(10, 0.01);
    layer[8] = 0.05;
    layer[9] = -0.2;
    const auto g = layered_gains(WeightVector(layer), 4);
    REQUIRE(g.size() == 1);
    CHECK(g[0].alpha == 0.05);
    CHECK(g[0].base_gain == 8.0);
    CHECK(g[0].rho == 4);
    CHECK(g[0].layer_gain == 16.0);
    CHECK(g[0].total() == 128.0);

    const auto unit = layered_gains(WeightVector(std::vector<double>(4, 1.0)), 3);
    CHECK(unit[0].rho == 0);
    CHECK(unit[0].layer_gain == 1.0);

    std::vector<double> two(20);
    std::fill(two.begin(), two.begin() + 10, 0.5);
    std::fill(two.begin() + 10, two.end(), -0.005);
    const auto g2 = layered_gains(WeightVector(two, {{0, 10}, {10, 20}}), 4);
    CHECK(g2[0].layer_gain == 2.0);
    CHECK(g2[1].layer_gain == 128.0);

    const auto zero = layered_gains(WeightVector(std::vector<double>(3, 0.0)), 2);
    CHECK(zero[0].rho == kMaxLayerExponent);
    CHECK(zero[0].layer_gain == std::ldexp(1.0, 30));

    // Large weights give a negative exponent.
    const auto big = layered_gains(WeightVector(std::vector<double>(3, 5.0)), 2);
    CHECK(big[0].rho == -3);
    CHECK(big[0].layer_gain == 0.125);
  }

  TEST_CASE("layered quantization uses one gain per layer") {
    auto rng = rng_for(13);
    std::vector<double> v{0.9, -0.3, 0.6, 0.004, -0.008, 0.002};
    const WeightVector w(v, {{0, 3}, {3, 6}});
    const auto gains = layered_gains(w, 4);
    const auto blocks = quantize_layered(w, gains, 4, Rounding::Nearest, rng);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].gain == gains[0].total());
    CHECK(blocks[1].gain == gains[1].total());
    CHECK(blocks[1].size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(blocks[1].dequantize()[i] - v[3 + i]) <= 0.5 / blocks[1].gain + 1e-18);
    }
  }
}
