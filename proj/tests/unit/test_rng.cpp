#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "fedq/rng.hpp"

using namespace fedq;

TEST_SUITE("rng") {
  TEST_CASE("mixer matches the published SplitMix64 sequence") {
    // SplitMix64 seeded with 0: first two outputs.
    RandomStream s(0);
    CHECK(s.next() == 0xE220A8397B1DCDAFULL);
    CHECK(s.next() == 0x6E789E6AA1B965F4ULL);
  }

  TEST_CASE("derived streams are deterministic and distinct") {
    auto a = RandomStream::derive(7, 3, 2, StreamKind::Uplink);
    auto b = RandomStream::derive(7, 3, 2, StreamKind::Uplink);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    std::set<std::uint64_t> firsts;
    for (std::uint64_t round = 0; round < 5; ++round) {
      for (std::uint64_t client = 0; client < 5; ++client) {
        for (auto kind : {StreamKind::Sampling, StreamKind::Downlink, StreamKind::LocalTrain,
                          StreamKind::Uplink}) {
          firsts.insert(RandomStream::derive(7, round, client, kind).next());
        }
      }
    }
    CHECK(firsts.size() == 100);
    CHECK(RandomStream::derive(1, 0, 0, StreamKind::Sampling).next() !=
          RandomStream::derive(2, 0, 0, StreamKind::Sampling).next());
  }

  TEST_CASE("uniform lies in [0, 1) with the right mean") {
    RandomStream s(42);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    // SE of the mean is sqrt(1/12 / n) ~ 6.5e-4.
    CHECK(std::abs(sum / n - 0.5) < 4 * std::sqrt(1.0 / 12.0 / n));
  }

  TEST_CASE("below is bounded and roughly uniform") {
    RandomStream s(9);
    CHECK_THROWS_AS(s.below(0), std::invalid_argument);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
      const auto v = s.below(7);
      REQUIRE(v < 7);
      ++counts[v];
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
    CHECK(chi2 < 22.46);  // chi-square 6 dof, p = 0.001
    for (int i = 0; i < 100; ++i) CHECK(s.below(1) == 0);
  }

  TEST_CASE("normal draws have unit variance") {
    RandomStream s(5);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double z = s.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  }

  TEST_CASE("shuffle permutes") {
    RandomStream s(3);
    std::vector<std::size_t> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    s.shuffle(w);
    CHECK(w != v);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
  }

  TEST_CASE("stream works with std algorithms") {
    RandomStream s(11);
    std::vector<int> v{1, 2, 3, 4, 5, 6};
    std::shuffle(v.begin(), v.end(), s);
    std::sort(v.begin(), v.end());
    CHECK(v == std::vector<int>{1, 2, 3, 4, 5, 6});
  }
}
