#include "fedq/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace fedq {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RandomStream RandomStream::derive(std::uint64_t master_seed,
                                  std::uint64_t round, std::uint64_t client,
                                  StreamKind kind) {
  std::uint64_t key = mix64(master_seed + kGolden);
  key = mix64(key ^ (round + 0x632BE59BD9B4E019ULL));
  key = mix64(key ^ (client + 0x8CB92BA72F3D8DD7ULL));
  key = mix64(key ^ (static_cast<std::uint64_t>(kind) + 0xA0761D6478BD642FULL));
  return RandomStream(key);
}

std::uint64_t RandomStream::next() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RandomStream::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

__extension__ typedef unsigned __int128 u128;

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RandomStream::below: n must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RandomStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void RandomStream::shuffle(std::span<std::size_t> items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace fedq
