#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace fedq {

// Purpose tags for derived streams. Values are part of the stream key, so
// they must never be renumbered.
enum class StreamKind : std::uint64_t {
  Sampling = 1,
  Downlink = 2,
  LocalTrain = 3,
  Uplink = 4,
  Data = 5,
  Probe = 6,
  Verify = 7,
};

// Counter-based random stream: the n-th output is a pure function of
// (key, n). Streams derived for distinct (round, client, kind) tuples are
// independent of each other and of the order in which they are consumed.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key) : key_(key) {}

  static RandomStream derive(std::uint64_t master_seed, std::uint64_t round,
                             std::uint64_t client, StreamKind kind);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return next(); }

  std::uint64_t next();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller, one value per call).
  double normal();
  // Fisher-Yates over the whole span.
  void shuffle(std::span<std::size_t> items);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

}  // namespace fedq
