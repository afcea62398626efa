#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedq/rng.hpp"
#include "fedq/weight_vector.hpp"

namespace fedq {

// Native: gain fixed at 2^(B-1). Tuned: gain chosen freely, receiver scales down.
enum class Structure { Native, Tuned };
enum class Rounding { Nearest, Stochastic };
// Pipeline: scale up, round, two's-complement limit, scale down.
// SymmetricGrid: 2^B codepoints uniformly spaced on [-M, +M], M = 2^(B-1)/G.
enum class Grid { Pipeline, SymmetricGrid };
// How a codeword maps back to a real value.
enum class Codebook : std::uint8_t { Pipeline, SymmetricGrid, OneBit };

inline constexpr int kMaxBits = 32;

struct QuantizerSpec {
  int bits = 8;
  double gain = 128.0;
  Structure structure = Structure::Native;
  Rounding rounding = Rounding::Stochastic;
  Grid grid = Grid::Pipeline;
  bool one_bit_enhanced = false;

  static QuantizerSpec native(int bits, Rounding rounding, Grid grid = Grid::Pipeline);
  static QuantizerSpec tuned(int bits, double gain, Rounding rounding,
                             Grid grid = Grid::Pipeline);
  static QuantizerSpec enhanced_one_bit(double gain, Rounding rounding);

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  Codebook codebook() const;
  // Real-valued range covered by the integer grid: 2^(B-1) / G.
  double range_bound() const;
};

struct GridSpec {
  double range_bound = 1.0;
  int bits = 1;

  void validate() const;
  // 2^B - 1 intervals, 2^B points.
  std::uint64_t interval_count() const;
  double step() const;
  // i in [0, 2^B - 1]; point(0) = -M, point(2^B - 1) = +M, point(n - i) = -point(i).
  double point(std::uint64_t i) const;
};

// The two codepoints bracketing a value and the probability of rounding up,
// proportional to proximity. Used both to sample and to compute moments exactly.
struct Bracket {
  std::uint64_t low_index = 0;
  double low = 0.0;
  double high = 0.0;
  double p_high = 0.0;

  double mean() const { return low + p_high * (high - low); }
  // E[(Q(w) - w)^2] for the value w this bracket was built from.
  double mse(double w) const;
};

struct ScalarCode {
  std::int64_t codeword = 0;
  double value = 0.0;
};

// Integer codewords plus the metadata a receiver needs to scale them down.
struct QuantizedVector {
  std::vector<std::int64_t> codewords;
  double gain = 1.0;
  int bits = 1;
  Codebook codebook = Codebook::Pipeline;

  std::size_t size() const { return codewords.size(); }
  double decode(std::int64_t codeword) const;
  std::vector<double> dequantize() const;
};

// Round half up: floor(x) unless the fractional part is >= 0.5.
std::int64_t round_nearest(double x);
// floor(x) + 1 with probability x - floor(x).
std::int64_t round_stochastic(double x, RandomStream& rng);
// Two's-complement range [-2^(B-1), 2^(B-1) - 1].
std::int64_t clamp_limit(std::int64_t r, int bits);

ScalarCode quantize_pipeline(double w, const QuantizerSpec& spec, RandomStream& rng);

Bracket grid_bracket(double w, const GridSpec& grid);
// Throws std::out_of_range when |w| > M.
double quantize_grid_sr(double w, const GridSpec& grid, RandomStream& rng);
ScalarCode quantize_grid(double w, const GridSpec& grid, Rounding rounding,
                         RandomStream& rng);

// Probability of emitting +1/G in the enhanced 1-bit stochastic quantizer.
double one_bit_probability(double w, double gain);
double quantize_one_bit(double w, double gain, Rounding rounding, RandomStream& rng);

QuantizedVector quantize_vector(std::span<const double> v, const QuantizerSpec& spec,
                                RandomStream& rng);

// 2^(B-1) / ||d||_inf, so the scaled vector spans exactly [-2^(B-1), 2^(B-1)].
// An all-zero vector gets 2^(B-1).
double dt_gain(std::span<const double> d, int bits);

struct LayerGain {
  double alpha = 0.0;  // 90th percentile of |w| in the layer
  int rho = 0;
  double base_gain = 1.0;   // 2^(B-1)
  double layer_gain = 1.0;  // 2^rho

  double total() const { return base_gain * layer_gain; }
};

inline constexpr int kMaxLayerExponent = 30;

// Value at index ceil(0.9 n) - 1 of the ascending |w|.
double abs_percentile90(std::span<const double> w);
std::vector<LayerGain> layered_gains(const WeightVector& w, int bits);

// One pipeline-quantized block per layer, each with its own gain.
std::vector<QuantizedVector> quantize_layered(const WeightVector& w,
                                              std::span<const LayerGain> gains, int bits,
                                              Rounding rounding, RandomStream& rng);

}  // namespace fedq
