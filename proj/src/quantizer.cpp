#include "fedq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedq {

namespace {

double pow2(int e) { return std::ldexp(1.0, e); }

void require_finite(double x, const char* where) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(where) + ": non-finite input");
  }
}

void require_bits(int bits) {
  if (bits < 1 || bits > kMaxBits) {
    throw std::invalid_argument("bit-width must be in [1, " + std::to_string(kMaxBits) +
                                "], got " + std::to_string(bits));
  }
}

}  // namespace

QuantizerSpec QuantizerSpec::native(int bits, Rounding rounding, Grid grid) {
  require_bits(bits);
  QuantizerSpec s;
  s.bits = bits;
  s.gain = pow2(bits - 1);
  s.structure = Structure::Native;
  s.rounding = rounding;
  s.grid = grid;
  return s;
}

QuantizerSpec QuantizerSpec::tuned(int bits, double gain, Rounding rounding, Grid grid) {
  QuantizerSpec s;
  s.bits = bits;
  s.gain = gain;
  s.structure = Structure::Tuned;
  s.rounding = rounding;
  s.grid = grid;
  s.validate();
  return s;
}

QuantizerSpec QuantizerSpec::enhanced_one_bit(double gain, Rounding rounding) {
  QuantizerSpec s;
  s.bits = 1;
  s.gain = gain;
  s.structure = Structure::Tuned;
  s.rounding = rounding;
  s.one_bit_enhanced = true;
  s.validate();
  return s;
}

void QuantizerSpec::validate() const {
  require_bits(bits);
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw std::invalid_argument("quantizer gain must be positive and finite");
  }
  if (structure == Structure::Native && gain != pow2(bits - 1)) {
    throw std::invalid_argument("native quantizer requires gain 2^(B-1)");
  }
  if (one_bit_enhanced && bits != 1) {
    throw std::invalid_argument("enhanced 1-bit quantizer requires B = 1");
  }
}

Codebook QuantizerSpec::codebook() const {
  if (one_bit_enhanced) return Codebook::OneBit;
  return grid == Grid::Pipeline ? Codebook::Pipeline : Codebook::SymmetricGrid;
}

double QuantizerSpec::range_bound() const { return pow2(bits - 1) / gain; }

void GridSpec::validate() const {
  require_bits(bits);
  if (!(range_bound > 0.0) || !std::isfinite(range_bound)) {
    throw std::invalid_argument("grid range bound must be positive and finite");
  }
}

std::uint64_t GridSpec::interval_count() const {
  return (std::uint64_t{1} << bits) - 1;
}

double GridSpec::step() const {
  return 2.0 * range_bound / static_cast<double>(interval_count());
}

double GridSpec::point(std::uint64_t i) const {
  const auto n = static_cast<double>(interval_count());
  const double ratio = (2.0 * static_cast<double>(i) - n) / n;
  return range_bound * ratio;
}

double Bracket::mse(double w) const {
  // (w - low)(high - w) is the closed form; evaluate the two-outcome sum
  // instead so rounding of p_high is reflected.
  const double dl = low - w;
  const double dh = high - w;
  return (1.0 - p_high) * dl * dl + p_high * dh * dh;
}

double QuantizedVector::decode(std::int64_t c) const {
  switch (codebook) {
    case Codebook::Pipeline:
      return static_cast<double>(c) / gain;
    case Codebook::OneBit:
      return static_cast<double>(2 * c + 1) / gain;
    case Codebook::SymmetricGrid: {
      const GridSpec grid{pow2(bits - 1) / gain, bits};
      const auto index = static_cast<std::uint64_t>(c + (std::int64_t{1} << (bits - 1)));
      return grid.point(index);
    }
  }
  throw std::logic_error("unknown codebook");
}

std::vector<double> QuantizedVector::dequantize() const {
  std::vector<double> out(codewords.size());
  std::transform(codewords.begin(), codewords.end(), out.begin(),
                 [this](std::int64_t c) { return decode(c); });
  return out;
}

std::int64_t round_nearest(double x) {
  require_finite(x, "round_nearest");
  const double f = std::floor(x);
  const auto base = static_cast<std::int64_t>(f);
  return (x - f < 0.5) ? base : base + 1;
}

std::int64_t round_stochastic(double x, RandomStream& rng) {
  require_finite(x, "round_stochastic");
  const double f = std::floor(x);
  const auto base = static_cast<std::int64_t>(f);
  const double frac = x - f;
  return rng.uniform() < frac ? base + 1 : base;
}

std::int64_t clamp_limit(std::int64_t r, int bits) {
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  return std::clamp(r, lo, hi);
}

ScalarCode quantize_pipeline(double w, const QuantizerSpec& spec, RandomStream& rng) {
  require_finite(w, "quantize_pipeline");
  // Saturate before the integer conversion so huge inputs cannot overflow.
  const double limit = pow2(kMaxBits + 1);
  const double amplified = std::clamp(w * spec.gain, -limit, limit);
  const std::int64_t r = spec.rounding == Rounding::Nearest
                             ? round_nearest(amplified)
                             : round_stochastic(amplified, rng);
  const std::int64_t c = clamp_limit(r, spec.bits);
  return {c, static_cast<double>(c) / spec.gain};
}

Bracket grid_bracket(double w, const GridSpec& grid) {
  require_finite(w, "quantize_grid");
  const double m = grid.range_bound;
  // A range bound derived as 2^(B-1)/G can sit an ulp below max|w|.
  if (std::abs(w) > m && std::abs(w) <= m * (1.0 + 1e-14)) w = std::copysign(m, w);
  if (std::abs(w) > m) {
    throw std::out_of_range("quantize_grid: |w| = " + std::to_string(std::abs(w)) +
                            " exceeds range bound M = " + std::to_string(m));
  }
  const std::uint64_t n = grid.interval_count();
  const double u = (w / m + 1.0) * 0.5 * static_cast<double>(n);
  auto lo = static_cast<std::uint64_t>(std::max(0.0, std::floor(u)));
  lo = std::min(lo, n - 1);
  Bracket b;
  b.low_index = lo;
  b.low = grid.point(lo);
  b.high = grid.point(lo + 1);
  // Floating-point placement of u can land one interval off near a codepoint.
  if (w < b.low && lo > 0) {
    --lo;
    b.low_index = lo;
    b.high = b.low;
    b.low = grid.point(lo);
  } else if (w > b.high && lo + 1 < n) {
    ++lo;
    b.low_index = lo;
    b.low = b.high;
    b.high = grid.point(lo + 1);
  }
  b.p_high = std::clamp((w - b.low) / (b.high - b.low), 0.0, 1.0);
  return b;
}

double quantize_grid_sr(double w, const GridSpec& grid, RandomStream& rng) {
  return quantize_grid(w, grid, Rounding::Stochastic, rng).value;
}

ScalarCode quantize_grid(double w, const GridSpec& grid, Rounding rounding,
                         RandomStream& rng) {
  const Bracket b = grid_bracket(w, grid);
  const bool up = rounding == Rounding::Stochastic ? rng.uniform() < b.p_high
                                                   : b.p_high >= 0.5;
  const std::uint64_t index = b.low_index + (up ? 1 : 0);
  const auto offset = std::int64_t{1} << (grid.bits - 1);
  return {static_cast<std::int64_t>(index) - offset, up ? b.high : b.low};
}

double one_bit_probability(double w, double gain) {
  return std::min(1.0, std::max(0.0, (w + 1.0 / gain) / (2.0 / gain)));
}

double quantize_one_bit(double w, double gain, Rounding rounding, RandomStream& rng) {
  require_finite(w, "quantize_one_bit");
  if (!(gain > 0.0)) throw std::invalid_argument("quantize_one_bit: gain must be positive");
  bool positive = false;
  if (rounding == Rounding::Nearest) {
    positive = w >= 0.0;
  } else {
    positive = rng.uniform() < one_bit_probability(w, gain);
  }
  return (positive ? 1.0 : -1.0) / gain;
}

QuantizedVector quantize_vector(std::span<const double> v, const QuantizerSpec& spec,
                                RandomStream& rng) {
  spec.validate();
  QuantizedVector out;
  out.gain = spec.gain;
  out.bits = spec.bits;
  out.codebook = spec.codebook();
  out.codewords.reserve(v.size());
  switch (out.codebook) {
    case Codebook::Pipeline:
      for (double w : v) out.codewords.push_back(quantize_pipeline(w, spec, rng).codeword);
      break;
    case Codebook::OneBit:
      for (double w : v) {
        const double q = quantize_one_bit(w, spec.gain, spec.rounding, rng);
        out.codewords.push_back(q > 0.0 ? 0 : -1);
      }
      break;
    case Codebook::SymmetricGrid: {
      const GridSpec grid{spec.range_bound(), spec.bits};
      for (double w : v) out.codewords.push_back(quantize_grid(w, grid, spec.rounding, rng).codeword);
      break;
    }
  }
  return out;
}

double dt_gain(std::span<const double> d, int bits) {
  require_bits(bits);
  const double norm = inf_norm(d);
  if (!std::isfinite(norm)) throw std::invalid_argument("dt_gain: non-finite input");
  const double base = pow2(bits - 1);
  return norm == 0.0 ? base : base / norm;
}

double abs_percentile90(std::span<const double> w) {
  if (w.empty()) throw std::invalid_argument("abs_percentile90: empty layer");
  std::vector<double> mags(w.size());
  std::transform(w.begin(), w.end(), mags.begin(), [](double x) { return std::abs(x); });
  std::sort(mags.begin(), mags.end());
  const std::size_t n = mags.size();
  const std::size_t rank = (9 * n + 9) / 10;  // ceil(0.9 n)
  return mags[rank - 1];
}

std::vector<LayerGain> layered_gains(const WeightVector& w, int bits) {
  require_bits(bits);
  std::vector<LayerGain> gains;
  gains.reserve(w.layer_count());
  for (std::size_t i = 0; i < w.layer_count(); ++i) {
    LayerGain g;
    g.base_gain = pow2(bits - 1);
    g.alpha = abs_percentile90(w.layer(i));
    const double alpha = g.alpha > 0.0 ? g.alpha : pow2(-kMaxLayerExponent);
    const double rho = std::floor(std::log2(1.0 / alpha));
    g.rho = static_cast<int>(std::min<double>(rho, kMaxLayerExponent));
    g.layer_gain = pow2(g.rho);
    gains.push_back(g);
  }
  return gains;
}

std::vector<QuantizedVector> quantize_layered(const WeightVector& w,
                                              std::span<const LayerGain> gains, int bits,
                                              Rounding rounding, RandomStream& rng) {
  if (gains.size() != w.layer_count()) {
    throw std::invalid_argument("quantize_layered: one gain per layer required");
  }
  std::vector<QuantizedVector> out;
  out.reserve(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto spec = QuantizerSpec::tuned(bits, gains[i].total(), rounding);
    out.push_back(quantize_vector(w.layer(i), spec, rng));
  }
  return out;
}

}  // namespace fedq
