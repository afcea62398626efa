#include "fedq/weight_vector.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedq {

WeightVector::WeightVector(std::vector<double> values)
    : values_(std::move(values)), layers_{LayerRange{0, values_.size()}} {
  validate();
}

WeightVector::WeightVector(std::vector<double> values,
                           std::vector<LayerRange> layers)
    : values_(std::move(values)), layers_(std::move(layers)) {
  validate();
}

WeightVector WeightVector::zeros(std::size_t dim) {
  return WeightVector(std::vector<double>(dim, 0.0));
}

WeightVector WeightVector::zeros_layered(std::span<const std::size_t> layer_sizes) {
  std::vector<LayerRange> layers;
  std::size_t offset = 0;
  for (std::size_t n : layer_sizes) {
    layers.push_back({offset, offset + n});
    offset += n;
  }
  return WeightVector(std::vector<double>(offset, 0.0), std::move(layers));
}

std::span<const double> WeightVector::layer(std::size_t i) const {
  const auto& r = layers_.at(i);
  return std::span<const double>(values_).subspan(r.begin, r.size());
}

std::span<double> WeightVector::layer(std::size_t i) {
  const auto& r = layers_.at(i);
  return std::span<double>(values_).subspan(r.begin, r.size());
}

WeightVector WeightVector::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) {
    throw std::invalid_argument("WeightVector::with_values: dimension mismatch");
  }
  return WeightVector(std::move(values), layers_);
}

void WeightVector::validate() const {
  if (values_.empty() && layers_.size() == 1 && layers_[0].size() == 0) return;
  std::size_t expected = 0;
  for (const auto& r : layers_) {
    if (r.begin != expected || r.end <= r.begin) {
      throw std::invalid_argument("WeightVector: layers must be non-empty and partition [0, d) in order");
    }
    expected = r.end;
  }
  if (expected != values_.size()) {
    throw std::invalid_argument("WeightVector: layer ranges cover " + std::to_string(expected) +
                                " of " + std::to_string(values_.size()) + " values");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("WeightVector: non-finite value");
  }
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace fedq
