#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedq {

// Half-open index range [begin, end) of one layer inside a flat vector.
struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const LayerRange&) const = default;
};

// Flat parameter vector partitioned into contiguous layers. The layer
// ranges always partition [0, size()) in order.
class WeightVector {
 public:
  WeightVector() = default;
  // Single layer spanning all values.
  explicit WeightVector(std::vector<double> values);
  WeightVector(std::vector<double> values, std::vector<LayerRange> layers);

  static WeightVector zeros(std::size_t dim);
  // Layers of the given sizes, all values zero.
  static WeightVector zeros_layered(std::span<const std::size_t> layer_sizes);

  std::size_t size() const { return values_.size(); }
  std::size_t layer_count() const { return layers_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }

  const std::vector<LayerRange>& layers() const { return layers_; }
  std::span<const double> layer(std::size_t i) const;
  std::span<double> layer(std::size_t i);

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  // Same layout, replaced values. Size must match.
  WeightVector with_values(std::vector<double> values) const;

  bool operator==(const WeightVector&) const = default;

 private:
  void validate() const;

  std::vector<double> values_;
  std::vector<LayerRange> layers_;
};

double inf_norm(std::span<const double> v);
double squared_norm(std::span<const double> v);
double squared_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace fedq
