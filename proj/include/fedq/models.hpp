#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "fedq/rng.hpp"
#include "fedq/weight_vector.hpp"

namespace fedq {

// One data point. Quadratic models use x as the target point z; logistic
// regression uses (x, label) with label in {0, 1}. For synthetic quadratic
// data the label carries the generating cluster id.
struct Sample {
  std::vector<double> x;
  int label = 0;

  bool operator==(const Sample&) const = default;
};

using Dataset = std::vector<Sample>;

struct ClientDataset {
  std::vector<Sample> samples;
  // Position of each sample in the source dataset (empty for generated data).
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return samples.size(); }
};

enum class LossKind { QuadraticPerSample, LogisticRegression };

// QuadraticPerSample: f(w, z) = 0.5 ||w - z||^2 (+ 0.5 lambda ||w||^2).
// LogisticRegression: f(w, (x, y)) = log(1 + e^{w.x}) - y w.x + 0.5 lambda ||w||^2.
struct LossModel {
  LossKind kind = LossKind::QuadraticPerSample;
  double lambda = 0.0;
};

struct SmoothnessConstants {
  double mu = 1.0;
  double L = 1.0;
};

struct OptimumInfo {
  std::vector<double> w_star;
  double f_star = 0.0;
  // Minimum of each client's local objective, F_k^*.
  std::vector<double> client_f_star;
};

double loss(const LossModel& model, std::span<const double> w, std::span<const Sample> data);
std::vector<double> grad(const LossModel& model, std::span<const double> w,
                         std::span<const Sample> batch);
// Gradient of the average loss over data[indices].
std::vector<double> grad_indexed(const LossModel& model, std::span<const double> w,
                                 std::span<const Sample> data,
                                 std::span<const std::size_t> indices);

// BS distinct indices drawn uniformly from [0, n), returned in ascending order.
std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch_size, RandomStream& rng);

// E mini-batch SGD steps with a fixed step size; each step draws a fresh batch.
WeightVector local_train(const LossModel& model, const WeightVector& w,
                         const ClientDataset& data, int local_steps, std::size_t batch_size,
                         double eta, RandomStream& rng);

// All client samples concatenated in client order.
Dataset pool(std::span<const ClientDataset> clients);

// Closed form for quadratic losses; damped Newton for logistic regression.
// Throws SolverFailure if the gradient norm does not reach tolerance.
OptimumInfo solve_optimum(const LossModel& model, std::span<const ClientDataset> clients,
                          double tolerance = 1e-9);
std::vector<double> minimize(const LossModel& model, std::span<const Sample> data,
                             double tolerance = 1e-9);

// Quadratic: mu = L = 1 (+ lambda). Logistic: mu = lambda, L = lambda plus the
// largest eigenvalue of the empirical feature Gram matrix (power iteration).
SmoothnessConstants smoothness(const LossModel& model, std::span<const Sample> data);
double largest_gram_eigenvalue(std::span<const Sample> data, double tolerance = 1e-8);

// CSV with a header row and one sample per line. For logistic data the last
// column is a {0, 1} label; for quadratic data every column is a coordinate.
Dataset load_dataset_csv(const std::filesystem::path& path, LossKind kind);

}  // namespace fedq
