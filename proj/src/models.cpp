#include "fedq/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dims(std::span<const double> w, const Sample& s) {
  if (s.x.size() != w.size()) {
    throw std::invalid_argument("sample dimension " + std::to_string(s.x.size()) +
                                " does not match weight dimension " + std::to_string(w.size()));
  }
}

double sample_loss(const LossModel& model, std::span<const double> w, const Sample& s) {
  check_dims(w, s);
  if (model.kind == LossKind::QuadraticPerSample) return 0.5 * squared_distance(w, s.x);
  const double z = dot(w, s.x);
  return softplus(z) - static_cast<double>(s.label) * z;
}

// Accumulates the per-sample gradient into g.
void add_sample_grad(const LossModel& model, std::span<const double> w, const Sample& s,
                     std::vector<double>& g) {
  check_dims(w, s);
  if (model.kind == LossKind::QuadraticPerSample) {
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += w[i] - s.x[i];
    return;
  }
  const double r = sigmoid(dot(w, s.x)) - static_cast<double>(s.label);
  for (std::size_t i = 0; i < w.size(); ++i) g[i] += r * s.x[i];
}

void finish_grad(const LossModel& model, std::span<const double> w, std::size_t count,
                 std::vector<double>& g) {
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv + model.lambda * w[i];
}

std::vector<double> quadratic_minimizer(const LossModel& model, std::span<const Sample> data) {
  const std::size_t d = data.front().x.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& s : data) {
    if (s.x.size() != d) throw std::invalid_argument("solve_optimum: ragged samples");
    for (std::size_t i = 0; i < d; ++i) mean[i] += s.x[i];
  }
  // argmin of 0.5 mean||w - z||^2 + 0.5 lambda ||w||^2 is mean / (1 + lambda).
  const double scale = 1.0 / (static_cast<double>(data.size()) * (1.0 + model.lambda));
  for (double& m : mean) m *= scale;
  return mean;
}

std::vector<double> logistic_minimizer(const LossModel& model, std::span<const Sample> data,
                                       double tolerance) {
  const std::size_t d = data.front().x.size();
  std::vector<double> w(d, 0.0);
  constexpr int kMaxIterations = 200;
  for (int it = 0; it < kMaxIterations; ++it) {
    const std::vector<double> g = grad(model, w, data);
    if (std::sqrt(squared_norm(g)) <= tolerance) return w;

    Eigen::MatrixXd hessian = model.lambda * Eigen::MatrixXd::Identity(d, d);
    for (const auto& s : data) {
      const Eigen::Map<const Eigen::VectorXd> x(s.x.data(), static_cast<Eigen::Index>(d));
      const double p = sigmoid(dot(w, s.x));
      hessian.noalias() += (p * (1.0 - p) / static_cast<double>(data.size())) * (x * x.transpose());
    }
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd step = hessian.ldlt().solve(gv);
    if (!step.allFinite()) break;

    // Backtracking on the objective keeps the damped iteration monotone.
    // Near the optimum the loss decrease drops below rounding, so a full
    // step that halves the gradient norm is also accepted.
    const double f0 = loss(model, w, data);
    const double slope = -gv.dot(step);
    const double g_norm = std::sqrt(squared_norm(g));
    double t = 1.0;
    std::vector<double> trial(d);
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = w[i] - t * step[static_cast<Eigen::Index>(i)];
      if (loss(model, trial, data) <= f0 + 1e-4 * t * slope) break;
      if (ls == 0 && std::sqrt(squared_norm(grad(model, trial, data))) <= 0.5 * g_norm) break;
      t *= 0.5;
    }
    w = trial;
  }
  const double final_norm = std::sqrt(squared_norm(grad(model, w, data)));
  if (final_norm <= tolerance) return w;
  char msg[128];
  std::snprintf(msg, sizeof msg, "logistic optimum not reached: gradient norm %.3g > %.3g",
                final_norm, tolerance);
  throw SolverFailure(msg);
}

}  // namespace

double loss(const LossModel& model, std::span<const double> w, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("loss: empty sample set");
  double total = 0.0;
  for (const auto& s : data) total += sample_loss(model, w, s);
  return total / static_cast<double>(data.size()) + 0.5 * model.lambda * squared_norm(w);
}

std::vector<double> grad(const LossModel& model, std::span<const double> w,
                         std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("grad: empty batch");
  std::vector<double> g(w.size(), 0.0);
  for (const auto& s : batch) add_sample_grad(model, w, s, g);
  finish_grad(model, w, batch.size(), g);
  return g;
}

std::vector<double> grad_indexed(const LossModel& model, std::span<const double> w,
                                 std::span<const Sample> data,
                                 std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("grad: empty batch");
  std::vector<double> g(w.size(), 0.0);
  for (std::size_t i : indices) add_sample_grad(model, w, data[i], g);
  finish_grad(model, w, indices.size(), g);
  return g;
}

std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch_size, RandomStream& rng) {
  if (batch_size < 1 || batch_size > n) {
    throw std::invalid_argument("batch size must be in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (batch_size == n) return idx;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

WeightVector local_train(const LossModel& model, const WeightVector& w,
                         const ClientDataset& data, int local_steps, std::size_t batch_size,
                         double eta, RandomStream& rng) {
  if (local_steps < 1) throw std::invalid_argument("local_train: E must be >= 1");
  std::vector<double> current(w.values().begin(), w.values().end());
  for (int step = 0; step < local_steps; ++step) {
    const auto batch = sample_batch(data.size(), batch_size, rng);
    const auto g = grad_indexed(model, current, data.samples, batch);
    for (std::size_t i = 0; i < current.size(); ++i) current[i] -= eta * g[i];
  }
  return w.with_values(std::move(current));
}

Dataset pool(std::span<const ClientDataset> clients) {
  Dataset all;
  for (const auto& c : clients) all.insert(all.end(), c.samples.begin(), c.samples.end());
  return all;
}

std::vector<double> minimize(const LossModel& model, std::span<const Sample> data,
                             double tolerance) {
  if (data.empty()) throw std::invalid_argument("solve_optimum: empty dataset");
  if (model.kind == LossKind::QuadraticPerSample) return quadratic_minimizer(model, data);
  return logistic_minimizer(model, data, tolerance);
}

OptimumInfo solve_optimum(const LossModel& model, std::span<const ClientDataset> clients,
                          double tolerance) {
  if (clients.empty()) throw std::invalid_argument("solve_optimum: no clients");
  OptimumInfo info;
  const Dataset all = pool(clients);
  info.w_star = minimize(model, all, tolerance);
  info.f_star = loss(model, info.w_star, all);
  info.client_f_star.reserve(clients.size());
  for (const auto& c : clients) {
    const auto wk = minimize(model, c.samples, tolerance);
    info.client_f_star.push_back(loss(model, wk, c.samples));
  }
  return info;
}

double largest_gram_eigenvalue(std::span<const Sample> data, double tolerance) {
  if (data.empty()) throw std::invalid_argument("largest_gram_eigenvalue: empty dataset");
  const auto d = static_cast<Eigen::Index>(data.front().x.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : data) {
    const Eigen::Map<const Eigen::VectorXd> x(s.x.data(), d);
    gram.noalias() += x * x.transpose();
  }
  gram /= static_cast<double>(data.size());

  Eigen::VectorXd v = Eigen::VectorXd::Ones(d).normalized();
  double eig = 0.0;
  for (int it = 0; it < 100000; ++it) {
    const Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double estimate = v.dot(next);
    v = next / norm;
    if (std::abs(estimate - eig) <= tolerance * std::max(1.0, std::abs(estimate))) {
      return estimate;
    }
    eig = estimate;
  }
  return eig;
}

SmoothnessConstants smoothness(const LossModel& model, std::span<const Sample> data) {
  if (model.kind == LossKind::QuadraticPerSample) {
    return {1.0 + model.lambda, 1.0 + model.lambda};
  }
  return {model.lambda, model.lambda + largest_gram_eigenvalue(data)};
}

Dataset load_dataset_csv(const std::filesystem::path& path, LossKind kind) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset has no header: " + path.string());
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cols.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": not a number: '" + cell + "'");
      }
    }
    Sample s;
    if (kind == LossKind::LogisticRegression) {
      if (cols.size() < 2) throw std::invalid_argument("logistic rows need features and a label");
      const double y = cols.back();
      if (y != 0.0 && y != 1.0) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": label must be 0 or 1");
      }
      s.label = static_cast<int>(y);
      cols.pop_back();
    }
    s.x = std::move(cols);
    if (!data.empty() && s.x.size() != data.front().x.size()) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": inconsistent column count");
    }
    data.push_back(std::move(s));
  }
  if (data.empty()) throw std::invalid_argument("dataset is empty: " + path.string());
  return data;
}

}  // namespace fedq
