#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedq/config.hpp"
#include "fedq/federation.hpp"
#include "fedq/models.hpp"

namespace fedq {

// Constants entering the convergence bounds.
struct BoundParams {
  double mu = 1.0;
  double L = 1.0;
  double kappa = 1.0;
  double gamma = 8.0;
  std::vector<double> sigma_sq;  // per-client mini-batch gradient variance
  double H_sq = 0.0;             // bound on the expected squared gradient norm
  double Gamma = 0.0;            // heterogeneity F* - (1/N) sum F_k*
  double M = 1.0;                // weight bound ||w||_inf <= M
  std::size_t d = 0;
  int E = 1;
  std::size_t K = 1;
  std::size_t N = 1;
  double w0_gap_sq = 0.0;        // ||w_0 - w*||^2

  void validate() const;  // throws std::invalid_argument
};

// Which quantization term enters D.
//   Thm1: weight upload with the growing schedule, dM^2/K.
//   Thm2: differential upload with fixed B, 4dE^2H^2/(K(2^B-1)^2).
//   Thm3: quantized downlink, dM^2.
//   Combined: uplink and downlink terms added; no proof covers this case.
enum class BoundVariant { Unquantized, Thm1, Thm2, Thm3, Combined };

std::string to_string(BoundVariant v);

struct BoundChoice {
  BoundVariant variant = BoundVariant::Unquantized;
  int bits = 0;                      // fixed uplink bits for the Thm2 term
  BoundVariant uplink_term = BoundVariant::Unquantized;
  bool downlink_term = false;
};

// Picks the bound for a configuration. For a varying differential schedule
// the smallest bit width over the run is used.
BoundChoice choose_bound(const FederationConfig& config, double mu, double gamma);

// F* - (1/N) sum_k F_k*.
double compute_gamma(const LossModel& model, std::span<const ClientDataset> clients,
                     const OptimumInfo& optimum);

struct NoiseEstimate {
  std::vector<double> sigma_sq;
  double H_sq = 0.0;
};

// sigma_k^2: largest (over probe weights) mean of ||g_batch - g_full||^2.
// H^2: largest observed ||g_batch||^2.
NoiseEstimate estimate_sigma_H(const LossModel& model, std::span<const ClientDataset> clients,
                               std::span<const std::vector<double>> probes,
                               std::size_t batch_size, std::size_t draws, std::uint64_t seed);

// Probe weights: w0, w*, the global iterates of an unquantized pilot run and
// Gaussian perturbations of those.
std::vector<std::vector<double>> probe_weights(const FederationConfig& config,
                                               const Problem& problem, std::int64_t pilot_rounds,
                                               std::size_t perturbations, std::uint64_t seed);

BoundParams estimate_bound_params(const FederationConfig& config, const Problem& problem,
                                  double mu, double L, std::size_t draws = 1000);

// D = sum sigma_k^2 / N^2 + 6 L Gamma + 8 (E-1)^2 H^2 + (N-K)/(N-1) (4/K) E^2 H^2 + quantization term.
double bound_D(const BoundChoice& choice, const BoundParams& p);
// 2 kappa / (gamma + t) * (D / mu + (2L + E mu / 4) ||w0 - w*||^2).
double bound_rhs(double t, const BoundParams& p, double D);

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

// Result of a numeric verification; printed as "key: value" lines.
struct Report {
  std::string title;
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<Check> checks;

  bool passed() const;
  std::string to_text() const;
};

// Saturating binomial coefficient.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

inline constexpr std::uint64_t kMaxSubsets = 1'000'000;

// Exhaustive check of the mean and variance of a uniform K-subset average.
// Throws std::invalid_argument when C(N, K) exceeds kMaxSubsets.
Report verify_lemma4(std::span<const std::vector<double>> vectors, std::size_t K);
Report verify_lemma4(std::size_t N, std::size_t K, std::size_t dim, std::uint64_t seed);

// Stochastic rounding onto the 2^B-point grid on [-M, M]: unbiased with
// variance at most (M / (2^B - 1))^2. Requires trials >= 10^4.
Report verify_lemma5(double M, int B, std::size_t trials, std::uint64_t seed);

// Vector quantization with G = 2^(B-1) / ||d||_inf: unbiased with
// E||Q(d) - d||^2 <= dim ||d||^2 / (2^B - 1)^2.
Report verify_lemma7(std::span<const double> d, int B, std::size_t trials, std::uint64_t seed);
Report verify_lemma7(std::size_t dim, int B, std::size_t trials, std::uint64_t seed);

}  // namespace fedq
