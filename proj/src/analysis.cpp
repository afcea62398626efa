#include "fedq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedq/metrics_io.hpp"
#include "fedq/quantizer.hpp"
#include "fedq/rng.hpp"
#include "fedq/schedules.hpp"

namespace fedq {

void BoundParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("bound parameter ") + name + " must be positive");
    }
  };
  positive(mu, "mu");
  positive(L, "L");
  positive(gamma, "gamma");
  positive(M, "M");
  if (N == 0 || K == 0 || K > N) throw std::invalid_argument("bound parameters need 1 <= K <= N");
  if (E < 1) throw std::invalid_argument("bound parameter E must be >= 1");
  if (sigma_sq.size() != N) throw std::invalid_argument("sigma_sq needs one entry per client");
  if (H_sq < 0.0 || w0_gap_sq < 0.0) throw std::invalid_argument("negative bound parameter");
}

std::string to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::Unquantized: return "unquantized";
    case BoundVariant::Thm1: return "weight_uplink";
    case BoundVariant::Thm2: return "differential_uplink";
    case BoundVariant::Thm3: return "quantized_downlink";
    case BoundVariant::Combined: return "combined";
  }
  return "?";
}

BoundChoice choose_bound(const FederationConfig& config, double mu, double gamma) {
  BoundChoice c;
  if (config.uplink_mode == UplinkMode::Weight) {
    c.uplink_term = BoundVariant::Thm1;
  } else if (config.uplink_mode == UplinkMode::Differential &&
             config.uplink_bits_schedule.quantized()) {
    c.uplink_term = BoundVariant::Thm2;
    int min_bits = kMaxBits;
    for (std::int64_t t = 0; t < std::max<std::int64_t>(config.T, 1); ++t) {
      min_bits = std::min(min_bits, config.uplink_bits_schedule.bits_at(t, mu, gamma));
    }
    c.bits = min_bits;
  }
  c.downlink_term = config.downlink_mode != DownlinkMode::Float;

  if (c.uplink_term != BoundVariant::Unquantized && c.downlink_term) {
    c.variant = BoundVariant::Combined;
  } else if (c.downlink_term) {
    c.variant = BoundVariant::Thm3;
  } else {
    c.variant = c.uplink_term;
  }
  return c;
}

double compute_gamma(const LossModel& model, std::span<const ClientDataset> clients,
                     const OptimumInfo& optimum) {
  (void)model;
  if (clients.empty() || optimum.client_f_star.size() != clients.size()) {
    throw std::invalid_argument("compute_gamma: optimum does not match the clients");
  }
  double mean_local = 0.0;
  for (double f : optimum.client_f_star) mean_local += f;
  mean_local /= static_cast<double>(clients.size());
  return optimum.f_star - mean_local;
}

NoiseEstimate estimate_sigma_H(const LossModel& model, std::span<const ClientDataset> clients,
                               std::span<const std::vector<double>> probes,
                               std::size_t batch_size, std::size_t draws, std::uint64_t seed) {
  if (probes.empty()) throw std::invalid_argument("estimate_sigma_H: no probe weights");
  if (draws < 1000) throw std::invalid_argument("estimate_sigma_H: draws must be at least 1000");
  NoiseEstimate est;
  est.sigma_sq.assign(clients.size(), 0.0);
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto& samples = clients[k].samples;
    if (batch_size == 0 || batch_size > samples.size()) {
      throw std::invalid_argument("estimate_sigma_H: batch size exceeds a client dataset");
    }
    auto rng = RandomStream::derive(seed, 0, k, StreamKind::Probe);
    for (const auto& w : probes) {
      const auto full = grad(model, w, samples);
      double acc = 0.0;
      for (std::size_t i = 0; i < draws; ++i) {
        const auto idx = sample_batch(samples.size(), batch_size, rng);
        const auto g = grad_indexed(model, w, samples, idx);
        acc += squared_distance(g, full);
        est.H_sq = std::max(est.H_sq, squared_norm(g));
      }
      est.sigma_sq[k] = std::max(est.sigma_sq[k], acc / static_cast<double>(draws));
    }
  }
  return est;
}

std::vector<std::vector<double>> probe_weights(const FederationConfig& config,
                                               const Problem& problem, std::int64_t pilot_rounds,
                                               std::size_t perturbations, std::uint64_t seed) {
  std::vector<std::vector<double>> probes;
  probes.push_back(problem.initial_weights().data());
  probes.push_back(problem.optimum.w_star);

  if (pilot_rounds > 0) {
    FederationConfig pilot = config;
    pilot.T = pilot_rounds;
    pilot.uplink_mode = UplinkMode::Float;
    pilot.downlink_mode = DownlinkMode::Float;
    pilot.uplink_bits_schedule = ScheduleSpec::floating();
    pilot.downlink_bits_schedule = ScheduleSpec::floating();
    pilot.one_bit_enhanced = false;
    pilot.static_layered = false;
    Federation fed(pilot, problem);
    for (std::int64_t t = 0; t < pilot_rounds; ++t) {
      fed.run_round();
      probes.push_back(fed.global().data());
    }
  }

  auto rng = RandomStream::derive(seed, 0, 0, StreamKind::Probe);
  const std::size_t base = probes.size();
  for (std::size_t i = 0; i < perturbations; ++i) {
    auto w = probes[rng.below(base)];
    const double scale = 0.1 * (1.0 + inf_norm(w));
    for (double& x : w) x += scale * rng.normal();
    probes.push_back(std::move(w));
  }
  return probes;
}

BoundParams estimate_bound_params(const FederationConfig& config, const Problem& problem,
                                  double mu, double L, std::size_t draws) {
  BoundParams p;
  p.mu = mu;
  p.L = L;
  p.kappa = L / mu;
  p.gamma = schedule_offset(mu, L, config.E);
  p.E = config.E;
  p.N = problem.clients.size();
  p.K = config.K;
  p.M = config.weight_bound;
  p.d = problem.optimum.w_star.size();
  p.Gamma = compute_gamma(problem.model, problem.clients, problem.optimum);
  p.w0_gap_sq = squared_distance(problem.initial_weights().data(), problem.optimum.w_star);

  const std::uint64_t seed = mix64(config.seed ^ 0x5eedb0u);
  const auto probes = probe_weights(config, problem, std::min<std::int64_t>(config.T, 50), 20, seed);
  const auto noise =
      estimate_sigma_H(problem.model, problem.clients, probes, config.batch_size, draws, seed);
  p.sigma_sq = noise.sigma_sq;
  p.H_sq = noise.H_sq;
  p.validate();
  return p;
}

double bound_D(const BoundChoice& choice, const BoundParams& p) {
  p.validate();
  const double N = static_cast<double>(p.N);
  const double K = static_cast<double>(p.K);
  const double E = static_cast<double>(p.E);
  const double d = static_cast<double>(p.d);
  const double M2 = p.M * p.M;

  double D = std::accumulate(p.sigma_sq.begin(), p.sigma_sq.end(), 0.0) / (N * N);
  D += 6.0 * p.L * p.Gamma;
  D += 8.0 * (E - 1.0) * (E - 1.0) * p.H_sq;
  if (p.N > 1) D += (N - K) / (N - 1.0) * (4.0 / K) * E * E * p.H_sq;

  if (choice.uplink_term == BoundVariant::Thm1) {
    D += d * M2 / K;
  } else if (choice.uplink_term == BoundVariant::Thm2) {
    if (choice.bits < 1) throw std::invalid_argument("bound_D: differential term needs bits >= 1");
    const double levels = std::ldexp(1.0, choice.bits) - 1.0;
    D += 4.0 * d * E * E * p.H_sq / (K * levels * levels);
  }
  if (choice.downlink_term) D += d * M2;
  return D;
}

double bound_rhs(double t, const BoundParams& p, double D) {
  const double start = (2.0 * p.L + p.E * p.mu / 4.0) * p.w0_gap_sq;
  return 2.0 * p.kappa / (p.gamma + t) * (D / p.mu + start);
}

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string Report::to_text() const {
  std::ostringstream out;
  out << "check: " << title << '\n';
  for (const auto& [k, v] : fields) out << k << ": " << v << '\n';
  for (const auto& c : checks) {
    out << c.name << ": " << format_double(c.value) << " (limit " << format_double(c.limit)
        << ", " << (c.passed ? "pass" : "fail") << ")\n";
  }
  out << "result: " << (passed() ? "pass" : "fail") << '\n';
  return out.str();
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // r * (n - k + i) / i is exact at every step; detect overflow first.
    const std::uint64_t f = n - k + i;
    const std::uint64_t g = std::gcd(r, i);
    const std::uint64_t r1 = r / g;
    const std::uint64_t f1 = f / (i / g);
    if (r1 > kMax / f1) return kMax;
    r = r1 * f1;
  }
  return r;
}

namespace {

Check at_most(std::string name, double value, double limit) {
  return {std::move(name), value, limit, value <= limit};
}

std::vector<double> random_vector(std::size_t dim, RandomStream& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

Report verify_lemma4(std::span<const std::vector<double>> vectors, std::size_t K) {
  const std::size_t N = vectors.size();
  if (N == 0 || K == 0 || K > N) throw std::invalid_argument("lemma4: need 1 <= K <= N");
  const std::uint64_t subsets = binomial(N, K);
  if (subsets > kMaxSubsets) {
    throw std::invalid_argument("lemma4: C(N, K) = " + std::to_string(subsets) +
                                " exceeds the enumeration limit");
  }
  const std::size_t dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::invalid_argument("lemma4: vectors differ in dimension");
  }

  std::vector<double> mean(dim, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
  }
  for (double& x : mean) x /= static_cast<double>(N);
  double spread = 0.0;
  for (const auto& v : vectors) spread += squared_distance(v, mean);
  const double predicted =
      N == 1 ? 0.0
             : (1.0 - static_cast<double>(K) / N) / (static_cast<double>(K) * (N - 1.0)) * spread;

  // Enumerate subsets in lexicographic order.
  std::vector<std::size_t> idx(K);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> mean_of_means(dim, 0.0), subset_mean(dim);
  double variance = 0.0;
  for (std::uint64_t s = 0; s < subsets; ++s) {
    std::fill(subset_mean.begin(), subset_mean.end(), 0.0);
    for (std::size_t i : idx) {
      for (std::size_t j = 0; j < dim; ++j) subset_mean[j] += vectors[i][j];
    }
    for (std::size_t j = 0; j < dim; ++j) {
      subset_mean[j] /= static_cast<double>(K);
      mean_of_means[j] += subset_mean[j];
    }
    variance += squared_distance(subset_mean, mean);

    std::size_t pos = K;
    while (pos > 0 && idx[pos - 1] == N - K + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t i = pos; i < K; ++i) idx[i] = idx[i - 1] + 1;
  }
  variance /= static_cast<double>(subsets);
  double mean_err = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    mean_err = std::max(mean_err,
                        std::abs(mean_of_means[j] / static_cast<double>(subsets) - mean[j]));
  }

  Report r;
  r.title = "lemma4";
  r.fields = {{"N", std::to_string(N)},
              {"K", std::to_string(K)},
              {"dim", std::to_string(dim)},
              {"subsets", std::to_string(subsets)},
              {"variance_enumerated", format_double(variance)},
              {"variance_predicted", format_double(predicted)}};
  r.checks.push_back(at_most("mean_abs_error", mean_err, 1e-12));
  r.checks.push_back(at_most("variance_abs_error", std::abs(variance - predicted), 1e-10));
  return r;
}

Report verify_lemma4(std::size_t N, std::size_t K, std::size_t dim, std::uint64_t seed) {
  if (N == 0 || dim == 0) throw std::invalid_argument("lemma4: N and dim must be positive");
  if (K == 0 || K > N) throw std::invalid_argument("lemma4: need 1 <= K <= N");
  if (binomial(N, K) > kMaxSubsets) {
    throw std::invalid_argument("lemma4: C(N, K) exceeds the enumeration limit");
  }
  auto rng = RandomStream::derive(seed, 0, 0, StreamKind::Verify);
  std::vector<std::vector<double>> vectors;
  for (std::size_t i = 0; i < N; ++i) vectors.push_back(random_vector(dim, rng));
  return verify_lemma4(vectors, K);
}

Report verify_lemma5(double M, int B, std::size_t trials, std::uint64_t seed) {
  if (trials < 10'000) throw std::invalid_argument("lemma5: trials must be at least 10000");
  const GridSpec grid{M, B};
  grid.validate();
  const double bound = std::pow(M / static_cast<double>(grid.interval_count()), 2);
  auto draw_w = RandomStream::derive(seed, 0, 0, StreamKind::Verify);
  auto draw_q = RandomStream::derive(seed, 0, 1, StreamKind::Verify);

  double worst_mean = 0.0, worst_var = 0.0;
  double err_sum = 0.0, var_sum = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double w = M * (2.0 * draw_w.uniform() - 1.0);
    const Bracket b = grid_bracket(w, grid);
    worst_mean = std::max(worst_mean, std::abs(b.mean() - w));
    const double var = b.mse(w);
    worst_var = std::max(worst_var, var);
    var_sum += var;
    err_sum += quantize_grid_sr(w, grid, draw_q) - w;
  }
  // Sum of independent errors has variance sum(var); compare its mean to 4 SE.
  const double n = static_cast<double>(trials);
  const double mc_mean = err_sum / n;
  const double mc_se = std::sqrt(var_sum) / n;

  Report r;
  r.title = "lemma5";
  r.fields = {{"M", format_double(M)},
              {"B", std::to_string(B)},
              {"trials", std::to_string(trials)},
              {"variance_bound", format_double(bound)}};
  r.checks.push_back(at_most("max_bias", worst_mean, 1e-12 * std::max(1.0, M)));
  r.checks.push_back(at_most("max_variance", worst_var, bound * (1.0 + 1e-12)));
  r.checks.push_back(at_most("mc_mean_error", std::abs(mc_mean), 4.0 * mc_se + 1e-15));
  return r;
}

Report verify_lemma7(std::span<const double> d, int B, std::size_t trials, std::uint64_t seed) {
  if (d.empty() || inf_norm(d) == 0.0) throw std::invalid_argument("lemma7: vector must be nonzero");
  if (trials == 0) throw std::invalid_argument("lemma7: trials must be positive");
  const double dmax = inf_norm(d);
  const double levels = std::ldexp(1.0, B) - 1.0;
  const double dim = static_cast<double>(d.size());
  const double bound = dim * squared_norm(d) / (levels * levels);

  Report r;
  r.title = "lemma7";
  r.fields = {{"dim", std::to_string(d.size())},
              {"B", std::to_string(B)},
              {"trials", std::to_string(trials)},
              {"mse_bound", format_double(bound)}};
  const double gain = dt_gain(d, B);
  const GridSpec grid{std::ldexp(1.0, B - 1) / gain, B};
  grid.validate();

  std::vector<double> var(d.size());
  double worst_bias = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Bracket b = grid_bracket(d[i], grid);
    worst_bias = std::max(worst_bias, std::abs(b.mean() - d[i]));
    var[i] = b.mse(d[i]);
    mse += var[i];
  }

  auto rng = RandomStream::derive(seed, 0, 0, StreamKind::Verify);
  std::vector<double> err_sum(d.size(), 0.0);
  double sq_sum = 0.0, sq_sq_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double e = quantize_grid_sr(d[i], grid, rng) - d[i];
      err_sum[i] += e;
      sq += e * e;
    }
    sq_sum += sq;
    sq_sq_sum += sq * sq;
  }
  const double n = static_cast<double>(trials);
  double worst_z = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double se = std::sqrt(var[i] / n);
    const double err = std::abs(err_sum[i] / n);
    if (se > 0.0) {
      worst_z = std::max(worst_z, err / se);
    } else if (err > 1e-15) {
      worst_z = std::numeric_limits<double>::infinity();
    }
  }
  const double mc_mse = sq_sum / n;
  const double mc_mse_se = std::sqrt(std::max(0.0, sq_sq_sum / n - mc_mse * mc_mse) / n);

  r.fields.emplace_back("gain", format_double(gain));
  r.fields.emplace_back("mse_analytic", format_double(mse));
  r.fields.emplace_back("mse_monte_carlo", format_double(mc_mse));
  r.checks.push_back(at_most("max_bias", worst_bias, 1e-12 * std::max(1.0, dmax)));
  r.checks.push_back(at_most("mse_analytic", mse, bound * (1.0 + 1e-12)));
  r.checks.push_back(at_most("mc_mean_max_z", worst_z, 4.0));
  r.checks.push_back(
      at_most("mc_mse_error", std::abs(mc_mse - mse), 4.0 * mc_mse_se + 1e-12 * bound));
  return r;
}

Report verify_lemma7(std::size_t dim, int B, std::size_t trials, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("lemma7: dim must be positive");
  auto rng = RandomStream::derive(seed, 1, 0, StreamKind::Verify);
  const auto d = random_vector(dim, rng);
  return verify_lemma7(d, B, trials, seed);
}

}  // namespace fedq
