#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedq/config.hpp"
#include "fedq/models.hpp"
#include "fedq/quantizer.hpp"
#include "fedq/rng.hpp"
#include "fedq/weight_vector.hpp"

namespace fedq {

// Per-round telemetry. Bit counters are cumulative over rounds 1..round.
struct RoundRecord {
  std::int64_t round = 0;  // 1-based: the record after `round` completed rounds
  double eta = 0.0;
  int bits_up = 32;
  int bits_down = 32;
  double train_loss = 0.0;
  double gap = 0.0;
  std::uint64_t uplink_bits_cum = 0;
  std::uint64_t downlink_bits_cum = 0;

  bool operator==(const RoundRecord&) const = default;
};

// Quantizer options shared by both link directions.
struct LinkSettings {
  Rounding rounding = Rounding::Stochastic;
  Structure structure = Structure::Tuned;
  Grid grid = Grid::SymmetricGrid;
  bool one_bit_enhanced = false;
  double weight_bound = 1.0;

  static LinkSettings from(const FederationConfig& c);
};

// Uniform K-subset of [0, N) without replacement, ascending.
std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t k, RandomStream& rng);

// (1/K) sum of uploads; summed in the given order, then divided by K.
std::vector<double> aggregate_weights(std::span<const std::vector<double>> uploads);
// Size-weighted average sum_k D_k w_k / sum_k D_k (unbalanced datasets).
std::vector<double> aggregate_weighted(std::span<const std::vector<double>> uploads,
                                       std::span<const std::size_t> sizes);
// prev_global + (1/K) sum of differentials. Throws StateError without a base model.
std::vector<double> aggregate_differentials(const std::optional<WeightVector>& prev_global,
                                            std::span<const std::vector<double>> uploads);

struct Delivery {
  WeightVector model;            // what every selected client receives
  std::uint64_t bits = 0;        // bandwidth of the single broadcast
  std::vector<LayerGain> gains;  // layered mode only
};

// One quantization draw shared by all recipients. `frozen_gains`, when
// non-empty, replaces the per-round layer gains (static layered mode).
Delivery broadcast(const WeightVector& global, DownlinkMode mode, int bits,
                   const LinkSettings& link, RandomStream& rng,
                   std::span<const LayerGain> frozen_gains = {});

struct Upload {
  std::vector<double> payload;  // dequantized weights or differential
  std::uint64_t bits = 0;
};

// `bits` unset sends float32 values. Throws AssumptionViolation when a
// weight leaves the range covered by an M-derived gain.
Upload encode_upload(const WeightVector& local, const WeightVector& delivered, UplinkMode mode,
                     std::optional<int> bits, const LinkSettings& link, RandomStream& rng);

// Dataset, loss and optimum for one experiment.
struct Problem {
  LossModel model;
  std::vector<ClientDataset> clients;
  Dataset all;
  OptimumInfo optimum;
  std::vector<std::size_t> layer_sizes;

  WeightVector initial_weights() const;
};

Problem build_problem(const FederationConfig& config);
// Uses the given clients instead of generating data; computes the optimum.
Problem make_problem(LossModel model, std::vector<ClientDataset> clients,
                     std::vector<std::size_t> layer_sizes = {});

// FedAvg engine. Owns all state; callers observe immutable RoundRecords.
class Federation {
 public:
  Federation(FederationConfig config, Problem problem);

  RoundRecord run_round();
  std::vector<RoundRecord> run();

  // Worker threads for per-client work. Never changes results.
  void set_threads(unsigned threads) { threads_ = threads == 0 ? 1 : threads; }

  const WeightVector& global() const { return global_; }
  std::int64_t round() const { return round_; }
  double mu() const { return mu_; }
  double L() const { return L_; }
  double gamma() const { return gamma_; }
  const FederationConfig& config() const { return config_; }
  const Problem& problem() const { return problem_; }

 private:
  FederationConfig config_;
  Problem problem_;
  LinkSettings link_;
  double mu_ = 1.0;
  double L_ = 1.0;
  double gamma_ = 8.0;
  unsigned threads_ = 1;

  WeightVector global_;
  std::int64_t round_ = 0;
  std::uint64_t uplink_bits_ = 0;
  std::uint64_t downlink_bits_ = 0;
  std::vector<LayerGain> frozen_gains_;
};

// Builds the problem from the config and runs all T rounds.
std::vector<RoundRecord> run_federation(const FederationConfig& config, unsigned threads = 1);

}  // namespace fedq
