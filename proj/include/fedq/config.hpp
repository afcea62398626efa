#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedq/data.hpp"
#include "fedq/models.hpp"
#include "fedq/quantizer.hpp"
#include "fedq/schedules.hpp"

namespace fedq {

enum class UplinkMode { Float, Weight, Differential };
// There is deliberately no differential downlink: clients joining a round
// do not hold the previous global model.
enum class DownlinkMode { Float, Quantized, Layered };

// Every knob of one experiment: the learning problem, the FedAvg loop and
// both link directions. Parsed from flat "key = value" text.
struct FederationConfig {
  // Problem.
  LossKind model = LossKind::QuadraticPerSample;
  double lambda = 0.0;
  std::size_t dim = 10;                   // quadratic synthetic data
  double spread = 1.0;                    // quadratic synthetic data
  double noise = 1.0;                     // quadratic synthetic data
  std::size_t samples_per_client = 20;    // synthetic data
  std::vector<std::size_t> layer_dims;    // model layers; empty = one layer
  std::vector<double> layer_scales;       // logistic synthetic feature scales
  std::string data_csv;                   // when set, replaces synthetic data
  PartitionStrategy partition = PartitionStrategy::IID;
  std::size_t shards_per_client = 2;
  std::uint64_t data_seed = 1;

  // FedAvg loop.
  std::size_t N = 20;
  std::size_t K = 5;
  int E = 5;
  std::int64_t T = 100;
  std::size_t batch_size = 10;
  std::optional<double> mu;  // unset: derived from the model and data
  std::optional<double> L;

  // Communication.
  UplinkMode uplink_mode = UplinkMode::Float;
  DownlinkMode downlink_mode = DownlinkMode::Float;
  ScheduleSpec uplink_bits_schedule;
  ScheduleSpec downlink_bits_schedule;
  Rounding rounding = Rounding::Stochastic;
  Structure structure = Structure::Tuned;
  Grid grid = Grid::SymmetricGrid;
  bool one_bit_enhanced = false;
  double weight_bound = 1.0;  // M, the bound on ||w||_inf used by M-derived gains
  bool static_layered = false;

  std::uint64_t seed = 1;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

FederationConfig parse_config(const std::string& text);
FederationConfig load_config(const std::filesystem::path& path);
// Canonical "key = value" lines; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const FederationConfig& config);

std::string to_string(UplinkMode m);
std::string to_string(DownlinkMode m);
std::string to_string(Rounding r);
std::string to_string(Structure s);
std::string to_string(Grid g);
std::string to_string(LossKind k);
std::string to_string(PartitionStrategy p);

}  // namespace fedq
