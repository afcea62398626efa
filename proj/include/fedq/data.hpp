#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedq/models.hpp"

namespace fedq {

enum class PartitionStrategy { IID, LabelShards };

struct Partition {
  std::vector<ClientDataset> clients;
  PartitionStrategy strategy = PartitionStrategy::IID;
  std::size_t shards_per_client = 0;
};

// Shuffle, then deal contiguous chunks; the first (D mod N) clients get one extra.
Partition partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed);

// Stable sort by label (ties by original index), cut into N * s equal shards,
// and hand each client s distinct shards chosen at random.
Partition partition_label_shards(const Dataset& dataset, std::size_t num_clients,
                                 std::size_t shards_per_client, std::uint64_t seed);

// N clients with samples_per_client points each in R^d. Client k's cloud is
// centred at c_k = spread * u_k with u_k uniform on [-1, 1]^d; the per-client
// noise is re-centred so that each client's sample mean is exactly c_k.
// Sample labels hold the client index.
std::vector<ClientDataset> gen_quadratic_clients(std::size_t num_clients, std::size_t dim,
                                                 double spread, std::uint64_t seed,
                                                 std::size_t samples_per_client = 20,
                                                 double noise = 1.0);

// Logistic-regression clients whose features come in blocks ("layers") with
// different magnitudes, so the optimal weights differ in scale across blocks.
// Feature block j is uniform on [-scale_j, scale_j] shifted per client by
// spread * scale_j * s_k; labels are Bernoulli(sigmoid(w_true . x)) with
// w_true block j uniform on [-1/scale_j, 1/scale_j].
struct LogisticClientsSpec {
  std::size_t num_clients = 10;
  std::vector<std::size_t> layer_dims{4, 4};
  std::vector<double> layer_scales{1.0, 10.0};
  std::size_t samples_per_client = 50;
  double spread = 0.0;
  double signal = 4.0;  // multiplies w_true
};
std::vector<ClientDataset> gen_logistic_clients(const LogisticClientsSpec& spec,
                                                std::uint64_t seed);

// CSV "client_id,sample_index", one row per assigned sample.
void write_partition_manifest(const Partition& partition, const std::filesystem::path& path);

}  // namespace fedq
