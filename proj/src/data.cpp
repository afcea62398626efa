#include "fedq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedq/rng.hpp"

namespace fedq {

namespace {

ClientDataset gather(const Dataset& dataset, std::span<const std::size_t> indices) {
  ClientDataset c;
  c.samples.reserve(indices.size());
  c.source_indices.assign(indices.begin(), indices.end());
  for (std::size_t i : indices) c.samples.push_back(dataset[i]);
  return c;
}

double uniform_pm1(RandomStream& rng) { return 2.0 * rng.uniform() - 1.0; }

}  // namespace

Partition partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients < 1 || num_clients > dataset.size()) {
    throw std::invalid_argument("partition_iid: need 1 <= N <= dataset size (N = " +
                                std::to_string(num_clients) + ", size = " +
                                std::to_string(dataset.size()) + ")");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = RandomStream::derive(seed, 0, 0, StreamKind::Data);
  rng.shuffle(order);

  Partition p;
  p.strategy = PartitionStrategy::IID;
  const std::size_t base = dataset.size() / num_clients;
  const std::size_t extra = dataset.size() % num_clients;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < num_clients; ++k) {
    const std::size_t n = base + (k < extra ? 1 : 0);
    p.clients.push_back(gather(dataset, std::span<const std::size_t>(order).subspan(offset, n)));
    offset += n;
  }
  return p;
}

Partition partition_label_shards(const Dataset& dataset, std::size_t num_clients,
                                 std::size_t shards_per_client, std::uint64_t seed) {
  if (num_clients < 1 || shards_per_client < 1) {
    throw std::invalid_argument("partition_label_shards: N and shards_per_client must be >= 1");
  }
  const std::size_t total_shards = num_clients * shards_per_client;
  if (dataset.empty() || dataset.size() % total_shards != 0) {
    throw std::invalid_argument("partition_label_shards: dataset size " +
                                std::to_string(dataset.size()) + " is not divisible into " +
                                std::to_string(total_shards) + " shards");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset[a].label < dataset[b].label;
  });

  std::vector<std::size_t> shard_ids(total_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
  auto rng = RandomStream::derive(seed, 0, 0, StreamKind::Data);
  rng.shuffle(shard_ids);

  const std::size_t shard_size = dataset.size() / total_shards;
  Partition p;
  p.strategy = PartitionStrategy::LabelShards;
  p.shards_per_client = shards_per_client;
  for (std::size_t k = 0; k < num_clients; ++k) {
    std::vector<std::size_t> mine(shard_ids.begin() + static_cast<std::ptrdiff_t>(k * shards_per_client),
                                  shard_ids.begin() + static_cast<std::ptrdiff_t>((k + 1) * shards_per_client));
    std::sort(mine.begin(), mine.end());
    std::vector<std::size_t> indices;
    for (std::size_t s : mine) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(s * shard_size);
      indices.insert(indices.end(), first, first + static_cast<std::ptrdiff_t>(shard_size));
    }
    p.clients.push_back(gather(dataset, indices));
  }
  return p;
}

std::vector<ClientDataset> gen_quadratic_clients(std::size_t num_clients, std::size_t dim,
                                                 double spread, std::uint64_t seed,
                                                 std::size_t samples_per_client, double noise) {
  if (num_clients < 1 || dim < 1 || samples_per_client < 1) {
    throw std::invalid_argument("gen_quadratic_clients: N, d and samples per client must be >= 1");
  }
  if (!(spread >= 0.0) || !(noise >= 0.0)) {
    throw std::invalid_argument("gen_quadratic_clients: spread and noise must be >= 0");
  }
  std::vector<ClientDataset> clients(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    // Centre and noise come from separate streams so the noise draw does not
    // depend on the spread.
    auto centre_rng = RandomStream::derive(seed, 0, k, StreamKind::Data);
    auto noise_rng = RandomStream::derive(seed, 1, k, StreamKind::Data);
    std::vector<double> centre(dim);
    for (double& c : centre) c = spread * uniform_pm1(centre_rng);

    std::vector<std::vector<double>> eps(samples_per_client, std::vector<double>(dim));
    std::vector<double> eps_mean(dim, 0.0);
    for (auto& e : eps) {
      for (std::size_t i = 0; i < dim; ++i) {
        e[i] = noise * uniform_pm1(noise_rng);
        eps_mean[i] += e[i];
      }
    }
    for (double& m : eps_mean) m /= static_cast<double>(samples_per_client);

    auto& client = clients[k];
    client.samples.reserve(samples_per_client);
    for (const auto& e : eps) {
      Sample s;
      s.label = static_cast<int>(k);
      s.x.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) s.x[i] = centre[i] + (e[i] - eps_mean[i]);
      client.samples.push_back(std::move(s));
    }
  }
  return clients;
}

std::vector<ClientDataset> gen_logistic_clients(const LogisticClientsSpec& spec,
                                                std::uint64_t seed) {
  if (spec.num_clients < 1 || spec.samples_per_client < 1) {
    throw std::invalid_argument("gen_logistic_clients: need at least one client and sample");
  }
  if (spec.layer_dims.empty() || spec.layer_dims.size() != spec.layer_scales.size()) {
    throw std::invalid_argument("gen_logistic_clients: one scale per layer required");
  }
  std::size_t dim = 0;
  for (std::size_t n : spec.layer_dims) dim += n;

  auto truth_rng = RandomStream::derive(seed, 0, 0, StreamKind::Data);
  std::vector<double> w_true;
  w_true.reserve(dim);
  for (std::size_t j = 0; j < spec.layer_dims.size(); ++j) {
    for (std::size_t i = 0; i < spec.layer_dims[j]; ++i) {
      w_true.push_back(spec.signal * uniform_pm1(truth_rng) / spec.layer_scales[j]);
    }
  }

  std::vector<ClientDataset> clients(spec.num_clients);
  for (std::size_t k = 0; k < spec.num_clients; ++k) {
    auto rng = RandomStream::derive(seed, 1, k, StreamKind::Data);
    std::vector<double> shift;
    shift.reserve(dim);
    for (std::size_t j = 0; j < spec.layer_dims.size(); ++j) {
      for (std::size_t i = 0; i < spec.layer_dims[j]; ++i) {
        shift.push_back(spec.spread * spec.layer_scales[j] * uniform_pm1(rng));
      }
    }
    for (std::size_t n = 0; n < spec.samples_per_client; ++n) {
      Sample s;
      s.x.reserve(dim);
      std::size_t c = 0;
      for (std::size_t j = 0; j < spec.layer_dims.size(); ++j) {
        for (std::size_t i = 0; i < spec.layer_dims[j]; ++i, ++c) {
          s.x.push_back(spec.layer_scales[j] * uniform_pm1(rng) + shift[c]);
        }
      }
      const double z = dot(w_true, s.x);
      const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      s.label = rng.uniform() < p ? 1 : 0;
      clients[k].samples.push_back(std::move(s));
    }
  }
  return clients;
}

void write_partition_manifest(const Partition& partition, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write partition manifest " + path.string());
  out << "client_id,sample_index\n";
  for (std::size_t k = 0; k < partition.clients.size(); ++k) {
    for (std::size_t idx : partition.clients[k].source_indices) out << k << ',' << idx << '\n';
  }
}

}  // namespace fedq
