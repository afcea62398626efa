#include "fedq/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fedq/errors.hpp"
#include "fedq/schedules.hpp"
#include "fedq/wire.hpp"

namespace fedq {

namespace {

double pow2(int e) { return std::ldexp(1.0, e); }

// Gain for quantizers whose range is the configured weight bound M.
QuantizerSpec bounded_spec(int bits, const LinkSettings& link) {
  if (link.structure == Structure::Native) return QuantizerSpec::native(bits, link.rounding, link.grid);
  if (link.one_bit_enhanced && bits == 1) {
    return QuantizerSpec::enhanced_one_bit(1.0 / link.weight_bound, link.rounding);
  }
  return QuantizerSpec::tuned(bits, pow2(bits - 1) / link.weight_bound, link.rounding, link.grid);
}

void check_range(std::span<const double> w, const QuantizerSpec& spec, const LinkSettings& link,
                 const char* what) {
  const bool bounded = spec.structure == Structure::Tuned || spec.grid == Grid::SymmetricGrid;
  if (!bounded) return;  // native pipeline: the limit step saturates by definition
  const double norm = inf_norm(w);
  const double range = spec.one_bit_enhanced ? link.weight_bound : spec.range_bound();
  if (norm > range) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": ||w||_inf = " << norm << " exceeds the weight bound M = " << range
       << "; raise weight_bound";
    throw AssumptionViolation(os.str());
  }
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  // Report the failure of the lowest client slot, as a serial run would.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

LinkSettings LinkSettings::from(const FederationConfig& c) {
  return {c.rounding, c.structure, c.grid, c.one_bit_enhanced, c.weight_bound};
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, std::size_t k, RandomStream& rng) {
  if (k < 1 || k > num_clients) throw std::invalid_argument("sample_clients: need 1 <= K <= N");
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(num_clients - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> aggregate_weights(std::span<const std::vector<double>> uploads) {
  if (uploads.empty()) throw std::invalid_argument("aggregate_weights: no uploads");
  const std::size_t d = uploads.front().size();
  std::vector<double> sum(d, 0.0);
  for (const auto& u : uploads) {
    if (u.size() != d) throw std::invalid_argument("aggregate_weights: dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) sum[i] += u[i];
  }
  const auto k = static_cast<double>(uploads.size());
  for (double& s : sum) s /= k;
  return sum;
}

std::vector<double> aggregate_weighted(std::span<const std::vector<double>> uploads,
                                       std::span<const std::size_t> sizes) {
  if (uploads.empty() || uploads.size() != sizes.size()) {
    throw std::invalid_argument("aggregate_weighted: one size per upload required");
  }
  const std::size_t d = uploads.front().size();
  const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < uploads.size(); ++k) {
    if (uploads[k].size() != d) throw std::invalid_argument("aggregate_weighted: dimension mismatch");
    const double weight = static_cast<double>(sizes[k]) / total;
    for (std::size_t i = 0; i < d; ++i) out[i] += weight * uploads[k][i];
  }
  return out;
}

std::vector<double> aggregate_differentials(const std::optional<WeightVector>& prev_global,
                                            std::span<const std::vector<double>> uploads) {
  if (!prev_global) {
    throw StateError("differential aggregation needs the previous global model on the server");
  }
  const auto mean = aggregate_weights(uploads);
  if (mean.size() != prev_global->size()) {
    throw std::invalid_argument("aggregate_differentials: dimension mismatch");
  }
  std::vector<double> out(prev_global->values().begin(), prev_global->values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mean[i];
  return out;
}

Delivery broadcast(const WeightVector& global, DownlinkMode mode, int bits,
                   const LinkSettings& link, RandomStream& rng,
                   std::span<const LayerGain> frozen_gains) {
  Delivery out;
  switch (mode) {
    case DownlinkMode::Float:
      out.model = global;
      out.bits = wire::float_message_bits(global.size());
      return out;
    case DownlinkMode::Quantized: {
      LinkSettings plain = link;
      plain.one_bit_enhanced = false;
      const auto spec = bounded_spec(bits, plain);
      check_range(global.values(), spec, plain, "downlink");
      const auto q = quantize_vector(global.values(), spec, rng);
      out.model = global.with_values(q.dequantize());
      out.bits = wire::message_bits(q);
      return out;
    }
    case DownlinkMode::Layered: {
      out.gains = frozen_gains.empty() ? layered_gains(global, bits)
                                       : std::vector<LayerGain>(frozen_gains.begin(), frozen_gains.end());
      const auto blocks = quantize_layered(global, out.gains, bits, link.rounding, rng);
      std::vector<double> values;
      values.reserve(global.size());
      for (const auto& b : blocks) {
        const auto part = b.dequantize();
        values.insert(values.end(), part.begin(), part.end());
        out.bits += wire::message_bits(b);
      }
      out.model = global.with_values(std::move(values));
      return out;
    }
  }
  throw std::logic_error("unknown downlink mode");
}

Upload encode_upload(const WeightVector& local, const WeightVector& delivered, UplinkMode mode,
                     std::optional<int> bits, const LinkSettings& link, RandomStream& rng) {
  if (local.size() != delivered.size()) throw std::invalid_argument("encode_upload: dimension mismatch");
  const std::size_t d = local.size();
  Upload out;
  if (mode == UplinkMode::Float) bits.reset();

  std::vector<double> source(local.values().begin(), local.values().end());
  if (mode == UplinkMode::Differential) {
    for (std::size_t i = 0; i < d; ++i) source[i] -= delivered[i];
  }
  if (!bits) {
    out.payload = std::move(source);
    out.bits = wire::float_message_bits(d);
    return out;
  }

  const int b = *bits;
  out.bits = wire::message_bits(d, b);
  if (mode == UplinkMode::Weight) {
    const auto spec = bounded_spec(b, link);
    check_range(source, spec, link, "uplink weight");
    out.payload = quantize_vector(source, spec, rng).dequantize();
    return out;
  }

  // Differential: the gain tracks ||d||_inf, so the range always fits.
  if (inf_norm(source) == 0.0) {
    // A zero differential is exact under any gain; the symmetric grid has no
    // zero codepoint, so send it directly.
    out.payload.assign(d, 0.0);
    return out;
  }
  QuantizerSpec spec;
  if (link.one_bit_enhanced && b == 1) {
    spec = QuantizerSpec::enhanced_one_bit(dt_gain(source, 1), link.rounding);
  } else if (link.structure == Structure::Native) {
    spec = QuantizerSpec::native(b, link.rounding, link.grid);
    check_range(source, spec, link, "uplink differential");
  } else {
    spec = QuantizerSpec::tuned(b, dt_gain(source, b), link.rounding, link.grid);
  }
  out.payload = quantize_vector(source, spec, rng).dequantize();
  return out;
}

WeightVector Problem::initial_weights() const {
  return WeightVector::zeros_layered(layer_sizes);
}

Problem make_problem(LossModel model, std::vector<ClientDataset> clients,
                     std::vector<std::size_t> layer_sizes) {
  if (clients.empty()) throw std::invalid_argument("make_problem: no clients");
  Problem p;
  p.model = model;
  p.clients = std::move(clients);
  p.all = pool(p.clients);
  const std::size_t d = p.all.front().x.size();
  if (layer_sizes.empty()) layer_sizes = {d};
  if (std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::size_t{0}) != d) {
    throw ConfigError("key 'layer_dims': layer sizes must sum to the model dimension " +
                      std::to_string(d));
  }
  p.layer_sizes = std::move(layer_sizes);
  p.optimum = solve_optimum(p.model, p.clients);
  return p;
}

Problem build_problem(const FederationConfig& c) {
  c.validate();
  const LossModel model{c.model, c.lambda};
  std::vector<ClientDataset> clients;
  if (!c.data_csv.empty()) {
    const Dataset data = load_dataset_csv(c.data_csv, c.model);
    Partition part;
    try {
      part = c.partition == PartitionStrategy::IID
                 ? partition_iid(data, c.N, c.data_seed)
                 : partition_label_shards(data, c.N, c.shards_per_client, c.data_seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("key 'partition': ") + e.what());
    }
    clients = std::move(part.clients);
  } else if (c.model == LossKind::QuadraticPerSample) {
    clients = gen_quadratic_clients(c.N, c.dim, c.spread, c.data_seed, c.samples_per_client, c.noise);
  } else {
    LogisticClientsSpec spec;
    spec.num_clients = c.N;
    spec.layer_dims = c.layer_dims;
    spec.layer_scales = c.layer_scales;
    spec.samples_per_client = c.samples_per_client;
    spec.spread = c.spread;
    clients = gen_logistic_clients(spec, c.data_seed);
  }
  for (const auto& client : clients) {
    if (client.size() < c.batch_size) {
      throw ConfigError("key 'batch_size': " + std::to_string(c.batch_size) +
                        " exceeds the smallest client dataset (" + std::to_string(client.size()) + ")");
    }
  }
  return make_problem(model, std::move(clients), c.layer_dims);
}

Federation::Federation(FederationConfig config, Problem problem)
    : config_(std::move(config)), problem_(std::move(problem)), link_(LinkSettings::from(config_)) {
  config_.validate();
  if (problem_.clients.size() != config_.N) {
    throw ConfigError("key 'N': config has " + std::to_string(config_.N) + " clients, problem has " +
                      std::to_string(problem_.clients.size()));
  }
  const auto constants = smoothness(problem_.model, problem_.all);
  mu_ = config_.mu.value_or(constants.mu);
  L_ = config_.L.value_or(constants.L);
  if (!(mu_ > 0.0)) throw ConfigError("key 'mu': strong convexity constant must be positive");
  gamma_ = schedule_offset(mu_, L_, config_.E);
  global_ = problem_.initial_weights();
}

RoundRecord Federation::run_round() {
  const std::int64_t t = round_;
  const std::uint64_t seed = config_.seed;
  const double eta = lr_schedule(t, mu_, gamma_);

  auto sampling_rng = RandomStream::derive(seed, static_cast<std::uint64_t>(t), 0, StreamKind::Sampling);
  const auto selected = sample_clients(config_.N, config_.K, sampling_rng);

  const int bits_down = config_.downlink_bits_schedule.bits_at(t, mu_, gamma_);
  auto down_rng = RandomStream::derive(seed, static_cast<std::uint64_t>(t), 0, StreamKind::Downlink);
  Delivery delivery = broadcast(global_, config_.downlink_mode, bits_down, link_, down_rng,
                                frozen_gains_);
  if (config_.downlink_mode == DownlinkMode::Layered && config_.static_layered &&
      frozen_gains_.empty()) {
    // Freeze at the first model with no all-zero layer; before that the
    // percentile carries no range information.
    const bool informative = std::all_of(delivery.gains.begin(), delivery.gains.end(),
                                         [](const LayerGain& g) { return g.alpha > 0.0; });
    if (informative) frozen_gains_ = delivery.gains;
  }

  const bool quantized_up = config_.uplink_bits_schedule.quantized();
  const int bits_up = config_.uplink_bits_schedule.bits_at(t, mu_, gamma_);
  const std::optional<int> upload_bits = quantized_up ? std::optional<int>(bits_up) : std::nullopt;

  std::vector<Upload> uploads(selected.size());
  parallel_for(selected.size(), threads_, [&](std::size_t i) {
    const std::size_t k = selected[i];
    auto train_rng = RandomStream::derive(seed, static_cast<std::uint64_t>(t), k, StreamKind::LocalTrain);
    const WeightVector local = local_train(problem_.model, delivery.model, problem_.clients[k],
                                           config_.E, config_.batch_size, eta, train_rng);
    auto up_rng = RandomStream::derive(seed, static_cast<std::uint64_t>(t), k, StreamKind::Uplink);
    uploads[i] = encode_upload(local, delivery.model, config_.uplink_mode, upload_bits, link_, up_rng);
  });

  std::vector<std::vector<double>> payloads;
  payloads.reserve(uploads.size());
  for (auto& u : uploads) {
    uplink_bits_ += u.bits;
    payloads.push_back(std::move(u.payload));
  }
  downlink_bits_ += delivery.bits;

  std::vector<double> next = config_.uplink_mode == UplinkMode::Differential
                                 ? aggregate_differentials(delivery.model, payloads)
                                 : aggregate_weights(payloads);
  global_ = global_.with_values(std::move(next));
  ++round_;

  RoundRecord r;
  r.round = round_;
  r.eta = eta;
  r.bits_up = quantized_up ? bits_up : 32;
  r.bits_down = bits_down;
  r.train_loss = loss(problem_.model, global_.values(), problem_.all);
  r.gap = r.train_loss - problem_.optimum.f_star;
  r.uplink_bits_cum = uplink_bits_;
  r.downlink_bits_cum = downlink_bits_;
  return r;
}

std::vector<RoundRecord> Federation::run() {
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, config_.T - round_)));
  while (round_ < config_.T) records.push_back(run_round());
  return records;
}

std::vector<RoundRecord> run_federation(const FederationConfig& config, unsigned threads) {
  Federation fed(config, build_problem(config));
  fed.set_threads(threads);
  return fed.run();
}

}  // namespace fedq
