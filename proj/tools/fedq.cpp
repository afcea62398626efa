// fedq: run federations, verify quantizer/sampling lemmas, evaluate bounds.
//
// Exit codes: 0 success, 1 failed check, 2 invalid config or arguments,
// 3 runtime assumption violation.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedq/analysis.hpp"
#include "fedq/config.hpp"
#include "fedq/errors.hpp"
#include "fedq/federation.hpp"
#include "fedq/metrics_io.hpp"
#include "fedq/version.hpp"

namespace fs = std::filesystem;
using namespace fedq;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitAssumption = 3;

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

struct BoundArgs {
  std::string config;
  std::vector<std::string> metrics;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t draws = 1000;
  bool strict = false;
};

struct VerifyArgs {
  std::size_t N = 6, K = 2, dim = 5;
  double M = 1.0;
  int B = 4;
  std::size_t trials = 10'000;
  std::uint64_t seed = 1;
};

struct PartitionArgs {
  std::string config;
  std::string out;
};

FederationConfig load_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
  auto config = load_config(path);
  if (seed) config.seed = *seed;
  config.validate();
  return config;
}

// The manifest is itself a config file: metadata in comments, then the exact
// configuration, so `fedq run --config manifest.txt` reproduces the run.
void write_manifest(const fs::path& path, const FederationConfig& config,
                    const std::string& source, const std::vector<fs::path>& artifacts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# fedq " << kVersion << " run manifest\n";
  out << "# source_config: " << source << '\n';
  out << "# master_seed: " << config.seed << '\n';
  for (const auto& a : artifacts) out << "# artifact: " << a.filename().string() << '\n';
  out << to_config_text(config);
}

int cmd_run(const RunArgs& args) {
  const auto config = load_with_seed(args.config, args.seed);
  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);

  const auto records = run_federation(config, args.threads);
  const fs::path metrics = out_dir / "metrics.csv";
  const fs::path manifest = out_dir / "manifest.txt";
  write_metrics_csv(metrics, records);
  write_manifest(manifest, config, args.config, {metrics, manifest});

  if (records.empty()) {
    std::cout << "rounds=0 (nothing to run)\n";
  } else {
    const auto& r = records.back();
    std::cout << "round=" << r.round << " train_loss=" << format_double(r.train_loss)
              << " gap=" << format_double(r.gap) << " B_up=" << r.bits_up
              << " B_down=" << r.bits_down << " uplink_bits=" << r.uplink_bits_cum
              << " downlink_bits=" << r.downlink_bits_cum << '\n';
  }
  return 0;
}

int cmd_verify(const std::string& lemma, const VerifyArgs& a) {
  Report report;
  if (lemma == "lemma4") {
    report = verify_lemma4(a.N, a.K, a.dim, a.seed);
  } else if (lemma == "lemma5") {
    report = verify_lemma5(a.M, a.B, a.trials, a.seed);
  } else {
    report = verify_lemma7(a.dim, a.B, a.trials, a.seed);
  }
  std::cout << report.to_text();
  return report.passed() ? 0 : kExitFail;
}

void check_metrics_match(const std::string& path, const std::vector<RoundRecord>& records,
                         const Federation& fed) {
  const auto& c = fed.config();
  auto mismatch = [&](const std::string& what) {
    throw ConfigError("metrics file " + path + " does not match the config: " + what);
  };
  if (static_cast<std::int64_t>(records.size()) != c.T) {
    mismatch("expected " + std::to_string(c.T) + " rounds, found " +
             std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto t = static_cast<std::int64_t>(i);
    if (r.round != t + 1) mismatch("round column is not 1..T");
    const double eta = lr_schedule(t, fed.mu(), fed.gamma());
    if (std::abs(r.eta - eta) > 1e-12 * eta) mismatch("learning rate differs in round " +
                                                      std::to_string(r.round));
    const int up = c.uplink_bits_schedule.bits_at(t, fed.mu(), fed.gamma());
    if (r.bits_up != up) mismatch("uplink bits differ in round " + std::to_string(r.round));
  }
}

int cmd_bound(const BoundArgs& args) {
  const auto config = load_with_seed(args.config, args.seed);
  auto problem = build_problem(config);
  const Federation fed(config, problem);

  std::vector<std::vector<RoundRecord>> runs;
  for (const auto& path : args.metrics) {
    std::vector<RoundRecord> records;
    try {
      records = read_metrics_csv(path);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    check_metrics_match(path, records, fed);
    runs.push_back(std::move(records));
  }

  const auto params = estimate_bound_params(config, problem, fed.mu(), fed.L(), args.draws);
  const auto choice = choose_bound(config, fed.mu(), fed.gamma());
  const double D = bound_D(choice, params);

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  const fs::path csv = out_dir / "bound.csv";
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + csv.string());
  out << "round,gap_mean,bound_rhs\n";

  std::size_t satisfied = 0;
  const std::size_t rounds = static_cast<std::size_t>(config.T);
  for (std::size_t i = 0; i < rounds; ++i) {
    double gap = 0.0;
    for (const auto& run : runs) gap += run[i].gap;
    gap /= static_cast<double>(runs.size());
    const double rhs = bound_rhs(static_cast<double>(i + 1), params, D);
    if (gap <= rhs) ++satisfied;
    out << i + 1 << ',' << format_double(gap) << ',' << format_double(rhs) << '\n';
  }

  double sigma_sum = 0.0;
  for (double s : params.sigma_sq) sigma_sum += s;
  std::cout << "variant: " << to_string(choice.variant) << '\n'
            << "constants: estimated (sigma and H from probe weights; bound is conditional on them)\n";
  if (choice.uplink_term == BoundVariant::Thm2) std::cout << "uplink_bits: " << choice.bits << '\n';
  std::cout << "mu: " << format_double(params.mu) << '\n'
            << "L: " << format_double(params.L) << '\n'
            << "gamma: " << format_double(params.gamma) << '\n'
            << "sigma_sq_sum: " << format_double(sigma_sum) << '\n'
            << "H_sq: " << format_double(params.H_sq) << '\n'
            << "Gamma: " << format_double(params.Gamma) << '\n'
            << "w0_gap_sq: " << format_double(params.w0_gap_sq) << '\n'
            << "D: " << format_double(D) << '\n'
            << "runs: " << runs.size() << '\n'
            << "satisfied: " << satisfied << '/' << rounds << '\n'
            << "fraction: "
            << format_double(rounds == 0 ? 1.0 : static_cast<double>(satisfied) / rounds) << '\n'
            << "artifact: " << csv.string() << '\n';
  return (args.strict && satisfied != rounds) ? kExitFail : 0;
}

int cmd_partition(const PartitionArgs& args) {
  const auto config = load_with_seed(args.config, std::nullopt);
  auto problem = build_problem(config);
  Partition partition{problem.clients, config.partition, config.shards_per_client};
  // Generated data has no source file; number samples by their pooled position.
  std::size_t next = 0;
  for (auto& client : partition.clients) {
    if (client.source_indices.empty()) {
      for (std::size_t i = 0; i < client.size(); ++i) client.source_indices.push_back(next++);
    }
  }
  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / "partition.csv";
  write_partition_manifest(partition, path);
  std::cout << "clients: " << partition.clients.size() << '\n'
            << "samples: " << problem.all.size() << '\n'
            << "artifact: " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized federated averaging simulator"};
  app.set_version_flag("--version", std::string("fedq ") + kVersion);
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a federation and write metrics.csv + manifest.txt");
  run->add_option("--config", run_args.config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--seed", run_args.seed, "Master seed (overrides the config)");
  run->add_option("--threads", run_args.threads, "Worker threads (speed only)")
      ->check(CLI::PositiveNumber);

  std::string lemma;
  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Check a sampling or quantization lemma");
  verify->add_option("lemma", lemma, "lemma4 | lemma5 | lemma7")
      ->required()
      ->check(CLI::IsMember({"lemma4", "lemma5", "lemma7"}));
  verify->add_option("--N", verify_args.N, "Clients (lemma4)");
  verify->add_option("--K", verify_args.K, "Sampled clients (lemma4)");
  verify->add_option("--dim", verify_args.dim, "Vector dimension (lemma4, lemma7)");
  verify->add_option("--M", verify_args.M, "Grid range (lemma5)");
  verify->add_option("--B", verify_args.B, "Bits (lemma5, lemma7)");
  verify->add_option("--trials", verify_args.trials, "Monte Carlo trials (lemma5, lemma7)");
  verify->add_option("--seed", verify_args.seed, "Seed");

  BoundArgs bound_args;
  auto* bound = app.add_subcommand("bound", "Compare run gaps with the convergence bound");
  bound->add_option("--config", bound_args.config, "Config of the runs")
      ->required()
      ->check(CLI::ExistingFile);
  bound->add_option("--metrics", bound_args.metrics, "metrics.csv of one or more seeds")
      ->required()
      ->check(CLI::ExistingFile);
  bound->add_option("--out", bound_args.out, "Output directory")->required();
  bound->add_option("--seed", bound_args.seed, "Seed override used when the runs were made");
  bound->add_option("--draws", bound_args.draws, "Mini-batches per probe for sigma/H")
      ->check(CLI::PositiveNumber);
  bound->add_flag("--strict", bound_args.strict, "Exit 1 unless every round is within the bound");

  PartitionArgs part_args;
  auto* part = app.add_subcommand("partition", "Write the client partition as CSV");
  part->add_option("--config", part_args.config, "Config file")->required()->check(CLI::ExistingFile);
  part->add_option("--out", part_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*verify) return cmd_verify(lemma, verify_args);
    if (*bound) return cmd_bound(bound_args);
    if (*part) return cmd_partition(part_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const AssumptionViolation& e) {
    std::cerr << "assumption violated: " << e.what() << '\n';
    return kExitAssumption;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitInvalid;
}
