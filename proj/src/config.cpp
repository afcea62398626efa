#include "fedq/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "," : "") << items[i];
  return os.str();
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': integer out of range: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, const std::map<std::string, E>& names) {
  const auto it = names.find(v);
  if (it != names.end()) return it->second;
  std::string options;
  for (const auto& [name, _] : names) options += (options.empty() ? "" : ", ") + name;
  throw ConfigError("key '" + key + "': unknown value '" + v + "' (expected one of " + options + ")");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

const std::map<std::string, UplinkMode> kUplinkNames{
    {"float", UplinkMode::Float}, {"weight", UplinkMode::Weight},
    {"differential", UplinkMode::Differential}};
const std::map<std::string, DownlinkMode> kDownlinkNames{
    {"float", DownlinkMode::Float}, {"quantized", DownlinkMode::Quantized},
    {"layered", DownlinkMode::Layered}};
const std::map<std::string, Rounding> kRoundingNames{
    {"nearest", Rounding::Nearest}, {"stochastic", Rounding::Stochastic}};
const std::map<std::string, Structure> kStructureNames{
    {"native", Structure::Native}, {"tuned", Structure::Tuned}};
const std::map<std::string, Grid> kGridNames{
    {"pipeline", Grid::Pipeline}, {"symmetric_grid", Grid::SymmetricGrid}};
const std::map<std::string, LossKind> kModelNames{
    {"quadratic", LossKind::QuadraticPerSample}, {"logistic", LossKind::LogisticRegression}};
const std::map<std::string, PartitionStrategy> kPartitionNames{
    {"iid", PartitionStrategy::IID}, {"label_shards", PartitionStrategy::LabelShards}};

template <typename E>
std::string name_of(E value, const std::map<std::string, E>& names) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

using Setter = std::function<void(FederationConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"model", [](auto& c, auto& k, auto& v) { c.model = to_enum(k, v, kModelNames); }},
      {"lambda", [](auto& c, auto& k, auto& v) { c.lambda = to_double(k, v); }},
      {"dim", [](auto& c, auto& k, auto& v) { c.dim = to_uint(k, v); }},
      {"spread", [](auto& c, auto& k, auto& v) { c.spread = to_double(k, v); }},
      {"noise", [](auto& c, auto& k, auto& v) { c.noise = to_double(k, v); }},
      {"samples_per_client", [](auto& c, auto& k, auto& v) { c.samples_per_client = to_uint(k, v); }},
      {"layer_dims",
       [](auto& c, auto& k, auto& v) {
         c.layer_dims.clear();
         for (const auto& item : split_list(v)) c.layer_dims.push_back(to_uint(k, item));
       }},
      {"layer_scales",
       [](auto& c, auto& k, auto& v) {
         c.layer_scales.clear();
         for (const auto& item : split_list(v)) c.layer_scales.push_back(to_double(k, item));
       }},
      {"data_csv", [](auto& c, auto&, auto& v) { c.data_csv = v; }},
      {"partition", [](auto& c, auto& k, auto& v) { c.partition = to_enum(k, v, kPartitionNames); }},
      {"shards_per_client", [](auto& c, auto& k, auto& v) { c.shards_per_client = to_uint(k, v); }},
      {"data_seed", [](auto& c, auto& k, auto& v) { c.data_seed = to_uint(k, v); }},
      {"N", [](auto& c, auto& k, auto& v) { c.N = to_uint(k, v); }},
      {"K", [](auto& c, auto& k, auto& v) { c.K = to_uint(k, v); }},
      {"E", [](auto& c, auto& k, auto& v) { c.E = static_cast<int>(to_uint(k, v)); }},
      {"T", [](auto& c, auto& k, auto& v) { c.T = static_cast<std::int64_t>(to_uint(k, v)); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = to_uint(k, v); }},
      {"mu",
       [](auto& c, auto& k, auto& v) {
         c.mu = v == "auto" ? std::nullopt : std::optional<double>(to_double(k, v));
       }},
      {"L",
       [](auto& c, auto& k, auto& v) {
         c.L = v == "auto" ? std::nullopt : std::optional<double>(to_double(k, v));
       }},
      {"uplink_mode", [](auto& c, auto& k, auto& v) { c.uplink_mode = to_enum(k, v, kUplinkNames); }},
      {"downlink_mode",
       [](auto& c, auto& k, auto& v) { c.downlink_mode = to_enum(k, v, kDownlinkNames); }},
      {"uplink_bits_schedule",
       [](auto& c, auto& k, auto& v) {
         try {
           c.uplink_bits_schedule = ScheduleSpec::parse(v);
         } catch (const ConfigError& e) {
           throw ConfigError("key '" + k + "': " + e.what());
         }
       }},
      {"downlink_bits_schedule",
       [](auto& c, auto& k, auto& v) {
         try {
           c.downlink_bits_schedule = ScheduleSpec::parse(v);
         } catch (const ConfigError& e) {
           throw ConfigError("key '" + k + "': " + e.what());
         }
       }},
      {"rounding", [](auto& c, auto& k, auto& v) { c.rounding = to_enum(k, v, kRoundingNames); }},
      {"structure", [](auto& c, auto& k, auto& v) { c.structure = to_enum(k, v, kStructureNames); }},
      {"grid", [](auto& c, auto& k, auto& v) { c.grid = to_enum(k, v, kGridNames); }},
      {"one_bit_enhanced", [](auto& c, auto& k, auto& v) { c.one_bit_enhanced = to_bool(k, v); }},
      {"weight_bound", [](auto& c, auto& k, auto& v) { c.weight_bound = to_double(k, v); }},
      {"static_layered", [](auto& c, auto& k, auto& v) { c.static_layered = to_bool(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_uint(k, v); }},
  };
  return table;
}

}  // namespace

std::string to_string(UplinkMode m) { return name_of(m, kUplinkNames); }
std::string to_string(DownlinkMode m) { return name_of(m, kDownlinkNames); }
std::string to_string(Rounding r) { return name_of(r, kRoundingNames); }
std::string to_string(Structure s) { return name_of(s, kStructureNames); }
std::string to_string(Grid g) { return name_of(g, kGridNames); }
std::string to_string(LossKind k) { return name_of(k, kModelNames); }
std::string to_string(PartitionStrategy p) { return name_of(p, kPartitionNames); }

void FederationConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("key '" + key + "': " + why);
  };
  if (N < 1) fail("N", "must be >= 1");
  if (K < 1 || K > N) fail("K", "must satisfy 1 <= K <= N (K = " + std::to_string(K) +
                                    ", N = " + std::to_string(N) + ")");
  if (E < 1) fail("E", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (mu && !(*mu > 0.0)) fail("mu", "must be positive");
  if (L && !(*L > 0.0)) fail("L", "must be positive");
  if (mu && L && *L < *mu) fail("L", "must be >= mu");
  if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (model == LossKind::LogisticRegression && !mu && !(lambda > 0.0)) {
    fail("lambda", "logistic regression needs lambda > 0 (or an explicit mu)");
  }
  if (data_csv.empty()) {
    if (model == LossKind::QuadraticPerSample && dim < 1) fail("dim", "must be >= 1");
    if (samples_per_client < 1) fail("samples_per_client", "must be >= 1");
    if (!(spread >= 0.0)) fail("spread", "must be >= 0");
    if (!(noise >= 0.0)) fail("noise", "must be >= 0");
    if (model == LossKind::LogisticRegression) {
      if (layer_dims.empty()) fail("layer_dims", "logistic synthetic data needs layer_dims");
      if (layer_scales.size() != layer_dims.size()) fail("layer_scales", "one scale per layer required");
    }
  }
  if (!layer_dims.empty()) {
    for (std::size_t n : layer_dims) {
      if (n < 1) fail("layer_dims", "layers must be nonempty");
    }
    if (model == LossKind::QuadraticPerSample && data_csv.empty()) {
      std::size_t total = 0;
      for (std::size_t n : layer_dims) total += n;
      if (total != dim) fail("layer_dims", "layer sizes must sum to dim");
    }
  }
  for (double s : layer_scales) {
    if (!(s > 0.0)) fail("layer_scales", "scales must be positive");
  }
  if (!(weight_bound > 0.0)) fail("weight_bound", "must be positive");
  if (partition == PartitionStrategy::LabelShards && shards_per_client < 1) {
    fail("shards_per_client", "must be >= 1");
  }
  uplink_bits_schedule.validate();
  downlink_bits_schedule.validate();
  if (uplink_mode == UplinkMode::Float && uplink_bits_schedule.quantized()) {
    fail("uplink_bits_schedule", "must be 'float' when uplink_mode = float");
  }
  if (uplink_mode == UplinkMode::Weight && !uplink_bits_schedule.quantized()) {
    fail("uplink_bits_schedule", "weight uplink needs a quantized schedule (use uplink_mode = float)");
  }
  if (downlink_mode == DownlinkMode::Float && downlink_bits_schedule.quantized()) {
    fail("downlink_bits_schedule", "must be 'float' when downlink_mode = float");
  }
  if (downlink_mode != DownlinkMode::Float && !downlink_bits_schedule.quantized()) {
    fail("downlink_bits_schedule", "quantized downlink needs a bit-width schedule");
  }
  if (uplink_bits_schedule.kind == ScheduleKind::DownlinkLog) {
    fail("uplink_bits_schedule", "the downlink schedule applies to the downlink only");
  }
  if (one_bit_enhanced && uplink_bits_schedule.kind != ScheduleKind::Constant) {
    fail("one_bit_enhanced", "requires uplink_bits_schedule = constant:1");
  }
  if (one_bit_enhanced && uplink_bits_schedule.bits != 1) {
    fail("one_bit_enhanced", "requires uplink_bits_schedule = constant:1");
  }
}

FederationConfig parse_config(const std::string& text) {
  FederationConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
    it->second(c, key, value);
  }
  c.validate();
  return c;
}

FederationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_config_text(const FederationConfig& c) {
  std::ostringstream os;
  os << "model = " << to_string(c.model) << '\n'
     << "lambda = " << fmt(c.lambda) << '\n'
     << "dim = " << c.dim << '\n'
     << "spread = " << fmt(c.spread) << '\n'
     << "noise = " << fmt(c.noise) << '\n'
     << "samples_per_client = " << c.samples_per_client << '\n';
  if (!c.layer_dims.empty()) os << "layer_dims = " << join(c.layer_dims) << '\n';
  if (!c.layer_scales.empty()) os << "layer_scales = " << join(c.layer_scales) << '\n';
  if (!c.data_csv.empty()) os << "data_csv = " << c.data_csv << '\n';
  os << "partition = " << to_string(c.partition) << '\n'
     << "shards_per_client = " << c.shards_per_client << '\n'
     << "data_seed = " << c.data_seed << '\n'
     << "N = " << c.N << '\n'
     << "K = " << c.K << '\n'
     << "E = " << c.E << '\n'
     << "T = " << c.T << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "mu = " << (c.mu ? fmt(*c.mu) : "auto") << '\n'
     << "L = " << (c.L ? fmt(*c.L) : "auto") << '\n'
     << "uplink_mode = " << to_string(c.uplink_mode) << '\n'
     << "downlink_mode = " << to_string(c.downlink_mode) << '\n'
     << "uplink_bits_schedule = " << c.uplink_bits_schedule.to_string() << '\n'
     << "downlink_bits_schedule = " << c.downlink_bits_schedule.to_string() << '\n'
     << "rounding = " << to_string(c.rounding) << '\n'
     << "structure = " << to_string(c.structure) << '\n'
     << "grid = " << to_string(c.grid) << '\n'
     << "one_bit_enhanced = " << (c.one_bit_enhanced ? "true" : "false") << '\n'
     << "weight_bound = " << fmt(c.weight_bound) << '\n'
     << "static_layered = " << (c.static_layered ? "true" : "false") << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

}  // namespace fedq
