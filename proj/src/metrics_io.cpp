#include "fedq/metrics_io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fedq {

namespace {

// Whole-cell parses; strtod accepts subnormal values that std::stod rejects.
double parse_double(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) throw std::invalid_argument("bad number");
  return v;
}

template <typename Int>
Int parse_int(const std::string& cell) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) throw std::invalid_argument("bad integer");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const RoundRecord> records) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << format_double(r.eta) << ',' << r.bits_up << ',' << r.bits_down << ','
        << format_double(r.train_loss) << ',' << format_double(r.gap) << ',' << r.uplink_bits_cum
        << ',' << r.downlink_bits_cum << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const RoundRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics_csv(out, records);
}

std::vector<RoundRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::invalid_argument(path.string() + ": unexpected metrics header");
  }
  std::vector<RoundRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw std::invalid_argument(path.string() + ": expected 8 columns in '" + line + "'");
    }
    try {
      RoundRecord r;
      r.round = parse_int<std::int64_t>(cells[0]);
      r.eta = parse_double(cells[1]);
      r.bits_up = parse_int<int>(cells[2]);
      r.bits_down = parse_int<int>(cells[3]);
      r.train_loss = parse_double(cells[4]);
      r.gap = parse_double(cells[5]);
      r.uplink_bits_cum = parse_int<std::uint64_t>(cells[6]);
      r.downlink_bits_cum = parse_int<std::uint64_t>(cells[7]);
      records.push_back(r);
    } catch (const std::exception&) {
      throw std::invalid_argument(path.string() + ": malformed row '" + line + "'");
    }
  }
  return records;
}

}  // namespace fedq
