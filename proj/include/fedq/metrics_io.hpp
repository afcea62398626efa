#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedq/federation.hpp"

namespace fedq {

inline constexpr const char* kMetricsHeader =
    "round,eta,B_up,B_down,train_loss,gap,uplink_bits_cum,downlink_bits_cum";

// 17 significant digits, so every double round-trips through text.
std::string format_double(double v);

void write_metrics_csv(std::ostream& out, std::span<const RoundRecord> records);
void write_metrics_csv(const std::filesystem::path& path, std::span<const RoundRecord> records);
// Throws std::invalid_argument on a wrong header or malformed row.
std::vector<RoundRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace fedq
