#pragma once

#include <cstdint>
#include <string>

namespace fedq {

// gamma = max(8 L / mu, E).
double schedule_offset(double mu, double L, int local_steps);

// eta_t = 2 / (mu (gamma + t)).
double lr_schedule(std::int64_t t, double mu, double gamma);

// ceil(log2(mu (gamma + t - 1) / 2 + 1)), at least 1. Requires t >= 1.
// Round t (0-based) uploads with bits_thm1(t + 1, ...), i.e. log2(1/eta_t + 1).
int bits_thm1(std::int64_t t, double mu, double gamma);

// ceil(log2(1 + sqrt(1 - eta_t mu) / eta_t)). Requires eta_t mu < 1.
int bits_downlink(std::int64_t t, double mu, double gamma);

// floor(log2(f + (r - 1) / p)), at least 1. r is the 1-based round index.
int bits_step(std::int64_t r, double f, double p);

enum class ScheduleKind { Float, Constant, Thm1Log, DownlinkLog, StepLog };

// Bit-width policy for one link direction. Float means no quantization
// (32-bit words on the wire).
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Float;
  int bits = 32;
  double f = 2.0;
  double p = 1.0;

  static ScheduleSpec floating() { return {}; }
  static ScheduleSpec constant(int b) { return {ScheduleKind::Constant, b, 2.0, 1.0}; }
  static ScheduleSpec thm1() { return {ScheduleKind::Thm1Log, 0, 2.0, 1.0}; }
  static ScheduleSpec downlink() { return {ScheduleKind::DownlinkLog, 0, 2.0, 1.0}; }
  static ScheduleSpec step(double f, double p) { return {ScheduleKind::StepLog, 0, f, p}; }

  // "float", "constant:B", "thm1", "downlink", "step:F:P".
  static ScheduleSpec parse(const std::string& text);
  std::string to_string() const;
  void validate() const;

  bool quantized() const { return kind != ScheduleKind::Float; }
  // Bit-width used in 0-based round t; 32 for Float.
  int bits_at(std::int64_t t, double mu, double gamma) const;

  bool operator==(const ScheduleSpec&) const = default;
};

}  // namespace fedq
