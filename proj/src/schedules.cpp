#include "fedq/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fedq/errors.hpp"
#include "fedq/quantizer.hpp"

namespace fedq {

double schedule_offset(double mu, double L, int local_steps) {
  if (!(mu > 0.0) || !(L > 0.0)) throw std::invalid_argument("mu and L must be positive");
  return std::max(8.0 * L / mu, static_cast<double>(local_steps));
}

double lr_schedule(std::int64_t t, double mu, double gamma) {
  if (t < 0) throw std::invalid_argument("lr_schedule: t must be >= 0");
  return 2.0 / (mu * (gamma + static_cast<double>(t)));
}

int bits_thm1(std::int64_t t, double mu, double gamma) {
  if (t < 1) throw std::invalid_argument("bits_thm1: t must be >= 1");
  const double level = std::log2(mu * (gamma + static_cast<double>(t) - 1.0) / 2.0 + 1.0);
  return std::max(1, static_cast<int>(std::ceil(level)));
}

int bits_downlink(std::int64_t t, double mu, double gamma) {
  const double eta = lr_schedule(t, mu, gamma);
  if (eta * mu >= 1.0) {
    throw std::invalid_argument("bits_downlink: requires eta_t * mu < 1");
  }
  const double level = std::log2(1.0 + std::sqrt(1.0 - eta * mu) / eta);
  return std::max(1, static_cast<int>(std::ceil(level)));
}

int bits_step(std::int64_t r, double f, double p) {
  if (r < 1 || f < 2.0 || !(p > 0.0)) {
    throw std::invalid_argument("bits_step: requires r >= 1, f >= 2, p > 0");
  }
  const double level = std::log2(f + static_cast<double>(r - 1) / p);
  return std::max(1, static_cast<int>(std::floor(level)));
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in schedule '" + context + "'");
  }
}

}  // namespace

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("empty bit-width schedule");
  const std::string& kind = parts[0];
  ScheduleSpec s;
  if (kind == "float" && parts.size() == 1) {
    s = floating();
  } else if (kind == "constant" && parts.size() == 2) {
    const double b = parse_number(parts[1], text);
    if (b != std::floor(b)) throw ConfigError("constant schedule needs an integer bit-width: " + text);
    s = constant(static_cast<int>(b));
  } else if (kind == "thm1" && parts.size() == 1) {
    s = thm1();
  } else if (kind == "downlink" && parts.size() == 1) {
    s = downlink();
  } else if (kind == "step" && parts.size() == 3) {
    s = step(parse_number(parts[1], text), parse_number(parts[2], text));
  } else {
    throw ConfigError("unknown bit-width schedule '" + text +
                      "' (expected float, constant:B, thm1, downlink or step:F:P)");
  }
  s.validate();
  return s;
}

std::string ScheduleSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case ScheduleKind::Float: return "float";
    case ScheduleKind::Constant: os << "constant:" << bits; return os.str();
    case ScheduleKind::Thm1Log: return "thm1";
    case ScheduleKind::DownlinkLog: return "downlink";
    case ScheduleKind::StepLog: os << "step:" << f << ':' << p; return os.str();
  }
  return "float";
}

void ScheduleSpec::validate() const {
  if (kind == ScheduleKind::Constant && (bits < 1 || bits > kMaxBits)) {
    throw ConfigError("constant bit-width must be in [1, 32]");
  }
  if (kind == ScheduleKind::StepLog && (f < 2.0 || !(p > 0.0))) {
    throw ConfigError("step schedule requires f >= 2 and p > 0");
  }
}

int ScheduleSpec::bits_at(std::int64_t t, double mu, double gamma) const {
  int b = 32;
  switch (kind) {
    case ScheduleKind::Float: return 32;
    case ScheduleKind::Constant: b = bits; break;
    case ScheduleKind::Thm1Log: b = bits_thm1(t + 1, mu, gamma); break;
    case ScheduleKind::DownlinkLog: b = bits_downlink(t, mu, gamma); break;
    case ScheduleKind::StepLog: b = bits_step(t + 1, f, p); break;
  }
  return std::clamp(b, 1, kMaxBits);
}

}  // namespace fedq
