#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedq/analysis.hpp"
#include "fedq/config.hpp"
#include "fedq/errors.hpp"
#include "fedq/federation.hpp"
#include "fedq/metrics_io.hpp"
#include "fedq/quantizer.hpp"
#include "fedq/rng.hpp"
#include "fedq/schedules.hpp"
#include "fedq/version.hpp"
#include "fedq/wire.hpp"

namespace py = pybind11;
using namespace fedq;

namespace {

py::dict record_to_dict(const RoundRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["eta"] = r.eta;
  d["B_up"] = r.bits_up;
  d["B_down"] = r.bits_down;
  d["train_loss"] = r.train_loss;
  d["gap"] = r.gap;
  d["uplink_bits_cum"] = r.uplink_bits_cum;
  d["downlink_bits_cum"] = r.downlink_bits_cum;
  return d;
}

py::dict report_to_dict(const Report& r) {
  py::dict d;
  d["title"] = r.title;
  d["passed"] = r.passed();
  py::dict fields;
  for (const auto& [k, v] : r.fields) fields[py::str(k)] = v;
  d["fields"] = fields;
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict cd;
    cd["name"] = c.name;
    cd["value"] = c.value;
    cd["limit"] = c.limit;
    cd["passed"] = c.passed;
    checks.append(cd);
  }
  d["checks"] = checks;
  d["text"] = r.to_text();
  return d;
}

Rounding parse_rounding(const std::string& s) {
  if (s == "nearest") return Rounding::Nearest;
  if (s == "stochastic") return Rounding::Stochastic;
  throw std::invalid_argument("rounding must be 'nearest' or 'stochastic'");
}

RandomStream stream(std::uint64_t seed) {
  return RandomStream::derive(seed, 0, 0, StreamKind::Probe);
}

}  // namespace

PYBIND11_MODULE(_fedq, m) {
  m.doc() = "Quantized federated averaging: quantizers, schedules, simulator and verifiers";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<AssumptionViolation>(m, "AssumptionViolation", PyExc_RuntimeError);

  // Scalar quantizers.
  m.def("round_nearest", &round_nearest, py::arg("x"));
  m.def(
      "round_stochastic",
      [](double x, std::uint64_t seed) {
        auto rng = stream(seed);
        return round_stochastic(x, rng);
      },
      py::arg("x"), py::arg("seed") = 1);
  m.def("clamp_limit", &clamp_limit, py::arg("r"), py::arg("bits"));
  m.def(
      "quantize_pipeline",
      [](double w, int bits, double gain, const std::string& rounding, std::uint64_t seed) {
        auto rng = stream(seed);
        const auto code =
            quantize_pipeline(w, QuantizerSpec::tuned(bits, gain, parse_rounding(rounding)), rng);
        return py::make_tuple(code.codeword, code.value);
      },
      py::arg("w"), py::arg("bits"), py::arg("gain"), py::arg("rounding") = "nearest",
      py::arg("seed") = 1);
  m.def(
      "grid_moments",
      [](double w, double M, int bits) {
        const auto b = grid_bracket(w, GridSpec{M, bits});
        return py::make_tuple(b.low, b.high, b.p_high, b.mean(), b.mse(w));
      },
      py::arg("w"), py::arg("M"), py::arg("bits"),
      "(low, high, p_high, mean, variance) of stochastic rounding onto the grid");
  m.def(
      "quantize_vector",
      [](const std::vector<double>& v, int bits, double gain, const std::string& rounding,
         std::uint64_t seed) {
        auto rng = stream(seed);
        const auto q =
            quantize_vector(v, QuantizerSpec::tuned(bits, gain, parse_rounding(rounding)), rng);
        return py::make_tuple(q.codewords, q.dequantize());
      },
      py::arg("v"), py::arg("bits"), py::arg("gain"), py::arg("rounding") = "nearest",
      py::arg("seed") = 1);
  m.def("dt_gain", [](const std::vector<double>& d, int bits) { return dt_gain(d, bits); },
        py::arg("d"), py::arg("bits"));
  m.def("message_bits", py::overload_cast<std::size_t, int>(&wire::message_bits), py::arg("dim"),
        py::arg("bits"));

  // Schedules.
  m.def("lr_schedule", &lr_schedule, py::arg("t"), py::arg("mu"), py::arg("gamma"));
  m.def("bits_thm1", &bits_thm1, py::arg("t"), py::arg("mu"), py::arg("gamma"));
  m.def("bits_downlink", &bits_downlink, py::arg("t"), py::arg("mu"), py::arg("gamma"));
  m.def("bits_step", &bits_step, py::arg("r"), py::arg("f"), py::arg("p"));

  // Simulator.
  m.def(
      "run_federation",
      [](const std::string& config_text, std::optional<std::uint64_t> seed, unsigned threads) {
        auto config = parse_config(config_text);
        if (seed) config.seed = *seed;
        std::vector<RoundRecord> records;
        {
          py::gil_scoped_release release;
          records = run_federation(config, threads);
        }
        py::list out;
        for (const auto& r : records) out.append(record_to_dict(r));
        return out;
      },
      py::arg("config_text"), py::arg("seed") = py::none(), py::arg("threads") = 1,
      "Run all rounds of a \"key = value\" config; returns one dict per round");
  m.def(
      "canonical_config",
      [](const std::string& text) { return to_config_text(parse_config(text)); },
      py::arg("config_text"));
  m.def(
      "gamma_of",
      [](const std::vector<std::vector<double>>& client_points) {
        std::vector<ClientDataset> clients;
        for (const auto& pts : client_points) {
          ClientDataset c;
          for (double x : pts) c.samples.push_back(Sample{{x}, 0});
          clients.push_back(std::move(c));
        }
        const LossModel model{};
        const auto opt = solve_optimum(model, clients);
        return compute_gamma(model, clients, opt);
      },
      py::arg("client_points"), "Gamma for 1-D quadratic clients given their sample lists");

  // Verifiers.
  m.def(
      "verify_lemma4",
      [](std::size_t N, std::size_t K, std::size_t dim, std::uint64_t seed) {
        return report_to_dict(verify_lemma4(N, K, dim, seed));
      },
      py::arg("N"), py::arg("K"), py::arg("dim") = 5, py::arg("seed") = 1);
  m.def(
      "verify_lemma5",
      [](double M, int B, std::size_t trials, std::uint64_t seed) {
        return report_to_dict(verify_lemma5(M, B, trials, seed));
      },
      py::arg("M"), py::arg("B"), py::arg("trials") = 10000, py::arg("seed") = 1);
  m.def(
      "verify_lemma7",
      [](const std::vector<double>& d, int B, std::size_t trials, std::uint64_t seed) {
        return report_to_dict(verify_lemma7(d, B, trials, seed));
      },
      py::arg("d"), py::arg("B"), py::arg("trials") = 10000, py::arg("seed") = 1);
}
