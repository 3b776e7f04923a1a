#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "hifd/config.hpp"
#include "hifd/detector.hpp"
#include "hifd/errors.hpp"
#include "hifd/havok.hpp"
#include "hifd/wavesim.hpp"

#ifndef HIFD_VERSION
#define HIFD_VERSION "0.1.0"
#endif

namespace py = pybind11;
using namespace hifd;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(double));
    return a;
}

py::array_t<std::uint8_t> to_array(const std::vector<std::uint8_t>& v) {
    py::array_t<std::uint8_t> a(static_cast<py::ssize_t>(v.size()));
    std::memcpy(a.mutable_data(), v.data(), v.size());
    return a;
}

py::dict interval_dict(const detector::Interval& iv) {
    py::dict d;
    d["onset"] = iv.onset;
    d["duration"] = iv.duration;
    d["peak_score"] = iv.peak_score;
    return d;
}

py::dict report_dict(const detector::DetectionReport& r) {
    py::dict d;
    d["input_digest"] = r.input_digest;
    d["rank"] = r.rank;
    d["window_ranks"] = r.window_ranks;
    d["theta"] = r.theta;
    d["degenerate_baseline"] = r.degenerate_baseline;
    d["score_timestamps"] = to_array(r.scores.timestamps);
    d["norm_scores"] = to_array(r.scores.norm_scores);
    d["anomaly_score"] = to_array(r.anomaly_score);
    d["flagged"] = to_array(r.flagged);
    d["forcing"] = to_array(r.forcing);
    d["forcing_timestamps"] = to_array(r.forcing_timestamps);
    d["forcing_magnitude"] = to_array(r.forcing_magnitude);
    py::list intervals;
    for (const auto& iv : r.intervals) intervals.append(interval_dict(iv));
    d["intervals"] = intervals;
    if (r.evaluation) {
        const auto& ev = *r.evaluation;
        py::dict e;
        e["true_positives"] = ev.true_positives;
        e["false_positives"] = ev.false_positives;
        e["missed"] = ev.missed;
        e["detection_rate"] = ev.detection_rate();
        py::list events;
        for (const auto& outcome : ev.events) {
            py::dict row;
            row["onset"] = outcome.onset;
            row["detected"] = outcome.detected;
            if (outcome.detected) row["latency"] = outcome.latency;
            events.append(row);
        }
        e["events"] = events;
        d["evaluation"] = e;
    }
    d["report_json"] = detector::serialize_report(r);
    return d;
}

py::dict simulate(const std::string& config_json) {
    const auto cfg = config::parse_config_json(config_json);
    const auto w = wavesim::synthesize(cfg.sim, cfg.schedule);
    py::dict d;
    d["sample_rate"] = w.sample_rate;
    d["t0"] = w.t0;
    d["time"] = to_array(w.timestamps());
    d["i_primary"] = to_array(w.primary());
    d["labels"] = to_array(w.labels);
    py::dict channels;
    for (const auto& [name, series] : w.channels) channels[py::str(name)] = to_array(series);
    d["channels"] = channels;
    return d;
}

wavesim::Waveform waveform_from(
    py::array_t<double, py::array::c_style | py::array::forcecast> samples,
    double sample_rate, double t0) {
    if (samples.ndim() != 1) throw ParameterError("samples must be a one-dimensional array");
    wavesim::Waveform w;
    w.sample_rate = sample_rate;
    w.t0 = t0;
    w.channels.emplace_back(
        "i_primary", std::vector<double>(samples.data(), samples.data() + samples.shape(0)));
    return w;
}

py::dict detect(const std::string& config_json,
                py::array_t<double, py::array::c_style | py::array::forcecast> samples,
                double sample_rate, double t0) {
    const auto cfg = config::parse_config_json(config_json);
    const double expected = cfg.sim.sample_rate();
    if (std::abs(sample_rate - expected) > 1e-6 * expected)
        throw SampleRateError("sample rate " + std::to_string(sample_rate) +
                              " disagrees with configured " + std::to_string(expected));
    const wavesim::Waveform w = waveform_from(samples, sample_rate, t0);
    auto report = detector::run_pipeline(w, cfg.detector);
    report.config_echo = config::canonical_echo(cfg);
    return report_dict(report);
}

py::dict run(const std::string& config_json) {
    const auto cfg = config::parse_config_json(config_json);
    const auto w = wavesim::synthesize(cfg.sim, cfg.schedule);
    auto report = detector::run_pipeline(w, cfg.detector);
    report.config_echo = config::canonical_echo(cfg);
    report.evaluation = detector::evaluate(report.intervals, cfg.schedule,
                                           1.0 / cfg.sim.system_frequency);
    return report_dict(report);
}

Eigen::MatrixXd build_hankel(std::vector<double> x, int k) {
    return havok::build_hankel(x, k).matrix;
}

py::tuple hankel_svd(std::vector<double> x, int k) {
    const auto f = havok::svd(havok::build_hankel(x, k));
    return py::make_tuple(f.left_vectors, f.singular_values, f.right_vectors);
}

int optimal_rank(std::vector<double> singular_values, double aspect_beta, bool noise_known,
                 double noise_scale) {
    return havok::optimal_rank(singular_values, aspect_beta, noise_known, noise_scale);
}

std::string preset(const std::string& name) { return std::string(config::preset(name)); }

std::string canonical_echo(const std::string& config_json) {
    return config::canonical_echo(config::parse_config_json(config_json));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "High-impedance fault simulation and detection pipeline";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<SampleRateError>(m, "SampleRateError", PyExc_ValueError);

    m.def("version", [] { return std::string(HIFD_VERSION); },
          "Library version string.");
    m.def("preset", &preset, py::arg("name"),
          "Bundled scenario config by name ('case_a', 'case_b'); '' when unknown.");
    m.def("canonical_echo", &canonical_echo, py::arg("config_json"),
          "Canonical serialization of a config document (defaults materialized).");
    m.def("simulate", &simulate, py::arg("config_json"),
          "Synthesize the configured record; returns time, channels and labels.");
    m.def("detect", &detect, py::arg("config_json"), py::arg("samples"),
          py::arg("sample_rate"), py::arg("t0") = 0.0,
          "Run the detection pipeline on a primary-current series.");
    m.def("run", &run, py::arg("config_json"),
          "Simulate, detect and evaluate against the configured schedule in one call.");
    m.def("build_hankel", &build_hankel, py::arg("x"), py::arg("k"),
          "Time-delay embedding matrix of a scalar series ((N-k+1) x k).");
    m.def("hankel_svd", &hankel_svd, py::arg("x"), py::arg("k"),
          "SVD factors (U, s, V) of the delay embedding of x.");
    m.def("optimal_rank", &optimal_rank, py::arg("singular_values"), py::arg("aspect_beta"),
          py::arg("noise_known") = false, py::arg("noise_scale") = 0.0,
          "Hard-threshold rank selection over a singular-value spectrum.");
}
