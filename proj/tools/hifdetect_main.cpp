#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hifd/config.hpp"
#include "hifd/csv.hpp"
#include "hifd/detector.hpp"
#include "hifd/digest.hpp"
#include "hifd/errors.hpp"
#include "hifd/wavesim.hpp"

#ifndef HIFD_VERSION
#define HIFD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace hifd;

namespace {

struct SimulateArgs {
    std::string config;
    std::string output = "waveform.csv";
    std::optional<std::uint64_t> seed;
    bool force = false;
};

struct DetectArgs {
    std::string config;
    std::string input;
    std::string output = "detect_out";
    bool force = false;
};

struct EvaluateArgs {
    std::string input;     // report document
    std::string config;    // schedule echo written by simulate
    std::string output = "metrics.json";
    bool force = false;
};

struct ReportArgs {
    std::string input;     // detect output directory
    std::string output;    // bundle directory, defaults to the input directory
    int downsample = 1;
    bool force = false;
};

/// --config accepts a file path or the name of a bundled preset.
config::RunConfig resolve_config(const std::string& spec) {
    if (!fs::exists(spec)) {
        const std::string_view text = config::preset(spec);
        if (!text.empty()) return config::parse_config_json(text, true);
    }
    return config::load_config(spec);
}

void guard_overwrite(const fs::path& p, bool force) {
    if (!force && fs::exists(p))
        throw Error("output already exists (use --force to overwrite): " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + p.string());
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ordered_json parse_json_file(const fs::path& p, const char* what) {
    try {
        return ordered_json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string(what) + " " + p.string() + " is not valid JSON: " +
                          e.what());
    }
}

std::string waveform_digest(const wavesim::Waveform& w) {
    Fnv1a64 digest;
    digest.update(w.sample_rate);
    digest.update(std::span<const double>(w.primary()));
    return digest.hex();
}

fs::path schedule_path_for(const fs::path& waveform_path) {
    fs::path p = waveform_path;
    p.replace_extension();
    p += ".schedule.json";
    return p;
}

void check_sample_rate(const wavesim::Waveform& w, const config::RunConfig& cfg) {
    const double expected = cfg.sim.sample_rate();
    if (std::abs(w.sample_rate - expected) > 1e-6 * expected) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "waveform sample rate %.6f Hz disagrees with configured %.6f Hz",
                      w.sample_rate, expected);
        throw SampleRateError(buf);
    }
}

/// Ground-truth HIF windows recovered from the label channel: each maximal
/// run of 1-labels is one fault interval.
wavesim::EventSchedule schedule_from_labels(const wavesim::Waveform& w) {
    wavesim::EventSchedule truth;
    const double dt = 1.0 / w.sample_rate;
    std::size_t i = 0;
    while (i < w.labels.size()) {
        if (!w.labels[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < w.labels.size() && w.labels[j]) ++j;
        wavesim::Event ev;
        ev.onset = w.time_at(i);
        ev.duration = static_cast<double>(j - i) * dt;
        ev.params = wavesim::HifParams{};
        truth.events.push_back(ev);
        i = j;
    }
    return truth;
}

int cmd_simulate(const SimulateArgs& args) {
    config::RunConfig cfg = resolve_config(args.config);
    if (args.seed) cfg.sim.rng_seed = *args.seed;

    const fs::path out = args.output;
    const fs::path sched_out = schedule_path_for(out);
    guard_overwrite(out, args.force);
    guard_overwrite(sched_out, args.force);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());

    const wavesim::Waveform w = wavesim::synthesize(cfg.sim, cfg.schedule);
    csv::write_waveform(out, w, true);

    ordered_json manifest;
    manifest["tool_version"] = HIFD_VERSION;
    manifest["command"] = "simulate";
    manifest["config_path"] = args.config;
    manifest["seed"] = cfg.sim.rng_seed;
    manifest["waveform"] = out.string();
    // fingerprint the artifact as a reader will see it (the sample rate is
    // reconstructed from the written time column)
    manifest["waveform_digest"] = waveform_digest(csv::read_waveform(out));
    manifest["config"] = ordered_json::parse(config::canonical_echo(cfg));
    write_text(sched_out, manifest.dump(2) + "\n");

    std::cout << "wrote " << out.string() << " (" << w.size() << " samples, "
              << cfg.schedule.events.size() << " events) and " << sched_out.string() << "\n";
    return 0;
}

int cmd_detect(const DetectArgs& args) {
    const wavesim::Waveform w = csv::read_waveform(args.input);
    config::RunConfig cfg = resolve_config(args.config);
    check_sample_rate(w, cfg);

    const fs::path dir = args.output;
    fs::create_directories(dir);
    const fs::path report_path = dir / "report.json";
    const fs::path scores_path = dir / "scores.csv";
    const fs::path forcing_path = dir / "forcing.csv";
    const fs::path norm_path = dir / "norm_scores.csv";
    const fs::path graph_path = dir / "graph.csv";
    for (const auto& p : {report_path, scores_path, forcing_path, norm_path, graph_path})
        guard_overwrite(p, args.force);

    detector::DetectionReport report = detector::run_pipeline(w, cfg.detector);
    report.config_echo = config::canonical_echo(cfg);
    if (!w.labels.empty())
        report.evaluation = detector::evaluate(report.intervals, schedule_from_labels(w),
                                               1.0 / cfg.sim.system_frequency);

    detector::ReportMeta meta;
    meta.tool_version = HIFD_VERSION;
    meta.command = "detect";
    meta.input_path = args.input;
    write_text(report_path, detector::serialize_report(report, meta));

    csv::write_scores(scores_path, report.scores.timestamps, report.anomaly_score,
                      std::vector<bool>(report.flagged.begin(), report.flagged.end()));
    csv::write_forcing(forcing_path, report.forcing_timestamps, report.forcing,
                       report.forcing_magnitude);
    csv::write_norm_scores(norm_path, report.scores.timestamps, report.scores.norm_scores);

    // same transform the pipeline scored, re-derived for the diagnostic dump
    std::vector<double> abs_forcing(report.forcing.size());
    for (std::size_t i = 0; i < abs_forcing.size(); ++i)
        abs_forcing[i] = std::abs(report.forcing[i]);
    csv::write_graph(graph_path,
                     s2g::build_graph(s2g::quantize_series(abs_forcing, cfg.detector.s2g)));

    std::cout << "wrote " << report_path.string() << " (" << report.intervals.size()
              << " intervals, theta " << report.theta << ")\n";
    return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
    const ordered_json report_doc = parse_json_file(args.input, "report");
    const ordered_json sched_doc = parse_json_file(args.config, "schedule");

    for (const char* key : {"input_digest", "intervals"})
        if (!report_doc.contains(key))
            throw ConfigError("report document missing key", key);
    for (const char* key : {"waveform_digest", "config"})
        if (!sched_doc.contains(key))
            throw ConfigError("schedule document missing key", key);

    const std::string report_digest = report_doc.at("input_digest").get<std::string>();
    const std::string sched_digest = sched_doc.at("waveform_digest").get<std::string>();
    if (report_digest != sched_digest)
        throw MismatchError("report input digest " + report_digest +
                            " does not match schedule waveform digest " + sched_digest);

    const config::RunConfig cfg = config::parse_config_json(sched_doc.at("config").dump());
    const double cycle = 1.0 / cfg.sim.system_frequency;

    std::vector<detector::Interval> intervals;
    for (const auto& iv : report_doc.at("intervals")) {
        detector::Interval d;
        d.onset = iv.at("onset").get<double>();
        d.duration = iv.at("duration").get<double>();
        if (iv.contains("peak_score")) d.peak_score = iv.at("peak_score").get<double>();
        intervals.push_back(d);
    }

    const detector::EvalResult ev = detector::evaluate(intervals, cfg.schedule, cycle);

    const fs::path out = args.output;
    guard_overwrite(out, args.force);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());

    ordered_json doc;
    doc["tool_version"] = HIFD_VERSION;
    doc["command"] = "evaluate";
    doc["report"] = args.input;
    doc["schedule"] = args.config;
    doc["input_digest"] = report_digest;
    doc["cycle_seconds"] = cycle;
    doc["true_positives"] = ev.true_positives;
    doc["false_positives"] = ev.false_positives;
    doc["missed"] = ev.missed;
    doc["detection_rate"] = ev.detection_rate();
    ordered_json events = ordered_json::array();
    for (const auto& e : ev.events) {
        ordered_json row;
        row["onset"] = e.onset;
        row["detected"] = e.detected;
        if (e.detected) {
            row["latency"] = e.latency;
            row["latency_cycles"] = e.latency / cycle;
        }
        events.push_back(std::move(row));
    }
    doc["events"] = std::move(events);
    ordered_json fps = ordered_json::array();
    for (const auto& iv : ev.false_positive_intervals) {
        ordered_json row;
        row["onset"] = iv.onset;
        row["duration"] = iv.duration;
        row["peak_score"] = iv.peak_score;
        fps.push_back(std::move(row));
    }
    doc["false_positive_intervals"] = std::move(fps);
    write_text(out, doc.dump(2) + "\n");

    std::cout << "wrote " << out.string() << " (detection rate " << ev.detection_rate()
              << ", " << ev.false_positives << " false positives)\n";
    return 0;
}

/// Splits CSV text into (header, data rows), tolerating CRLF and blank lines.
std::pair<std::string, std::vector<std::string>> csv_rows(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<std::string> rows;
    std::string header;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = nl + 1;
        if (first) {
            if (line.empty()) throw CsvError("empty file: " + path.string(), 1);
            header = std::move(line);
            first = false;
        } else if (!line.empty()) {
            rows.push_back(std::move(line));
        }
        if (nl == text.size()) break;
    }
    if (first) throw CsvError("empty file: " + path.string(), 1);
    return {header, rows};
}

std::vector<std::string> split_row(const std::string& row) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = row.find(',', pos);
        if (comma == std::string::npos) {
            fields.push_back(row.substr(pos));
            return fields;
        }
        fields.push_back(row.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

/// Copies selected columns of every downsample-th row, so a factor of 1
/// reproduces the source values byte for byte.
void write_bundle(const fs::path& src, const fs::path& dst, const std::string& src_header,
                  const std::string& dst_header, const std::vector<std::size_t>& columns,
                  int downsample, const std::string& extra_field = {}) {
    const auto [header, rows] = csv_rows(src);
    if (header != src_header)
        throw CsvError("unexpected header '" + header + "' in " + src.string(), 1);
    std::string text = dst_header + "\n";
    for (std::size_t i = 0; i < rows.size(); i += static_cast<std::size_t>(downsample)) {
        const auto fields = split_row(rows[i]);
        for (std::size_t c : columns) {
            if (c >= fields.size())
                throw CsvError("expected at least " + std::to_string(c + 1) + " fields",
                               i + 2);
            if (c != columns.front()) text += ',';
            text += fields[c];
        }
        if (!extra_field.empty()) {
            text += ',';
            text += extra_field;
        }
        text += '\n';
    }
    write_text(dst, text);
}

int cmd_report(const ReportArgs& args) {
    const fs::path dir = args.input;
    const ordered_json report_doc = parse_json_file(dir / "report.json", "report");

    fs::path waveform = report_doc.value("input", std::string());
    if (!fs::exists(waveform) && report_doc.contains("input")) {
        const fs::path fallback = dir / waveform.filename();
        if (fs::exists(fallback)) waveform = fallback;
    }

    const fs::path out_dir = args.output.empty() ? dir : fs::path(args.output);
    fs::create_directories(out_dir);
    const fs::path wave_out = out_dir / "plot_waveform.csv";
    const fs::path forcing_out = out_dir / "plot_forcing.csv";
    const fs::path scores_out = out_dir / "plot_scores.csv";
    for (const auto& p : {wave_out, forcing_out, scores_out}) guard_overwrite(p, args.force);

    const auto [wave_header, _] = csv_rows(waveform);
    const bool labeled = wave_header == "time_s,i_primary,label";
    write_bundle(waveform, wave_out,
                 labeled ? "time_s,i_primary,label" : "time_s,i_primary",
                 "time_s,i_primary", {0, 1}, args.downsample);
    write_bundle(dir / "forcing.csv", forcing_out, "time_s,forcing,forcing_magnitude",
                 "time_s,forcing_magnitude", {0, 2}, args.downsample);

    char theta_buf[40];
    std::snprintf(theta_buf, sizeof theta_buf, "%.17g",
                  report_doc.at("theta").get<double>());
    write_bundle(dir / "scores.csv", scores_out, "time_s,anomaly_score,flagged",
                 "time_s,anomaly_score,threshold", {0, 1}, args.downsample, theta_buf);

    std::cout << "wrote " << wave_out.string() << ", " << forcing_out.string() << ", "
              << scores_out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-impedance fault simulation and detection pipeline"};
    app.set_version_flag("--version", std::string("hifdetect ") + HIFD_VERSION);
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Synthesize a waveform from an event schedule");
    sim->add_option("--config", sim_args.config, "Config file path or preset name")->required();
    sim->add_option("--output", sim_args.output, "Waveform CSV path");
    sim->add_option("--seed", sim_args.seed, "Override the configured RNG seed");
    sim->add_flag("--force", sim_args.force, "Overwrite existing outputs");

    DetectArgs det_args;
    auto* det = app.add_subcommand("detect", "Run the detection pipeline on a waveform CSV");
    det->add_option("--config", det_args.config, "Config file path or preset name")->required();
    det->add_option("--input", det_args.input, "Waveform CSV")->required();
    det->add_option("--output", det_args.output, "Output directory");
    det->add_flag("--force", det_args.force, "Overwrite existing outputs");

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Score a detection report against its schedule");
    eval->add_option("--input", eval_args.input, "Report document from detect")->required();
    eval->add_option("--config", eval_args.config, "Schedule echo from simulate")->required();
    eval->add_option("--output", eval_args.output, "Metrics document path");
    eval->add_flag("--force", eval_args.force, "Overwrite existing outputs");

    ReportArgs rep_args;
    auto* rep = app.add_subcommand("report", "Export downsampled plot-ready series");
    rep->add_option("--input", rep_args.input, "Detect output directory")->required();
    rep->add_option("--output", rep_args.output, "Bundle directory (defaults to input)");
    rep->add_option("--downsample", rep_args.downsample, "Keep every n-th row")
        ->check(CLI::PositiveNumber);
    rep->add_flag("--force", rep_args.force, "Overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sim) return cmd_simulate(sim_args);
        if (*det) return cmd_detect(det_args);
        if (*eval) return cmd_evaluate(eval_args);
        if (*rep) return cmd_report(rep_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SampleRateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const MismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
