#include "hifd/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "hifd/errors.hpp"

namespace hifd::csv {
namespace {

void append_g(std::string& out, const char* fmt, double v) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof(buf), fmt, v);
    out.append(buf, static_cast<std::size_t>(n));
}

void append_time(std::string& out, double t) { append_g(out, "%.15g", t); }
void append_value(std::string& out, double v) { append_g(out, "%.17g", v); }

void dump(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CsvError("cannot open for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw CsvError("write failed: " + path.string());
}

double parse_double(std::string_view field, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw CsvError("malformed numeric field '" + std::string(field) + "'", line);
    return v;
}

std::vector<std::string_view> split_fields(std::string_view row) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = row.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(row.substr(pos));
            return fields;
        }
        fields.push_back(row.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

}  // namespace

void write_waveform(const std::filesystem::path& path, const wavesim::Waveform& w,
                    bool include_label) {
    if (include_label && w.labels.size() != w.size())
        throw ParameterError("label channel length does not match samples");
    const auto& x = w.primary();
    std::string text;
    text.reserve(x.size() * 48 + 32);
    text += include_label ? "time_s,i_primary,label\n" : "time_s,i_primary\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        append_time(text, w.time_at(i));
        text += ',';
        append_value(text, x[i]);
        if (include_label) {
            text += ',';
            text += w.labels[i] ? '1' : '0';
        }
        text += '\n';
    }
    dump(path, text);
}

wavesim::Waveform read_waveform(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open for reading: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty file: " + path.string(), 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool has_label = false;
    if (line == "time_s,i_primary,label") {
        has_label = true;
    } else if (line != "time_s,i_primary") {
        throw CsvError("unexpected header '" + line + "'", 1);
    }

    std::vector<double> times, currents;
    std::vector<std::uint8_t> labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        const std::size_t expected = has_label ? 3 : 2;
        if (fields.size() != expected)
            throw CsvError("expected " + std::to_string(expected) + " fields, got " +
                               std::to_string(fields.size()),
                           lineno);
        times.push_back(parse_double(fields[0], lineno));
        currents.push_back(parse_double(fields[1], lineno));
        if (has_label) {
            if (fields[2] != "0" && fields[2] != "1")
                throw CsvError("label must be 0 or 1", lineno);
            labels.push_back(fields[2] == "1" ? 1 : 0);
        }
    }
    if (times.size() < 2) throw CsvError("need at least two samples: " + path.string());

    const double span = times.back() - times.front();
    if (!(span > 0.0)) throw CsvError("time column must be strictly increasing");
    const double dt = span / static_cast<double>(times.size() - 1);
    const double tol = 1e-6 * dt;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        if (std::abs((times[i + 1] - times[i]) - dt) > tol)
            throw CsvError("time column is not uniformly spaced", i + 3);
    }

    wavesim::Waveform w;
    w.sample_rate = 1.0 / dt;
    w.t0 = times.front();
    w.channels.emplace_back("i_primary", std::move(currents));
    w.labels = std::move(labels);
    return w;
}

void write_forcing(const std::filesystem::path& path, std::span<const double> timestamps,
                   std::span<const double> forcing, std::span<const double> magnitude) {
    if (timestamps.size() != forcing.size() || forcing.size() != magnitude.size())
        throw ParameterError("forcing column lengths differ");
    std::string text = "time_s,forcing,forcing_magnitude\n";
    text.reserve(timestamps.size() * 64 + 40);
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        append_time(text, timestamps[i]);
        text += ',';
        append_value(text, forcing[i]);
        text += ',';
        append_value(text, magnitude[i]);
        text += '\n';
    }
    dump(path, text);
}

void write_scores(const std::filesystem::path& path, std::span<const double> timestamps,
                  std::span<const double> anomaly_score, const std::vector<bool>& flagged) {
    if (timestamps.size() != anomaly_score.size() || anomaly_score.size() != flagged.size())
        throw ParameterError("score column lengths differ");
    std::string text = "time_s,anomaly_score,flagged\n";
    text.reserve(timestamps.size() * 56 + 40);
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        append_time(text, timestamps[i]);
        text += ',';
        append_value(text, anomaly_score[i]);
        text += ',';
        text += flagged[i] ? '1' : '0';
        text += '\n';
    }
    dump(path, text);
}

void write_norm_scores(const std::filesystem::path& path, std::span<const double> timestamps,
                       std::span<const double> norm_scores) {
    if (timestamps.size() != norm_scores.size())
        throw ParameterError("norm score column lengths differ");
    std::string text = "time_s,norm_score\n";
    text.reserve(timestamps.size() * 48 + 24);
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        append_time(text, timestamps[i]);
        text += ',';
        append_value(text, norm_scores[i]);
        text += '\n';
    }
    dump(path, text);
}

void write_graph(const std::filesystem::path& path, const s2g::SubsequenceGraph& g) {
    std::string text = "node_id";
    const Eigen::Index dims = g.nodes.empty() ? 0 : g.nodes.front().centroid.size();
    for (Eigen::Index d = 0; d < dims; ++d) text += ",centroid_" + std::to_string(d);
    text += ",member_count\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        text += std::to_string(i);
        for (Eigen::Index d = 0; d < dims; ++d) {
            text += ',';
            append_value(text, g.nodes[i].centroid.size() > d ? g.nodes[i].centroid[d] : 0.0);
        }
        text += ',' + std::to_string(g.nodes[i].member_count) + '\n';
    }

    std::vector<std::pair<std::uint64_t, std::int64_t>> edges(g.edges.begin(), g.edges.end());
    std::sort(edges.begin(), edges.end());
    text += "src,dst,weight\n";
    for (const auto& [key, weight] : edges) {
        text += std::to_string(key >> 32);
        text += ',';
        text += std::to_string(key & 0xffffffffu);
        text += ',';
        text += std::to_string(weight);
        text += '\n';
    }
    dump(path, text);
}

}  // namespace hifd::csv
