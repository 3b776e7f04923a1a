#include "hifd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "hifd/digest.hpp"
#include "hifd/errors.hpp"

namespace hifd::detector {
namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

/// Rethrows pipeline-internal failures with the stage name prefixed; input
/// and configuration errors already carry their own attribution.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ParameterError& e) {
        throw ParameterError(std::string(name) + " stage: " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + " stage: " + e.what());
    }
}

struct BaselineStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

BaselineStats baseline_stats(std::span<const double> x, std::size_t count) {
    BaselineStats st;
    for (std::size_t i = 0; i < count; ++i) st.mean += x[i];
    st.mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = x[i] - st.mean;
        var += d * d;
    }
    st.stddev = std::sqrt(var / static_cast<double>(count));
    return st;
}

std::vector<double> moving_average(std::span<const double> x, int w) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t h = w / 2;
    std::vector<double> prefix(x.size() + 1, 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i + 1)] =
        prefix[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(i)];

    std::vector<double> out(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = i - h, hi = i + h;
        const std::ptrdiff_t lo_c = std::max<std::ptrdiff_t>(lo, 0);
        const std::ptrdiff_t hi_c = std::min<std::ptrdiff_t>(hi, n - 1);
        double sum = prefix[static_cast<std::size_t>(hi_c + 1)] -
                     prefix[static_cast<std::size_t>(lo_c)];
        if (lo < 0) sum += static_cast<double>(-lo) * x[0];
        if (hi > n - 1) sum += static_cast<double>(hi - (n - 1)) * x[x.size() - 1];
        out[static_cast<std::size_t>(i)] = sum / w;
    }
    return out;
}

std::size_t baseline_count(const s2g::ScoreSeries& s, double span) {
    std::size_t b = 0;
    while (b < s.timestamps.size() && s.timestamps[b] - s.timestamps[0] < span) ++b;
    return b;
}

}  // namespace

void DetectorConfig::validate() const {
    require(baseline_span > 0.0, "baseline_span must be positive");
    require(smoothing_window >= 1, "smoothing_window must be at least 1");
    require(smoothing_window % 2 == 1, "smoothing_window must be odd (centered average)");
    require(sigma_multiplier > 0.0, "sigma_multiplier must be positive");
    require(min_event_duration >= 0.0, "min_event_duration must be non-negative");
    if (theta_override) require(std::isfinite(*theta_override), "theta_override must be finite");
    havok.validate();
    s2g.validate();
}

s2g::ScoreSeries normalize_scores(const s2g::ScoreSeries& s, int w,
                                  std::size_t baseline_count, bool* degenerate) {
    require(w >= 1, "smoothing window must be at least 1");
    require(w % 2 == 1, "smoothing window must be odd");
    require(!s.norm_scores.empty(), "empty score series");
    std::size_t b = baseline_count == 0 ? s.norm_scores.size()
                                        : std::min(baseline_count, s.norm_scores.size());

    const auto st = baseline_stats(s.norm_scores, b);
    // A flat baseline leaves nothing to scale by; fall back to unit variance
    // (tolerating mean-roundoff wobble) and report the degeneracy.
    const bool flat = st.stddev <= 1e-12 * std::abs(st.mean);
    if (degenerate) *degenerate = flat;
    const double sigma = flat ? 1.0 : st.stddev;

    std::vector<double> z(s.norm_scores.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (s.norm_scores[i] - st.mean) / sigma;

    s2g::ScoreSeries out = s;
    out.norm_scores = moving_average(z, w);
    return out;
}

ThresholdResult three_sigma(const s2g::ScoreSeries& s, const DetectorConfig& cfg) {
    require(!s.norm_scores.empty(), "empty score series");
    const std::size_t b = baseline_count(s, cfg.baseline_span);
    if (b < 100)
        throw ConfigError("baseline span must contain at least 100 scores, has " +
                              std::to_string(b),
                          "detector.baseline_span");

    const auto st = baseline_stats(s.norm_scores, b);
    ThresholdResult out;
    out.theta = st.mean - cfg.sigma_multiplier * st.stddev;
    out.mask.resize(s.norm_scores.size());
    for (std::size_t i = 0; i < out.mask.size(); ++i)
        out.mask[i] = s.norm_scores[i] < out.theta ? 1 : 0;
    return out;
}

std::vector<Interval> extract_intervals(std::span<const std::uint8_t> mask,
                                        std::span<const double> timestamps,
                                        double min_dur,
                                        std::span<const double> scores) {
    require(mask.size() == timestamps.size(), "mask and timestamps must align");
    require(scores.empty() || scores.size() == mask.size(), "scores must align with the mask");
    require(min_dur >= 0.0, "min_dur must be non-negative");

    const double dt = timestamps.size() >= 2 ? timestamps[1] - timestamps[0] : 0.0;
    std::vector<Interval> out;
    std::size_t i = 0;
    while (i < mask.size()) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < mask.size() && mask[j + 1]) ++j;
        Interval iv;
        iv.onset = timestamps[i];
        iv.duration = timestamps[j] - timestamps[i] + dt;
        if (!scores.empty())
            iv.peak_score = *std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(i),
                                              scores.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        if (iv.duration >= min_dur) out.push_back(iv);
        i = j + 1;
    }
    return out;
}

EvalResult evaluate(std::span<const Interval> intervals,
                    const wavesim::EventSchedule& ground_truth, double cycle_seconds) {
    require(cycle_seconds > 0.0, "cycle_seconds must be positive");
    const auto hifs = ground_truth.hif_events();

    EvalResult out;
    out.events.reserve(hifs.size());
    for (const auto* ev : hifs) out.events.push_back({ev->onset, false, 0.0});

    for (const auto& iv : intervals) {
        // Candidate: the closest HIF onset at or before the detection, no
        // further back than one cycle.
        int match = -1;
        for (std::size_t e = 0; e < out.events.size(); ++e) {
            const double gap = iv.onset - out.events[e].onset;
            if (gap >= 0.0 && gap <= cycle_seconds) match = static_cast<int>(e);
        }
        if (match < 0) {
            ++out.false_positives;
            out.false_positive_intervals.push_back(iv);
            continue;
        }
        auto& ev = out.events[static_cast<std::size_t>(match)];
        if (!ev.detected) {
            ev.detected = true;
            ev.latency = iv.onset - ev.onset;
            ++out.true_positives;
        }
    }
    out.missed = static_cast<int>(out.events.size()) - out.true_positives;
    return out;
}

DetectionReport run_pipeline(const wavesim::Waveform& w, const DetectorConfig& cfg) {
    cfg.validate();
    require(w.sample_rate > 0.0, "waveform sample rate must be positive");
    const auto& x = w.primary();
    const auto ts = w.timestamps();

    DetectionReport report;
    {
        Fnv1a64 digest;
        digest.update(w.sample_rate);
        digest.update(std::span<const double>(x));
        report.input_digest = digest.hex();
    }

    havok::RollingConfig rc = cfg.havok;
    rc.rank_train_span = cfg.baseline_span;
    const auto rolling =
        stage("havok", [&] { return havok::rolling_forcing(x, ts, rc); });
    report.rank = rolling.rank;
    report.window_ranks = rolling.window_ranks;
    report.forcing = rolling.forcing;
    report.forcing_timestamps = rolling.timestamps;

    std::vector<double> abs_forcing(rolling.forcing.size());
    for (std::size_t i = 0; i < abs_forcing.size(); ++i)
        abs_forcing[i] = std::abs(rolling.forcing[i]);
    report.forcing_magnitude = moving_average(abs_forcing, cfg.smoothing_window);

    auto raw = stage("s2g", [&] {
        const auto q = s2g::quantize_series(abs_forcing, cfg.s2g);
        const auto g = s2g::build_graph(q);
        const std::size_t n_sub = g.node_seq.size();
        return s2g::score_all(g, cfg.s2g.query_len_lq,
                              std::span<const double>(rolling.timestamps.data(), n_sub));
    });

    // Stamp each score at the last raw sample its smoothed value draws on:
    // the query path spans lq + l - 1 forcing positions, each forcing
    // position aggregates a Hankel column of window_k samples, and smoothing
    // reaches half a window further. Onset timestamps then trail the data
    // that produced them, so reported latencies cannot go negative.
    const std::size_t shift = static_cast<std::size_t>(cfg.s2g.query_len_lq) +
                              static_cast<std::size_t>(cfg.s2g.subseq_len_l) +
                              static_cast<std::size_t>(cfg.havok.window_k) - 3 +
                              static_cast<std::size_t>(cfg.smoothing_window / 2);
    for (std::size_t p = 0; p < raw.timestamps.size(); ++p)
        raw.timestamps[p] = w.time_at(std::min(p + shift, w.size() - 1));

    const std::size_t b_count = baseline_count(raw, cfg.baseline_span);
    if (b_count < 100)
        throw ConfigError("baseline span must contain at least 100 scores, has " +
                              std::to_string(b_count),
                          "detector.baseline_span");

    bool degenerate = false;
    report.scores = normalize_scores(raw, cfg.smoothing_window, b_count, &degenerate);
    report.degenerate_baseline = degenerate;

    auto thresh = three_sigma(report.scores, cfg);
    if (cfg.theta_override) {
        thresh.theta = *cfg.theta_override;
        for (std::size_t i = 0; i < thresh.mask.size(); ++i)
            thresh.mask[i] = report.scores.norm_scores[i] < thresh.theta ? 1 : 0;
    }
    report.theta = thresh.theta;
    report.flagged = std::move(thresh.mask);

    report.anomaly_score.resize(report.scores.norm_scores.size());
    for (std::size_t i = 0; i < report.anomaly_score.size(); ++i)
        report.anomaly_score[i] = -report.scores.norm_scores[i];

    report.intervals = extract_intervals(report.flagged, report.scores.timestamps,
                                         cfg.min_event_duration, report.anomaly_score);
    return report;
}

std::string serialize_report(const DetectionReport& r, const ReportMeta& meta) {
    using ordered_json = nlohmann::ordered_json;
    ordered_json doc;
    if (!meta.tool_version.empty()) doc["tool_version"] = meta.tool_version;
    if (!meta.command.empty()) doc["command"] = meta.command;
    if (!meta.input_path.empty()) doc["input"] = meta.input_path;
    doc["input_digest"] = r.input_digest;
    doc["rank"] = r.rank;
    doc["window_ranks"] = r.window_ranks;
    doc["theta"] = r.theta;
    doc["degenerate_baseline"] = r.degenerate_baseline;
    doc["score_count"] = r.scores.norm_scores.size();
    std::size_t flagged = 0;
    for (const auto f : r.flagged) flagged += f ? 1 : 0;
    doc["flagged_count"] = flagged;

    ordered_json intervals = ordered_json::array();
    for (const auto& iv : r.intervals) {
        ordered_json e;
        e["onset"] = iv.onset;
        e["duration"] = iv.duration;
        e["peak_score"] = iv.peak_score;
        intervals.push_back(std::move(e));
    }
    doc["intervals"] = std::move(intervals);

    if (r.evaluation) {
        const auto& ev = *r.evaluation;
        ordered_json out;
        out["true_positives"] = ev.true_positives;
        out["false_positives"] = ev.false_positives;
        out["missed"] = ev.missed;
        out["detection_rate"] = ev.detection_rate();
        ordered_json events = ordered_json::array();
        for (const auto& e : ev.events) {
            ordered_json row;
            row["onset"] = e.onset;
            row["detected"] = e.detected;
            if (e.detected) row["latency"] = e.latency;
            events.push_back(std::move(row));
        }
        out["events"] = std::move(events);
        doc["evaluation"] = std::move(out);
    }

    if (!r.config_echo.empty()) doc["config"] = ordered_json::parse(r.config_echo);
    return doc.dump(2) + "\n";
}

}  // namespace hifd::detector
