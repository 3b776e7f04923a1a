#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hifd/havok.hpp"
#include "hifd/s2g.hpp"
#include "hifd/wavesim.hpp"

namespace hifd::detector {

struct DetectorConfig {
    double baseline_span = 0.5;       // seconds of the record treated as fault-free
    int smoothing_window = 769;       // centered moving average width (score samples, odd)
    double sigma_multiplier = 3.0;
    double min_event_duration = 0.01; // seconds; shorter flag runs are dropped
    std::optional<double> theta_override;  // fixed threshold instead of the 3-sigma rule
    havok::RollingConfig havok;
    s2g::S2gConfig s2g;

    void validate() const;
};

struct Interval {
    double onset = 0.0;     // seconds
    double duration = 0.0;  // seconds
    double peak_score = 0.0;
};

/// Outcome of matching detected intervals against scheduled ground truth.
struct EvalResult {
    struct EventOutcome {
        double onset = 0.0;   // true HIF onset
        bool detected = false;
        double latency = 0.0; // seconds, valid when detected
    };
    std::vector<EventOutcome> events;
    int true_positives = 0;
    int false_positives = 0;
    int missed = 0;
    std::vector<Interval> false_positive_intervals;

    [[nodiscard]] double detection_rate() const {
        return events.empty() ? 1.0
                              : static_cast<double>(true_positives) /
                                    static_cast<double>(events.size());
    }
};

struct DetectionReport {
    s2g::ScoreSeries scores;            // normalized + smoothed, decision-time stamps
    std::vector<double> anomaly_score;  // negated normalized score (spikes at faults)
    std::vector<std::uint8_t> flagged;
    double theta = 0.0;
    bool degenerate_baseline = false;
    std::vector<Interval> intervals;

    std::vector<double> forcing;            // stitched forcing statistic
    std::vector<double> forcing_timestamps; // start-anchored
    std::vector<double> forcing_magnitude;  // smoothed |forcing|
    int rank = 0;
    std::vector<int> window_ranks;

    std::string config_echo;   // canonical config serialization
    std::string input_digest;  // fingerprint of the analyzed channel
    std::optional<EvalResult> evaluation;
};

/// Z-normalizes against the first `baseline_count` positions (population
/// statistics), then applies a centered moving average of width w with edge
/// replication. baseline_count = 0 uses the whole series. Zero baseline
/// variance falls back to unit variance and sets *degenerate when given.
s2g::ScoreSeries normalize_scores(const s2g::ScoreSeries& s, int w,
                                  std::size_t baseline_count = 0,
                                  bool* degenerate = nullptr);

struct ThresholdResult {
    double theta = 0.0;
    std::vector<std::uint8_t> mask;  // 1 where score < theta
};

/// Adaptive threshold theta = mu_b - sigma_multiplier * sigma_b over the
/// baseline-span scores; positions below theta are flagged. Requires at
/// least 100 baseline scores.
ThresholdResult three_sigma(const s2g::ScoreSeries& s, const DetectorConfig& cfg);

/// Maximal flagged runs as intervals, dropping runs shorter than min_dur.
/// `scores` (optional, aligned) provides the peak anomaly score per interval.
std::vector<Interval> extract_intervals(std::span<const std::uint8_t> mask,
                                        std::span<const double> timestamps,
                                        double min_dur,
                                        std::span<const double> scores = {});

/// Matches intervals to scheduled HIF events: an interval belongs to the HIF
/// whose onset precedes it by at most one cycle; the first matched interval
/// sets the event latency. Unmatched intervals are false positives,
/// unmatched HIFs are misses.
EvalResult evaluate(std::span<const Interval> intervals,
                    const wavesim::EventSchedule& ground_truth, double cycle_seconds);

/// Full pipeline: rolling forcing -> |forcing| -> transition-graph scoring ->
/// normalize/smooth -> 3-sigma -> intervals. Score timestamps are re-anchored
/// to decision time (the last waveform sample that can influence the smoothed
/// score), so detections never precede their cause.
DetectionReport run_pipeline(const wavesim::Waveform& w, const DetectorConfig& cfg);

/// Provenance fields stamped into serialized reports by the front end.
struct ReportMeta {
    std::string tool_version;
    std::string command;
    std::string input_path;
};

/// Canonical JSON document for a report: stable key order, so equal reports
/// serialize byte-identically. Embeds the config echo and the evaluation
/// outcome when present.
std::string serialize_report(const DetectionReport& r, const ReportMeta& meta = {});

}  // namespace hifd::detector
