#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hifd/s2g.hpp"
#include "hifd/wavesim.hpp"

namespace hifd::csv {

/// Writes `time_s,i_primary[,label]` rows. Times use %.15g, currents %.17g so
/// that a read-back reproduces the samples bit for bit.
void write_waveform(const std::filesystem::path& path, const wavesim::Waveform& w,
                    bool include_label);

/// Reads a waveform CSV produced by write_waveform (label column optional).
/// The time column must be uniformly spaced; sample_rate is derived from it.
/// Malformed rows raise CsvError with the 1-based line number.
wavesim::Waveform read_waveform(const std::filesystem::path& path);

/// `time_s,forcing,forcing_magnitude` rows.
void write_forcing(const std::filesystem::path& path, std::span<const double> timestamps,
                   std::span<const double> forcing, std::span<const double> magnitude);

/// `time_s,anomaly_score,flagged` rows.
void write_scores(const std::filesystem::path& path, std::span<const double> timestamps,
                  std::span<const double> anomaly_score, const std::vector<bool>& flagged);

/// `time_s,norm_score` rows.
void write_norm_scores(const std::filesystem::path& path, std::span<const double> timestamps,
                       std::span<const double> norm_scores);

/// Node table (`node_id,centroid_*,member_count`) followed by the edge list
/// (`src,dst,weight`) sorted by (src, dst).
void write_graph(const std::filesystem::path& path, const s2g::SubsequenceGraph& g);

}  // namespace hifd::csv
