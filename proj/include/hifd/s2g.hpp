#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hifd::s2g {

struct S2gConfig {
    int subseq_len_l = 64;
    int query_len_lq = 256;
    int embed_dim = 2;
    int bins_per_axis = 50;

    void validate() const;
};

using NodeId = std::int32_t;

struct Node {
    Eigen::VectorXd centroid;  // embed-space position (empty when unknown)
    std::int64_t member_count = 0;
};

/// Directed transition graph over quantized subsequences. Node ids are dense
/// 0..n-1 in first-occurrence order, so the structure is deterministic.
struct SubsequenceGraph {
    std::vector<Node> nodes;
    std::vector<NodeId> node_seq;                       // one entry per subsequence start
    std::unordered_map<std::uint64_t, std::int64_t> edges;  // key src<<32|dst -> weight
    std::vector<int> degrees;  // distinct neighbors; a self-loop contributes 2
    int subseq_len = 1;        // source subsequence length behind node_seq

    static std::uint64_t edge_key(NodeId src, NodeId dst) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) |
               static_cast<std::uint32_t>(dst);
    }
    [[nodiscard]] std::int64_t edge_weight(NodeId src, NodeId dst) const;
    [[nodiscard]] std::int64_t total_weight() const;
    [[nodiscard]] int degree(NodeId n) const { return degrees[static_cast<std::size_t>(n)]; }
};

/// Fitted embedding + grid so quantization can be replayed on new points.
/// `projection` already folds in per-subsequence mean removal.
struct Quantizer {
    Eigen::MatrixXd projection;  // subseq_len x embed_dim
    Eigen::VectorXd lo, hi;      // embedding bounding box
    int bins_per_axis = 0;
    std::map<std::vector<int>, NodeId> cell_to_node;

    [[nodiscard]] Eigen::VectorXd embed(std::span<const double> subseq) const;
    [[nodiscard]] std::vector<int> cell(const Eigen::VectorXd& y) const;
    /// Node for an embedded point; -1 when its cell was never occupied.
    [[nodiscard]] NodeId assign(const Eigen::VectorXd& y) const;
};

struct QuantizeResult {
    std::vector<NodeId> node_seq;
    std::vector<Node> nodes;
    Quantizer quantizer;
    int subseq_len = 1;
};

/// All overlapping windows of length l, order-preserving (N - l + 1 of them).
std::vector<std::vector<double>> extract_subsequences(std::span<const double> x, int l);

/// Quantizes subsequences to grid nodes: each subsequence is mean-removed,
/// projected onto the top embed_dim principal directions of the whole
/// collection, and binned on a regular grid over the embedding bounding box.
/// Occupied cells become nodes, id'd in first-occurrence order.
QuantizeResult quantize_to_nodes(const std::vector<std::vector<double>>& subseqs,
                                 const S2gConfig& cfg);

/// Same transform computed directly from the series without materializing
/// the subsequence list.
QuantizeResult quantize_series(std::span<const double> x, const S2gConfig& cfg);

/// Counts consecutive transitions of node_seq into weighted directed edges.
SubsequenceGraph build_graph(std::span<const NodeId> node_seq);
/// Same, attaching centroids and the subsequence length from quantization.
SubsequenceGraph build_graph(const QuantizeResult& q);

/// Path normality: mean over the lq transitions starting at `start` of
/// w(N_j, N_{j+1}) / (deg(N_j) - 1), with divisor 1 when deg(N_j) = 1.
double normality_score(const SubsequenceGraph& g, std::size_t start, int lq);

struct ScoreSeries {
    std::vector<double> timestamps;   // one per query start
    std::vector<double> norm_scores;  // >= 0
    std::vector<std::pair<std::size_t, std::size_t>> coverage;  // inclusive sample span
};

/// Scores every valid query start (node_seq length - lq of them). The
/// timestamps overload labels scores with the per-subsequence timestamps.
ScoreSeries score_all(const SubsequenceGraph& g, int lq);
ScoreSeries score_all(const SubsequenceGraph& g, int lq, std::span<const double> timestamps);

struct AnomalySubgraph {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<std::pair<double, double>> flagged_spans;  // seconds, merged
};

struct Classification {
    std::vector<std::uint8_t> labels;  // 1 = anomalous (Norm < theta)
    AnomalySubgraph subgraph;
};

/// Fixed-threshold classification: anomalous iff Norm < theta. The subgraph
/// collects every node and edge on an anomalous path; flagged spans are the
/// merged time extents of anomalous subsequences.
Classification classify(const ScoreSeries& s, const SubsequenceGraph& g, double theta);

}  // namespace hifd::s2g
