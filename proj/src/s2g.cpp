#include "hifd/s2g.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "hifd/detail/gram.hpp"
#include "hifd/errors.hpp"

namespace hifd::s2g {
namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v[at] < 0.0) v = -v;
}

/// Principal directions of the mean-removed subsequence collection, derived
/// from the raw Gram matrix: with P = I - 11^T/l, the mean-removed second
/// moment is P G P, and folding P into the eigenvectors afterwards gives a
/// projection applicable to raw subsequences.
Eigen::MatrixXd principal_projection(const Eigen::MatrixXd& gram, int embed_dim) {
    const auto l = gram.rows();
    Eigen::MatrixXd centering = Eigen::MatrixXd::Identity(l, l);
    centering.array() -= 1.0 / static_cast<double>(l);
    const Eigen::MatrixXd moment = centering * gram * centering;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the subsequence moment matrix failed");

    const int d = std::min<int>(embed_dim, static_cast<int>(l));
    Eigen::MatrixXd w(l, d);
    for (int j = 0; j < d; ++j) {
        w.col(j) = eig.eigenvectors().col(l - 1 - j);
        fix_sign(w.col(j));
    }
    return centering * w;
}

QuantizeResult grid_assign(const Eigen::MatrixXd& embedded, Eigen::MatrixXd projection,
                           const S2gConfig& cfg, int subseq_len) {
    const auto n = embedded.rows();
    const auto d = embedded.cols();

    QuantizeResult out;
    out.subseq_len = subseq_len;
    out.quantizer.projection = std::move(projection);
    out.quantizer.bins_per_axis = cfg.bins_per_axis;
    out.quantizer.lo = embedded.colwise().minCoeff().transpose();
    out.quantizer.hi = embedded.colwise().maxCoeff().transpose();

    out.node_seq.resize(static_cast<std::size_t>(n));
    std::vector<Eigen::VectorXd> sums;
    for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::VectorXd y = embedded.row(s).transpose();
        const auto cell = out.quantizer.cell(y);
        auto [it, inserted] = out.quantizer.cell_to_node.try_emplace(
            cell, static_cast<NodeId>(out.nodes.size()));
        if (inserted) {
            out.nodes.push_back(Node{Eigen::VectorXd::Zero(d), 0});
            sums.push_back(Eigen::VectorXd::Zero(d));
        }
        const NodeId id = it->second;
        out.node_seq[static_cast<std::size_t>(s)] = id;
        ++out.nodes[static_cast<std::size_t>(id)].member_count;
        sums[static_cast<std::size_t>(id)] += y;
    }
    for (std::size_t id = 0; id < out.nodes.size(); ++id)
        out.nodes[id].centroid =
            sums[id] / static_cast<double>(out.nodes[id].member_count);
    return out;
}

double transition_term(const SubsequenceGraph& g, std::size_t j) {
    const NodeId src = g.node_seq[j];
    const NodeId dst = g.node_seq[j + 1];
    const int divisor = std::max(g.degree(src) - 1, 1);
    return static_cast<double>(g.edge_weight(src, dst)) / divisor;
}

}  // namespace

void S2gConfig::validate() const {
    require(subseq_len_l >= 2, "subseq_len_l must be at least 2");
    require(query_len_lq >= subseq_len_l, "query_len_lq must be at least subseq_len_l");
    require(embed_dim >= 1, "embed_dim must be at least 1");
    require(bins_per_axis >= 2, "bins_per_axis must be at least 2");
}

std::int64_t SubsequenceGraph::edge_weight(NodeId src, NodeId dst) const {
    const auto it = edges.find(edge_key(src, dst));
    return it == edges.end() ? 0 : it->second;
}

std::int64_t SubsequenceGraph::total_weight() const {
    std::int64_t total = 0;
    for (const auto& [_, w] : edges) total += w;
    return total;
}

Eigen::VectorXd Quantizer::embed(std::span<const double> subseq) const {
    require(static_cast<Eigen::Index>(subseq.size()) == projection.rows(),
            "subsequence length does not match the fitted projection");
    const Eigen::Map<const Eigen::VectorXd> s(subseq.data(),
                                              static_cast<Eigen::Index>(subseq.size()));
    return projection.transpose() * s;
}

std::vector<int> Quantizer::cell(const Eigen::VectorXd& y) const {
    std::vector<int> c(static_cast<std::size_t>(y.size()));
    for (Eigen::Index a = 0; a < y.size(); ++a) {
        const double span = hi[a] - lo[a];
        int bin = 0;
        if (span > 0.0) {
            bin = static_cast<int>(std::floor((y[a] - lo[a]) / span * bins_per_axis));
            bin = std::clamp(bin, 0, bins_per_axis - 1);
        }
        c[static_cast<std::size_t>(a)] = bin;
    }
    return c;
}

NodeId Quantizer::assign(const Eigen::VectorXd& y) const {
    const auto it = cell_to_node.find(cell(y));
    return it == cell_to_node.end() ? NodeId{-1} : it->second;
}

std::vector<std::vector<double>> extract_subsequences(std::span<const double> x, int l) {
    require(l >= 1, "subsequence length must be positive");
    require(static_cast<std::size_t>(l) <= x.size(), "subsequence length exceeds the series");
    std::vector<std::vector<double>> out;
    out.reserve(x.size() - static_cast<std::size_t>(l) + 1);
    for (std::size_t s = 0; s + static_cast<std::size_t>(l) <= x.size(); ++s)
        out.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(s),
                         x.begin() + static_cast<std::ptrdiff_t>(s) + l);
    return out;
}

QuantizeResult quantize_to_nodes(const std::vector<std::vector<double>>& subseqs,
                                 const S2gConfig& cfg) {
    cfg.validate();
    require(!subseqs.empty(), "subsequence list is empty");
    const auto l = static_cast<Eigen::Index>(subseqs.front().size());
    require(l >= 1, "subsequences must be nonempty");
    for (const auto& s : subseqs)
        require(static_cast<Eigen::Index>(s.size()) == l, "subsequences must share one length");

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(l, l);
    for (const auto& s : subseqs) {
        const Eigen::Map<const Eigen::VectorXd> v(s.data(), l);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
    gram.triangularView<Eigen::StrictlyUpper>() =
        gram.triangularView<Eigen::StrictlyLower>().transpose();

    Eigen::MatrixXd projection = principal_projection(gram, cfg.embed_dim);
    Eigen::MatrixXd embedded(static_cast<Eigen::Index>(subseqs.size()), projection.cols());
    for (std::size_t s = 0; s < subseqs.size(); ++s) {
        const Eigen::Map<const Eigen::VectorXd> v(subseqs[s].data(), l);
        embedded.row(static_cast<Eigen::Index>(s)) = (projection.transpose() * v).transpose();
    }
    return grid_assign(embedded, std::move(projection), cfg, static_cast<int>(l));
}

QuantizeResult quantize_series(std::span<const double> x, const S2gConfig& cfg) {
    cfg.validate();
    const int l = cfg.subseq_len_l;
    require(static_cast<std::size_t>(l) <= x.size(), "series shorter than one subsequence");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw NonFiniteSampleError(i);

    const auto n_sub = static_cast<Eigen::Index>(x.size()) - l + 1;
    const Eigen::MatrixXd gram =
        detail::hankel_gram(x.data(), static_cast<int>(x.size()), l);
    Eigen::MatrixXd projection = principal_projection(gram, cfg.embed_dim);

    Eigen::MatrixXd embedded(n_sub, projection.cols());
    for (Eigen::Index s = 0; s < n_sub; ++s) {
        const Eigen::Map<const Eigen::VectorXd> v(x.data() + s, l);
        embedded.row(s) = (projection.transpose() * v).transpose();
    }
    return grid_assign(embedded, std::move(projection), cfg, l);
}

SubsequenceGraph build_graph(std::span<const NodeId> node_seq) {
    require(node_seq.size() >= 2, "node sequence must contain at least 2 entries");

    SubsequenceGraph g;
    g.node_seq.assign(node_seq.begin(), node_seq.end());

    NodeId max_id = 0;
    for (NodeId id : node_seq) {
        require(id >= 0, "node ids must be non-negative");
        max_id = std::max(max_id, id);
    }
    g.nodes.resize(static_cast<std::size_t>(max_id) + 1);
    for (NodeId id : node_seq) ++g.nodes[static_cast<std::size_t>(id)].member_count;

    for (std::size_t j = 0; j + 1 < g.node_seq.size(); ++j)
        ++g.edges[SubsequenceGraph::edge_key(g.node_seq[j], g.node_seq[j + 1])];

    std::vector<std::set<NodeId>> neighbors(g.nodes.size());
    std::vector<char> self_loop(g.nodes.size(), 0);
    for (const auto& [key, _] : g.edges) {
        const auto src = static_cast<NodeId>(key >> 32);
        const auto dst = static_cast<NodeId>(key & 0xffffffffu);
        if (src == dst) {
            self_loop[static_cast<std::size_t>(src)] = 1;
        } else {
            neighbors[static_cast<std::size_t>(src)].insert(dst);
            neighbors[static_cast<std::size_t>(dst)].insert(src);
        }
    }
    g.degrees.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        g.degrees[i] = static_cast<int>(neighbors[i].size()) + (self_loop[i] ? 2 : 0);
    return g;
}

SubsequenceGraph build_graph(const QuantizeResult& q) {
    SubsequenceGraph g = build_graph(q.node_seq);
    for (std::size_t i = 0; i < q.nodes.size() && i < g.nodes.size(); ++i)
        g.nodes[i].centroid = q.nodes[i].centroid;
    g.subseq_len = q.subseq_len;
    return g;
}

double normality_score(const SubsequenceGraph& g, std::size_t start, int lq) {
    require(lq >= 1, "query length must be positive");
    require(start + static_cast<std::size_t>(lq) < g.node_seq.size(),
            "query path exits the node sequence");
    double sum = 0.0;
    for (std::size_t j = start; j < start + static_cast<std::size_t>(lq); ++j)
        sum += transition_term(g, j);
    return sum / lq;
}

ScoreSeries score_all(const SubsequenceGraph& g, int lq) {
    return score_all(g, lq, {});
}

ScoreSeries score_all(const SubsequenceGraph& g, int lq, std::span<const double> timestamps) {
    require(lq >= 1, "query length must be positive");
    require(static_cast<std::size_t>(lq) < g.node_seq.size(),
            "query length must be shorter than the node sequence");
    require(timestamps.empty() || timestamps.size() == g.node_seq.size(),
            "timestamps must match the node sequence length");

    const std::size_t n_scores = g.node_seq.size() - static_cast<std::size_t>(lq);
    // Per-transition terms are precomputed, but each score still sums its own
    // window left to right so results match a direct evaluation bit for bit.
    std::vector<double> terms(g.node_seq.size() - 1);
    for (std::size_t j = 0; j + 1 < g.node_seq.size(); ++j) terms[j] = transition_term(g, j);

    ScoreSeries out;
    out.timestamps.resize(n_scores);
    out.norm_scores.resize(n_scores);
    out.coverage.resize(n_scores);
    for (std::size_t p = 0; p < n_scores; ++p) {
        double sum = 0.0;
        for (std::size_t j = p; j < p + static_cast<std::size_t>(lq); ++j) sum += terms[j];
        out.norm_scores[p] = sum / lq;
        out.timestamps[p] = timestamps.empty() ? static_cast<double>(p) : timestamps[p];
        out.coverage[p] = {p, p + static_cast<std::size_t>(lq) +
                                  static_cast<std::size_t>(g.subseq_len) - 1};
    }
    return out;
}

Classification classify(const ScoreSeries& s, const SubsequenceGraph& g, double theta) {
    require(std::isfinite(theta), "theta must be finite");
    require(s.norm_scores.size() < g.node_seq.size(), "score series does not fit the graph");
    const std::size_t lq = g.node_seq.size() - s.norm_scores.size();

    Classification out;
    out.labels.resize(s.norm_scores.size());
    std::set<NodeId> nodes;
    std::set<std::pair<NodeId, NodeId>> edges;
    std::vector<std::pair<double, double>> spans;

    const double dt = s.timestamps.size() >= 2 ? s.timestamps[1] - s.timestamps[0] : 0.0;
    for (std::size_t p = 0; p < s.norm_scores.size(); ++p) {
        const bool anomalous = s.norm_scores[p] < theta;
        out.labels[p] = anomalous ? 1 : 0;
        if (!anomalous) continue;
        for (std::size_t j = p; j < p + lq; ++j) {
            nodes.insert(g.node_seq[j]);
            edges.emplace(g.node_seq[j], g.node_seq[j + 1]);
        }
        nodes.insert(g.node_seq[p + lq]);
        const auto& [lo, hi] = s.coverage[p];
        spans.emplace_back(s.timestamps[p], s.timestamps[p] + dt * static_cast<double>(hi - lo));
    }

    out.subgraph.nodes.assign(nodes.begin(), nodes.end());
    out.subgraph.edges.assign(edges.begin(), edges.end());

    std::sort(spans.begin(), spans.end());
    for (const auto& span : spans) {
        if (!out.subgraph.flagged_spans.empty() &&
            span.first <= out.subgraph.flagged_spans.back().second) {
            out.subgraph.flagged_spans.back().second =
                std::max(out.subgraph.flagged_spans.back().second, span.second);
        } else {
            out.subgraph.flagged_spans.push_back(span);
        }
    }
    return out;
}

}  // namespace hifd::s2g
