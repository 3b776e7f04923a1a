#include "hifd/havok.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hifd/detail/gram.hpp"
#include "hifd/errors.hpp"

namespace hifd::havok {
namespace {

using detail::hankel_gram;

void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

void check_finite(std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw NonFiniteSampleError(i);
}

/// Flips sign so the largest-magnitude entry is positive. Returns true when
/// a flip happened.
bool fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v[at] < 0.0) {
        v = -v;
        return true;
    }
    return false;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct WindowSpectrum {
    Eigen::VectorXd sigma;    // descending
    Eigen::MatrixXd vectors;  // right vectors, columns matching sigma order
};

WindowSpectrum window_spectrum(const double* x, int w, int k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hankel_gram(x, w, k));
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the window Gram matrix failed");
    WindowSpectrum out;
    out.sigma.resize(k);
    out.vectors.resize(k, k);
    for (int j = 0; j < k; ++j) {
        const double lambda = std::max(eig.eigenvalues()[k - 1 - j], 0.0);
        out.sigma[j] = std::sqrt(lambda);
        out.vectors.col(j) = eig.eigenvectors().col(k - 1 - j);
    }
    return out;
}

}  // namespace

Eigen::MatrixXd SvdFactors::sigma_matrix() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m(), k());
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) s(i, i) = singular_values[i];
    return s;
}

HankelEmbedding build_hankel(std::span<const double> x, int k) {
    std::vector<double> ts(x.size());
    std::iota(ts.begin(), ts.end(), 0.0);
    return build_hankel(x, k, ts);
}

HankelEmbedding build_hankel(std::span<const double> x, int k,
                             std::span<const double> timestamps) {
    const auto n = static_cast<Eigen::Index>(x.size());
    require(k >= 2, "window length k must be at least 2");
    require(static_cast<Eigen::Index>(2) * k <= n, "window length k must not exceed N/2");
    require(timestamps.size() == x.size(), "timestamps must match the series length");
    check_finite(x);

    HankelEmbedding h;
    h.window_k = k;
    h.source_timestamps.assign(timestamps.begin(), timestamps.end());
    h.matrix.resize(n - k + 1, k);
    for (Eigen::Index i = 0; i < h.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < k; ++j) h.matrix(i, j) = x[static_cast<std::size_t>(i + j)];
    return h;
}

SvdFactors svd(const HankelEmbedding& h) {
    require(h.matrix.size() > 0, "embedding is empty");
    if (!h.matrix.allFinite()) throw ParameterError("embedding contains non-finite entries");

    Eigen::BDCSVD<Eigen::MatrixXd> dec(h.matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("SVD failed to converge (matrix " + std::to_string(h.matrix.rows()) +
                             "x" + std::to_string(h.matrix.cols()) +
                             ", norm " + std::to_string(h.matrix.norm()) + ")");

    SvdFactors f;
    f.left_vectors = dec.matrixU();
    f.singular_values = dec.singularValues();
    f.right_vectors = dec.matrixV();

    // Temporal factor carries the sign convention; paired spatial columns
    // flip with it so U * S * V^T is unchanged.
    const Eigen::Index paired = std::min(f.left_vectors.cols(), f.right_vectors.cols());
    for (Eigen::Index j = 0; j < f.left_vectors.cols(); ++j) {
        if (fix_sign(f.left_vectors.col(j)) && j < paired)
            f.right_vectors.col(j) = -f.right_vectors.col(j);
    }
    return f;
}

int optimal_rank(std::span<const double> singular_values, double aspect_beta,
                 bool noise_known, double noise_scale) {
    require(!singular_values.empty(), "singular value list is empty");
    require(aspect_beta > 0.0 && aspect_beta <= 1.0, "aspect_beta must lie in (0, 1]");
    const double top = singular_values.front();
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        require(singular_values[i] >= 0.0, "singular values must be non-negative");
        if (i > 0)
            require(singular_values[i] <= singular_values[i - 1] + 1e-9 * top,
                    "singular values must be non-increasing");
    }
    if (!(top > 0.0)) throw ParameterError("degenerate all-zero singular spectrum");

    double threshold;
    if (noise_known) {
        require(noise_scale > 0.0, "noise_scale must be positive when noise is known");
        const double b = aspect_beta;
        const double lambda_star =
            std::sqrt(2.0 * (b + 1.0) + 8.0 * b / (b + 1.0 + std::sqrt(b * b + 14.0 * b + 1.0)));
        threshold = lambda_star * noise_scale;
    } else {
        const double b = aspect_beta;
        const double omega = 0.56 * b * b * b - 0.95 * b * b + 1.82 * b + 1.43;
        threshold = omega * median({singular_values.begin(), singular_values.end()});
    }

    int r = 0;
    for (double s : singular_values)
        if (s > threshold) ++r;
    return std::max(r, 2);
}

HavokDecomposition forcing_series(const SvdFactors& f, int r,
                                  std::span<const double> timestamps) {
    require(r >= 2, "rank must be at least 2");
    require(r <= f.singular_values.size(), "rank exceeds the factor width");
    require(static_cast<Eigen::Index>(timestamps.size()) == f.m(),
            "timestamps must match the temporal extent");

    HavokDecomposition d;
    d.rank_r = r;
    d.delay_coordinates = f.left_vectors.leftCols(r - 1);
    const double tol = 1e-10 * f.singular_values[0];
    if (f.singular_values[r - 1] > tol)
        d.forcing = f.left_vectors.col(r - 1);
    else
        d.forcing = Eigen::VectorXd::Zero(f.m());
    d.timestamps.assign(timestamps.begin(), timestamps.end());
    return d;
}

void RollingConfig::validate() const {
    require(window_k >= 2, "window_k must be at least 2");
    require(samples_per_cycle >= 1, "samples_per_cycle must be positive");
    require(window_cycles > 0.0, "window_cycles must be positive");
    require(hop_cycles > 0.0, "hop_cycles must be positive");
    require(rank_override >= 0, "rank_override must be non-negative");
    require(rank_override == 0 || rank_override >= 2, "rank_override must be at least 2");
    require(window_samples() >= 2 * window_k, "analysis window must span at least 2*window_k samples");
    require(hop_samples() >= 1, "hop must advance at least one sample");
    require(hop_samples() <= window_samples() - window_k + 1,
            "hop must not exceed the window's temporal extent (stitching would leave gaps)");
}

int RollingConfig::window_samples() const {
    return static_cast<int>(std::llround(window_cycles * samples_per_cycle));
}

int RollingConfig::hop_samples() const {
    return static_cast<int>(std::llround(hop_cycles * samples_per_cycle));
}

RollingForcing rolling_forcing(std::span<const double> x,
                               std::span<const double> timestamps,
                               const RollingConfig& cfg) {
    cfg.validate();
    require(timestamps.size() == x.size(), "timestamps must match the series length");
    const int k = cfg.window_k;
    const auto n = static_cast<int>(x.size());
    require(n >= 2 * k, "record shorter than twice the embedding window");
    check_finite(x);

    const int w = std::min(cfg.window_samples(), n);
    const int hop = cfg.hop_samples();
    const int m_w = w - k + 1;
    const int m_total = n - k + 1;

    std::vector<int> starts;
    for (int s = 0; s + w <= n; s += hop) starts.push_back(s);
    if (starts.empty() || starts.back() != n - w) starts.push_back(n - w);

    RollingForcing out;

    // Rank vote over windows fully inside the training span (record-relative);
    // when no window fits the span, the first window alone votes.
    int rank = cfg.rank_override;
    if (rank == 0) {
        std::vector<int> votes;
        for (int s : starts) {
            const bool inside =
                cfg.rank_train_span > 0.0 &&
                timestamps[static_cast<std::size_t>(s + w - 1)] - timestamps[0] < cfg.rank_train_span;
            if (!inside && !votes.empty()) break;
            auto spec = window_spectrum(x.data() + s, w, k);
            std::vector<double> sv(spec.sigma.data(), spec.sigma.data() + spec.sigma.size());
            votes.push_back(optimal_rank(sv, static_cast<double>(k) / m_w));
            out.window_ranks.push_back(votes.back());
            if (!inside) break;
        }
        std::sort(votes.begin(), votes.end());
        rank = votes[(votes.size() - 1) / 2];
    }
    rank = std::min(rank, k);
    out.rank = rank;

    std::vector<double> acc(static_cast<std::size_t>(m_total), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(m_total), 0);
    Eigen::VectorXd u(m_w);

    for (int s : starts) {
        auto spec = window_spectrum(x.data() + s, w, k);
        const double sigma_r = spec.sigma[rank - 1];
        if (sigma_r > 1e-10 * spec.sigma[0]) {
            const auto& v = spec.vectors.col(rank - 1);
            for (int i = 0; i < m_w; ++i) {
                double dot = 0.0;
                const double* xi = x.data() + s + i;
                for (int a = 0; a < k; ++a) dot += xi[a] * v[a];
                u[i] = dot / sigma_r;
            }
            fix_sign(u);
            // Align with what previous windows already wrote in the overlap.
            double corr = 0.0;
            for (int i = 0; i < m_w; ++i) {
                const auto p = static_cast<std::size_t>(s + i);
                if (cnt[p] > 0) corr += u[i] * acc[p] / cnt[p];
            }
            if (corr < 0.0) u = -u;
        } else {
            u.setZero();
        }
        for (int i = 0; i < m_w; ++i) {
            const auto p = static_cast<std::size_t>(s + i);
            acc[p] += u[i];
            ++cnt[p];
        }
    }

    out.forcing.resize(static_cast<std::size_t>(m_total));
    out.timestamps.resize(static_cast<std::size_t>(m_total));
    for (int p = 0; p < m_total; ++p) {
        out.forcing[static_cast<std::size_t>(p)] =
            acc[static_cast<std::size_t>(p)] / cnt[static_cast<std::size_t>(p)];
        out.timestamps[static_cast<std::size_t>(p)] = timestamps[static_cast<std::size_t>(p)];
    }
    return out;
}

}  // namespace hifd::havok
