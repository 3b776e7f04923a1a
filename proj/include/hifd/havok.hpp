#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace hifd::havok {

/// Time-delay embedding of a scalar series: row i holds x[i..i+k-1], so the
/// matrix is (N-k+1) x k, every anti-diagonal is constant and the row index
/// runs over time.
struct HankelEmbedding {
    Eigen::MatrixXd matrix;
    int window_k = 0;
    std::vector<double> source_timestamps;  // length N, one per source sample

    [[nodiscard]] Eigen::Index rows() const { return matrix.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return matrix.cols(); }
};

/// Full SVD factors of an embedding. The columns of `left_vectors` are the
/// temporal singular vectors (their index runs over time); signs are fixed so
/// the largest-magnitude entry of each temporal vector is positive.
struct SvdFactors {
    Eigen::MatrixXd left_vectors;    // m x m orthonormal
    Eigen::VectorXd singular_values; // length min(m,k), non-increasing
    Eigen::MatrixXd right_vectors;   // k x k orthonormal

    [[nodiscard]] Eigen::Index m() const { return left_vectors.rows(); }
    [[nodiscard]] Eigen::Index k() const { return right_vectors.rows(); }
    /// Rectangular m x k diagonal of singular values (for reconstruction).
    [[nodiscard]] Eigen::MatrixXd sigma_matrix() const;
};

/// Rank-r split of the temporal factor: the first r-1 columns are the eigen
/// time-delay coordinates, the r-th column is the forcing statistic.
struct HavokDecomposition {
    int rank_r = 0;
    Eigen::MatrixXd delay_coordinates;  // m x (r-1)
    Eigen::VectorXd forcing;            // length m
    std::vector<double> timestamps;     // length m
};

/// Builds the (N-k+1) x k delay embedding. Preconditions: 2 <= k <= N/2.
HankelEmbedding build_hankel(std::span<const double> x, int k);
HankelEmbedding build_hankel(std::span<const double> x, int k,
                             std::span<const double> timestamps);

/// Exact full SVD of the embedding with the deterministic sign convention.
/// Intended for analysis-scale embeddings; the rolling pipeline uses an
/// equivalent Gram-based path internally.
SvdFactors svd(const HankelEmbedding& h);

/// Hard-rank selection. With noise_known = false this is the median-based
/// threshold omega(beta) * median(sigma) with
/// omega(beta) = 0.56 b^3 - 0.95 b^2 + 1.82 b + 1.43; with noise_known = true
/// the threshold is lambda_star(beta) * noise_scale, where noise_scale must
/// be sqrt(m) * sigma_noise. Returns the count of singular values strictly
/// above the threshold, clamped to at least 2.
int optimal_rank(std::span<const double> singular_values, double aspect_beta,
                 bool noise_known = false, double noise_scale = 0.0);

/// Splits the temporal factor at rank r. Columns whose singular value is
/// numerically zero (<= 1e-10 * sigma_1) carry no signal; a forcing column in
/// that regime is returned as zeros rather than an arbitrary basis completion.
HavokDecomposition forcing_series(const SvdFactors& f, int r,
                                  std::span<const double> timestamps);

/// Sliding-window forcing extraction over a long record.
struct RollingConfig {
    int window_k = 256;          // embedding window length, samples
    double window_cycles = 4.0;  // analysis window length, cycles
    double hop_cycles = 0.25;    // window advance, cycles
    int rank_override = 0;       // > 0 pins the truncation rank
    int samples_per_cycle = 2048;
    // Windows fully inside the first rank_train_span seconds vote (by median)
    // on the frozen truncation rank; 0 falls back to the first window.
    double rank_train_span = 0.0;

    void validate() const;
    [[nodiscard]] int window_samples() const;
    [[nodiscard]] int hop_samples() const;
};

struct RollingForcing {
    std::vector<double> forcing;     // stitched, length N - k + 1
    std::vector<double> timestamps;  // start-anchored, length N - k + 1
    int rank = 0;                    // frozen rank used for every window
    std::vector<int> window_ranks;   // SVHT votes from the training windows
};

/// Computes the forcing statistic over rolling analysis windows and stitches
/// the per-window segments by overlap-averaging. The truncation rank is
/// frozen across windows so fault windows are scored against the baseline
/// geometry rather than absorbing the fault into their own basis.
RollingForcing rolling_forcing(std::span<const double> x,
                               std::span<const double> timestamps,
                               const RollingConfig& cfg);

}  // namespace hifd::havok
