#include "hifd/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hifd/errors.hpp"

namespace hifd::havok {
namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ParameterError(what);
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian algorithm
/// with potentials, O(n^3)). Returns the total cost.
double min_cost_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
    return total;
}

}  // namespace

KoopmanApprox dmd_koopman(const Eigen::MatrixXd& x_snap, const Eigen::MatrixXd& y_snap) {
    require(x_snap.rows() == y_snap.rows() && x_snap.cols() == y_snap.cols(),
            "snapshot matrices must have identical shape");
    require(x_snap.cols() >= 1, "need at least one snapshot pair");
    if (!x_snap.allFinite() || !y_snap.allFinite())
        throw ParameterError("snapshot matrices contain non-finite entries");

    Eigen::BDCSVD<Eigen::MatrixXd> dec(x_snap, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("SVD of the snapshot matrix failed to converge");
    const Eigen::VectorXd& sv = dec.singularValues();
    require(sv.size() > 0 && sv[0] > 0.0, "zero snapshot matrix has no dynamics");

    const double tol = 1e-10 * sv[0];
    int r = 0;
    while (r < sv.size() && sv[r] > tol) ++r;

    KoopmanApprox out;
    out.rank = r;
    out.rank_truncated = r < sv.size();

    const Eigen::MatrixXd u_r = dec.matrixU().leftCols(r);
    const Eigen::MatrixXd v_r = dec.matrixV().leftCols(r);
    const Eigen::VectorXd s_inv = sv.head(r).cwiseInverse();
    out.projection = u_r;
    out.operator_matrix = u_r.transpose() * y_snap * v_r * s_inv.asDiagonal();

    Eigen::EigenSolver<Eigen::MatrixXd> eig(out.operator_matrix);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the reduced operator failed");
    out.eigenvalues = eig.eigenvalues();
    out.modes = eig.eigenvectors();

    // Deterministic eigenpair order: by magnitude, then real, then imag.
    std::vector<int> idx(static_cast<std::size_t>(r));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const auto la = out.eigenvalues[a];
        const auto lb = out.eigenvalues[b];
        if (std::abs(la) != std::abs(lb)) return std::abs(la) > std::abs(lb);
        if (la.real() != lb.real()) return la.real() > lb.real();
        return la.imag() > lb.imag();
    });
    Eigen::VectorXcd ev(r);
    Eigen::MatrixXcd md(r, r);
    for (int j = 0; j < r; ++j) {
        ev[j] = out.eigenvalues[idx[static_cast<std::size_t>(j)]];
        md.col(j) = out.modes.col(idx[static_cast<std::size_t>(j)]);
    }
    out.eigenvalues = std::move(ev);
    out.modes = std::move(md);
    return out;
}

Eigen::MatrixXd propagate_reduced(const KoopmanApprox& k, const Eigen::VectorXd& z0, int steps) {
    require(z0.size() == k.operator_matrix.rows(), "state dimension must equal the rank");
    require(steps >= 0, "steps must be non-negative");

    Eigen::MatrixXd traj(z0.size(), steps + 1);
    traj.col(0) = z0;
    for (int t = 0; t < steps; ++t) traj.col(t + 1) = k.operator_matrix * traj.col(t);
    return traj;
}

double spectrum_deviation(const KoopmanApprox& baseline, const KoopmanApprox& observed) {
    require(baseline.rank == observed.rank, "spectra must share the same rank");
    const int n = baseline.rank;
    require(n >= 1, "empty spectra");

    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost(i, j) = std::abs(baseline.eigenvalues[i] - observed.eigenvalues[j]);
    return min_cost_assignment(cost) / n;
}

}  // namespace hifd::havok
