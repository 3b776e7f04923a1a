#pragma once

#include <Eigen/Dense>

namespace hifd::havok {

/// Best-fit linear operator between time-shifted snapshot matrices, restricted
/// to the numerically retained rank of X, with its eigendecomposition.
struct KoopmanApprox {
    Eigen::MatrixXd operator_matrix;  // r x r reduced system matrix
    Eigen::MatrixXd projection;       // m x r orthonormal basis; z = projection^T x
    Eigen::VectorXcd eigenvalues;     // length r
    Eigen::MatrixXcd modes;           // r x r, eigenvectors as columns
    int rank = 0;
    bool rank_truncated = false;  // true when the pseudo-inverse dropped directions
};

/// Regresses K = Ux^T * Y * Vx * Sx^{-1} from snapshot matrices whose columns
/// are consecutive states with Y one step ahead of X. Directions of X with
/// singular value <= 1e-10 * sigma_1 are dropped (pseudo-inverse), which sets
/// rank_truncated.
KoopmanApprox dmd_koopman(const Eigen::MatrixXd& x_snap, const Eigen::MatrixXd& y_snap);

/// Iterates z(t+1) = A z(t) from z0; returns the r x (steps+1) trajectory
/// whose first column is z0.
Eigen::MatrixXd propagate_reduced(const KoopmanApprox& k, const Eigen::VectorXd& z0, int steps);

/// Permutation-invariant spectral distance: mean complex-plane distance under
/// a minimum-cost perfect matching of the two eigenvalue sets. Zero iff the
/// spectra coincide up to ordering. Requires equal rank.
double spectrum_deviation(const KoopmanApprox& baseline, const KoopmanApprox& observed);

}  // namespace hifd::havok
