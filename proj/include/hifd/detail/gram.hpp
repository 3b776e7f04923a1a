#pragma once

#include <Eigen/Dense>

namespace hifd::detail {

/// Gram matrix of the sliding windows of x: G(a,b) = sum_j x[j+a] x[j+b] for
/// j = 0..m-1 with m = w - k + 1. Row zero is accumulated directly; the rest
/// follows the diagonal recurrence
/// G(a+1,b+1) = G(a,b) - x[a] x[b] + x[m+a] x[m+b],
/// giving O(w k + k^2) instead of O(w k^2).
inline Eigen::MatrixXd hankel_gram(const double* x, int w, int k) {
    const int m = w - k + 1;
    Eigen::MatrixXd g(k, k);
    for (int b = 0; b < k; ++b) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += x[j] * x[j + b];
        g(0, b) = acc;
    }
    for (int b0 = 0; b0 < k; ++b0) {
        double acc = g(0, b0);
        for (int a = 0; a + 1 < k && b0 + a + 1 < k; ++a) {
            acc += x[m + a] * x[m + b0 + a] - x[a] * x[b0 + a];
            g(a + 1, b0 + a + 1) = acc;
        }
    }
    for (int a = 1; a < k; ++a)
        for (int b = 0; b < a; ++b) g(a, b) = g(b, a);
    return g;
}

}  // namespace hifd::detail
