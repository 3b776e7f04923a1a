#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "hifd/errors.hpp"
#include "hifd/koopman.hpp"

using namespace hifd;
using namespace hifd::havok;

namespace {

constexpr double kPi = std::numbers::pi;

/// Snapshot pair (X, Y) from a scalar series via a 2-row delay embedding.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> delay_snapshots(const std::vector<double>& x) {
    const auto cols = static_cast<Eigen::Index>(x.size()) - 2;
    Eigen::MatrixXd X(2, cols), Y(2, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        X(0, c) = x[static_cast<std::size_t>(c)];
        X(1, c) = x[static_cast<std::size_t>(c) + 1];
        Y(0, c) = x[static_cast<std::size_t>(c) + 1];
        Y(1, c) = x[static_cast<std::size_t>(c) + 2];
    }
    return {X, Y};
}

std::vector<double> sine_series(std::size_t n, double samples_per_cycle, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t s = 0; s < n; ++s)
        x[s] = std::sin(2.0 * kPi * static_cast<double>(s) / samples_per_cycle + phase);
    return x;
}

KoopmanApprox with_eigenvalues(std::initializer_list<std::complex<double>> vals) {
    KoopmanApprox k;
    k.rank = static_cast<int>(vals.size());
    k.eigenvalues.resize(k.rank);
    int i = 0;
    for (auto v : vals) k.eigenvalues[i++] = v;
    return k;
}

}  // namespace

TEST_CASE("dmd recovers the generator of a known linear system") {
    Eigen::Matrix2d A;
    A << 0.9, 0.2, -0.1, 0.8;
    const std::complex<double> tr(A.trace(), 0.0);
    const double det = A.determinant();
    const std::complex<double> disc = tr * tr / 4.0 - det;
    const std::complex<double> root = std::sqrt(disc);
    const std::complex<double> l1 = tr / 2.0 + root;
    const std::complex<double> l2 = tr / 2.0 - root;

    Eigen::MatrixXd X(2, 19), Y(2, 19);
    Eigen::Vector2d z(1.0, 0.5);
    for (int c = 0; c < 19; ++c) {
        X.col(c) = z;
        z = A * z;
        Y.col(c) = z;
    }

    const auto k = dmd_koopman(X, Y);
    REQUIRE(k.rank == 2);
    // sorted by magnitude then real then imag; the pair is conjugate
    const auto got1 = k.eigenvalues[0];
    const auto got2 = k.eigenvalues[1];
    const double err = std::min(std::abs(got1 - l1) + std::abs(got2 - l2),
                                std::abs(got1 - l2) + std::abs(got2 - l1));
    CHECK(err < 1e-8);
}

TEST_CASE("identity dynamics give a unit spectrum") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd X(4, 20);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = dist(rng);

    const auto k = dmd_koopman(X, X);
    REQUIRE(k.rank == 4);
    CHECK(!k.rank_truncated);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
    CHECK((k.operator_matrix - eye).norm() < 1e-10);
    for (Eigen::Index i = 0; i < k.eigenvalues.size(); ++i)
        CHECK(std::abs(k.eigenvalues[i] - 1.0) < 1e-8);
}

TEST_CASE("a 60 Hz tone maps to the analytic rotation pair") {
    const double spc = 256.0;
    const double dt = 1.0 / (60.0 * spc);
    const auto x = sine_series(512, spc, 0.4);
    const auto [X, Y] = delay_snapshots(x);
    const auto k = dmd_koopman(X, Y);
    REQUIRE(k.rank == 2);

    const double angle = 2.0 * kPi * 60.0 * dt;
    const std::complex<double> expect(std::cos(angle), std::sin(angle));
    for (Eigen::Index i = 0; i < 2; ++i) {
        const auto got = k.eigenvalues[i];
        const auto target = got.imag() >= 0.0 ? expect : std::conj(expect);
        CHECK(std::abs(got - target) < 1e-6);
    }
}

TEST_CASE("rank-deficient snapshots fall back to a flagged pseudo-inverse") {
    Eigen::MatrixXd X(2, 8), Y(2, 8);
    for (Eigen::Index c = 0; c < 8; ++c) {
        X.col(c) = Eigen::Vector2d(1.0, 1.0);
        Y.col(c) = Eigen::Vector2d(1.0, 1.0);
    }
    const auto k = dmd_koopman(X, Y);
    CHECK(k.rank == 1);
    CHECK(k.rank_truncated);
    CHECK(std::abs(k.eigenvalues[0] - 1.0) < 1e-10);
}

TEST_CASE("dmd validates snapshot shapes") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 5);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Random(3, 6);
    CHECK_THROWS_AS(dmd_koopman(X, Y), ParameterError);
    CHECK_THROWS_AS(dmd_koopman(Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 4)),
                    ParameterError);
}

TEST_CASE("propagation iterates the reduced operator") {
    KoopmanApprox ident;
    ident.rank = 3;
    ident.operator_matrix = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::Vector3d z0(1.0, -2.0, 0.5);
    const auto traj = propagate_reduced(ident, z0, 5);
    REQUIRE(traj.rows() == 3);
    REQUIRE(traj.cols() == 6);
    for (Eigen::Index c = 0; c < traj.cols(); ++c) CHECK((traj.col(c) - z0).norm() == 0.0);

    KoopmanApprox half;
    half.rank = 2;
    half.operator_matrix = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::Vector2d w0(1.0, 1.0);
    const auto decay = propagate_reduced(half, w0, 10);
    for (Eigen::Index c = 0; c <= 10; ++c) {
        const double expect = std::pow(0.5, static_cast<double>(c));
        CHECK(decay(0, c) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(decay(1, c) == doctest::Approx(expect).epsilon(1e-12));
    }

    CHECK_THROWS_AS(propagate_reduced(half, z0, 3), ParameterError);
    CHECK_THROWS_AS(propagate_reduced(half, w0, -1), ParameterError);
}

TEST_CASE("recovered dynamics predict one cycle ahead within 1 percent") {
    const double spc = 128.0;
    const auto x = sine_series(512, spc, 1.1);

    // train on the first half, predict the second
    std::vector<double> train(x.begin(), x.begin() + 256);
    const auto [X, Y] = delay_snapshots(train);
    const auto k = dmd_koopman(X, Y);

    Eigen::VectorXd state(2);
    state << x[254], x[255];
    const Eigen::VectorXd z0 = k.projection.transpose() * state;
    const auto steps = static_cast<int>(spc);
    const auto traj = propagate_reduced(k, z0, steps);
    const Eigen::MatrixXd recon = k.projection * traj;

    double err_sq = 0.0;
    for (int t = 1; t <= steps; ++t) {
        const double actual = x[static_cast<std::size_t>(255 + t)];
        const double diff = recon(1, t) - actual;
        err_sq += diff * diff;
    }
    const double rms = std::sqrt(err_sq / spc);
    CHECK(rms < 0.01);  // amplitude is 1
}

TEST_CASE("spectrum deviation is an assignment distance") {
    const auto a = with_eigenvalues({{1.0, 0.0}});
    const auto b = with_eigenvalues({{0.9, 0.0}});
    CHECK(spectrum_deviation(a, a) == 0.0);
    CHECK(spectrum_deviation(a, b) == doctest::Approx(0.1).epsilon(1e-12));

    // identical up to ordering
    const auto p = with_eigenvalues({{0.5, 0.5}, {-0.3, 0.1}, {0.9, 0.0}});
    const auto q = with_eigenvalues({{0.9, 0.0}, {0.5, 0.5}, {-0.3, 0.1}});
    CHECK(spectrum_deviation(p, q) == 0.0);

    const auto wide = with_eigenvalues({{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(spectrum_deviation(a, wide), ParameterError);
}

TEST_CASE("distorted segments deviate more than clean resamples") {
    const double spc = 128.0;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1e-3);

    auto noisy_sine = [&](double distortion) {
        auto x = sine_series(512, spc, 0.7);
        for (std::size_t s = 0; s < x.size(); ++s) {
            if (distortion > 0.0)
                x[s] += distortion * std::sin(3.0 * 2.0 * kPi * static_cast<double>(s) / spc);
            x[s] += gauss(rng);
        }
        return x;
    };

    const auto base_series = noisy_sine(0.0);
    const auto [Xb, Yb] = delay_snapshots(base_series);
    const auto base = dmd_koopman(Xb, Yb);

    for (int trial = 0; trial < 20; ++trial) {
        const auto clean = noisy_sine(0.0);
        const auto faulty = noisy_sine(0.4);
        const auto [Xc, Yc] = delay_snapshots(clean);
        const auto [Xf, Yf] = delay_snapshots(faulty);
        const double dev_clean = spectrum_deviation(base, dmd_koopman(Xc, Yc));
        const double dev_fault = spectrum_deviation(base, dmd_koopman(Xf, Yf));
        CHECK(dev_fault > dev_clean);
    }
}
