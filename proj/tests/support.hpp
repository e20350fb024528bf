// Test helpers: random states and parameters, and independent oracles that
// avoid the library's own composition/projection code.
#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "swapsim/swapsim.hpp"

namespace swapsim::testing {

inline Matrix random_density(std::mt19937_64& rng, int dim, int rank = -1) {
    std::normal_distribution<double> n(0.0, 1.0);
    if (rank < 1) rank = dim;
    Matrix g(dim, rank);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < rank; ++j) g(i, j) = Complex(n(rng), n(rng));
    }
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

/// Wootters concurrence via the non-Hermitian product rho * rho_tilde and a
/// general complex eigen-solve.
inline double concurrence_oracle(const Matrix& rho) {
    Matrix yy = Matrix::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Matrix tilde = yy * rho.conjugate() * yy;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(rho * tilde));
    std::vector<double> lam;
    for (int i = 0; i < 4; ++i) lam.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i).real())));
    std::sort(lam.rbegin(), lam.rend());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

/// Unnormalized Tr_X[(op (x) I) (A (x) B)] written out index by index. A and B
/// are (X, XX) pair matrices; op acts on (X_E, X_L); result is on (XX_E, XX_L).
inline Matrix brute_force_herald(const Matrix& a, const Matrix& b, const Matrix& op) {
    auto pair_index = [](int x, int xx) { return 2 * x + xx; };
    Matrix out = Matrix::Zero(4, 4);
    for (int ye = 0; ye < 2; ++ye)
        for (int yl = 0; yl < 2; ++yl)
            for (int ye2 = 0; ye2 < 2; ++ye2)
                for (int yl2 = 0; yl2 < 2; ++yl2) {
                    Complex sum = 0.0;
                    for (int xe = 0; xe < 2; ++xe)
                        for (int xl = 0; xl < 2; ++xl)
                            for (int xe2 = 0; xe2 < 2; ++xe2)
                                for (int xl2 = 0; xl2 < 2; ++xl2) {
                                    // rho[(xe2 xl2 ye yl), (xe xl ye2 yl2)] = A[xe2 ye, xe ye2] B[xl2 yl, xl yl2]
                                    sum += op(2 * xe + xl, 2 * xe2 + xl2) * a(pair_index(xe2, ye), pair_index(xe, ye2)) *
                                           b(pair_index(xl2, yl), pair_index(xl, yl2));
                                }
                    out(2 * ye + yl, 2 * ye2 + yl2) = sum;
                }
    return out;
}

inline Matrix psi_minus_projector() {
    Matrix p = Matrix::Zero(4, 4);
    p(1, 1) = 0.5;
    p(2, 2) = 0.5;
    p(1, 2) = -0.5;
    p(2, 1) = -0.5;
    return p;
}

inline Matrix phi_plus_matrix() {
    Matrix p = Matrix::Zero(4, 4);
    p(0, 0) = 0.5;
    p(3, 3) = 0.5;
    p(0, 3) = 0.5;
    p(3, 0) = 0.5;
    return p;
}

/// Adaptive Gauss-Kronrod on [0, upper] of a real function.
template <class F>
double gk(F f, double upper, double tol = 1e-13) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, upper, 15, tol);
}

/// Emission-time average (1/tau) e^{-t/tau} f(t) truncated at cut * tau.
template <class F>
double gk_average(F f, double tau, double cut = 40.0) {
    return gk([&](double t) { return std::exp(-t / tau) / tau * f(t); }, cut * tau);
}

/// Random source parameters; decoherence times finite or infinite.
inline SourceParams random_source(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SourceParams p;
    p.fss_ueV = 10.0 * u(rng);
    p.tau_x_ns = 0.1 + 0.9 * u(rng);
    auto decay = [&] { return u(rng) < 0.3 ? DecayTime::infinite() : DecayTime::ns(0.05 + 20.0 * u(rng)); };
    p.tau_ss = decay();
    p.tau_hv = decay();
    p.t2_star = decay();
    p.k = u(rng);
    return p;
}

inline SourceParams qd1() {
    SourceParams p;
    p.fss_ueV = 0.6;
    p.tau_x_ns = 0.27;
    p.tau_ss = DecayTime::ns(1000.0);
    p.tau_hv = DecayTime::ns(1000.0);
    p.t2_star = DecayTime::ns(0.3);
    p.k = 0.969495;
    return p;
}

inline BsmModel qd1_bsm() {
    BsmModel m;
    m.visibility = 0.63;
    return m;
}

/// Counts equal to the exact expectations (rounded), for noiseless checks.
inline CountTable exact_counts(const DensityOperator& s, double n) {
    const auto ordered = expand_ordered(enumerate_settings());
    const auto mu = expected_counts(s, ordered, n, 0.0);
    CountTable t;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        t.rows.push_back({ordered[i], static_cast<std::uint64_t>(std::llround(mu[i])), 1.0});
    }
    return t;
}

}  // namespace swapsim::testing
