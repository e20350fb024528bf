// Polarization-qubit states: density operators on up to four qubits,
// Bell states, projection, fidelity and concurrence.
//
// Basis convention (used by every module and file format): each qubit is
// {H, V} = {0, 1}; composite states are ordered lexicographically with
// qubit 0 as the most significant index, e.g. {HH, HV, VH, VV}.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swapsim/error.hpp"

namespace swapsim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 4;
inline constexpr int kMaxDim = 1 << kMaxQubits;

// Dynamic size with inline storage: no heap traffic for dims <= 16.
using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RealVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

namespace tol {
inline constexpr double hermitian = 1e-12;
inline constexpr double trace = 1e-12;
inline constexpr double psd = 1e-10;
inline constexpr double purity = 1e-10;
}  // namespace tol

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline const char* to_string(BellKind kind) {
    switch (kind) {
        case BellKind::PhiPlus: return "PhiPlus";
        case BellKind::PhiMinus: return "PhiMinus";
        case BellKind::PsiPlus: return "PsiPlus";
        case BellKind::PsiMinus: return "PsiMinus";
    }
    return "?";
}

namespace detail {

inline int qubits_for_dim(Eigen::Index dim) {
    for (int n = 0; n <= kMaxQubits; ++n) {
        if (dim == (Eigen::Index{1} << n)) return n;
    }
    return -1;
}

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

inline double hermiticity_error(const Matrix& m) {
    return detail::max_abs(m - m.adjoint());
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
inline RealVector hermitian_eigenvalues(const Matrix& m) {
    const Matrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigen-solve failed");
    return solver.eigenvalues();
}

inline double min_eigenvalue(const Matrix& m) {
    return hermitian_eigenvalues(m).minCoeff();
}

/// Complex square matrix on 1-4 polarization qubits, Hermitian and positive
/// semidefinite. Unit trace unless constructed as `unnormalized`.
class DensityOperator {
public:
    enum class Normalization { unit_trace, unnormalized };

    DensityOperator() : DensityOperator(Matrix::Identity(1, 1)) {}

    explicit DensityOperator(Matrix m, Normalization norm = Normalization::unit_trace)
        : m_(std::move(m)), norm_(norm) {
        validate();
    }

    static DensityOperator unnormalized(Matrix m) {
        return DensityOperator(std::move(m), Normalization::unnormalized);
    }

    Eigen::Index dim() const { return m_.rows(); }
    int qubits() const { return detail::qubits_for_dim(m_.rows()); }
    const Matrix& matrix() const { return m_; }
    Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }
    double trace() const { return m_.trace().real(); }
    bool is_normalized() const { return norm_ == Normalization::unit_trace; }

    /// Unit-trace copy. Throws NumericalError when the trace vanishes.
    DensityOperator normalized() const {
        const double t = trace();
        if (!(t > 0.0)) throw NumericalError("cannot normalize an operator with non-positive trace");
        Matrix m = m_ / t;
        // Re-symmetrize so accumulated round-off cannot trip the Hermitian check.
        return DensityOperator(Matrix(0.5 * (m + m.adjoint())));
    }

private:
    void validate() const {
        if (m_.rows() != m_.cols()) throw std::invalid_argument("density operator must be square");
        if (detail::qubits_for_dim(m_.rows()) < 0) {
            throw std::invalid_argument("density operator dimension must be 2^n with n <= 4, got " +
                                        std::to_string(m_.rows()));
        }
        if (!m_.allFinite()) throw std::invalid_argument("density operator has non-finite entries");
        if (hermiticity_error(m_) > tol::hermitian) {
            throw std::invalid_argument("density operator is not Hermitian");
        }
        if (norm_ == Normalization::unit_trace && std::abs(m_.trace().real() - 1.0) > tol::trace) {
            throw std::invalid_argument("density operator trace is not 1");
        }
        if (min_eigenvalue(m_) < -tol::psd) {
            throw std::invalid_argument("density operator is not positive semidefinite");
        }
    }

    Matrix m_;
    Normalization norm_ = Normalization::unit_trace;
};

// ---------------------------------------------------------------------------
// Standard states

inline Vector bell_vector(BellKind kind) {
    const double s = 1.0 / std::sqrt(2.0);
    Vector v = Vector::Zero(4);
    switch (kind) {
        case BellKind::PhiPlus: v(0) = s; v(3) = s; break;
        case BellKind::PhiMinus: v(0) = s; v(3) = -s; break;
        case BellKind::PsiPlus: v(1) = s; v(2) = s; break;
        case BellKind::PsiMinus: v(1) = s; v(2) = -s; break;
    }
    return v;
}

inline DensityOperator pure_state(const Vector& ket) {
    const double n = ket.squaredNorm();
    if (!(n > 0.0)) throw std::invalid_argument("pure_state: zero vector");
    const Vector k = ket / std::sqrt(n);
    return DensityOperator(Matrix(k * k.adjoint()));
}

inline DensityOperator bell_state(BellKind kind) { return pure_state(bell_vector(kind)); }

inline DensityOperator maximally_mixed(int qubits) {
    if (qubits < 1 || qubits > kMaxQubits) throw std::invalid_argument("maximally_mixed: qubit count out of range");
    const Eigen::Index d = Eigen::Index{1} << qubits;
    return DensityOperator(Matrix(Matrix::Identity(d, d) / static_cast<double>(d)));
}

/// p |b><b| + (1 - p) I/4.
inline DensityOperator werner_state(double p, BellKind kind = BellKind::PsiMinus) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("werner_state: p must be in [0, 1]");
    const Matrix m = p * bell_state(kind).matrix() + (1.0 - p) * Matrix::Identity(4, 4) / 4.0;
    return DensityOperator(m);
}

// ---------------------------------------------------------------------------
// Polarization states of a single photon

enum class Polarization { H, V, D, A, R, L };

inline constexpr Polarization kAllPolarizations[] = {Polarization::H, Polarization::V, Polarization::D,
                                                     Polarization::A, Polarization::R, Polarization::L};

inline char to_char(Polarization p) {
    constexpr char names[] = {'H', 'V', 'D', 'A', 'R', 'L'};
    return names[static_cast<int>(p)];
}

inline Polarization polarization_from_char(char c) {
    switch (c) {
        case 'H': case 'h': return Polarization::H;
        case 'V': case 'v': return Polarization::V;
        case 'D': case 'd': return Polarization::D;
        case 'A': case 'a': return Polarization::A;
        case 'R': case 'r': return Polarization::R;
        case 'L': case 'l': return Polarization::L;
    }
    throw std::invalid_argument(std::string("unknown polarization '") + c + "'");
}

/// D = (H+V)/sqrt2, A = (H-V)/sqrt2, R = (H-iV)/sqrt2, L = (H+iV)/sqrt2.
inline Vector polarization_ket(Polarization p) {
    const double s = 1.0 / std::sqrt(2.0);
    const Complex i{0.0, 1.0};
    Vector v(2);
    switch (p) {
        case Polarization::H: v << 1.0, 0.0; break;
        case Polarization::V: v << 0.0, 1.0; break;
        case Polarization::D: v << s, s; break;
        case Polarization::A: v << s, -s; break;
        case Polarization::R: v << s, -i * s; break;
        case Polarization::L: v << s, i * s; break;
    }
    return v;
}

inline Matrix polarization_projector(Polarization p) {
    const Vector k = polarization_ket(p);
    return k * k.adjoint();
}

inline Matrix pauli(int which) {
    Matrix m(2, 2);
    const Complex i{0.0, 1.0};
    switch (which) {
        case 0: m << 1.0, 0.0, 0.0, 1.0; break;
        case 1: m << 0.0, 1.0, 1.0, 0.0; break;
        case 2: m << 0.0, -i, i, 0.0; break;
        case 3: m << 1.0, 0.0, 0.0, -1.0; break;
        default: throw std::invalid_argument("pauli index must be 0..3");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Composition and qubit bookkeeping

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    if (a.dim() * b.dim() > kMaxDim) {
        throw std::invalid_argument("tensor: resulting dimension " + std::to_string(a.dim() * b.dim()) +
                                    " exceeds " + std::to_string(kMaxDim));
    }
    const auto norm = (a.is_normalized() && b.is_normalized()) ? DensityOperator::Normalization::unit_trace
                                                               : DensityOperator::Normalization::unnormalized;
    return DensityOperator(kron(a.matrix(), b.matrix()), norm);
}

/// Reorders qubits: new qubit i is old qubit `order[i]`.
inline Matrix permute_qubits(const Matrix& m, const std::vector<int>& order) {
    const int n = detail::qubits_for_dim(m.rows());
    if (n < 0 || static_cast<int>(order.size()) != n) throw std::invalid_argument("permute_qubits: order size mismatch");
    std::vector<int> seen(n, 0);
    for (int q : order) {
        if (q < 0 || q >= n || seen[q]++) throw std::invalid_argument("permute_qubits: order is not a permutation");
    }
    const Eigen::Index d = m.rows();
    std::vector<Eigen::Index> map(d);
    for (Eigen::Index idx = 0; idx < d; ++idx) {
        // bit for new qubit i sits at position (n-1-i); take it from old qubit order[i].
        Eigen::Index old = 0;
        for (int i = 0; i < n; ++i) {
            const Eigen::Index bit = (idx >> (n - 1 - i)) & 1;
            old |= bit << (n - 1 - order[i]);
        }
        map[idx] = old;
    }
    Matrix out(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) out(r, c) = m(map[r], map[c]);
    }
    return out;
}

/// Traces out the leading `traced` qubits of an operator on `total` qubits.
inline Matrix trace_leading(const Matrix& m, int traced) {
    const int n = detail::qubits_for_dim(m.rows());
    if (traced < 0 || traced > n) throw std::invalid_argument("trace_leading: bad qubit count");
    const Eigen::Index outer = Eigen::Index{1} << traced;
    const Eigen::Index inner = m.rows() / outer;
    Matrix out = Matrix::Zero(inner, inner);
    for (Eigen::Index k = 0; k < outer; ++k) out += m.block(k * inner, k * inner, inner, inner);
    return out;
}

/// Partial trace keeping the listed qubits (in their original relative order).
inline Matrix partial_trace(const Matrix& m, const std::vector<int>& keep) {
    const int n = detail::qubits_for_dim(m.rows());
    if (n < 0) throw std::invalid_argument("partial_trace: dimension is not a power of two");
    std::vector<int> order;
    std::vector<int> kept = keep;
    std::sort(kept.begin(), kept.end());
    for (int q = 0; q < n; ++q) {
        if (!std::binary_search(kept.begin(), kept.end(), q)) order.push_back(q);
    }
    const int traced = static_cast<int>(order.size());
    for (int q : kept) order.push_back(q);
    return trace_leading(permute_qubits(m, order), traced);
}

// ---------------------------------------------------------------------------
// Projection

/// Hermitian operator with eigenvalues in [0, 1] acting on a subset of qubits.
struct Projector {
    std::vector<int> qubits;
    Matrix op;

    Projector(std::vector<int> q, Matrix m) : qubits(std::move(q)), op(std::move(m)) {
        const int n = detail::qubits_for_dim(op.rows());
        if (op.rows() != op.cols() || n < 1 || n != static_cast<int>(qubits.size())) {
            throw std::invalid_argument("Projector: operator size does not match qubit list");
        }
        if (hermiticity_error(op) > tol::hermitian) throw std::invalid_argument("Projector: operator is not Hermitian");
        const RealVector ev = hermitian_eigenvalues(op);
        if (ev.minCoeff() < -tol::psd || ev.maxCoeff() > 1.0 + tol::psd) {
            throw std::invalid_argument("Projector: eigenvalues must lie in [0, 1]");
        }
    }
};

struct Conditioned {
    DensityOperator state;  // unnormalized, on the unmeasured qubits
    double probability = 0.0;
};

/// Conditioned state Tr_sub[(op (x) I) rho] on the remaining qubits and the outcome
/// probability Tr[(op (x) I) rho]. For a projector this equals the sandwich form.
inline Conditioned project(const DensityOperator& state, const Projector& p) {
    const int n = state.qubits();
    const int k = static_cast<int>(p.qubits.size());
    std::vector<int> order;
    std::vector<int> seen(n, 0);
    for (int q : p.qubits) {
        if (q < 0 || q >= n || seen[q]++) {
            throw std::out_of_range("project: invalid or repeated qubit index " + std::to_string(q));
        }
        order.push_back(q);
    }
    for (int q = 0; q < n; ++q) {
        if (!seen[q]) order.push_back(q);
    }
    const Matrix rho = permute_qubits(state.matrix(), order);
    const Eigen::Index rest = rho.rows() >> k;
    Matrix applied = kron(p.op, Matrix::Identity(rest, rest)) * rho;
    Matrix cond = trace_leading(applied, k);
    cond = 0.5 * (cond + cond.adjoint());
    const double prob = cond.trace().real();
    return {DensityOperator::unnormalized(std::move(cond)), prob};
}

// ---------------------------------------------------------------------------
// Figures of merit

inline bool is_physical(const Matrix& m, double tolerance) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("is_physical: tolerance must be positive");
    if (m.rows() != m.cols() || detail::qubits_for_dim(m.rows()) < 0 || !m.allFinite()) return false;
    if (hermiticity_error(m) > tolerance) return false;
    if (std::abs(m.trace().real() - 1.0) > tolerance || std::abs(m.trace().imag()) > tolerance) return false;
    return min_eigenvalue(m) >= -tolerance;
}

inline bool is_physical(const DensityOperator& s, double tolerance) { return is_physical(s.matrix(), tolerance); }

/// <psi|rho|psi> for a pure target |psi><psi|.
inline double fidelity(const DensityOperator& state, const DensityOperator& target) {
    if (state.dim() != target.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    const Matrix& t = target.matrix();
    const double tr = t.trace().real();
    const double purity = (t * t).trace().real();
    if (std::abs(tr - 1.0) > tol::purity || std::abs(purity - 1.0) > tol::purity) {
        throw std::invalid_argument("fidelity: target must be a pure state");
    }
    return (state.matrix() * t).trace().real();
}

inline Matrix spin_flip(const Matrix& rho) {
    const Matrix yy = kron(pauli(2), pauli(2));
    return yy * rho.conjugate() * yy;
}

/// Wootters concurrence, via the Hermitian form sqrt(rho) rho~ sqrt(rho).
inline double concurrence(const DensityOperator& state) {
    if (state.dim() != 4) throw std::invalid_argument("concurrence: two-qubit state required");
    const Matrix rho = state.is_normalized() ? state.matrix() : state.normalized().matrix();
    const Matrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("concurrence: eigen-solve failed");
    if (es.eigenvalues().minCoeff() < -tol::psd) throw std::invalid_argument("concurrence: state is not physical");
    const RealVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix sqrt_rho = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
    const Matrix r = sqrt_rho * spin_flip(rho) * sqrt_rho;
    RealVector ev = hermitian_eigenvalues(r);
    std::vector<double> lambda(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) lambda[i] = std::sqrt(std::max(0.0, ev(i)));
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    return std::max(0.0, lambda[0] - lambda[1] - lambda[2] - lambda[3]);
}

inline double trace_distance(const Matrix& a, const Matrix& b) {
    return 0.5 * hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

/// Clips negative eigenvalues to zero and renormalizes the trace.
inline DensityOperator physicalize(const Matrix& m) {
    const Matrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("physicalize: eigen-solve failed");
    const RealVector clipped = es.eigenvalues().cwiseMax(0.0);
    const double total = clipped.sum();
    if (!(total > 0.0)) throw NumericalError("physicalize: no positive eigenvalues");
    Matrix out = es.eigenvectors() * (clipped / total).asDiagonal() * es.eigenvectors().adjoint();
    out = 0.5 * (out + out.adjoint());
    return DensityOperator(out / out.trace().real());
}

}  // namespace swapsim
