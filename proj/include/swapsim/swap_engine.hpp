// Partial Bell-state measurement on the two X photons and the resulting
// swapped XX_E-XX_L state.
//
// The coincidence operator for photons of HOM visibility V is
//   Pi = V P_{Psi-} + (1 - V)/2 I,
// i.e. indistinguishable photons exit different ports only in the singlet,
// distinguishable ones with probability 1/2 regardless of polarization. With
// ideal sources this heralds Psi- with fidelity (1 + V)/(4 - 2V), which is the
// V/(2 - V) prefactor of the closed-form swap fidelity.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "swapsim/error.hpp"
#include "swapsim/quadrature.hpp"
#include "swapsim/quantum_core.hpp"
#include "swapsim/source_model.hpp"

namespace swapsim {

struct BsmModel {
    double visibility = 1.0;
    double reflectance = 0.48;
    double transmittance = 0.52;
    double mode_overlap = 0.96;

    void validate() const {
        for (double v : {visibility, reflectance, transmittance, mode_overlap}) {
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("BsmModel: fields must lie in [0, 1]");
        }
        if (std::abs(reflectance + transmittance - 1.0) > 1e-9) {
            throw std::invalid_argument("BsmModel: reflectance + transmittance must equal 1");
        }
    }

    static BsmModel ideal(double v = 1.0) { return BsmModel{v, 0.5, 0.5, 1.0}; }
};

inline Projector bsm_operator(const BsmModel& m) {
    m.validate();
    const Matrix psi = bell_state(BellKind::PsiMinus).matrix();
    return Projector({0, 1}, Matrix(m.visibility * psi + 0.5 * (1.0 - m.visibility) * Matrix::Identity(4, 4)));
}

/// Visibility penalty of a real beam splitter, 2RT/(R^2 + T^2) * overlap^2.
inline double beam_splitter_penalty(const BsmModel& m) {
    m.validate();
    const double r = m.reflectance;
    const double t = m.transmittance;
    return 2.0 * r * t / (r * r + t * t) * m.mode_overlap * m.mode_overlap;
}

/// Measured visibility with the beam-splitter penalty divided out (capped at 1).
inline double intrinsic_visibility(const BsmModel& m) {
    const double penalty = beam_splitter_penalty(m);
    if (!(penalty > 0.0)) throw std::invalid_argument("intrinsic_visibility: beam splitter admits no interference");
    return std::min(1.0, m.visibility / penalty);
}

/// Closed-form fidelity of the swapped pair to Psi- (two identical sources).
inline double swap_fidelity_analytic(const SourceParams& p, const BsmModel& m) {
    m.validate();
    const CoherenceFactors g = coherence_factors(p);
    const double x = p.normalized_splitting();
    const double xg = x * g.g1_hv;
    const double xd = x * g.g1_deph;
    const double bracket = g.g1_prime_hv * g.g1_prime_hv +
                           2.0 * g.g1_hv * g.g1_hv / (1.0 + xg * xg) * (1.0 / (1.0 + xd * xd));
    const double v = m.visibility;
    return 0.25 * (1.0 + v / (2.0 - v) * p.k * p.k * bracket);
}

/// The same fidelity assembled from emission-time averages computed by
/// quadrature: f = 1/4 (1 + V/(2-V) k^2 (I1 + 2 I2 I3)). Independent of the
/// closed forms above.
inline double swap_fidelity_numeric(const SourceParams& p, const BsmModel& m, const QuadratureSpec& quad = {}) {
    p.validate();
    m.validate();
    quad.validate();
    const double w = p.fss_angular_frequency();
    const double gss = p.tau_ss.rate();
    const double ghv = p.tau_hv.rate();
    const double g2 = p.t2_star.rate();
    const double tau = p.tau_x_ns;

    const double spin = emission_average([&](double t) { return std::exp(-gss * t); }, tau, quad);
    const Complex cross = emission_average([&](double t) { return std::exp(Complex(-(gss + ghv), w) * t); }, tau, quad);
    const Complex deph = emission_average([&](double t) { return std::exp(Complex(-2.0 * g2, w) * t); }, tau, quad);
    const double deph_norm = emission_average([&](double t) { return std::exp(-2.0 * g2 * t); }, tau, quad);

    const double i1 = spin * spin;
    const double i2 = std::norm(cross);
    const double i3 = std::norm(deph) / (deph_norm * deph_norm);
    const double v = m.visibility;
    return 0.25 * (1.0 + v / (2.0 - v) * p.k * p.k * (i1 + 2.0 * i2 * i3));
}

/// Phase-averaging weight applied to the interference terms of the heralded
/// state: Re(a_E conj(a_L)) with a = <e^{(iS/hbar - 2/T2*) t}> / <e^{-2t/T2*}>.
/// Reduces to I3 for identical sources.
inline double interference_weight(const SourceParams& pe, const SourceParams& pl, const QuadratureSpec& quad = {}) {
    auto amplitude = [&](const SourceParams& p) {
        const double w = p.fss_angular_frequency();
        const double g2 = p.t2_star.rate();
        const Complex num = emission_average([&](double t) { return std::exp(Complex(-2.0 * g2, w) * t); }, p.tau_x_ns, quad);
        const double den = emission_average([&](double t) { return std::exp(-2.0 * g2 * t); }, p.tau_x_ns, quad);
        return num / den;
    };
    return (amplitude(pe) * std::conj(amplitude(pl))).real();
}

struct SwapResult {
    DensityOperator rho;  // XX_E (x) XX_L
    double fidelity_psi_minus = 0.0;
    double concurrence = 0.0;
    double herald_probability = 0.0;
};

namespace detail {

inline Matrix scale_off_diagonal(Matrix m, double factor) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (r != c) m(r, c) *= factor;
        }
    }
    return m;
}

/// Emission-time-averaged pair matrix (X (x) XX) including background, by quadrature.
inline Matrix averaged_pair_matrix(const SourceParams& p, const QuadratureSpec& quad) {
    return emission_average([&](double t) { return detected_pair_matrix(p, t); }, p.tau_x_ns, quad);
}

/// Unnormalized heralded XX state for given (X (x) XX) pair matrices.
/// `weight` scales the off-diagonal part of the singlet-projected component.
inline Matrix heralded_matrix(const Matrix& early, const Matrix& late, const BsmModel& m, double weight) {
    const DensityOperator four(kron(early, late), DensityOperator::Normalization::unnormalized);
    // (X_E, XX_E, X_L, XX_L) -> (X_E, X_L, XX_E, XX_L)
    const DensityOperator ordered(permute_qubits(four.matrix(), {0, 2, 1, 3}),
                                  DensityOperator::Normalization::unnormalized);
    const Conditioned coinc = project(ordered, bsm_operator(m));
    const Conditioned blind = project(ordered, Projector({0, 1}, Matrix::Identity(4, 4)));
    const double flat = 0.5 * (1.0 - m.visibility);
    const Matrix interference = coinc.state.matrix() - flat * blind.state.matrix();
    return scale_off_diagonal(interference, weight) + flat * blind.state.matrix();
}

}  // namespace detail

/// Swapped XX_E-XX_L state heralded by a BSM coincidence. The tensor-product
/// quadrature over (t_E, t_L) is evaluated in separable form: the projection
/// is linear and the emission times are independent, so summing the projected
/// node products equals projecting the product of the 1-D node sums.
inline SwapResult swapped_state(const SourceParams& pe, const SourceParams& pl, const BsmModel& m,
                                const QuadratureSpec& quad = {}) {
    pe.validate();
    pl.validate();
    m.validate();
    const Matrix early = detail::averaged_pair_matrix(pe, quad);
    const Matrix late = detail::averaged_pair_matrix(pl, quad);
    const double weight = interference_weight(pe, pl, quad);
    Matrix sigma = detail::heralded_matrix(early, late, m, weight);
    const double herald = sigma.trace().real();
    if (!(herald > 0.0)) throw NumericalError("swapped_state: herald probability is not positive");
    sigma /= herald;
    sigma = 0.5 * (sigma + sigma.adjoint());
    DensityOperator rho(sigma);
    const double f = fidelity(rho, bell_state(BellKind::PsiMinus));
    const double c = concurrence(rho);
    return {std::move(rho), f, c, herald};
}

inline SwapResult swapped_state(const SourceParams& p, const BsmModel& m, const QuadratureSpec& quad = {}) {
    return swapped_state(p, p, m, quad);
}

// ---------------------------------------------------------------------------
// Fidelity map over visibility and normalized splitting

struct ContourGrid {
    std::vector<double> v_axis;
    std::vector<double> s_axis;                  // S * tau_X / hbar
    std::vector<std::vector<double>> fidelity;   // [s index][v index]
    SourceParams fixed_params;
    BsmModel bsm;
};

namespace detail {

inline void require_monotone(const std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw std::invalid_argument(std::string(name) + " axis is empty");
    bool up = true;
    bool down = true;
    for (std::size_t i = 1; i < axis.size(); ++i) {
        up = up && axis[i] > axis[i - 1];
        down = down && axis[i] < axis[i - 1];
    }
    if (axis.size() > 1 && !up && !down) throw std::invalid_argument(std::string(name) + " axis is not monotone");
    for (double v : axis) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " axis has non-finite values");
    }
}

}  // namespace detail

inline SourceParams with_normalized_splitting(SourceParams p, double s) {
    if (!(s >= 0.0)) throw std::invalid_argument("normalized splitting must be >= 0");
    p.fss_ueV = s * kHbarUeVNs / p.tau_x_ns;
    return p;
}

inline ContourGrid fidelity_contour(const std::vector<double>& v_axis, const std::vector<double>& s_axis,
                                    const SourceParams& base, const BsmModel& m, unsigned threads = 1) {
    detail::require_monotone(v_axis, "visibility");
    detail::require_monotone(s_axis, "splitting");
    base.validate();
    m.validate();
    for (double v : v_axis) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("visibility axis must lie in [0, 1]");
    }
    ContourGrid grid{v_axis, s_axis, std::vector<std::vector<double>>(s_axis.size()), base, m};
    auto fill_row = [&](std::size_t i) {
        const SourceParams p = with_normalized_splitting(base, s_axis[i]);
        std::vector<double> row(v_axis.size());
        for (std::size_t j = 0; j < v_axis.size(); ++j) {
            BsmModel mj = m;
            mj.visibility = v_axis[j];
            row[j] = swap_fidelity_analytic(p, mj);
        }
        grid.fidelity[i] = std::move(row);
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(s_axis.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < s_axis.size(); ++i) fill_row(i);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < s_axis.size(); i += threads) fill_row(i);
            });
        }
    }
    return grid;
}

/// A quantum dot placed on the fidelity map.
struct OperatingPoint {
    std::string label;
    double fss_ueV = 0.0;
    double visibility = 0.0;
    double tau_x_ns = 0.27;
};

struct PlacedPoint {
    OperatingPoint point;
    double normalized_splitting = 0.0;
    double fidelity = 0.0;
};

/// Evaluates an operating point with the decoherence/background of `base`.
inline PlacedPoint place_point(const OperatingPoint& op, const SourceParams& base, const BsmModel& m) {
    SourceParams p = base;
    p.fss_ueV = op.fss_ueV;
    p.tau_x_ns = op.tau_x_ns;
    BsmModel mm = m;
    mm.visibility = op.visibility;
    return {op, p.normalized_splitting(), swap_fidelity_analytic(p, mm)};
}

// ---------------------------------------------------------------------------

/// Swap fidelity with imperfections removed one at a time.
struct IdealizationReport {
    double as_is = 0.0;
    double without_background = 0.0;          // k -> 1
    double ideal_beam_splitter = 0.0;         // k -> 1, V -> intrinsic visibility
    double perfect_indistinguishability = 0.0;  // k -> 1, V -> 1
    double intrinsic_visibility = 0.0;
};

inline IdealizationReport idealization_report(const SourceParams& p, const BsmModel& m) {
    IdealizationReport r;
    r.as_is = swap_fidelity_analytic(p, m);
    SourceParams clean = p;
    clean.k = 1.0;
    r.without_background = swap_fidelity_analytic(clean, m);
    r.intrinsic_visibility = intrinsic_visibility(m);
    r.ideal_beam_splitter = swap_fidelity_analytic(clean, BsmModel::ideal(r.intrinsic_visibility));
    r.perfect_indistinguishability = swap_fidelity_analytic(clean, BsmModel::ideal(1.0));
    return r;
}

}  // namespace swapsim
