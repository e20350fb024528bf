// XX-X cascade source: emission-time-resolved and time-integrated
// polarization states of the (X, XX) photon pair.
#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "swapsim/quantum_core.hpp"

namespace swapsim {

/// Reduced Planck constant in ueV * ns.
inline constexpr double kHbarUeVNs = 0.6582119569;

/// Characteristic decoherence time. "Infinite" (no decoherence) is an explicit
/// state, so ideal limits are exact rather than approximated by huge floats.
class DecayTime {
public:
    constexpr DecayTime() = default;

    static constexpr DecayTime infinite() { return DecayTime(); }

    static DecayTime ns(double value) {
        if (std::isinf(value) && value > 0) return infinite();
        if (!(value > 0.0) || !std::isfinite(value)) {
            throw std::invalid_argument("decay time must be positive (or infinite), got " + std::to_string(value));
        }
        return DecayTime(value);
    }

    constexpr bool is_infinite() const { return !finite_; }
    constexpr double value_ns() const { return finite_ ? ns_ : std::numeric_limits<double>::infinity(); }
    /// Decay rate in 1/ns; exactly zero when infinite.
    constexpr double rate() const { return finite_ ? 1.0 / ns_ : 0.0; }

    friend constexpr bool operator==(const DecayTime&, const DecayTime&) = default;

private:
    constexpr explicit DecayTime(double v) : ns_(v), finite_(true) {}

    double ns_ = 0.0;
    bool finite_ = false;
};

struct SourceParams {
    double fss_ueV = 0.0;                           // S
    double tau_x_ns = 0.27;                         // exciton radiative lifetime
    DecayTime tau_ss = DecayTime::infinite();       // spin scattering
    DecayTime tau_hv = DecayTime::infinite();       // cross-dephasing
    DecayTime t2_star = DecayTime::infinite();      // pure dephasing (enters the BSM only)
    double k = 1.0;                                 // fraction of detected pairs from the cascade
    std::optional<double> g2_x_xx;                  // informational; no mapping to k is applied

    void validate() const {
        if (!(fss_ueV >= 0.0) || !std::isfinite(fss_ueV)) throw std::invalid_argument("SourceParams: S must be >= 0");
        if (!(tau_x_ns > 0.0) || !std::isfinite(tau_x_ns)) {
            throw std::invalid_argument("SourceParams: tau_X must be positive and finite");
        }
        if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("SourceParams: k must lie in [0, 1]");
        if (g2_x_xx && !(*g2_x_xx >= 0.0)) throw std::invalid_argument("SourceParams: g2_X_XX must be >= 0");
    }

    /// Dimensionless S * tau_X / hbar.
    double normalized_splitting() const { return fss_ueV * tau_x_ns / kHbarUeVNs; }
    /// FSS precession frequency S / hbar in rad/ns.
    double fss_angular_frequency() const { return fss_ueV / kHbarUeVNs; }

    static SourceParams ideal() { return SourceParams{}; }
};

struct CoherenceFactors {
    double g1_prime_hv = 1.0;
    double g1_hv = 1.0;
    double g1_deph = 1.0;
};

inline CoherenceFactors coherence_factors(const SourceParams& p) {
    p.validate();
    const double tx = p.tau_x_ns;
    return {
        1.0 / (1.0 + tx * p.tau_ss.rate()),
        1.0 / (1.0 + tx * p.tau_ss.rate() + tx * p.tau_hv.rate()),
        1.0 / (1.0 + 2.0 * tx * p.t2_star.rate()),
    };
}

namespace detail {

/// Cascade matrix (X (x) XX) for a pair whose exciton lived for t ns; no validation.
inline Matrix cascade_matrix(const SourceParams& p, double t) {
    const double d = std::exp(-t * p.tau_ss.rate());
    const double decay = std::exp(-t * (p.tau_ss.rate() + p.tau_hv.rate()));
    const Complex coh = 0.5 * decay * std::polar(1.0, p.fss_angular_frequency() * t);
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 0.25 * (1.0 + d);
    m(1, 1) = 0.25 * (1.0 - d);
    m(2, 2) = 0.25 * (1.0 - d);
    m(3, 3) = 0.25 * (1.0 + d);
    m(0, 3) = coh;
    m(3, 0) = std::conj(coh);
    return m;
}

/// Cascade state mixed with white background: k * cascade + (1 - k) I/4.
inline Matrix detected_pair_matrix(const SourceParams& p, double t) {
    Matrix m = p.k * cascade_matrix(p, t);
    m.diagonal().array() += 0.25 * (1.0 - p.k);
    return m;
}

}  // namespace detail

/// Polarization state of the (X, XX) pair given the exciton emission time t (ns).
inline DensityOperator cascade_state_at(const SourceParams& p, double t_ns) {
    p.validate();
    if (!(t_ns >= 0.0) || !std::isfinite(t_ns)) throw std::invalid_argument("cascade_state_at: t must be >= 0");
    return DensityOperator(detail::cascade_matrix(p, t_ns));
}

/// Time-integrated pair state with background, entries in closed form.
inline DensityOperator pair_state(const SourceParams& p) {
    const CoherenceFactors g = coherence_factors(p);
    const double tx = p.tau_x_ns;
    // integral (1/tx) e^{-t/tx} e^{(i w - gamma) t} dt = 1 / (1 + tx gamma - i w tx)
    const Complex coh = 0.5 / Complex(1.0 + tx * (p.tau_ss.rate() + p.tau_hv.rate()), -p.normalized_splitting());
    Matrix m = Matrix::Zero(4, 4);
    const double bg = 0.25 * (1.0 - p.k);
    m(0, 0) = p.k * 0.25 * (1.0 + g.g1_prime_hv) + bg;
    m(1, 1) = p.k * 0.25 * (1.0 - g.g1_prime_hv) + bg;
    m(2, 2) = m(1, 1);
    m(3, 3) = m(0, 0);
    m(0, 3) = p.k * coh;
    m(3, 0) = std::conj(m(0, 3));
    return DensityOperator(m);
}

/// Fidelity of the time-integrated pair state to Phi+.
inline double source_fidelity(const SourceParams& p) {
    return fidelity(pair_state(p), bell_state(BellKind::PhiPlus));
}

}  // namespace swapsim
