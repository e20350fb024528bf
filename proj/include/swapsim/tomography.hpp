// Two-qubit polarization tomography: the 21-acquisition / 36-projector
// measurement set, Born-rule count simulation, linear inversion and
// maximum-likelihood reconstruction with Monte Carlo error bars.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "swapsim/error.hpp"
#include "swapsim/quantum_core.hpp"
#include "swapsim/seed.hpp"

namespace swapsim {

/// Analyzer pair. `a` acts on XX_E and `b` on XX_L for ordered settings; an
/// unordered setting is one acquisition that yields both (a, b) and (b, a),
/// since the early/late photon is identified by arrival time, not detector.
struct MeasurementSetting {
    Polarization a = Polarization::H;
    Polarization b = Polarization::H;
    bool unordered = false;

    friend bool operator==(const MeasurementSetting&, const MeasurementSetting&) = default;
};

inline std::string to_string(const MeasurementSetting& s) {
    return std::string{to_char(s.a), to_char(s.b)};
}

/// The 21 acquisitions {a, b}, a <= b in H, V, D, A, R, L order.
inline std::vector<MeasurementSetting> enumerate_settings() {
    std::vector<MeasurementSetting> out;
    for (std::size_t i = 0; i < std::size(kAllPolarizations); ++i) {
        for (std::size_t j = i; j < std::size(kAllPolarizations); ++j) {
            out.push_back({kAllPolarizations[i], kAllPolarizations[j], true});
        }
    }
    return out;
}

/// Ordered projector pairs measured by the given settings (36 for the full set).
inline std::vector<MeasurementSetting> expand_ordered(const std::vector<MeasurementSetting>& settings) {
    std::vector<MeasurementSetting> out;
    for (const auto& s : settings) {
        out.push_back({s.a, s.b, false});
        if (s.unordered && s.a != s.b) out.push_back({s.b, s.a, false});
    }
    return out;
}

inline Vector setting_ket(const MeasurementSetting& s) {
    const Vector a = polarization_ket(s.a);
    const Vector b = polarization_ket(s.b);
    Vector k(4);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) k(2 * i + j) = a(i) * b(j);
    }
    return k;
}

inline Matrix setting_projector(const MeasurementSetting& s) {
    return kron(polarization_projector(s.a), polarization_projector(s.b));
}

struct CountRow {
    MeasurementSetting setting;  // ordered
    std::uint64_t counts = 0;
    double weight = 1.0;         // relative acquisition time
};

struct CountTable {
    std::vector<CountRow> rows;

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& r : rows) t += r.counts;
        return t;
    }

    void validate() const {
        if (rows.empty()) throw std::invalid_argument("CountTable: no rows");
        for (const auto& r : rows) {
            if (r.setting.unordered) throw std::invalid_argument("CountTable: rows must hold ordered settings");
            if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
                throw std::invalid_argument("CountTable: weights must be positive");
            }
        }
    }
};

/// n_expected * Tr[rho P_a (x) P_b] + dark_rate for each ordered setting.
inline std::vector<double> expected_counts(const DensityOperator& state, const std::vector<MeasurementSetting>& ordered,
                                           double n_expected, double dark_rate) {
    if (state.dim() != 4) throw std::invalid_argument("expected_counts: two-qubit state required");
    std::vector<double> mu;
    mu.reserve(ordered.size());
    for (const auto& s : ordered) {
        const Vector k = setting_ket(s);
        const double p = std::max(0.0, (k.adjoint() * state.matrix() * k)(0).real());
        mu.push_back(n_expected * p + dark_rate);
    }
    return mu;
}

namespace detail {

inline std::uint64_t poisson_draw(std::mt19937_64& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<std::int64_t> dist(mean);
    return static_cast<std::uint64_t>(dist(rng));
}

}  // namespace detail

inline CountTable simulate_counts(const DensityOperator& state, const std::vector<MeasurementSetting>& settings,
                                  double n_expected, double dark_rate, std::uint64_t seed) {
    if (!(n_expected > 0.0)) throw std::invalid_argument("simulate_counts: n_expected must be positive");
    if (!(dark_rate >= 0.0)) throw std::invalid_argument("simulate_counts: dark rate must be >= 0");
    if (!is_physical(state, 1e-9)) throw std::invalid_argument("simulate_counts: state is not physical");
    const auto ordered = expand_ordered(settings);
    const auto mu = expected_counts(state, ordered, n_expected, dark_rate);
    std::mt19937_64 rng(derive_seed(seed, "simulate_counts"));
    CountTable table;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        table.rows.push_back({ordered[i], detail::poisson_draw(rng, mu[i]), 1.0});
    }
    return table;
}

/// Linear inversion over the two-qubit Pauli basis. Hermitian with unit
/// trace; not necessarily positive.
inline Matrix linear_reconstruct(const CountTable& counts) {
    counts.validate();
    const auto n_rows = static_cast<Eigen::Index>(counts.rows.size());
    Eigen::MatrixXd design(n_rows, 16);
    Eigen::VectorXd rhs(n_rows);
    std::vector<Matrix> basis;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) basis.push_back(kron(pauli(i), pauli(j)));
    }
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        const auto& row = counts.rows[static_cast<std::size_t>(r)];
        const Matrix proj = setting_projector(row.setting);
        for (int c = 0; c < 16; ++c) design(r, c) = row.weight * 0.25 * (basis[c] * proj).trace().real();
        rhs(r) = static_cast<double>(row.counts);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 16) {
        throw std::invalid_argument("linear_reconstruct: settings are not tomographically complete");
    }
    const Eigen::VectorXd coeff = qr.solve(rhs);
    if (!(coeff(0) > 0.0)) throw NumericalError("linear_reconstruct: counts carry no signal");
    Matrix rho = Matrix::Zero(4, 4);
    for (int c = 0; c < 16; ++c) rho += (coeff(c) / coeff(0)) * 0.25 * basis[c];
    return 0.5 * (rho + rho.adjoint());
}

// ---------------------------------------------------------------------------
// Maximum likelihood

enum class Likelihood { Poisson, Gaussian };

struct MleOptions {
    Likelihood likelihood = Likelihood::Poisson;
    int restarts = 10;            // total starts, the first from the unperturbed linear seed
    int max_iterations = 2000;    // per start
    double tolerance = 1e-10;     // log-likelihood improvement per iteration
    double perturbation = 0.1;    // restart noise, relative to the seed parameter scale
    std::uint64_t seed = 0;
};

struct Estimate {
    double value = 0.0;
    double sigma = 0.0;
};

struct ReconstructionResult {
    DensityOperator rho;
    double log_likelihood = 0.0;
    Estimate fidelity_psi_minus;
    Estimate concurrence;
    int iterations = 0;
    bool converged = false;
    int mc_iterations = 0;
    int mc_failures = 0;
};

namespace detail {

/// rho = L L^dagger / Tr, L lower triangular with real diagonal (16 reals).
inline Matrix cholesky_state(const Eigen::VectorXd& x) {
    Matrix l = Matrix::Zero(4, 4);
    int idx = 0;
    for (int i = 0; i < 4; ++i) l(i, i) = x(idx++);
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            l(i, j) = Complex(x(idx), x(idx + 1));
            idx += 2;
        }
    }
    Matrix rho = l * l.adjoint();
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) return Matrix::Identity(4, 4) / 4.0;
    rho /= tr;
    return 0.5 * (rho + rho.adjoint());
}

inline Eigen::VectorXd cholesky_params(const Matrix& rho) {
    Matrix reg = 0.5 * (rho + rho.adjoint());
    reg += 1e-6 * Matrix::Identity(4, 4);
    Eigen::LLT<Matrix> llt(reg);
    if (llt.info() != Eigen::Success) throw NumericalError("cholesky_params: seed is not positive definite");
    const Matrix l = llt.matrixL();
    Eigen::VectorXd x(16);
    int idx = 0;
    for (int i = 0; i < 4; ++i) x(idx++) = l(i, i).real();
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            x(idx++) = l(i, j).real();
            x(idx++) = l(i, j).imag();
        }
    }
    return x;
}

/// Precomputed measurement data for the likelihood.
class LikelihoodModel {
public:
    LikelihoodModel(const CountTable& table, Likelihood kind) : kind_(kind) {
        table.validate();
        for (const auto& r : table.rows) {
            kets_.push_back(setting_ket(r.setting));
            n_.push_back(static_cast<double>(r.counts));
            w_.push_back(r.weight);
        }
        n_total_ = std::accumulate(n_.begin(), n_.end(), 0.0);
        if (!(n_total_ > 0.0)) throw NumericalError("likelihood: all counts are zero");
    }

    /// Profiled log-likelihood, expressed relative to the saturated model so
    /// that its magnitude stays O(rows) near the optimum.
    double relative(const Matrix& rho) const {
        const std::size_t n = n_.size();
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = w_[i] * std::max((kets_[i].adjoint() * rho * kets_[i])(0).real(), 1e-300);
        }
        if (kind_ == Likelihood::Poisson) {
            const double scale = n_total_ / std::accumulate(a.begin(), a.end(), 0.0);
            double ll = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double mu = scale * a[i];
                ll -= mu - n_[i];
                if (n_[i] > 0.0) ll += n_[i] * std::log(mu / n_[i]);
            }
            return ll;
        }
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::max(n_[i], 1.0);
            num += n_[i] * a[i] / s;
            den += a[i] * a[i] / s;
        }
        const double scale = num / den;
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = n_[i] - scale * a[i];
            ll -= d * d / (2.0 * std::max(n_[i], 1.0));
        }
        return ll;
    }

    /// Log-likelihood up to the data-only constant: Poisson sum(n ln mu - mu)
    /// with the fitted overall rate, or the Gaussian (chi-square) form.
    double absolute(const Matrix& rho) const {
        double ll = relative(rho);
        if (kind_ == Likelihood::Poisson) {
            for (double v : n_) {
                if (v > 0.0) ll += v * std::log(v) - v;
            }
        }
        return ll;
    }

private:
    Likelihood kind_;
    std::vector<Vector> kets_;
    std::vector<double> n_;
    std::vector<double> w_;
    double n_total_ = 0.0;
};

struct LocalResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// BFGS ascent with central-difference gradients and Armijo backtracking.
template <class F>
LocalResult bfgs_maximize(const F& f, Eigen::VectorXd x, int max_iterations, double tolerance) {
    const Eigen::Index n = x.size();
    auto gradient = [&](const Eigen::VectorXd& at) {
        Eigen::VectorXd g(n);
        Eigen::VectorXd probe = at;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(0.1, std::abs(at(j)));
            probe(j) = at(j) + h;
            const double up = f(probe);
            probe(j) = at(j) - h;
            const double down = f(probe);
            probe(j) = at(j);
            g(j) = (up - down) / (2.0 * h);
        }
        return g;
    };
    LocalResult out;
    double fx = f(x);
    Eigen::VectorXd g = gradient(x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    int quiet = 0;
    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        Eigen::VectorXd d = h * g;
        if (g.dot(d) <= 0.0) {
            h.setIdentity();
            scaled = false;
            d = g;
        }
        double step = 1.0;
        if (!scaled) step = std::min(1.0, 0.1 * std::max(1.0, x.norm()) / std::max(d.norm(), 1e-300));
        const double slope = g.dot(d);
        Eigen::VectorXd xn;
        double fn = fx;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            xn = x + step * d;
            fn = f(xn);
            if (std::isfinite(fn) && fn >= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (scaled) {  // stale curvature: retry along the gradient
                h.setIdentity();
                scaled = false;
                continue;
            }
            out.converged = true;  // no ascent direction left at working precision
            break;
        }
        const Eigen::VectorXd gn = gradient(xn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = g - gn;  // curvature of -f
        const double improvement = fn - fx;
        x = xn;
        fx = fn;
        g = gn;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                h = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
            h = (ident - rho * s * y.transpose()) * h * (ident - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        const double floor = std::max(tolerance, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(fx));
        quiet = improvement < floor ? quiet + 1 : 0;
        if (quiet >= 2) {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.value = fx;
    return out;
}

}  // namespace detail

inline ReconstructionResult mle_reconstruct(const CountTable& counts, const MleOptions& opts = {}) {
    if (opts.restarts < 1 || opts.max_iterations < 1) throw std::invalid_argument("MleOptions: counts must be positive");
    const detail::LikelihoodModel model(counts, opts.likelihood);
    const DensityOperator seed_state = physicalize(linear_reconstruct(counts));
    const Eigen::VectorXd seed = detail::cholesky_params(seed_state.matrix());
    const double scale = std::sqrt(seed.squaredNorm() / static_cast<double>(seed.size()));
    auto objective = [&](const Eigen::VectorXd& x) { return model.relative(detail::cholesky_state(x)); };

    detail::LocalResult best;
    int best_index = -1;
    for (int r = 0; r < opts.restarts; ++r) {
        Eigen::VectorXd start = seed;
        if (r > 0) {
            std::mt19937_64 rng(derive_seed(opts.seed, "mle_restart", static_cast<std::uint64_t>(r)));
            std::normal_distribution<double> noise(0.0, opts.perturbation * scale);
            for (Eigen::Index j = 0; j < start.size(); ++j) start(j) += noise(rng);
        }
        detail::LocalResult local = detail::bfgs_maximize(objective, start, opts.max_iterations, opts.tolerance);
        // Highest likelihood wins; near-ties keep the lowest restart index.
        if (best_index < 0 || local.value > best.value + 1e-12) {
            best = std::move(local);
            best_index = r;
        }
    }
    DensityOperator rho(detail::cholesky_state(best.x));
    ReconstructionResult result{rho, model.absolute(rho.matrix()), {}, {}, best.iterations, best.converged, 0, 0};
    result.fidelity_psi_minus.value = fidelity(rho, bell_state(BellKind::PsiMinus));
    result.concurrence.value = concurrence(rho);
    return result;
}

/// Log-likelihood of an arbitrary state under the same model (for comparisons).
inline double log_likelihood(const CountTable& counts, const Matrix& rho, Likelihood kind = Likelihood::Poisson) {
    return detail::LikelihoodModel(counts, kind).absolute(rho);
}

/// Resamples every count from Poisson(observed), refits, and reports the sample
/// standard deviations of fidelity and concurrence. Central values come from
/// the fit to the unresampled counts.
inline ReconstructionResult monte_carlo_errors(const CountTable& counts, int iterations, std::uint64_t seed,
                                               const MleOptions& opts = {}, unsigned threads = 1) {
    if (iterations < 2) throw std::invalid_argument("monte_carlo_errors: need at least 2 iterations");
    ReconstructionResult central = mle_reconstruct(counts, opts);
    std::vector<double> fid(iterations, 0.0);
    std::vector<double> conc(iterations, 0.0);
    std::vector<char> ok(iterations, 0);
    auto run = [&](int i) {
        const auto idx = static_cast<std::uint64_t>(i);
        std::mt19937_64 rng(derive_seed(seed, "monte_carlo", idx));
        CountTable sample = counts;
        for (auto& row : sample.rows) row.counts = detail::poisson_draw(rng, static_cast<double>(row.counts));
        MleOptions o = opts;
        o.seed = derive_seed(seed, "monte_carlo_mle", idx);
        try {
            const ReconstructionResult r = mle_reconstruct(sample, o);
            fid[i] = r.fidelity_psi_minus.value;
            conc[i] = r.concurrence.value;
            ok[i] = 1;
        } catch (const std::exception&) {
            ok[i] = 0;
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(iterations)));
    if (threads == 1) {
        for (int i = 0; i < iterations; ++i) run(i);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (int i = static_cast<int>(w); i < iterations; i += static_cast<int>(threads)) run(i);
            });
        }
    }
    int failures = 0;
    std::vector<double> f_ok;
    std::vector<double> c_ok;
    for (int i = 0; i < iterations; ++i) {
        if (ok[i]) {
            f_ok.push_back(fid[i]);
            c_ok.push_back(conc[i]);
        } else {
            ++failures;
        }
    }
    if (failures > 0.05 * iterations || f_ok.size() < 2) {
        throw NumericalError("monte_carlo_errors: " + std::to_string(failures) + " of " + std::to_string(iterations) +
                             " resampled fits failed");
    }
    auto stddev = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    central.fidelity_psi_minus.sigma = stddev(f_ok);
    central.concurrence.sigma = stddev(c_ok);
    central.mc_iterations = iterations;
    central.mc_failures = failures;
    return central;
}

}  // namespace swapsim
