// Detector time-tag streams: outcome-level synthesis of the four-detector
// swapping experiment, coincidence finding, triggered correlation histograms,
// four-fold extraction for tomography and the four-fold rate budget.
//
// Frame bookkeeping: frames repeat at the effective repetition rate; the early
// pulse sits at 0 and the late pulse at +pulse_pair_delay. The X photons pass
// an unbalanced interferometer with the same delay, so an X photon lands in
// slot 0 (early, short), slot 1 (early long or late short) or slot 2 (late,
// long). Only slot-1 pairs interfere at the BSM beam splitter.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swapsim/error.hpp"
#include "swapsim/seed.hpp"
#include "swapsim/source_model.hpp"
#include "swapsim/swap_engine.hpp"
#include "swapsim/tomography.hpp"

namespace swapsim {

enum class Channel : std::uint8_t { Bsm1 = 0, Bsm2 = 1, XxA = 2, XxB = 3 };

inline const char* to_string(Channel c) {
    switch (c) {
        case Channel::Bsm1: return "BSM1";
        case Channel::Bsm2: return "BSM2";
        case Channel::XxA: return "XXA";
        case Channel::XxB: return "XXB";
    }
    return "?";
}

struct TimeTag {
    Channel channel = Channel::Bsm1;
    std::uint64_t timestamp_ps = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

struct Window {
    double lo_ns = 0.0;
    double hi_ns = 0.0;

    bool contains(double t_ns) const { return t_ns >= lo_ns && t_ns < hi_ns; }
    double width() const { return hi_ns - lo_ns; }
};

struct ExperimentConfig {
    double rep_rate_mhz = 160.0;
    double pulse_pair_delay_ns = 1.8;
    double bsm_window_ns = 0.6;
    double record_range_ns = 100.0;
    Window g2_window{-1.0, 2.8};
    Window early_window{-1.0, 0.9};  // XX_E arrival relative to the trigger reference
    Window late_window{0.9, 2.8};    // XX_L arrival
    double pair_gen_prob = 0.9;
    double eta_x = 0.5 / 160.0 / 0.9;   // BSM singles of 0.5 MHz per detector
    double eta_xx = 0.5 / 160.0 / 0.9;
    double detector_jitter_sigma_ns = 0.4;
    double tau_xx_ns = 0.13;
    double dark_rate_hz = 0.0;
    double bin_width_ns = 0.1;
    double slot_offset_ns = 0.4;  // mean X emission delay after the pulse, for slot assignment
    Polarization analyzer_a = Polarization::H;
    Polarization analyzer_b = Polarization::V;

    double frame_period_ns() const { return 1e3 / rep_rate_mhz; }
    double frame_rate_hz() const { return rep_rate_mhz * 1e6; }

    void validate() const {
        auto unit = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("ExperimentConfig: ") + name + " must lie in [0, 1]");
        };
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("ExperimentConfig: ") + name + " must be positive");
        };
        positive(rep_rate_mhz, "rep_rate_mhz");
        positive(pulse_pair_delay_ns, "pulse_pair_delay_ns");
        positive(bsm_window_ns, "bsm_window_ns");
        positive(record_range_ns, "record_range_ns");
        positive(tau_xx_ns, "tau_xx_ns");
        positive(bin_width_ns, "bin_width_ns");
        unit(pair_gen_prob, "pair_gen_prob");
        unit(eta_x, "eta_x");
        unit(eta_xx, "eta_xx");
        if (!(detector_jitter_sigma_ns >= 0.0)) throw std::invalid_argument("ExperimentConfig: jitter must be >= 0");
        if (!(dark_rate_hz >= 0.0)) throw std::invalid_argument("ExperimentConfig: dark rate must be >= 0");
        if (2.0 * pulse_pair_delay_ns >= frame_period_ns()) {
            throw std::invalid_argument("ExperimentConfig: pulse pair delay must be below half the frame period");
        }
        for (const Window* w : {&g2_window, &early_window, &late_window}) {
            if (!(w->width() > 0.0)) throw std::invalid_argument("ExperimentConfig: windows must have positive width");
            if (w->width() >= frame_period_ns()) throw std::invalid_argument("ExperimentConfig: windows must be shorter than a frame");
        }
        if (std::abs(std::llround(bin_width_ns * 1e3) - bin_width_ns * 1e3) > 1e-6 || std::llround(bin_width_ns * 1e3) % 10 != 0) {
            throw std::invalid_argument("ExperimentConfig: bin width must be a multiple of 10 ps");
        }
    }
};

struct TimeTagStream {
    std::vector<TimeTag> events;  // sorted by timestamp
    double duration_s = 0.0;
    ExperimentConfig config;
    std::optional<Polarization> analyzer_a;
    std::optional<Polarization> analyzer_b;
};

namespace detail {

inline constexpr std::int64_t kTagResolutionPs = 10;

inline std::uint64_t to_tag(double t_ns) {
    const double ps = std::max(0.0, t_ns * 1e3);
    return static_cast<std::uint64_t>(std::llround(ps / kTagResolutionPs)) * kTagResolutionPs;
}

/// Joint analyzer outcome probabilities for an XX pair in state `sigma`
/// (XX_E (x) XX_L) with analyzer kets `x` on XX_E and `y` on XX_L. Index bit 0:
/// XX_E passes, bit 1: XX_L passes.
inline std::array<double, 4> joint_pass_table(const Matrix& sigma, const Vector& x, const Vector& y) {
    const Matrix px = x * x.adjoint();
    const Matrix py = y * y.adjoint();
    const Matrix id = Matrix::Identity(2, 2);
    std::array<double, 4> out{};
    for (int bits = 0; bits < 4; ++bits) {
        const Matrix a = (bits & 1) ? px : Matrix(id - px);
        const Matrix b = (bits & 2) ? py : Matrix(id - py);
        out[bits] = std::max(0.0, (sigma * kron(a, b)).trace().real());
    }
    const double total = out[0] + out[1] + out[2] + out[3];
    for (double& v : out) v /= total;
    return out;
}

/// XX marginal of an (X (x) XX) matrix.
inline Matrix xx_marginal(const Matrix& pair) { return partial_trace(pair, {1}); }

}  // namespace detail

/// Conditional XX_E-XX_L states used by the synthesizer, normalized.
struct BranchStates {
    Matrix coincidence;  // interfering slot-1 pair, one photon per BSM output
    Matrix bunched;      // interfering pair, both photons in the same output
    Matrix independent;  // no interference (or a single cascade)
    double coincidence_probability = 0.0;
    Matrix xx_early;     // single-photon marginals
    Matrix xx_late;
};

inline BranchStates branch_states(const SourceParams& pe, const SourceParams& pl, const BsmModel& m,
                                  const QuadratureSpec& quad = {}) {
    pe.validate();
    pl.validate();
    m.validate();
    const Matrix early = detail::averaged_pair_matrix(pe, quad);
    const Matrix late = detail::averaged_pair_matrix(pl, quad);
    BranchStates b;
    b.xx_early = detail::xx_marginal(early);
    b.xx_late = detail::xx_marginal(late);
    b.independent = kron(b.xx_early, b.xx_late);
    const Matrix herald = detail::heralded_matrix(early, late, m, interference_weight(pe, pl, quad));
    b.coincidence_probability = herald.trace().real();
    if (!(b.coincidence_probability > 0.0 && b.coincidence_probability < 1.0)) {
        throw NumericalError("branch_states: degenerate BSM coincidence probability");
    }
    b.coincidence = herald / b.coincidence_probability;
    b.bunched = (b.independent - herald) / (1.0 - b.coincidence_probability);
    return b;
}

/// Outcome-level forward model of the experiment for a fixed analyzer pair
/// (cfg.analyzer_a on arm A, cfg.analyzer_b on arm B). Deterministic in seed.
inline TimeTagStream synthesize_timetags(const SourceParams& pe, const SourceParams& pl, const BsmModel& m,
                                         const ExperimentConfig& cfg, double duration_s, std::uint64_t seed) {
    cfg.validate();
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw std::invalid_argument("synthesize_timetags: duration must be >= 0");
    TimeTagStream stream;
    stream.duration_s = duration_s;
    stream.config = cfg;
    stream.analyzer_a = cfg.analyzer_a;
    stream.analyzer_b = cfg.analyzer_b;

    const auto frames = static_cast<std::uint64_t>(std::floor(duration_s * cfg.frame_rate_hz() + 1e-9));
    const BranchStates states = branch_states(pe, pl, m);
    const Vector arm_ket[2] = {polarization_ket(cfg.analyzer_a), polarization_ket(cfg.analyzer_b)};

    // table[branch][arm_E][arm_L]: joint pass probabilities
    std::array<std::array<std::array<std::array<double, 4>, 2>, 2>, 3> table{};
    const Matrix* branch_state[3] = {&states.coincidence, &states.bunched, &states.independent};
    for (int br = 0; br < 3; ++br) {
        for (int ae = 0; ae < 2; ++ae) {
            for (int al = 0; al < 2; ++al) table[br][ae][al] = detail::joint_pass_table(*branch_state[br], arm_ket[ae], arm_ket[al]);
        }
    }
    double single_pass[2][2];  // [early/late][arm]
    for (int arm = 0; arm < 2; ++arm) {
        single_pass[0][arm] = (arm_ket[arm].adjoint() * states.xx_early * arm_ket[arm])(0).real();
        single_pass[1][arm] = (arm_ket[arm].adjoint() * states.xx_late * arm_ket[arm])(0).real();
    }

    std::mt19937_64 rng(derive_seed(seed, "synthesize_timetags"));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> exp_xx(1.0 / cfg.tau_xx_ns);
    std::exponential_distribution<double> exp_x_e(1.0 / pe.tau_x_ns);
    std::exponential_distribution<double> exp_x_l(1.0 / pl.tau_x_ns);
    std::normal_distribution<double> jitter(0.0, 1.0);
    const double sigma = cfg.detector_jitter_sigma_ns;
    const double period = cfg.frame_period_ns();
    const double delay = cfg.pulse_pair_delay_ns;

    auto& ev = stream.events;
    auto click = [&](Channel ch, double t_ns) { ev.push_back({ch, detail::to_tag(t_ns + sigma * jitter(rng))}); };

    for (std::uint64_t f = 0; f < frames; ++f) {
        const bool has[2] = {uni(rng) < cfg.pair_gen_prob, uni(rng) < cfg.pair_gen_prob};
        if (!has[0] && !has[1]) continue;
        const double t0 = static_cast<double>(f) * period;
        double t_xx[2] = {0.0, 0.0};
        double t_x[2] = {0.0, 0.0};
        int slot[2] = {0, 0};
        for (int i = 0; i < 2; ++i) {
            if (!has[i]) continue;
            t_xx[i] = exp_xx(rng);
            t_x[i] = t_xx[i] + (i == 0 ? exp_x_e(rng) : exp_x_l(rng));
            slot[i] = i + (uni(rng) < 0.5 ? 1 : 0);  // long arm adds one delay
        }
        const bool interfering = has[0] && has[1] && slot[0] == 1 && slot[1] == 1;
        int branch = 2;
        int det[2] = {0, 0};
        if (interfering) {
            if (uni(rng) < states.coincidence_probability) {
                branch = 0;
                det[0] = uni(rng) < 0.5 ? 0 : 1;
                det[1] = 1 - det[0];
            } else {
                branch = 1;
                det[0] = det[1] = uni(rng) < 0.5 ? 0 : 1;
            }
        } else {
            for (int i = 0; i < 2; ++i) det[i] = uni(rng) < 0.5 ? 0 : 1;
        }
        for (int i = 0; i < 2; ++i) {
            if (has[i] && uni(rng) < cfg.eta_x) {
                click(det[i] == 0 ? Channel::Bsm1 : Channel::Bsm2, t0 + slot[i] * delay + t_x[i]);
            }
        }
        int arm[2] = {0, 0};
        bool pass[2] = {false, false};
        for (int i = 0; i < 2; ++i) arm[i] = uni(rng) < 0.5 ? 0 : 1;
        if (has[0] && has[1]) {
            const auto& p = table[branch][arm[0]][arm[1]];
            const double u = uni(rng);
            int bits = 3;
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                acc += p[k];
                if (u < acc) {
                    bits = k;
                    break;
                }
            }
            pass[0] = bits & 1;
            pass[1] = bits & 2;
        } else {
            for (int i = 0; i < 2; ++i) {
                if (has[i]) pass[i] = uni(rng) < single_pass[i][arm[i]];
            }
        }
        for (int i = 0; i < 2; ++i) {
            if (pass[i] && uni(rng) < cfg.eta_xx) {
                click(arm[i] == 0 ? Channel::XxA : Channel::XxB, t0 + i * delay + t_xx[i]);
            }
        }
    }

    if (cfg.dark_rate_hz > 0.0 && frames > 0) {
        const double span_ns = static_cast<double>(frames) * period;
        std::mt19937_64 dark_rng(derive_seed(seed, "dark_counts"));
        std::uniform_real_distribution<double> when(0.0, span_ns);
        for (int ch = 0; ch < 4; ++ch) {
            const std::uint64_t n = detail::poisson_draw(dark_rng, cfg.dark_rate_hz * span_ns * 1e-9);
            for (std::uint64_t i = 0; i < n; ++i) ev.push_back({static_cast<Channel>(ch), detail::to_tag(when(dark_rng))});
        }
    }
    std::stable_sort(ev.begin(), ev.end(), [](const TimeTag& a, const TimeTag& b) { return a.timestamp_ps < b.timestamp_ps; });
    return stream;
}

// ---------------------------------------------------------------------------
// Stream files

inline constexpr char kStreamMagic[4] = {'Q', 'T', 'T', '1'};
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::uint8_t kNoAnalyzer = 0xFF;

namespace detail {

inline std::uint8_t analyzer_code(const std::optional<Polarization>& p) {
    return p ? static_cast<std::uint8_t>(*p) : kNoAnalyzer;
}

inline std::optional<Polarization> analyzer_from_code(std::uint8_t c) {
    if (c == kNoAnalyzer) return std::nullopt;
    if (c > static_cast<std::uint8_t>(Polarization::L)) throw std::runtime_error("stream file: bad analyzer code");
    return static_cast<Polarization>(c);
}

inline double duration_from_events(const std::vector<TimeTag>& ev, const ExperimentConfig& cfg) {
    if (ev.empty()) return 0.0;
    const double last_ns = static_cast<double>(ev.back().timestamp_ps) * 1e-3;
    return std::ceil(last_ns / cfg.frame_period_ns()) * cfg.frame_period_ns() * 1e-9;
}

}  // namespace detail

/// Binary layout (little endian): "QTT1", u32 version, 8 reserved bytes (byte 0
/// and 1 carry the arm A/B analyzer codes, 0xFF when unset), then 9-byte
/// records {u8 channel, u64 timestamp_ps}.
inline void write_stream(std::ostream& out, const TimeTagStream& s) {
    unsigned char header[16] = {};
    std::memcpy(header, kStreamMagic, 4);
    for (int i = 0; i < 4; ++i) header[4 + i] = static_cast<unsigned char>((kStreamVersion >> (8 * i)) & 0xFF);
    header[8] = detail::analyzer_code(s.analyzer_a);
    header[9] = detail::analyzer_code(s.analyzer_b);
    out.write(reinterpret_cast<const char*>(header), 16);
    unsigned char rec[9];
    for (const auto& e : s.events) {
        rec[0] = static_cast<unsigned char>(e.channel);
        for (int i = 0; i < 8; ++i) rec[1 + i] = static_cast<unsigned char>((e.timestamp_ps >> (8 * i)) & 0xFF);
        out.write(reinterpret_cast<const char*>(rec), 9);
    }
    if (!out) throw std::runtime_error("stream file: write failed");
}

inline TimeTagStream read_stream(std::istream& in, const ExperimentConfig& cfg) {
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), 16)) throw std::runtime_error("stream file: truncated header");
    if (std::memcmp(header, kStreamMagic, 4) != 0) throw std::runtime_error("stream file: bad magic");
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(header[4 + i]) << (8 * i);
    if (version != kStreamVersion) throw std::runtime_error("stream file: unsupported version " + std::to_string(version));
    TimeTagStream s;
    s.config = cfg;
    s.analyzer_a = detail::analyzer_from_code(header[8]);
    s.analyzer_b = detail::analyzer_from_code(header[9]);
    unsigned char rec[9];
    std::uint64_t previous = 0;
    while (in.read(reinterpret_cast<char*>(rec), 9)) {
        if (rec[0] > 3) throw std::runtime_error("stream file: bad channel " + std::to_string(rec[0]));
        std::uint64_t ts = 0;
        for (int i = 0; i < 8; ++i) ts |= static_cast<std::uint64_t>(rec[1 + i]) << (8 * i);
        if (ts < previous) throw std::runtime_error("stream file: timestamps not sorted");
        previous = ts;
        s.events.push_back({static_cast<Channel>(rec[0]), ts});
    }
    if (in.gcount() != 0) throw std::runtime_error("stream file: truncated record");
    s.duration_s = detail::duration_from_events(s.events, cfg);
    return s;
}

inline void write_stream_csv(std::ostream& out, const TimeTagStream& s) {
    out << "channel,timestamp_ps\n";
    for (const auto& e : s.events) out << static_cast<int>(e.channel) << ',' << e.timestamp_ps << '\n';
}

inline TimeTagStream read_stream_csv(std::istream& in, const ExperimentConfig& cfg) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("channel,timestamp_ps", 0) != 0) {
        throw std::runtime_error("stream csv: missing header");
    }
    TimeTagStream s;
    s.config = cfg;
    std::uint64_t previous = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            const int ch = std::stoi(line.substr(0, comma));
            const std::uint64_t ts = std::stoull(line.substr(comma + 1));
            if (ch < 0 || ch > 3) throw std::invalid_argument("bad channel");
            if (ts < previous) throw std::invalid_argument("timestamps not sorted");
            previous = ts;
            s.events.push_back({static_cast<Channel>(ch), ts});
        } catch (const std::exception& e) {
            throw std::runtime_error("stream csv line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    s.duration_s = detail::duration_from_events(s.events, cfg);
    return s;
}

// ---------------------------------------------------------------------------
// Coincidences and histograms

namespace detail {

inline std::vector<std::int64_t> channel_times(const TimeTagStream& s, Channel c) {
    std::vector<std::int64_t> t;
    for (const auto& e : s.events) {
        if (e.channel == c) t.push_back(static_cast<std::int64_t>(e.timestamp_ps));
    }
    return t;
}

inline std::int64_t ps(double ns) { return std::llround(ns * 1e3); }

/// Slot (0, 1, 2) of a BSM click within its frame, -1 when outside all slots.
inline int bsm_slot(std::int64_t t_ps, const ExperimentConfig& cfg) {
    const std::int64_t period = ps(cfg.frame_period_ns());
    const std::int64_t delay = ps(cfg.pulse_pair_delay_ns);
    std::int64_t phase = (t_ps - ps(cfg.slot_offset_ns) + delay / 2) % period;
    if (phase < 0) phase += period;
    const std::int64_t s = phase / delay;
    return s <= 2 ? static_cast<int>(s) : -1;
}

}  // namespace detail

/// Greedy earliest-first BSM1/BSM2 matching within the BSM window; both clicks
/// must fall in the interfering (middle) slot. Returns trigger reference times
/// in ps, i.e. the mean click time minus the interferometer delay.
inline std::vector<std::int64_t> find_bsm_coincidences(const TimeTagStream& s, const ExperimentConfig& cfg) {
    const auto a = detail::channel_times(s, Channel::Bsm1);
    const auto b = detail::channel_times(s, Channel::Bsm2);
    const std::int64_t window = detail::ps(cfg.bsm_window_ns);
    const std::int64_t delay = detail::ps(cfg.pulse_pair_delay_ns);
    std::vector<std::int64_t> triggers;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const std::int64_t d = b[j] - a[i];
        if (std::abs(d) <= window) {
            if (detail::bsm_slot(a[i], cfg) == 1 && detail::bsm_slot(b[j], cfg) == 1) {
                triggers.push_back((a[i] + b[j]) / 2 - delay);
                ++i;
                ++j;
                continue;
            }
        }
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return triggers;
}

/// 1-D (edges_b empty) or 2-D histogram; counts are row-major over (a, b).
struct CorrelationHistogram {
    std::vector<double> edges_a_ns;
    std::vector<double> edges_b_ns;
    std::vector<std::uint64_t> counts;
    std::uint64_t triggers = 0;
    double side_peak_mean = std::numeric_limits<double>::quiet_NaN();

    bool is_2d() const { return !edges_b_ns.empty(); }
    std::size_t bins_a() const { return edges_a_ns.empty() ? 0 : edges_a_ns.size() - 1; }
    std::size_t bins_b() const { return edges_b_ns.empty() ? 1 : edges_b_ns.size() - 1; }
    std::uint64_t& at(std::size_t ia, std::size_t ib = 0) { return counts[ia * bins_b() + ib]; }
    std::uint64_t at(std::size_t ia, std::size_t ib = 0) const { return counts[ia * bins_b() + ib]; }
    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    double center_a(std::size_t i) const { return 0.5 * (edges_a_ns[i] + edges_a_ns[i + 1]); }
    double center_b(std::size_t i) const { return 0.5 * (edges_b_ns[i] + edges_b_ns[i + 1]); }
};

namespace detail {

inline std::vector<double> histogram_edges(const ExperimentConfig& cfg) {
    const std::int64_t bin = ps(cfg.bin_width_ns);
    const std::int64_t range = ps(cfg.record_range_ns);
    const std::int64_t n = (2 * range + bin - 1) / bin;
    std::vector<double> edges;
    for (std::int64_t i = 0; i <= n; ++i) edges.push_back(static_cast<double>(-range + i * bin) * 1e-3);
    return edges;
}

/// Indices [lo, hi) of sorted times within [t - range, t + range).
inline std::pair<std::size_t, std::size_t> span_around(const std::vector<std::int64_t>& v, std::int64_t t, std::int64_t lo_off,
                                                       std::int64_t hi_off) {
    const auto lo = std::lower_bound(v.begin(), v.end(), t + lo_off);
    const auto hi = std::lower_bound(lo, v.end(), t + hi_off);
    return {static_cast<std::size_t>(lo - v.begin()), static_cast<std::size_t>(hi - v.begin())};
}

}  // namespace detail

/// Triggered third-order histogram of (t_XXA - t_trig, t_XXB - t_trig) over
/// +/- record_range.
inline CorrelationHistogram build_g3(const TimeTagStream& s, const std::vector<std::int64_t>& triggers,
                                     const ExperimentConfig& cfg) {
    cfg.validate();
    CorrelationHistogram h;
    h.edges_a_ns = detail::histogram_edges(cfg);
    h.edges_b_ns = h.edges_a_ns;
    h.counts.assign(h.bins_a() * h.bins_b(), 0);
    h.triggers = triggers.size();
    const auto xa = detail::channel_times(s, Channel::XxA);
    const auto xb = detail::channel_times(s, Channel::XxB);
    const std::int64_t bin = detail::ps(cfg.bin_width_ns);
    const std::int64_t range = detail::ps(cfg.record_range_ns);
    const std::int64_t upper = -range + static_cast<std::int64_t>(h.bins_a()) * bin;
    for (const std::int64_t t : triggers) {
        const auto [a0, a1] = detail::span_around(xa, t, -range, upper);
        if (a0 == a1) continue;
        const auto [b0, b1] = detail::span_around(xb, t, -range, upper);
        for (std::size_t i = a0; i < a1; ++i) {
            const auto ia = static_cast<std::size_t>((xa[i] - t + range) / bin);
            for (std::size_t j = b0; j < b1; ++j) {
                ++h.at(ia, static_cast<std::size_t>((xb[j] - t + range) / bin));
            }
        }
    }
    return h;
}

/// Sums the channel-B axis over bins whose centers lie in the g2 window.
inline CorrelationHistogram reduce_g2(const CorrelationHistogram& g3, const ExperimentConfig& cfg) {
    if (!g3.is_2d()) throw std::invalid_argument("reduce_g2: 2-D histogram required");
    if (cfg.g2_window.lo_ns < g3.edges_b_ns.front() || cfg.g2_window.hi_ns > g3.edges_b_ns.back()) {
        throw std::invalid_argument("reduce_g2: g2 window outside the histogram range");
    }
    CorrelationHistogram g2;
    g2.edges_a_ns = g3.edges_a_ns;
    g2.counts.assign(g3.bins_a(), 0);
    g2.triggers = g3.triggers;
    for (std::size_t ib = 0; ib < g3.bins_b(); ++ib) {
        if (!cfg.g2_window.contains(g3.center_b(ib))) continue;
        for (std::size_t ia = 0; ia < g3.bins_a(); ++ia) g2.counts[ia] += g3.at(ia, ib);
    }
    return g2;
}

/// Counts in a 1-D histogram with bin centers inside [lo, hi).
inline std::uint64_t window_counts(const CorrelationHistogram& h, const Window& w) {
    if (h.is_2d()) throw std::invalid_argument("window_counts: 1-D histogram required");
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < h.bins_a(); ++i) {
        if (w.contains(h.center_a(i))) n += h.counts[i];
    }
    return n;
}

/// A side window holds four pulse combinations (XX_E/XX_L on A against
/// XX_E/XX_L on B); the central window holds two, since one cascade cannot
/// feed both detectors. Uncorrelated central counts are therefore half the
/// side-peak mean.
inline constexpr double kCentralPeakShare = 0.5;

struct PeakSummary {
    double central = 0.0;
    double side_mean = 0.0;
    int side_peaks = 0;
    double uncorrelated_level() const { return kCentralPeakShare * side_mean; }
    /// Central counts over their uncorrelated expectation: > 1 bunching, < 1 antibunching.
    double normalized() const { return central / uncorrelated_level(); }
};

/// Central g2 window against the same window shifted by whole frames.
inline PeakSummary peak_summary(const CorrelationHistogram& h, const ExperimentConfig& cfg) {
    PeakSummary s;
    s.central = static_cast<double>(window_counts(h, cfg.g2_window));
    const double period = cfg.frame_period_ns();
    double side = 0.0;
    for (int k = 1;; ++k) {
        bool any = false;
        for (int sign : {-1, 1}) {
            const Window w{cfg.g2_window.lo_ns + sign * k * period, cfg.g2_window.hi_ns + sign * k * period};
            if (w.lo_ns < h.edges_a_ns.front() || w.hi_ns > h.edges_a_ns.back()) continue;
            side += static_cast<double>(window_counts(h, w));
            ++s.side_peaks;
            any = true;
        }
        if (!any) break;
    }
    if (s.side_peaks > 0) s.side_mean = side / s.side_peaks;
    return s;
}

/// (N_cross - N_co) / (N_cross + N_co) with N the side-peak-normalized central counts.
inline double correlation_visibility(const CorrelationHistogram& co, const CorrelationHistogram& cross,
                                     const ExperimentConfig& cfg) {
    if (co.edges_a_ns != cross.edges_a_ns) throw std::invalid_argument("correlation_visibility: binning differs");
    const PeakSummary a = peak_summary(co, cfg);
    const PeakSummary b = peak_summary(cross, cfg);
    if (a.side_peaks < 4 || b.side_peaks < 4) throw std::invalid_argument("correlation_visibility: fewer than 4 side peaks");
    if (!(a.side_mean > 0.0) || !(b.side_mean > 0.0)) throw NumericalError("correlation_visibility: zero side-peak counts");
    const double n_co = a.normalized();
    const double n_cross = b.normalized();
    if (n_co + n_cross == 0.0) return 0.0;
    return (n_cross - n_co) / (n_cross + n_co);
}

// ---------------------------------------------------------------------------
// Four-folds for tomography

/// Four-fold counts of one acquisition: `ab` has XX_E behind analyzer A and
/// XX_L behind analyzer B, `ba` the reverse.
struct FourfoldCounts {
    std::uint64_t ab = 0;
    std::uint64_t ba = 0;
};

inline FourfoldCounts extract_fourfolds(const TimeTagStream& s, const std::vector<std::int64_t>& triggers,
                                        const ExperimentConfig& cfg) {
    const auto xa = detail::channel_times(s, Channel::XxA);
    const auto xb = detail::channel_times(s, Channel::XxB);
    const std::int64_t e0 = detail::ps(cfg.early_window.lo_ns);
    const std::int64_t e1 = detail::ps(cfg.early_window.hi_ns);
    const std::int64_t l0 = detail::ps(cfg.late_window.lo_ns);
    const std::int64_t l1 = detail::ps(cfg.late_window.hi_ns);
    FourfoldCounts c;
    for (const std::int64_t t : triggers) {
        const auto [ae0, ae1] = detail::span_around(xa, t, e0, e1);
        const auto [al0, al1] = detail::span_around(xa, t, l0, l1);
        const auto [be0, be1] = detail::span_around(xb, t, e0, e1);
        const auto [bl0, bl1] = detail::span_around(xb, t, l0, l1);
        c.ab += static_cast<std::uint64_t>((ae1 - ae0) * (bl1 - bl0));
        c.ba += static_cast<std::uint64_t>((al1 - al0) * (be1 - be0));
    }
    return c;
}

struct Acquisition {
    MeasurementSetting setting;  // analyzer A, analyzer B
    FourfoldCounts counts;
};

/// Ordered tomography rows from unordered acquisitions. Equal-analyzer
/// acquisitions see the projector pair from both arm assignments and carry
/// weight 2.
inline CountTable counts_from_acquisitions(const std::vector<Acquisition>& acquisitions) {
    CountTable t;
    for (const auto& acq : acquisitions) {
        const auto a = acq.setting.a;
        const auto b = acq.setting.b;
        if (a == b) {
            t.rows.push_back({{a, a, false}, acq.counts.ab + acq.counts.ba, 2.0});
        } else {
            t.rows.push_back({{a, b, false}, acq.counts.ab, 1.0});
            t.rows.push_back({{b, a, false}, acq.counts.ba, 1.0});
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Rate budget

struct RateBudget {
    double frame_rate_hz = 0.0;
    double pair_gen_prob = 0.0;
    double eta_x = 0.0;
    double eta_xx = 0.0;
    double bsm_success = 0.25;  // singlet share of the partial BSM
    double window_acceptance = 0.0;
    double c_bsm = 0.0;
    double visibility = 0.0;    // recorded only
    double bsm_singles_hz = 0.0;  // per BSM detector
    double fourfold_hz = 0.0;
};

/// R4 = R_frames (p eta_X)^2 (p eta_XX)^2 c_BSM, c_BSM = 1/4 times the
/// probability that two jittered clicks fall inside the BSM window.
inline RateBudget fourfold_rate(const ExperimentConfig& cfg, const BsmModel& m) {
    cfg.validate();
    m.validate();
    RateBudget r;
    r.frame_rate_hz = cfg.frame_rate_hz();
    r.pair_gen_prob = cfg.pair_gen_prob;
    r.eta_x = cfg.eta_x;
    r.eta_xx = cfg.eta_xx;
    r.window_acceptance = cfg.detector_jitter_sigma_ns > 0.0
                              ? std::erf(cfg.bsm_window_ns / (2.0 * cfg.detector_jitter_sigma_ns))
                              : 1.0;
    r.c_bsm = r.bsm_success * r.window_acceptance;
    r.visibility = m.visibility;
    const double px = cfg.pair_gen_prob * cfg.eta_x;
    const double pxx = cfg.pair_gen_prob * cfg.eta_xx;
    r.bsm_singles_hz = r.frame_rate_hz * px;
    r.fourfold_hz = r.frame_rate_hz * px * px * pxx * pxx * r.c_bsm;
    return r;
}

/// Expected singles per BSM detector (two X photons per frame, split evenly).
inline double expected_bsm_singles_hz(const ExperimentConfig& cfg) {
    return cfg.frame_rate_hz() * cfg.pair_gen_prob * cfg.eta_x + cfg.dark_rate_hz;
}

}  // namespace swapsim
