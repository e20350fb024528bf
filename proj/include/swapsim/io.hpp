// JSON / CSV formats for matrices, results, grids, count tables and histograms.
#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swapsim/error.hpp"
#include "swapsim/quantum_core.hpp"
#include "swapsim/source_model.hpp"
#include "swapsim/swap_engine.hpp"
#include "swapsim/timetag.hpp"
#include "swapsim/tomography.hpp"

namespace swapsim {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Density matrices: {dim, entries: row-major [[re, im], ...]}

inline Json matrix_to_json(const Matrix& m) {
    Json entries = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) entries.push_back({m(r, c).real(), m(r, c).imag()});
    }
    return Json{{"dim", m.rows()}, {"entries", std::move(entries)}};
}

inline Json to_json(const DensityOperator& rho) {
    Json j = matrix_to_json(rho.matrix());
    if (!rho.is_normalized()) j["normalization"] = "unnormalized";
    return j;
}

inline DensityOperator density_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("entries")) {
        throw std::invalid_argument("density matrix JSON: expected {dim, entries}");
    }
    const auto dim = j.at("dim").get<long long>();
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("density matrix JSON: dim out of range");
    const auto& entries = j.at("entries");
    if (!entries.is_array() || static_cast<long long>(entries.size()) != dim * dim) {
        throw std::invalid_argument("density matrix JSON: expected dim*dim entries");
    }
    Matrix m(dim, dim);
    for (long long i = 0; i < dim * dim; ++i) {
        const auto& e = entries[static_cast<std::size_t>(i)];
        if (!e.is_array() || e.size() != 2) throw std::invalid_argument("density matrix JSON: entries must be [re, im]");
        m(i / dim, i % dim) = Complex(e[0].get<double>(), e[1].get<double>());
    }
    const bool unnormalized = j.value("normalization", std::string("unit_trace")) == "unnormalized";
    return unnormalized ? DensityOperator(m, DensityOperator::Normalization::unnormalized) : DensityOperator(m);
}

// ---------------------------------------------------------------------------
// Parameter records

inline Json decay_to_json(const DecayTime& d) {
    return d.is_infinite() ? Json("inf") : Json(d.value_ns());
}

inline Json to_json(const SourceParams& p) {
    Json j{{"S_ueV", p.fss_ueV},
           {"tau_X_ns", p.tau_x_ns},
           {"tau_SS_ns", decay_to_json(p.tau_ss)},
           {"tau_HV_ns", decay_to_json(p.tau_hv)},
           {"T2_star_ns", decay_to_json(p.t2_star)},
           {"k", p.k}};
    if (p.g2_x_xx) j["g2_X_XX"] = *p.g2_x_xx;
    return j;
}

inline Json to_json(const BsmModel& m) {
    return Json{{"V", m.visibility},
                {"reflectance", m.reflectance},
                {"transmittance", m.transmittance},
                {"mode_overlap", m.mode_overlap}};
}

inline Json window_to_json(const Window& w) { return Json::array({w.lo_ns, w.hi_ns}); }

inline Json to_json(const ExperimentConfig& c) {
    return Json{{"rep_rate_MHz", c.rep_rate_mhz},
                {"pulse_pair_delay_ns", c.pulse_pair_delay_ns},
                {"bsm_window_ns", c.bsm_window_ns},
                {"record_range_ns", c.record_range_ns},
                {"g2_window_ns", window_to_json(c.g2_window)},
                {"early_window_ns", window_to_json(c.early_window)},
                {"late_window_ns", window_to_json(c.late_window)},
                {"pair_gen_prob", c.pair_gen_prob},
                {"eta_x", c.eta_x},
                {"eta_xx", c.eta_xx},
                {"detector_jitter_sigma_ns", c.detector_jitter_sigma_ns},
                {"tau_XX_ns", c.tau_xx_ns},
                {"dark_rate_hz", c.dark_rate_hz},
                {"bin_width_ns", c.bin_width_ns},
                {"slot_offset_ns", c.slot_offset_ns}};
}

// ---------------------------------------------------------------------------
// Results

inline Json to_json(const SwapResult& r) {
    return Json{{"fidelity_psi_minus", r.fidelity_psi_minus},
                {"concurrence", r.concurrence},
                {"herald_probability", r.herald_probability},
                {"rho", to_json(r.rho)}};
}

inline Json to_json(const IdealizationReport& r) {
    return Json{{"as_is", r.as_is},
                {"without_background", r.without_background},
                {"ideal_beam_splitter", r.ideal_beam_splitter},
                {"perfect_indistinguishability", r.perfect_indistinguishability},
                {"intrinsic_visibility", r.intrinsic_visibility}};
}

inline Json to_json(const Estimate& e) { return Json{{"value", e.value}, {"sigma", e.sigma}}; }

inline Json to_json(const ReconstructionResult& r) {
    return Json{{"fidelity_psi_minus", to_json(r.fidelity_psi_minus)},
                {"concurrence", to_json(r.concurrence)},
                {"log_likelihood", r.log_likelihood},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"mc_iterations", r.mc_iterations},
                {"mc_failures", r.mc_failures},
                {"rho", to_json(r.rho)}};
}

inline Json to_json(const RateBudget& b) {
    return Json{{"frame_rate_hz", b.frame_rate_hz},
                {"pair_gen_prob", b.pair_gen_prob},
                {"eta_x", b.eta_x},
                {"eta_xx", b.eta_xx},
                {"bsm_success", b.bsm_success},
                {"window_acceptance", b.window_acceptance},
                {"c_bsm", b.c_bsm},
                {"visibility", b.visibility},
                {"bsm_singles_hz", b.bsm_singles_hz},
                {"fourfold_hz", b.fourfold_hz}};
}

inline Json to_json(const ContourGrid& g) {
    return Json{{"v_axis", g.v_axis},
                {"s_axis", g.s_axis},
                {"fidelity", g.fidelity},
                {"fixed_params", to_json(g.fixed_params)},
                {"bsm", to_json(g.bsm)}};
}

/// Header row: "s_norm" followed by the V axis; first column: S tau_X / hbar.
inline void write_contour_csv(std::ostream& out, const ContourGrid& g) {
    out << "s_norm";
    for (double v : g.v_axis) out << ',' << format_double(v);
    out << '\n';
    for (std::size_t i = 0; i < g.s_axis.size(); ++i) {
        out << format_double(g.s_axis[i]);
        for (double f : g.fidelity[i]) out << ',' << format_double(f);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Count tables: setting_a,setting_b,counts,weight

inline void write_counts_csv(std::ostream& out, const CountTable& t) {
    out << "setting_a,setting_b,counts,weight\n";
    for (const auto& r : t.rows) {
        out << to_char(r.setting.a) << ',' << to_char(r.setting.b) << ',' << r.counts << ',' << format_double(r.weight) << '\n';
    }
}

inline CountTable read_counts_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("setting_a,setting_b,counts", 0) != 0) {
        throw std::invalid_argument("counts csv: missing header setting_a,setting_b,counts,weight");
    }
    CountTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        try {
            if (cells.size() < 3 || cells.size() > 4) throw std::invalid_argument("expected 3 or 4 columns");
            if (cells[0].size() != 1 || cells[1].size() != 1) throw std::invalid_argument("settings are single letters");
            if (!cells[2].empty() && cells[2][0] == '-') throw std::invalid_argument("counts must be >= 0");
            CountRow row;
            row.setting = {polarization_from_char(cells[0][0]), polarization_from_char(cells[1][0]), false};
            row.counts = std::stoull(cells[2]);
            row.weight = cells.size() == 4 ? std::stod(cells[3]) : 1.0;
            t.rows.push_back(row);
        } catch (const std::exception& e) {
            throw std::invalid_argument("counts csv line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    t.validate();
    return t;
}

// ---------------------------------------------------------------------------
// Histograms. 1-D: lo_ns,hi_ns,counts. 2-D (non-empty bins only):
// a_lo_ns,a_hi_ns,b_lo_ns,b_hi_ns,counts.

inline void write_histogram_csv(std::ostream& out, const CorrelationHistogram& h) {
    if (!h.is_2d()) {
        out << "lo_ns,hi_ns,counts\n";
        for (std::size_t i = 0; i < h.bins_a(); ++i) {
            out << format_double(h.edges_a_ns[i]) << ',' << format_double(h.edges_a_ns[i + 1]) << ',' << h.counts[i] << '\n';
        }
        return;
    }
    out << "a_lo_ns,a_hi_ns,b_lo_ns,b_hi_ns,counts\n";
    for (std::size_t i = 0; i < h.bins_a(); ++i) {
        for (std::size_t j = 0; j < h.bins_b(); ++j) {
            const auto c = h.at(i, j);
            if (c == 0) continue;
            out << format_double(h.edges_a_ns[i]) << ',' << format_double(h.edges_a_ns[i + 1]) << ','
                << format_double(h.edges_b_ns[j]) << ',' << format_double(h.edges_b_ns[j + 1]) << ',' << c << '\n';
        }
    }
}

}  // namespace swapsim
