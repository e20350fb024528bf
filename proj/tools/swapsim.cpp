// swapsim: configuration-driven front end for the swapping simulator.
//
// Exit codes: 0 success, 1 other failure, 2 configuration/usage error,
// 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "swapsim/swapsim.hpp"

namespace fs = std::filesystem;
using namespace swapsim;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string format = "json";
};

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SWAPSIM_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v < 1) throw std::invalid_argument("");
            n = std::min<unsigned>(n, static_cast<unsigned>(v));
        } catch (const std::exception&) {
            throw ConfigError("SWAPSIM_THREADS", "expected a positive integer");
        }
    }
    return n;
}

class Output {
public:
    explicit Output(const Options& o) : dir_(o.out), json_(o.format == "json") { fs::create_directories(dir_); }

    bool json() const { return json_; }

    std::ofstream open(const std::string& name, bool binary = false) const {
        std::ofstream f(dir_ / name, binary ? std::ios::binary : std::ios::out);
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        return f;
    }

    void write_json(const std::string& name, const Json& j) const { open(name) << j.dump(2) << '\n'; }

    /// Flat key,value CSV of the scalar members of a JSON object.
    void write_summary_csv(const std::string& name, const Json& j) const {
        auto f = open(name);
        f << "key,value\n";
        flatten(f, j, "");
    }

private:
    static void flatten(std::ostream& f, const Json& j, const std::string& prefix) {
        for (const auto& [k, v] : j.items()) {
            const std::string key = prefix.empty() ? k : prefix + "." + k;
            if (v.is_object()) {
                flatten(f, v, key);
            } else if (!v.is_array()) {
                f << key << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
            }
        }
    }

    fs::path dir_;
    bool json_;
};

void write_matrix_csv(std::ostream& f, const Matrix& m) {
    f << "row,col,re,im\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            f << r << ',' << c << ',' << format_double(m(r, c).real()) << ',' << format_double(m(r, c).imag()) << '\n';
        }
    }
}

std::uint64_t require_seed(const Options& o, const RunConfig& c) {
    if (o.seed) return *o.seed;
    if (c.seed) return *c.seed;
    throw ConfigError("seed", "this command is stochastic; pass --seed or set seed in the config");
}

int cmd_swap(const RunConfig& c, const Output& out) {
    const SwapResult r = swapped_state(c.source, c.source_late, c.bsm);
    if (!is_physical(r.rho, 1e-9)) throw NumericalError("swapped state is not physical");
    const IdealizationReport rep = idealization_report(c.source, c.bsm);
    Json j{{"analytic_fidelity", swap_fidelity_analytic(c.source, c.bsm)},
           {"source_fidelity", source_fidelity(c.source)},
           {"swap", to_json(r)},
           {"idealization", to_json(rep)}};
    if (out.json()) {
        out.write_json("swap.json", j);
    } else {
        j["swap"].erase("rho");
        out.write_summary_csv("swap.csv", j);
        auto f = out.open("swap_rho.csv");
        write_matrix_csv(f, r.rho.matrix());
    }
    std::cout << "fidelity_psi_minus " << format_double(r.fidelity_psi_minus) << "\nconcurrence "
              << format_double(r.concurrence) << "\nherald_probability " << format_double(r.herald_probability) << '\n';
    return kOk;
}

int cmd_contour(const RunConfig& c, const Output& out) {
    const ContourGrid g = fidelity_contour(c.contour.v_axis, c.contour.s_axis, c.source, c.bsm, worker_count());
    if (out.json()) {
        out.write_json("contour.json", to_json(g));
    } else {
        auto f = out.open("contour.csv");
        write_contour_csv(f, g);
    }
    Json pts = Json::array();
    for (const auto& op : c.contour.points) {
        const PlacedPoint p = place_point(op, c.source, c.bsm);
        pts.push_back({{"label", op.label},
                       {"S_ueV", op.fss_ueV},
                       {"V", op.visibility},
                       {"tau_X_ns", op.tau_x_ns},
                       {"s_norm", p.normalized_splitting},
                       {"fidelity", p.fidelity}});
        std::cout << op.label << " s_norm " << format_double(p.normalized_splitting) << " fidelity "
                  << format_double(p.fidelity) << '\n';
    }
    out.write_json("contour_points.json", Json{{"points", pts}});
    return kOk;
}

DensityOperator tomo_state(const RunConfig& c) {
    const auto& t = c.tomo;
    if (t.state == "swap") return swapped_state(c.source, c.source_late, c.bsm).rho;
    if (t.state == "psi_minus") return bell_state(BellKind::PsiMinus);
    if (t.state == "phi_plus") return bell_state(BellKind::PhiPlus);
    if (t.state == "mixed") return maximally_mixed(2);
    if (t.state == "werner") {
        try {
            return werner_state(t.werner_p);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("tomo.werner_p", e.what());
        }
    }
    std::ifstream f(c.resolve(t.matrix_file));
    if (!f) throw ConfigError("tomo.matrix_file", "cannot open " + c.resolve(t.matrix_file).string());
    try {
        return density_from_json(Json::parse(f));
    } catch (const std::exception& e) {
        throw ConfigError("tomo.matrix_file", e.what());
    }
}

MleOptions mle_options(const RunConfig& c, std::uint64_t seed) {
    MleOptions o;
    o.likelihood = c.tomo.likelihood;
    o.restarts = c.tomo.restarts;
    o.seed = derive_seed(seed, "mle");
    return o;
}

void write_reconstruction(const Output& out, const std::string& stem, const ReconstructionResult& r) {
    if (out.json()) {
        out.write_json(stem + ".json", to_json(r));
    } else {
        Json j = to_json(r);
        j.erase("rho");
        out.write_summary_csv(stem + ".csv", j);
        auto f = out.open(stem + "_rho.csv");
        write_matrix_csv(f, r.rho.matrix());
    }
    std::cout << "fidelity_psi_minus " << format_double(r.fidelity_psi_minus.value) << " +- "
              << format_double(r.fidelity_psi_minus.sigma) << "\nconcurrence " << format_double(r.concurrence.value)
              << " +- " << format_double(r.concurrence.sigma) << '\n';
    if (!r.converged) std::cout << "warning: MLE hit the iteration cap; best-so-far reported\n";
}

int cmd_tomo(const Options& o, const RunConfig& c, const Output& out) {
    const std::uint64_t seed = require_seed(o, c);
    CountTable counts;
    if (!c.tomo.counts_file.empty()) {
        std::ifstream f(c.resolve(c.tomo.counts_file));
        if (!f) throw ConfigError("tomo.counts_file", "cannot open " + c.resolve(c.tomo.counts_file).string());
        try {
            counts = read_counts_csv(f);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("tomo.counts_file", e.what());
        }
    } else {
        counts = simulate_counts(tomo_state(c), enumerate_settings(), c.tomo.counts_per_setting, c.tomo.dark_counts,
                                 derive_seed(seed, "tomo_counts"));
    }
    {
        auto f = out.open("counts.csv");
        write_counts_csv(f, counts);
    }
    const ReconstructionResult r =
        monte_carlo_errors(counts, c.tomo.mc_iterations, derive_seed(seed, "tomo_mc"), mle_options(c, seed), worker_count());
    write_reconstruction(out, "reconstruction", r);
    return kOk;
}

Polarization orthogonal(Polarization p) {
    switch (p) {
        case Polarization::H: return Polarization::V;
        case Polarization::V: return Polarization::H;
        case Polarization::D: return Polarization::A;
        case Polarization::A: return Polarization::D;
        case Polarization::R: return Polarization::L;
        case Polarization::L: return Polarization::R;
    }
    return p;
}

int cmd_tags(const Options& o, const RunConfig& c, const Output& out) {
    const auto& t = c.tags;
    const bool binary = t.stream_format == "binary";
    std::vector<std::pair<MeasurementSetting, TimeTagStream>> streams;
    if (!t.input.empty()) {
        const fs::path in = c.resolve(t.input);
        std::ifstream f(in, binary ? std::ios::binary : std::ios::in);
        if (!f) throw ConfigError("tags.input", "cannot open " + in.string());
        TimeTagStream s;
        try {
            s = binary ? read_stream(f, c.experiment) : read_stream_csv(f, c.experiment);
        } catch (const std::runtime_error& e) {
            throw ConfigError(in.string(), e.what());
        }
        const MeasurementSetting setting{s.analyzer_a.value_or(c.experiment.analyzer_a),
                                         s.analyzer_b.value_or(c.experiment.analyzer_b), true};
        streams.emplace_back(setting, std::move(s));
    } else {
        const std::uint64_t seed = require_seed(o, c);
        for (std::size_t i = 0; i < t.settings.size(); ++i) {
            ExperimentConfig e = c.experiment;
            e.analyzer_a = t.settings[i].a;
            e.analyzer_b = t.settings[i].b;
            streams.emplace_back(t.settings[i], synthesize_timetags(c.source, c.source_late, c.bsm, e, t.duration_s,
                                                                    derive_seed(seed, "tags_stream", i)));
        }
    }

    Json summary;
    Json per = Json::object();
    std::vector<Acquisition> acquisitions;
    std::map<std::string, CorrelationHistogram> g2s;
    for (const auto& [setting, s] : streams) {
        const std::string tag = to_string(setting);
        {
            auto f = out.open("stream_" + tag + (binary ? ".qtt" : ".csv"), binary);
            if (binary) {
                write_stream(f, s);
            } else {
                write_stream_csv(f, s);
            }
        }
        const auto triggers = find_bsm_coincidences(s, c.experiment);
        const CorrelationHistogram g3 = build_g3(s, triggers, c.experiment);
        CorrelationHistogram g2 = reduce_g2(g3, c.experiment);
        const PeakSummary peaks = peak_summary(g2, c.experiment);
        g2.side_peak_mean = peaks.side_mean;
        {
            auto f = out.open("g3_" + tag + ".csv");
            write_histogram_csv(f, g3);
        }
        {
            auto f = out.open("g2_" + tag + ".csv");
            write_histogram_csv(f, g2);
        }
        const FourfoldCounts ff = extract_fourfolds(s, triggers, c.experiment);
        acquisitions.push_back({setting, ff});
        per[tag] = {{"events", s.events.size()},
                    {"duration_s", s.duration_s},
                    {"triggers", triggers.size()},
                    {"g3_total", g3.total()},
                    {"g2_central", peaks.central},
                    {"g2_side_mean", peaks.side_mean},
                    {"g2_side_peaks", peaks.side_peaks},
                    {"g2_normalized_central", peaks.side_mean > 0.0 ? Json(peaks.normalized()) : Json(nullptr)},
                    {"fourfolds_ab", ff.ab},
                    {"fourfolds_ba", ff.ba}};
        g2s.emplace(tag, std::move(g2));
    }
    summary["settings"] = per;

    Json vis = Json::object();
    for (const auto& [tag, g2] : g2s) {
        if (tag[0] != tag[1]) continue;
        const std::string cross{tag[0], to_char(orthogonal(polarization_from_char(tag[0])))};
        const auto it = g2s.find(cross);
        if (it == g2s.end()) continue;
        try {
            vis[tag + "/" + cross] = correlation_visibility(g2, it->second, c.experiment);
        } catch (const std::exception&) {
            vis[tag + "/" + cross] = nullptr;  // not enough side-peak statistics
        }
    }
    summary["visibility"] = vis;
    summary["rate"] = to_json(fourfold_rate(c.experiment, c.bsm));

    if (t.tomography) {
        const CountTable counts = counts_from_acquisitions(acquisitions);
        auto f = out.open("counts.csv");
        write_counts_csv(f, counts);
        f.close();
        const std::uint64_t seed = require_seed(o, c);
        const ReconstructionResult r =
            monte_carlo_errors(counts, t.mc_iterations, derive_seed(seed, "tags_mc"), mle_options(c, seed), worker_count());
        write_reconstruction(out, "reconstruction", r);
        summary["model_fidelity"] = swapped_state(c.source, c.source_late, c.bsm).fidelity_psi_minus;
    }
    if (out.json()) {
        out.write_json("tags_summary.json", summary);
    } else {
        out.write_summary_csv("tags_summary.csv", summary);
    }
    for (const auto& [k, v] : vis.items()) std::cout << "visibility " << k << ' ' << v.dump() << '\n';
    return kOk;
}

int cmd_rate(const RunConfig& c, const Output& out) {
    const RateBudget b = fourfold_rate(c.experiment, c.bsm);
    if (out.json()) {
        out.write_json("rate.json", to_json(b));
    } else {
        out.write_summary_csv("rate.csv", to_json(b));
    }
    std::cout << "bsm_singles_hz " << format_double(b.bsm_singles_hz) << "\nfourfold_hz " << format_double(b.fourfold_hz) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement swapping simulator"};
    app.fallthrough();
    app.require_subcommand(1, 1);
    Options o;
    app.add_option("--config", o.config, "TOML or JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "root seed for stochastic commands");
    app.add_option("--out", o.out, "output directory")->capture_default_str();
    app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    auto* swap = app.add_subcommand("swap", "swapped state, fidelity and idealization report");
    auto* contour = app.add_subcommand("contour", "fidelity map over visibility and S tau_X / hbar");
    auto* tomo = app.add_subcommand("tomo", "simulated tomography with MLE and Monte Carlo errors");
    auto* tags = app.add_subcommand("tags", "time-tag synthesis or ingest, histograms, visibility, rate");
    auto* rate = app.add_subcommand("rate", "four-fold rate budget");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        RunConfig cfg = o.config.empty() ? load_config_defaults() : load_config(o.config);
        if (o.seed) cfg.seed = o.seed;
        const Output out(o);
        out.write_json("effective_config.json", effective_config(cfg));
        if (swap->parsed()) return cmd_swap(cfg, out);
        if (contour->parsed()) return cmd_contour(cfg, out);
        if (tomo->parsed()) return cmd_tomo(o, cfg, out);
        if (tags->parsed()) return cmd_tags(o, cfg, out);
        if (rate->parsed()) return cmd_rate(cfg, out);
        return kOther;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
}
