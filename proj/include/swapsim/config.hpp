// Run configuration: TOML or JSON files mapped onto the parameter records.
// Both formats go through one JSON tree; TOML source lines are kept so field
// errors can point at the offending line.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "swapsim/error.hpp"
#include "swapsim/io.hpp"
#include "swapsim/source_model.hpp"
#include "swapsim/swap_engine.hpp"
#include "swapsim/timetag.hpp"
#include "swapsim/tomography.hpp"

namespace swapsim {

struct ContourSpec {
    std::vector<double> v_axis;
    std::vector<double> s_axis;  // S * tau_X / hbar
    std::vector<OperatingPoint> points;
};

struct TomoSpec {
    std::string state = "swap";  // swap | psi_minus | phi_plus | mixed | werner | file
    double werner_p = 0.8;
    std::string matrix_file;     // density matrix JSON, for state = "file"
    std::string counts_file;     // observed counts CSV; skips simulation when set
    double counts_per_setting = 30.0;
    double dark_counts = 0.0;
    int mc_iterations = 2000;
    int restarts = 10;
    Likelihood likelihood = Likelihood::Poisson;
};

struct TagsSpec {
    double duration_s = 0.0;
    std::string input;  // stream file to analyze instead of synthesizing
    std::string stream_format = "binary";  // binary | csv
    std::vector<MeasurementSetting> settings{{Polarization::H, Polarization::V, true},
                                             {Polarization::H, Polarization::H, true}};
    bool tomography = false;
    int mc_iterations = 200;
};

struct RunConfig {
    SourceParams source;
    SourceParams source_late;
    BsmModel bsm;
    ExperimentConfig experiment;
    ContourSpec contour;
    TomoSpec tomo;
    TagsSpec tags;
    std::optional<std::uint64_t> seed;
    std::filesystem::path base_dir;  // relative file references resolve here

    std::filesystem::path resolve(const std::string& file) const {
        const std::filesystem::path p(file);
        return p.is_absolute() ? p : base_dir / p;
    }
};

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("linspace: need at least one point");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    if (n > 1) v.back() = hi;
    return v;
}

inline ContourSpec default_contour() {
    ContourSpec c;
    c.v_axis = linspace(0.0, 1.0, 51);
    c.s_axis = linspace(0.0, 3.0, 61);
    c.points = {{"QD1", 0.6, 0.63, 0.27}, {"QD2", 5.9, 0.63, 0.27}, {"QD3", 0.6, 0.51, 0.27}};
    return c;
}

/// Configuration used when no file is given: ideal source, ideal BSM.
inline RunConfig load_config_defaults() {
    RunConfig c;
    c.contour = default_contour();
    c.source_late = c.source;
    c.base_dir = ".";
    return c;
}

namespace detail {

struct ConfigDocument {
    Json root;
    std::map<std::string, int> lines;  // "section.key" -> source line (TOML only)
    std::string file;
};

inline Json toml_to_json(const toml::node& node, const std::string& path, std::map<std::string, int>& lines) {
    if (node.source().begin.line > 0) lines[path] = static_cast<int>(node.source().begin.line);
    if (const auto* t = node.as_table()) {
        Json j = Json::object();
        for (const auto& [k, v] : *t) {
            const std::string key(k.str());
            j[key] = toml_to_json(v, path.empty() ? key : path + "." + key, lines);
        }
        return j;
    }
    if (const auto* a = node.as_array()) {
        Json j = Json::array();
        for (std::size_t i = 0; i < a->size(); ++i) {
            j.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]", lines));
        }
        return j;
    }
    if (const auto* v = node.as_integer()) return Json(v->get());
    if (const auto* v = node.as_floating_point()) {
        const double d = v->get();
        if (std::isinf(d)) return Json(d > 0 ? "inf" : "-inf");
        return Json(d);
    }
    if (const auto* v = node.as_boolean()) return Json(v->get());
    if (const auto* v = node.as_string()) return Json(v->get());
    throw ConfigError(path, "unsupported TOML value type (dates are not accepted)");
}

inline ConfigDocument load_document(const std::filesystem::path& file) {
    ConfigDocument doc;
    doc.file = file.string();
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(doc.file, "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (file.extension() == ".json") {
        try {
            doc.root = Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
            const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
            throw ConfigError(doc.file + ":" + std::to_string(line), "JSON syntax error");
        }
    } else {
        try {
            const toml::table table = toml::parse(text, doc.file);
            doc.root = toml_to_json(table, "", doc.lines);
        } catch (const toml::parse_error& e) {
            throw ConfigError(doc.file + ":" + std::to_string(e.source().begin.line), std::string(e.description()));
        }
    }
    if (!doc.root.is_object()) throw ConfigError(doc.file, "top level must be a table/object");
    return doc;
}

/// Typed access to one section; remembers consumed keys so leftovers (typos)
/// can be rejected.
class Section {
public:
    Section(const ConfigDocument& doc, std::string name) : doc_(doc), name_(std::move(name)) {
        if (name_.empty()) {
            node_ = &doc_.root;
        } else if (doc_.root.contains(name_)) {
            node_ = &doc_.root.at(name_);
            if (!node_->is_object()) throw error(name_, "must be a table");
        }
    }

    bool present() const { return node_ != nullptr; }
    bool has(const std::string& key) const { return node_ && node_->contains(key); }

    ConfigError error(const std::string& path, const std::string& what) const {
        std::string where = doc_.file;
        if (const auto it = doc_.lines.find(path); it != doc_.lines.end()) where += ":" + std::to_string(it->second);
        return ConfigError(where + ": " + path, what);
    }

    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const Json* get(const std::string& key) {
        used_.insert(key);
        if (!node_ || !node_->contains(key)) return nullptr;
        return &node_->at(key);
    }

    double number(const std::string& key, double fallback) {
        const Json* v = get(key);
        if (!v) return fallback;
        return as_number(*v, key);
    }

    double as_number(const Json& v, const std::string& key) const {
        if (v.is_number()) return v.get<double>();
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "+inf")) {
            return std::numeric_limits<double>::infinity();
        }
        throw error(path(key), "expected a number");
    }

    DecayTime decay(const std::string& key, DecayTime fallback) {
        const Json* v = get(key);
        if (!v) return fallback;
        try {
            return DecayTime::ns(as_number(*v, key));
        } catch (const std::invalid_argument& e) {
            throw error(path(key), e.what());
        }
    }

    int integer(const std::string& key, int fallback) {
        const Json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) throw error(path(key), "expected an integer");
        return v->get<int>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const Json* v = get(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw error(path(key), "expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const Json* v = get(key);
        if (!v) return fallback;
        if (!v->is_string()) throw error(path(key), "expected a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const Json* v = get(key);
        if (!v) return {};
        if (!v->is_array()) throw error(path(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : *v) out.push_back(as_number(x, key));
        return out;
    }

    std::optional<Window> window(const std::string& key) {
        const auto v = numbers(key);
        if (v.empty()) return std::nullopt;
        if (v.size() != 2) throw error(path(key), "expected [lo, hi]");
        return Window{v[0], v[1]};
    }

    void reject_unknown() const {
        if (!node_) return;
        for (const auto& [k, _] : node_->items()) {
            if (!used_.count(k)) throw error(path(k), "unknown key");
        }
    }

    const std::string& name() const { return name_; }

private:
    const ConfigDocument& doc_;
    std::string name_;
    const Json* node_ = nullptr;
    std::set<std::string> used_;
};

inline Polarization polarization_field(Section& s, const std::string& key, Polarization fallback) {
    const std::string v = s.string(key, std::string(1, to_char(fallback)));
    if (v.size() != 1) throw s.error(s.path(key), "expected one of H, V, D, A, R, L");
    try {
        return polarization_from_char(v[0]);
    } catch (const std::exception&) {
        throw s.error(s.path(key), "expected one of H, V, D, A, R, L");
    }
}

inline SourceParams read_source(Section& s, const SourceParams& base) {
    SourceParams p = base;
    p.fss_ueV = s.number("S_ueV", p.fss_ueV);
    p.tau_x_ns = s.number("tau_X_ns", p.tau_x_ns);
    p.tau_ss = s.decay("tau_SS_ns", p.tau_ss);
    p.tau_hv = s.decay("tau_HV_ns", p.tau_hv);
    p.t2_star = s.decay("T2_star_ns", p.t2_star);
    p.k = s.number("k", p.k);
    if (s.has("g2_X_XX")) p.g2_x_xx = s.number("g2_X_XX", 0.0);
    s.reject_unknown();
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw s.error(s.name(), e.what());
    }
    return p;
}

inline std::vector<MeasurementSetting> read_settings(Section& s, const std::string& key, std::vector<MeasurementSetting> fallback) {
    const Json* v = s.get(key);
    if (!v) return fallback;
    if (v->is_string() && v->get<std::string>() == "all") return enumerate_settings();
    if (!v->is_array()) throw s.error(s.path(key), "expected \"all\" or a list like [\"HV\", \"HH\"]");
    std::vector<MeasurementSetting> out;
    for (const auto& x : *v) {
        if (!x.is_string() || x.get<std::string>().size() != 2) throw s.error(s.path(key), "settings are two-letter strings");
        const std::string str = x.get<std::string>();
        try {
            out.push_back({polarization_from_char(str[0]), polarization_from_char(str[1]), true});
        } catch (const std::exception&) {
            throw s.error(s.path(key), "unknown polarization in \"" + str + "\"");
        }
    }
    return out;
}

}  // namespace detail

inline RunConfig load_config(const std::filesystem::path& file) {
    const detail::ConfigDocument doc = detail::load_document(file);
    RunConfig cfg;
    cfg.base_dir = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");

    detail::Section top(doc, "");
    if (const Json* seed = top.get("seed")) {
        if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0)) {
            throw top.error("seed", "expected a non-negative integer");
        }
        cfg.seed = seed->get<std::uint64_t>();
    }
    for (const char* known : {"source", "source_late", "bsm", "experiment", "contour", "tomo", "tags"}) top.get(known);
    top.reject_unknown();

    detail::Section src(doc, "source");
    cfg.source = detail::read_source(src, SourceParams{});
    detail::Section late(doc, "source_late");
    cfg.source_late = late.present() ? detail::read_source(late, cfg.source) : cfg.source;

    detail::Section bsm(doc, "bsm");
    cfg.bsm.visibility = bsm.number("V", cfg.bsm.visibility);
    cfg.bsm.reflectance = bsm.number("reflectance", cfg.bsm.reflectance);
    cfg.bsm.transmittance = bsm.number("transmittance", cfg.bsm.transmittance);
    cfg.bsm.mode_overlap = bsm.number("mode_overlap", cfg.bsm.mode_overlap);
    bsm.reject_unknown();
    try {
        cfg.bsm.validate();
    } catch (const std::invalid_argument& e) {
        throw bsm.error("bsm", e.what());
    }

    detail::Section ex(doc, "experiment");
    auto& e = cfg.experiment;
    e.rep_rate_mhz = ex.number("rep_rate_MHz", e.rep_rate_mhz);
    e.pulse_pair_delay_ns = ex.number("pulse_pair_delay_ns", e.pulse_pair_delay_ns);
    e.bsm_window_ns = ex.number("bsm_window_ns", e.bsm_window_ns);
    e.record_range_ns = ex.number("record_range_ns", e.record_range_ns);
    if (auto w = ex.window("g2_window_ns")) e.g2_window = *w;
    if (auto w = ex.window("early_window_ns")) e.early_window = *w;
    if (auto w = ex.window("late_window_ns")) e.late_window = *w;
    e.pair_gen_prob = ex.number("pair_gen_prob", e.pair_gen_prob);
    e.eta_x = ex.number("eta_x", e.eta_x);
    e.eta_xx = ex.number("eta_xx", e.eta_xx);
    e.detector_jitter_sigma_ns = ex.number("detector_jitter_sigma_ns", e.detector_jitter_sigma_ns);
    e.tau_xx_ns = ex.number("tau_XX_ns", e.tau_xx_ns);
    e.dark_rate_hz = ex.number("dark_rate_hz", e.dark_rate_hz);
    e.bin_width_ns = ex.number("bin_width_ns", e.bin_width_ns);
    e.slot_offset_ns = ex.number("slot_offset_ns", e.slot_offset_ns);
    ex.reject_unknown();
    try {
        e.validate();
    } catch (const std::invalid_argument& err) {
        throw ex.error("experiment", err.what());
    }

    detail::Section co(doc, "contour");
    cfg.contour = default_contour();
    if (auto v = co.numbers("v_axis"); !v.empty()) cfg.contour.v_axis = v;
    if (auto s = co.numbers("s_axis"); !s.empty()) cfg.contour.s_axis = s;
    if (co.has("v_points") || co.has("v_min") || co.has("v_max")) {
        cfg.contour.v_axis = linspace(co.number("v_min", 0.0), co.number("v_max", 1.0), co.integer("v_points", 51));
    }
    if (co.has("s_points") || co.has("s_min") || co.has("s_max")) {
        cfg.contour.s_axis = linspace(co.number("s_min", 0.0), co.number("s_max", 3.0), co.integer("s_points", 61));
    }
    if (const Json* pts = co.get("points")) {
        if (!pts->is_array()) throw co.error("contour.points", "expected an array of tables");
        cfg.contour.points.clear();
        for (std::size_t i = 0; i < pts->size(); ++i) {
            const Json& pt = (*pts)[i];
            const std::string where = "contour.points[" + std::to_string(i) + "]";
            if (!pt.is_object()) throw co.error(where, "expected a table");
            OperatingPoint op;
            try {
                op.label = pt.at("label").get<std::string>();
                op.fss_ueV = pt.at("S_ueV").get<double>();
                op.visibility = pt.at("V").get<double>();
                op.tau_x_ns = pt.value("tau_X_ns", cfg.source.tau_x_ns);
            } catch (const nlohmann::json::exception&) {
                throw co.error(where, "needs label, S_ueV, V (and optionally tau_X_ns)");
            }
            cfg.contour.points.push_back(op);
        }
    }
    co.reject_unknown();

    detail::Section tm(doc, "tomo");
    auto& t = cfg.tomo;
    t.state = tm.string("state", t.state);
    if (t.state != "swap" && t.state != "psi_minus" && t.state != "phi_plus" && t.state != "mixed" && t.state != "werner" &&
        t.state != "file") {
        throw tm.error("tomo.state", "expected swap, psi_minus, phi_plus, mixed, werner or file");
    }
    t.werner_p = tm.number("werner_p", t.werner_p);
    t.matrix_file = tm.string("matrix_file", t.matrix_file);
    t.counts_file = tm.string("counts_file", t.counts_file);
    t.counts_per_setting = tm.number("counts_per_setting", t.counts_per_setting);
    t.dark_counts = tm.number("dark_counts", t.dark_counts);
    t.mc_iterations = tm.integer("mc_iterations", t.mc_iterations);
    t.restarts = tm.integer("restarts", t.restarts);
    const std::string lk = tm.string("likelihood", "poisson");
    if (lk != "poisson" && lk != "gaussian") throw tm.error("tomo.likelihood", "expected poisson or gaussian");
    t.likelihood = lk == "poisson" ? Likelihood::Poisson : Likelihood::Gaussian;
    tm.reject_unknown();
    if (t.state == "file" && t.matrix_file.empty()) throw tm.error("tomo.matrix_file", "required when state = \"file\"");
    if (!(t.counts_per_setting > 0.0)) throw tm.error("tomo.counts_per_setting", "must be positive");
    if (t.mc_iterations < 2) throw tm.error("tomo.mc_iterations", "must be at least 2");
    if (t.restarts < 1) throw tm.error("tomo.restarts", "must be at least 1");

    detail::Section tg(doc, "tags");
    auto& g = cfg.tags;
    g.duration_s = tg.number("duration_s", g.duration_s);
    g.input = tg.string("input", g.input);
    g.stream_format = tg.string("stream_format", g.stream_format);
    g.settings = detail::read_settings(tg, "settings", g.settings);
    g.tomography = tg.boolean("tomography", g.tomography);
    g.mc_iterations = tg.integer("mc_iterations", g.mc_iterations);
    tg.reject_unknown();
    if (!(g.duration_s >= 0.0)) throw tg.error("tags.duration_s", "must be >= 0");
    if (g.stream_format != "binary" && g.stream_format != "csv") throw tg.error("tags.stream_format", "expected binary or csv");
    if (g.mc_iterations < 2) throw tg.error("tags.mc_iterations", "must be at least 2");
    return cfg;
}

namespace detail {

inline Json settings_to_json(const std::vector<MeasurementSetting>& settings) {
    Json j = Json::array();
    for (const auto& s : settings) j.push_back(to_string(s));
    return j;
}

}  // namespace detail

/// Fully resolved configuration; loading it back reproduces the run.
inline Json effective_config(const RunConfig& c) {
    Json j;
    if (c.seed) j["seed"] = *c.seed;
    j["source"] = to_json(c.source);
    j["source_late"] = to_json(c.source_late);
    j["bsm"] = to_json(c.bsm);
    j["experiment"] = to_json(c.experiment);
    Json pts = Json::array();
    for (const auto& p : c.contour.points) {
        pts.push_back({{"label", p.label}, {"S_ueV", p.fss_ueV}, {"V", p.visibility}, {"tau_X_ns", p.tau_x_ns}});
    }
    j["contour"] = {{"v_axis", c.contour.v_axis}, {"s_axis", c.contour.s_axis}, {"points", std::move(pts)}};
    auto abs_path = [&](const std::string& f) {
        return f.empty() ? f : std::filesystem::absolute(c.resolve(f)).lexically_normal().string();
    };
    j["tomo"] = {{"state", c.tomo.state},
                 {"werner_p", c.tomo.werner_p},
                 {"matrix_file", abs_path(c.tomo.matrix_file)},
                 {"counts_file", abs_path(c.tomo.counts_file)},
                 {"counts_per_setting", c.tomo.counts_per_setting},
                 {"dark_counts", c.tomo.dark_counts},
                 {"mc_iterations", c.tomo.mc_iterations},
                 {"restarts", c.tomo.restarts},
                 {"likelihood", c.tomo.likelihood == Likelihood::Poisson ? "poisson" : "gaussian"}};
    j["tags"] = {{"duration_s", c.tags.duration_s},
                 {"input", abs_path(c.tags.input)},
                 {"stream_format", c.tags.stream_format},
                 {"settings", detail::settings_to_json(c.tags.settings)},
                 {"tomography", c.tags.tomography},
                 {"mc_iterations", c.tags.mc_iterations}};
    return j;
}

}  // namespace swapsim
