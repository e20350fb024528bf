#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace swapsim;
namespace st = swapsim::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SWAPSIM_CONFIG_DIR;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("swapsim_io_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir_;
};

std::string config_error_message(const fs::path& p) {
    try {
        load_config(p);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        EXPECT_EQ(std::stod(format_double(x)), x);
    }
}

TEST(MatrixJson, RoundTripAndValidation) {
    std::mt19937_64 rng(2);
    const DensityOperator rho(st::random_density(rng, 4));
    const Json j = to_json(rho);
    EXPECT_EQ(j.at("dim"), 4);
    EXPECT_EQ(j.at("entries").size(), 16u);
    const DensityOperator back = density_from_json(Json::parse(j.dump()));
    EXPECT_EQ(back.matrix(), rho.matrix());

    Json bad = j;
    bad["entries"][1] = Json::array({0.3, 0.0});
    EXPECT_THROW(density_from_json(bad), std::invalid_argument);
    Json short_entries = j;
    short_entries["entries"].erase(0);
    EXPECT_THROW(density_from_json(short_entries), std::invalid_argument);
    EXPECT_THROW(density_from_json(Json{{"dim", 4}}), std::invalid_argument);
}

TEST(MatrixJson, UnnormalizedFlagSurvives) {
    const auto u = DensityOperator::unnormalized(Matrix(0.5 * maximally_mixed(2).matrix()));
    const Json j = to_json(u);
    EXPECT_EQ(j.at("normalization"), "unnormalized");
    EXPECT_FALSE(density_from_json(j).is_normalized());
}

TEST(CountsCsv, RoundTripAndErrors) {
    const auto t = simulate_counts(werner_state(0.8), enumerate_settings(), 30.0, 0.0, 4);
    std::stringstream buf;
    write_counts_csv(buf, t);
    const auto back = read_counts_csv(buf);
    ASSERT_EQ(back.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].setting, t.rows[i].setting);
        EXPECT_EQ(back.rows[i].counts, t.rows[i].counts);
        EXPECT_EQ(back.rows[i].weight, t.rows[i].weight);
    }
    std::stringstream negative("setting_a,setting_b,counts,weight\nH,V,-3,1\n");
    EXPECT_THROW(read_counts_csv(negative), std::invalid_argument);
    std::stringstream bad_letter("setting_a,setting_b,counts,weight\nH,X,3,1\n");
    EXPECT_THROW(read_counts_csv(bad_letter), std::invalid_argument);
    std::stringstream no_header("H,V,3,1\n");
    EXPECT_THROW(read_counts_csv(no_header), std::invalid_argument);
}

TEST(ContourCsv, HeaderAndShape) {
    const auto g = fidelity_contour({0.0, 0.5, 1.0}, {0.0, 1.0}, SourceParams::ideal(), BsmModel::ideal());
    std::stringstream buf;
    write_contour_csv(buf, g);
    std::string line;
    std::getline(buf, line);
    EXPECT_EQ(line, "s_norm,0,0.5,1");
    std::getline(buf, line);
    EXPECT_EQ(line, "0,0.25,0.5,1");
}

TEST(HistogramCsv, OneAndTwoDimensional) {
    ExperimentConfig c;
    c.record_range_ns = 3.0;
    c.g2_window = {-1.0, 2.8};
    auto s = TimeTagStream{};
    s.events = {{Channel::XxA, 1000}, {Channel::XxB, 2000}};
    const auto g3 = build_g3(s, {500}, c);
    std::stringstream two;
    write_histogram_csv(two, g3);
    std::string header;
    std::getline(two, header);
    EXPECT_EQ(header, "a_lo_ns,a_hi_ns,b_lo_ns,b_hi_ns,counts");
    std::string row;
    std::getline(two, row);
    EXPECT_EQ(row, "0.5,0.6,1.5,1.6,1");
    std::stringstream one;
    write_histogram_csv(one, reduce_g2(g3, c));
    std::getline(one, header);
    EXPECT_EQ(header, "lo_ns,hi_ns,counts");
}

TEST(ShippedConfigs, LoadWithExpectedValues) {
    const RunConfig c = load_config(kConfigs / "qd1.toml");
    EXPECT_TRUE(c.seed.has_value());
    EXPECT_DOUBLE_EQ(c.source.fss_ueV, 0.6);
    EXPECT_DOUBLE_EQ(c.source.tau_x_ns, 0.27);
    EXPECT_DOUBLE_EQ(c.bsm.visibility, 0.63);
    EXPECT_DOUBLE_EQ(c.bsm.reflectance, 0.48);
    EXPECT_DOUBLE_EQ(c.bsm.mode_overlap, 0.96);
    EXPECT_DOUBLE_EQ(c.experiment.rep_rate_mhz, 160.0);
    for (const char* name : {"qd2.toml", "qd3.toml", "ideal.toml", "v0.toml"}) {
        EXPECT_NO_THROW(load_config(kConfigs / name)) << name;
    }
    EXPECT_DOUBLE_EQ(load_config(kConfigs / "qd2.toml").source.fss_ueV, 5.9);
    EXPECT_DOUBLE_EQ(load_config(kConfigs / "qd3.toml").bsm.visibility, 0.51);
}

TEST_F(TempDir, InfinityAndJsonEquivalence) {
    const auto toml = write("a.toml", "seed = 3\n[source]\nS_ueV = 1.0\ntau_SS_ns = \"inf\"\ntau_HV_ns = inf\nT2_star_ns = 0.5\n");
    const auto json = write("a.json", R"({"seed": 3, "source": {"S_ueV": 1.0, "tau_SS_ns": "inf", "tau_HV_ns": "inf", "T2_star_ns": 0.5}})");
    const RunConfig a = load_config(toml);
    const RunConfig b = load_config(json);
    EXPECT_TRUE(a.source.tau_ss.is_infinite());
    EXPECT_TRUE(a.source.tau_hv.is_infinite());
    EXPECT_EQ(a.source.t2_star, DecayTime::ns(0.5));
    EXPECT_EQ(a.source.tau_ss, b.source.tau_ss);
    EXPECT_EQ(a.source.tau_hv, b.source.tau_hv);
    EXPECT_EQ(a.source.t2_star, b.source.t2_star);
    EXPECT_EQ(a.seed, b.seed);
}

TEST_F(TempDir, UnknownKeyReportsLine) {
    const auto p = write("typo.toml", "seed = 1\n\n[source]\nS_ueV = 0.6\nkk = 0.9\n");
    const std::string msg = config_error_message(p);
    EXPECT_NE(msg.find("typo.toml:5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("source.kk"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
}

TEST_F(TempDir, TypeAndRangeErrorsReportLine) {
    const auto type = write("type.toml", "[bsm]\nV = \"high\"\n");
    EXPECT_NE(config_error_message(type).find("type.toml:2"), std::string::npos) << config_error_message(type);
    const auto range = write("range.toml", "[source]\n\nk = 1.5\n");
    EXPECT_NE(config_error_message(range).find("k must lie in [0, 1]"), std::string::npos) << config_error_message(range);
    const auto decay = write("decay.toml", "[source]\ntau_SS_ns = -2\n");
    EXPECT_NE(config_error_message(decay).find("decay.toml:2"), std::string::npos) << config_error_message(decay);
    const auto syntax = write("syntax.toml", "[source]\nS_ueV = = 1\n");
    EXPECT_NE(config_error_message(syntax).find("syntax.toml:2"), std::string::npos) << config_error_message(syntax);
    const auto json = write("syntax.json", "{\n\"seed\": 1,\n\"source\": {,}\n}");
    EXPECT_NE(config_error_message(json).find("syntax.json:3"), std::string::npos) << config_error_message(json);
    const auto seed = write("seed.toml", "seed = -1\n");
    EXPECT_NE(config_error_message(seed).find("seed"), std::string::npos);
    EXPECT_THROW(load_config(dir_ / "missing.toml"), ConfigError);
}

TEST_F(TempDir, EffectiveConfigRoundTrip) {
    RunConfig c = load_config(kConfigs / "qd1.toml");
    const auto p = write("effective.json", effective_config(c).dump(2));
    const RunConfig back = load_config(p);
    EXPECT_EQ(effective_config(back).dump(), effective_config(c).dump());
    EXPECT_EQ(back.source.k, c.source.k);
    EXPECT_EQ(back.source.tau_ss, c.source.tau_ss);
    EXPECT_EQ(back.experiment.eta_x, c.experiment.eta_x);
    EXPECT_EQ(back.contour.v_axis, c.contour.v_axis);
}

TEST(Seeds, DerivationIsStableAndComponentSpecific) {
    static_assert(derive_seed(1, "a") == derive_seed(1, "a"));
    EXPECT_NE(derive_seed(1, "monte_carlo", 0), derive_seed(1, "monte_carlo", 1));
    EXPECT_NE(derive_seed(1, "monte_carlo", 0), derive_seed(1, "mle_restart", 0));
    EXPECT_NE(derive_seed(1, "monte_carlo", 0), derive_seed(2, "monte_carlo", 0));
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafull);
}

}  // namespace
