#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "swapsim/swapsim.hpp"

using swapsim::Json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SWAPSIM_CLI;
const fs::path kConfigs = SWAPSIM_CONFIG_DIR;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("swapsim_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    /// Runs the CLI; returns its exit code. `env` is prepended to the command line.
    int run(const std::string& args, const std::string& env = "") const {
        const std::string cmd = env + " '" + kCli + "' " + args + " >>'" + (root_ / "log.txt").string() + "' 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path dir(const std::string& name) const { return root_ / name; }

    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(root_ / name) << text;
        return root_ / name;
    }

    std::string cfg(const std::string& name) const { return "--config '" + (kConfigs / name).string() + "'"; }
    std::string out(const std::string& name) const { return "--out '" + dir(name).string() + "'"; }

    static void expect_same_tree(const fs::path& a, const fs::path& b) {
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(a)) {
            const fs::path other = b / e.path().filename();
            ASSERT_TRUE(fs::exists(other)) << other;
            if (e.path().filename() == "effective_config.json") continue;  // holds absolute paths
            EXPECT_EQ(read_file(e.path()), read_file(other)) << e.path().filename();
            ++n;
        }
        EXPECT_GT(n, 0u);
    }

    fs::path root_;
};

TEST_F(Cli, SwapFidelities) {
    ASSERT_EQ(run(cfg("qd1.toml") + " " + out("qd1") + " swap"), 0);
    const Json qd1 = read_json(dir("qd1") / "swap.json");
    EXPECT_NEAR(qd1["swap"]["fidelity_psi_minus"].get<double>(), 0.56, 0.01);
    EXPECT_NEAR(qd1["analytic_fidelity"].get<double>(), 0.56, 0.01);
    ASSERT_EQ(run(cfg("ideal.toml") + " " + out("ideal") + " swap"), 0);
    EXPECT_NEAR(read_json(dir("ideal") / "swap.json")["swap"]["fidelity_psi_minus"].get<double>(), 1.0, 1e-9);
    ASSERT_EQ(run(cfg("v0.toml") + " " + out("v0") + " swap"), 0);
    EXPECT_NEAR(read_json(dir("v0") / "swap.json")["swap"]["fidelity_psi_minus"].get<double>(), 0.25, 1e-9);
    ASSERT_EQ(run(cfg("qd1.toml") + " " + out("csv") + " --format csv swap"), 0);
    EXPECT_TRUE(fs::exists(dir("csv") / "swap.csv"));
    EXPECT_TRUE(fs::exists(dir("csv") / "swap_rho.csv"));
}

TEST_F(Cli, ContourCornersAndMarkers) {
    ASSERT_EQ(run(out("default") + " --format csv contour"), 0);
    std::ifstream in(dir("default") / "contour.csv");
    std::string header;
    std::string first;
    std::string line;
    std::string last;
    std::getline(in, header);
    std::getline(in, first);
    while (std::getline(in, line)) last = line;
    EXPECT_EQ(header.substr(0, 9), "s_norm,0,");
    EXPECT_EQ(first.substr(first.rfind(',') + 1), "1");
    EXPECT_EQ(last.substr(last.find(',') + 1, last.find(',', last.find(',') + 1) - last.find(',') - 1), "0.25");

    ASSERT_EQ(run(cfg("qd1.toml") + " " + out("qd1") + " contour"), 0);
    const Json pts = read_json(dir("qd1") / "contour_points.json").at("points");
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[0]["label"], "QD1");
    EXPECT_NEAR(pts[0]["s_norm"].get<double>(), 0.246, 5e-4);
    EXPECT_NEAR(pts[0]["fidelity"].get<double>(), 0.56, 0.01);
    EXPECT_GT(pts[0]["fidelity"].get<double>(), pts[1]["fidelity"].get<double>());
    EXPECT_GT(pts[0]["fidelity"].get<double>(), pts[2]["fidelity"].get<double>());
}

TEST_F(Cli, TomographyOfPsiMinusAndMixed) {
    const auto psi = write("psi.toml", "seed = 5\n[tomo]\nstate = \"psi_minus\"\ncounts_per_setting = 1e6\nmc_iterations = 20\nrestarts = 2\n");
    ASSERT_EQ(run("--config '" + psi.string() + "' " + out("psi") + " tomo"), 0);
    const Json r = read_json(dir("psi") / "reconstruction.json");
    EXPECT_NEAR(r["fidelity_psi_minus"]["value"].get<double>(), 1.0, 1e-3);
    EXPECT_LT(r["fidelity_psi_minus"]["sigma"].get<double>(), 1e-3);
    EXPECT_TRUE(fs::exists(dir("psi") / "counts.csv"));

    const auto mixed = write("mixed.toml", "seed = 6\n[tomo]\nstate = \"mixed\"\ncounts_per_setting = 1000\nmc_iterations = 20\nrestarts = 2\n");
    ASSERT_EQ(run("--config '" + mixed.string() + "' " + out("mixed") + " tomo"), 0);
    const Json m = read_json(dir("mixed") / "reconstruction.json");
    EXPECT_LE(m["concurrence"]["value"].get<double>(), std::max(3.0 * m["concurrence"]["sigma"].get<double>(), 1e-3));
}

TEST_F(Cli, ZeroDurationTagsRun) {
    const auto c = write("zero.toml", "seed = 1\n[tags]\nduration_s = 0\n");
    ASSERT_EQ(run("--config '" + c.string() + "' " + out("zero") + " tags"), 0);
    EXPECT_EQ(fs::file_size(dir("zero") / "stream_HV.qtt"), 16u);
    std::ifstream g2(dir("zero") / "g2_HV.csv");
    std::string header;
    std::getline(g2, header);
    EXPECT_EQ(header, "lo_ns,hi_ns,counts");
    const Json s = read_json(dir("zero") / "tags_summary.json");
    EXPECT_EQ(s["settings"]["HV"]["triggers"], 0);
}

TEST_F(Cli, TagsBunchingSigns) {
    const auto c = write("tags.toml",
                         "seed = 11\n[source]\nS_ueV = 0.6\ntau_X_ns = 0.27\ntau_SS_ns = 1000.0\ntau_HV_ns = 1000.0\n"
                         "T2_star_ns = 0.3\nk = 0.969495\n[bsm]\nV = 0.63\n[experiment]\neta_x = 0.3\neta_xx = 0.3\n"
                         "[tags]\nduration_s = 1.5e-3\n");
    ASSERT_EQ(run("--config '" + c.string() + "' " + out("tags") + " tags"), 0);
    const Json s = read_json(dir("tags") / "tags_summary.json");
    EXPECT_GT(s["settings"]["HV"]["g2_normalized_central"].get<double>(), 1.0);
    EXPECT_LT(s["settings"]["HH"]["g2_normalized_central"].get<double>(), 1.0);
    EXPECT_GT(s["visibility"]["HH/HV"].get<double>(), 0.0);
}

TEST_F(Cli, ReproducibleAcrossRunsThreadsAndEffectiveConfig) {
    const auto c = write("det.toml", "seed = 9\n[tomo]\nstate = \"swap\"\ncounts_per_setting = 30\nmc_iterations = 8\nrestarts = 2\n");
    ASSERT_EQ(run("--config '" + c.string() + "' " + out("a") + " tomo", "SWAPSIM_THREADS=1"), 0);
    ASSERT_EQ(run("--config '" + c.string() + "' " + out("b") + " tomo", "SWAPSIM_THREADS=3"), 0);
    expect_same_tree(dir("a"), dir("b"));
    ASSERT_EQ(run("--config '" + (dir("a") / "effective_config.json").string() + "' " + out("c") + " tomo"), 0);
    expect_same_tree(dir("a"), dir("c"));
    EXPECT_EQ(read_file(dir("a") / "effective_config.json"), read_file(dir("c") / "effective_config.json"));

    const auto t = write("dett.toml", "seed = 4\n[experiment]\neta_x = 0.2\neta_xx = 0.2\n[tags]\nduration_s = 2e-4\n");
    ASSERT_EQ(run("--config '" + t.string() + "' " + out("t1") + " tags"), 0);
    ASSERT_EQ(run("--config '" + t.string() + "' " + out("t2") + " tags", "SWAPSIM_THREADS=2"), 0);
    expect_same_tree(dir("t1"), dir("t2"));
}

TEST_F(Cli, StreamIngestReproducesSynthesis) {
    const auto t = write("syn.toml", "seed = 4\n[experiment]\neta_x = 0.2\neta_xx = 0.2\n[tags]\nduration_s = 2e-4\nsettings = [\"HV\"]\n");
    ASSERT_EQ(run("--config '" + t.string() + "' " + out("syn") + " tags"), 0);
    const auto in = write("ingest.toml", "[experiment]\neta_x = 0.2\neta_xx = 0.2\n[tags]\nsettings = [\"HV\"]\ninput = \"" +
                                             (dir("syn") / "stream_HV.qtt").string() + "\"\n");
    ASSERT_EQ(run("--config '" + in.string() + "' " + out("ing") + " tags"), 0);
    EXPECT_EQ(read_file(dir("syn") / "g3_HV.csv"), read_file(dir("ing") / "g3_HV.csv"));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("bogus"), 2);
    EXPECT_EQ(run("--config /nonexistent.toml swap"), 2);
    const auto typo = write("typo.toml", "[source]\nS_uev = 0.6\n");
    EXPECT_EQ(run("--config '" + typo.string() + "' " + out("typo") + " swap"), 2);
    EXPECT_EQ(run(out("noseed") + " tomo"), 2);
    const auto zero = write("zero.csv", [] {
        std::string s = "setting_a,setting_b,counts,weight\n";
        for (const auto& x : swapsim::expand_ordered(swapsim::enumerate_settings())) {
            s += std::string{swapsim::to_char(x.a)} + "," + swapsim::to_char(x.b) + ",0,1\n";
        }
        return s;
    }());
    const auto zc = write("zc.toml", "seed = 1\n[tomo]\ncounts_file = \"zero.csv\"\nmc_iterations = 2\n");
    EXPECT_EQ(run("--config '" + zc.string() + "' " + out("zc") + " tomo"), 3);
    write("bad.qtt", "NOPE\x01\x00\x00\x00\xff\xff\x00\x00\x00\x00\x00\x00");
    const auto bad = write("bad.toml", "[tags]\ninput = \"bad.qtt\"\nsettings = [\"HV\"]\n");
    EXPECT_EQ(run("--config '" + bad.string() + "' " + out("bad") + " tags"), 2);
    EXPECT_EQ(run(out("x") + " --format xml swap"), 2);
    EXPECT_EQ(run(out("x") + " contour", "SWAPSIM_THREADS=zero"), 2);
}

}  // namespace
