// Solves for the cascade fraction k that puts the swap fidelity on a target
// value, given the other source parameters, and reports the implied source
// fidelity and idealization entries.

#include <cmath>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "swapsim/swapsim.hpp"

using namespace swapsim;

int main(int argc, char** argv) {
    CLI::App app{"Calibrate the cascade fraction k against a target swap fidelity"};
    std::string config;
    double target = 0.56;
    app.add_option("--config", config, "parameter file (k is ignored)")->required()->check(CLI::ExistingFile);
    app.add_option("--target", target, "target swap fidelity")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        const RunConfig cfg = load_config(config);
        SourceParams p = cfg.source;
        auto f = [&](double k) {
            p.k = k;
            return swap_fidelity_analytic(p, cfg.bsm);
        };
        const double lo_f = f(0.0);
        const double hi_f = f(1.0);
        if (target < lo_f || target > hi_f) {
            std::cerr << "target " << target << " outside reachable range [" << lo_f << ", " << hi_f << "]\n";
            return 3;
        }
        double lo = 0.0;
        double hi = 1.0;
        for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < target ? lo : hi) = mid;
        }
        p.k = 0.5 * (lo + hi);
        const IdealizationReport r = idealization_report(p, cfg.bsm);
        std::cout.precision(12);
        std::cout << "k " << p.k << "\nswap_fidelity " << r.as_is << "\nsource_fidelity " << source_fidelity(p)
                  << "\nwithout_background " << r.without_background << "\nideal_beam_splitter " << r.ideal_beam_splitter
                  << "\nperfect_indistinguishability " << r.perfect_indistinguishability << "\nintrinsic_visibility "
                  << r.intrinsic_visibility << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
