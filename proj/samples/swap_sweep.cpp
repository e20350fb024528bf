// Prints the swap fidelity of a QD1-like source against HOM visibility, from
// the closed form and from the swapped density matrix.

#include <cstdio>

#include "swapsim/swapsim.hpp"

int main() {
    swapsim::SourceParams p;
    p.fss_ueV = 0.6;
    p.tau_x_ns = 0.27;
    p.tau_ss = swapsim::DecayTime::ns(1000.0);
    p.tau_hv = swapsim::DecayTime::ns(1000.0);
    p.t2_star = swapsim::DecayTime::ns(0.3);
    p.k = 0.97;

    std::printf("V      analytic  matrix    concurrence\n");
    for (int i = 0; i <= 10; ++i) {
        swapsim::BsmModel m;
        m.visibility = 0.1 * i;
        const auto r = swapsim::swapped_state(p, m);
        std::printf("%.2f   %.6f  %.6f  %.6f\n", m.visibility, swapsim::swap_fidelity_analytic(p, m), r.fidelity_psi_minus,
                    r.concurrence);
    }
}
