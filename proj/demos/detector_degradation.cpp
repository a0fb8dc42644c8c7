// Shows how detector inefficiency erodes the heralded-cat fidelity and how
// the first-order lower bound tracks it across the beam-splitter range.

#include <cstdio>

#include "catshaper/catshaper.hpp"

int main() {
    using namespace catshaper;

    const CatTarget target(1.7, Parity::even);
    const DetectorModel det(0.98);
    std::printf("%6s %10s %12s %12s %12s\n", "t", "s*", "F(eta=1)", "F(eta=.98)", "bound");
    for (double t : {0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
        // scan s at fixed t
        double best_s = 0.1, best_f = -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double s = 0.02 + 2.0 * i / 200.0;
            const SchemeConfig cfg(SqueezeParam(s), t, Ancilla::vacuum);
            const double f = herald_fidelity(condition(cfg, 10, 256), target).fidelity;
            if (f > best_f) {
                best_f = f;
                best_s = s;
            }
        }
        const SchemeConfig cfg(SqueezeParam(best_s), t, Ancilla::vacuum);
        const ImperfectResult imp = imperfect_fidelity_direct(cfg, 10, det, target);
        const ConditionResult ideal = condition(cfg, 10, 256);
        const double lb = lower_bound(cfg, 10, det, target, mean_photon_number(*ideal.state));
        std::printf("%6.2f %10.4f %12.6f %12.6f %12.6f\n", t, best_s, best_f, imp.fidelity, lb);
    }
    return 0;
}
