// Shapes an even cat by heralding 10 photons off a squeezed vacuum and prints
// the resulting Fock distribution next to the target.

#include <cstdio>

#include "catshaper/catshaper.hpp"

int main() {
    using namespace catshaper;

    const CatTarget target(1.7, Parity::even);
    const OptimizationResult best = maximize_fidelity(Ancilla::vacuum, 10, target);
    std::printf("best (s, t) = (%.4f, %.4f): fidelity %.5f, probability %.3e\n", best.s, best.t,
                best.fidelity, best.probability);

    const SchemeConfig cfg(SqueezeParam(best.s), best.t, Ancilla::vacuum);
    const ConditionResult res = condition(cfg, 10, best.n_max_used);
    const FockVector cat = cat_state(target, res.state->n_max());
    std::printf("%4s %12s %12s\n", "k", "P(state)", "P(target)");
    for (std::size_t k = 0; k <= 14; k += 2)
        std::printf("%4zu %12.6f %12.6f\n", k, (*res.state)[k] * (*res.state)[k], cat[k] * cat[k]);

    const DiscrepancyReport d = distribution_discrepancy(res, target);
    std::printf("largest discrepancy d = %.6f at |%zu>\n", d.d_max, d.argmax_n);
    return 0;
}
