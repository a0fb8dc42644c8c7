#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "catshaper/beam_splitter.hpp"
#include "catshaper/conditioning.hpp"
#include "catshaper/detector.hpp"
#include "catshaper/fock.hpp"

namespace catshaper {

struct SelfCheckOptions {
    std::size_t n_max = 40;
    /// Testing hook: runs the sign-convention check against the flipped
    /// convention, which must make the suite fail (negative control).
    bool flip_bs_sign = false;
};

struct CheckOutcome {
    std::string name;
    bool passed = false;
    double observed = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct SelfCheckReport {
    std::vector<CheckOutcome> checks;
    bool all_passed = true;
    std::string first_failed;
};

/// Reduced-size consistency suite: BS sign convention, closed-form vs oracle
/// equivalence, probability completeness, POVM completeness and the
/// closed-vs-direct inefficient-fidelity agreement.
inline SelfCheckReport run_selfcheck(const SelfCheckOptions& opts = {}) {
    SelfCheckReport report;
    const auto record = [&](CheckOutcome c) {
        if (!c.passed && report.first_failed.empty()) report.first_failed = c.name;
        report.all_passed = report.all_passed && c.passed;
        report.checks.push_back(std::move(c));
    };

    {
        // |1,0> -> t|1,0> - r|0,1> pins the convention.
        const double t = 0.6, r = std::sqrt(1.0 - t * t);
        TwoModeState in(4);
        in(1, 0) = 1.0;
        const TwoModeState out = apply_beam_splitter(in, t);
        const double expected_reflect = opts.flip_bs_sign ? r : -r;
        const double dev = std::max(std::abs(out(1, 0) - t), std::abs(out(0, 1) - expected_reflect));
        record({"bs_sign_convention", dev < 1e-14, dev, 1e-14,
                "image of |1,0>: amp(1,0) vs t and amp(0,1) vs signed r"});
    }

    {
        double worst_state = 0.0, worst_prob = 0.0;
        for (double s : {0.5, 1.0}) {
            for (double t : {0.6, 0.85}) {
                for (Ancilla anc : {Ancilla::vacuum, Ancilla::single_photon}) {
                    const SchemeConfig cfg(SqueezeParam(s), t, anc);
                    const std::size_t off = anc == Ancilla::single_photon ? 1 : 0;
                    for (int n = 0; n <= 4; ++n) {
                        const ConditionResult oracle = oracle_condition(cfg, static_cast<std::size_t>(n), opts.n_max);
                        const std::size_t closed_n_max = opts.n_max - off - static_cast<std::size_t>(n);
                        const ConditionResult closed = condition(
                            cfg, n, closed_n_max, {std::numeric_limits<double>::infinity()});
                        worst_prob = std::max(worst_prob,
                                              std::abs(oracle.probability - closed.probability));
                        if (oracle.state && closed.state) {
                            double align = 1.0;
                            double peak = 0.0;
                            for (std::size_t k = 0; k <= closed.state->n_max(); ++k) {
                                if (std::abs((*oracle.state)[k]) > peak) {
                                    peak = std::abs((*oracle.state)[k]);
                                    align = (*oracle.state)[k] * (*closed.state)[k] < 0.0 ? -1.0 : 1.0;
                                }
                            }
                            for (std::size_t k = 0; k <= closed.state->n_max(); ++k)
                                worst_state = std::max(worst_state, std::abs((*oracle.state)[k] -
                                                                             align * (*closed.state)[k]));
                        }
                    }
                }
            }
        }
        record({"oracle_equivalence_state", worst_state < 1e-10, worst_state, 1e-10,
                "closed-form conditional states vs beam-splitter projections"});
        record({"oracle_equivalence_probability", worst_prob < 1e-12, worst_prob, 1e-12,
                "closed-form probabilities vs beam-splitter projections"});
    }

    {
        double worst = 0.0;
        for (Ancilla anc : {Ancilla::vacuum, Ancilla::single_photon}) {
            const SchemeConfig cfg(SqueezeParam(0.8), 0.75, anc);
            const double total = probability_completeness(cfg, static_cast<int>(opts.n_max), 200);
            worst = std::max(worst, std::abs(1.0 - total));
        }
        record({"probability_completeness", worst < 1e-8, worst, 1e-8,
                "sum of branch probabilities reaches 1"});
    }

    {
        double worst = 0.0;
        for (double eta : {0.7, 0.95}) {
            const DetectorModel det(eta);
            for (int k = 0; k <= 30; ++k) {
                detail::KahanSum acc;
                for (int n = 0; n <= k; ++n)
                    acc.add(povm_element(det, n, 30).weights[static_cast<std::size_t>(k)]);
                worst = std::max(worst, std::abs(acc.value() - 1.0));
            }
        }
        record({"povm_completeness", worst < 1e-12, worst, 1e-12,
                "POVM outcome weights sum to 1 per true photon number"});
    }

    {
        double worst = 0.0;
        const CatTarget target(1.6, Parity::even);
        for (double s : {0.7, 1.1}) {
            for (double t : {0.6, 0.8}) {
                for (double eta : {0.9, 0.98}) {
                    const SchemeConfig cfg(SqueezeParam(s), t, Ancilla::vacuum);
                    const DetectorModel det(eta);
                    const double closed = imperfect_fidelity_closed(cfg, 1, det, target, 200);
                    const ImperfectResult direct =
                        imperfect_fidelity_direct(cfg, 2, det, target, 200);
                    worst = std::max(worst, std::abs(closed - direct.fidelity));
                }
            }
        }
        record({"imperfect_fidelity_consistency", worst < 1e-9, worst, 1e-9,
                "closed-form inefficiency fidelity vs direct POVM mixture"});
    }

    return report;
}

} // namespace catshaper
