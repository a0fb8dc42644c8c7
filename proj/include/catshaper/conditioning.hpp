#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "catshaper/errors.hpp"
#include "catshaper/fock.hpp"

namespace catshaper {

enum class Ancilla { vacuum, single_photon };

inline const char* to_string(Ancilla a) {
    return a == Ancilla::vacuum ? "vacuum" : "single_photon";
}

/// Scheme parameters: squeezing of the input SMSV, beam-splitter transmittance
/// t in (0,1) and the ancilla fed into mode 2. The reflectance is always
/// derived, never stored, so t^2 + r^2 = 1 holds by construction.
struct SchemeConfig {
    SqueezeParam squeeze;
    double transmittance;
    Ancilla ancilla;

    SchemeConfig(SqueezeParam s, double t, Ancilla a)
        : squeeze(s), transmittance(t), ancilla(a) {
        if (!(t > 0.0 && t < 1.0) || !std::isfinite(t))
            throw std::invalid_argument("SchemeConfig: transmittance must be in (0,1)");
    }

    double reflectance() const { return std::sqrt((1.0 - transmittance) * (1.0 + transmittance)); }
};

/// Photon count n registered in mode 2; m = floor(n/2) indexes the branch.
struct HeraldOutcome {
    int n = 0;
    int m() const { return n / 2; }
};

/// Heralded output of one branch. A degenerate outcome (probability exactly 0,
/// e.g. an odd herald on unsqueezed vacuum) carries no state.
struct ConditionResult {
    std::optional<FockVector> state;
    double probability = 0.0;
    double log_probability = -std::numeric_limits<double>::infinity();
    /// L_n (vacuum ancilla) or K_n (photon ancilla): 1/norm of the unnormalized
    /// branch vector. 0 for degenerate outcomes.
    double norm_constant = 0.0;
    /// ln ||u||^2 of the unnormalized branch vector (-inf when degenerate);
    /// kept alongside norm_constant so downstream ratios stay stable at large m.
    double log_norm_sq = -std::numeric_limits<double>::infinity();
    HeraldOutcome herald{};
};

struct FidelityReport {
    double fidelity;
    CatTarget target;
    HeraldOutcome outcome;
};

struct DiscrepancyReport {
    double d_max = 0.0;
    std::size_t argmax_n = 0;
};

struct ConditionOptions {
    /// Unnormalized tail mass allowed past n_max, relative to the total.
    /// Pass infinity to disable the check (matched-truncation comparisons).
    double tail_tol = 1e-12;
};

/// Output parity of each (ancilla, herald) branch: the SMSV is even, so the
/// surviving mode's parity is the herald parity (vacuum ancilla) or its
/// opposite (single-photon ancilla).
inline Parity branch_parity(Ancilla ancilla, int n) {
    const bool herald_even = n % 2 == 0;
    if (ancilla == Ancilla::vacuum) return herald_even ? Parity::even : Parity::odd;
    return herald_even ? Parity::odd : Parity::even;
}

namespace detail {

/// ln b_{2l} of the SMSV expansion (-inf where the amplitude vanishes).
inline double log_smsv_amp(double s, std::size_t l) {
    if (s == 0.0) return l == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return -0.5 * std::log(std::cosh(s)) + static_cast<double>(l) * std::log(std::tanh(s) / 2.0) +
           0.5 * log_factorial(static_cast<int>(2 * l)) - log_factorial(static_cast<int>(l));
}

struct LogAmp {
    std::size_t index;
    double log_mag;
    double sign;  // -1, 0, +1
};

struct NormalizedBranch {
    std::optional<FockVector> state;
    double log_norm_sq = -std::numeric_limits<double>::infinity();
};

/// Normalizes amplitudes given as (log magnitude, sign) terms. The squared
/// magnitudes are accumulated in descending order with compensation so the
/// small tail of large-m branches is not absorbed into rounding.
inline NormalizedBranch normalize_branch(std::vector<LogAmp> terms, std::size_t n_max, Parity parity) {
    std::erase_if(terms, [](const LogAmp& t) { return t.sign == 0.0 || !std::isfinite(t.log_mag); });
    if (terms.empty()) return {};
    std::sort(terms.begin(), terms.end(),
              [](const LogAmp& a, const LogAmp& b) { return a.log_mag > b.log_mag; });
    const double lead = terms.front().log_mag;
    KahanSum acc;
    for (const LogAmp& t : terms) acc.add(std::exp(2.0 * (t.log_mag - lead)));
    const double log_norm_sq = 2.0 * lead + std::log(acc.value());

    std::vector<double> amps(n_max + 1, 0.0);
    for (const LogAmp& t : terms) amps[t.index] = t.sign * std::exp(t.log_mag - 0.5 * log_norm_sq);
    return {FockVector(std::move(amps), parity).canonical_sign(), log_norm_sq};
}

/// Geometric estimate of the unnormalized tail mass beyond the last retained
/// slot; throws when it exceeds tail_tol of the total. The per-step squared
/// ratio is bounded by tanh^2(s) t^4 (1 + (2m+2)/(2k+1))^2, which decreases
/// in k, so using it at the last slot bounds the whole tail.
inline void check_branch_tail(const std::vector<LogAmp>& terms, double s, double t, int m,
                              double log_norm_sq, double tail_tol,
                              const std::string& op_name) {
    if (!(tail_tol < std::numeric_limits<double>::infinity())) return;
    if (terms.empty() || s == 0.0) return;
    const LogAmp& last = terms.back();
    double log_base = last.sign != 0.0 ? last.log_mag : -std::numeric_limits<double>::infinity();
    if (terms.size() >= 2) {
        const LogAmp& prev = terms[terms.size() - 2];
        if (prev.sign != 0.0) log_base = std::max(log_base, prev.log_mag);
    }
    if (!std::isfinite(log_base)) return;
    const double k_last = static_cast<double>(last.index) / 2.0;
    const double trans = 1.0 + (2.0 * m + 2.0) / (2.0 * k_last + 1.0);
    const double rho = std::pow(std::tanh(s) * t * t * trans, 2.0);
    double log_tail;
    if (rho >= 1.0) {
        log_tail = std::numeric_limits<double>::infinity();
    } else {
        log_tail = 2.0 * log_base + std::log(rho / (1.0 - rho));
    }
    if (log_tail > log_norm_sq + std::log(tail_tol))
        throw truncation_error(op_name + ": estimated tail mass exceeds tail_tol at n_max; "
                               "increase n_max or relax tail_tol");
}

} // namespace detail

/// Even herald n = 2m on the vacuum-ancilla scheme: even-parity output with
/// unnormalized amplitudes b_{2(k+m)} t^{2k} sqrt((2(m+k))!/(2k)!) and success
/// probability (1-t^2)^{2m} / ((2m)! L_{2m}^2).
inline ConditionResult condition_vacuum_even(const SchemeConfig& cfg, int m, std::size_t n_max,
                                             const ConditionOptions& opts = {}) {
    if (cfg.ancilla != Ancilla::vacuum)
        throw std::invalid_argument("condition_vacuum_even: config must use the vacuum ancilla");
    if (m < 0) throw std::invalid_argument("condition_vacuum_even: m must be >= 0");
    const double s = cfg.squeeze.value();
    const double t = cfg.transmittance;
    const double log_t = std::log(t);

    std::vector<detail::LogAmp> terms;
    for (std::size_t k = 0; 2 * k <= n_max; ++k) {
        const double lb = detail::log_smsv_amp(s, k + static_cast<std::size_t>(m));
        if (!std::isfinite(lb)) continue;
        const double lm = lb + 2.0 * static_cast<double>(k) * log_t +
                          0.5 * (log_factorial(static_cast<int>(2 * (k + static_cast<std::size_t>(m)))) -
                                 log_factorial(static_cast<int>(2 * k)));
        terms.push_back({2 * k, lm, 1.0});
    }
    detail::NormalizedBranch nb = detail::normalize_branch(terms, n_max, Parity::even);
    ConditionResult res;
    res.herald = HeraldOutcome{2 * m};
    if (!nb.state) return res;
    detail::check_branch_tail(terms, s, t, m, nb.log_norm_sq, opts.tail_tol, "condition_vacuum_even");
    const double log_r2 = std::log1p(-t * t);
    res.log_probability = 2.0 * m * log_r2 - log_factorial(2 * m) + nb.log_norm_sq;
    res.probability = std::exp(res.log_probability);
    res.log_norm_sq = nb.log_norm_sq;
    res.norm_constant = std::exp(-0.5 * nb.log_norm_sq);
    res.state = std::move(nb.state);
    return res;
}

/// Odd herald n = 2m+1 on the vacuum-ancilla scheme: odd-parity output,
/// probability t^2 (1-t^2)^{2m+1} / ((2m+1)! L_{2m+1}^2). Unsqueezed input has
/// no photon to subtract, so s = 0 yields the explicit zero-probability result.
inline ConditionResult condition_vacuum_odd(const SchemeConfig& cfg, int m, std::size_t n_max,
                                            const ConditionOptions& opts = {}) {
    if (cfg.ancilla != Ancilla::vacuum)
        throw std::invalid_argument("condition_vacuum_odd: config must use the vacuum ancilla");
    if (m < 0) throw std::invalid_argument("condition_vacuum_odd: m must be >= 0");
    const double s = cfg.squeeze.value();
    const double t = cfg.transmittance;
    const double log_t = std::log(t);

    std::vector<detail::LogAmp> terms;
    for (std::size_t k = 0; 2 * k + 1 <= n_max; ++k) {
        const double lb = detail::log_smsv_amp(s, k + static_cast<std::size_t>(m) + 1);
        if (!std::isfinite(lb)) continue;
        const double lm =
            lb + 2.0 * static_cast<double>(k) * log_t +
            0.5 * (log_factorial(static_cast<int>(2 * (k + static_cast<std::size_t>(m) + 1))) -
                   log_factorial(static_cast<int>(2 * k + 1)));
        terms.push_back({2 * k + 1, lm, 1.0});
    }
    detail::NormalizedBranch nb = detail::normalize_branch(terms, n_max, Parity::odd);
    ConditionResult res;
    res.herald = HeraldOutcome{2 * m + 1};
    if (!nb.state) return res;
    detail::check_branch_tail(terms, s, t, m + 1, nb.log_norm_sq, opts.tail_tol,
                              "condition_vacuum_odd");
    const double log_r2 = std::log1p(-t * t);
    res.log_probability =
        2.0 * std::log(t) + (2.0 * m + 1.0) * log_r2 - log_factorial(2 * m + 1) + nb.log_norm_sq;
    res.probability = std::exp(res.log_probability);
    res.log_norm_sq = nb.log_norm_sq;
    res.norm_constant = std::exp(-0.5 * nb.log_norm_sq);
    res.state = std::move(nb.state);
    return res;
}

/// Herald n = 0 on the single-photon-ancilla scheme: the photon reflects and
/// the output is odd, with amplitudes b_{2k} t^{2k} sqrt(2k+1) and probability
/// r^2 ||u||^2. Kept separate from the n = 2m branch, whose probability
/// formula divides by 2m.
inline ConditionResult condition_photon_zero_click(const SchemeConfig& cfg, std::size_t n_max,
                                                   const ConditionOptions& opts = {}) {
    if (cfg.ancilla != Ancilla::single_photon)
        throw std::invalid_argument("condition_photon_zero_click: config must use the photon ancilla");
    const double s = cfg.squeeze.value();
    const double t = cfg.transmittance;
    const double log_t = std::log(t);

    std::vector<detail::LogAmp> terms;
    for (std::size_t k = 0; 2 * k + 1 <= n_max; ++k) {
        const double lb = detail::log_smsv_amp(s, k);
        if (!std::isfinite(lb)) continue;
        const double lm = lb + 2.0 * static_cast<double>(k) * log_t +
                          0.5 * std::log(2.0 * static_cast<double>(k) + 1.0);
        terms.push_back({2 * k + 1, lm, 1.0});
    }
    detail::NormalizedBranch nb = detail::normalize_branch(terms, n_max, Parity::odd);
    ConditionResult res;
    res.herald = HeraldOutcome{0};
    if (!nb.state) return res;
    detail::check_branch_tail(terms, s, t, 0, nb.log_norm_sq, opts.tail_tol,
                              "condition_photon_zero_click");
    res.log_probability = std::log1p(-t * t) + nb.log_norm_sq;
    res.probability = std::exp(res.log_probability);
    res.log_norm_sq = nb.log_norm_sq;
    res.norm_constant = std::exp(-0.5 * nb.log_norm_sq);
    res.state = std::move(nb.state);
    return res;
}

/// Even herald n = 2m >= 2 on the single-photon-ancilla scheme: odd-parity
/// output whose amplitudes carry the sign-changing bracket
/// (1 - ((2k+1)/(2m)) r^2/t^2); probability 2m t^4 (1-t^2)^{2m-1} / ((2m-1)! K_{2m}^2).
inline ConditionResult condition_photon_even_click(const SchemeConfig& cfg, int m, std::size_t n_max,
                                                   const ConditionOptions& opts = {}) {
    if (cfg.ancilla != Ancilla::single_photon)
        throw std::invalid_argument("condition_photon_even_click: config must use the photon ancilla");
    if (m < 1)
        throw std::invalid_argument(
            "condition_photon_even_click: m must be >= 1 (use condition_photon_zero_click for n = 0)");
    const double s = cfg.squeeze.value();
    const double t = cfg.transmittance;
    const double log_t = std::log(t);
    const double r2_over_t2 = (1.0 - t * t) / (t * t);

    std::vector<detail::LogAmp> terms;
    for (std::size_t k = 0; 2 * k + 1 <= n_max; ++k) {
        const double lb = detail::log_smsv_amp(s, k + static_cast<std::size_t>(m));
        if (!std::isfinite(lb)) continue;
        const double bracket =
            1.0 - (2.0 * static_cast<double>(k) + 1.0) / (2.0 * m) * r2_over_t2;
        const double lm =
            lb + 2.0 * static_cast<double>(k) * log_t +
            0.5 * (log_factorial(static_cast<int>(2 * (k + static_cast<std::size_t>(m)))) -
                   log_factorial(static_cast<int>(2 * k + 1))) +
            std::log(std::abs(bracket));
        terms.push_back({2 * k + 1, lm, bracket > 0.0 ? 1.0 : (bracket < 0.0 ? -1.0 : 0.0)});
    }
    detail::NormalizedBranch nb = detail::normalize_branch(terms, n_max, Parity::odd);
    ConditionResult res;
    res.herald = HeraldOutcome{2 * m};
    if (!nb.state) return res;
    detail::check_branch_tail(terms, s, t, m, nb.log_norm_sq, opts.tail_tol,
                              "condition_photon_even_click");
    const double log_r2 = std::log1p(-t * t);
    res.log_probability = std::log(2.0 * m) + 4.0 * std::log(t) + (2.0 * m - 1.0) * log_r2 -
                          log_factorial(2 * m - 1) + nb.log_norm_sq;
    res.probability = std::exp(res.log_probability);
    res.log_norm_sq = nb.log_norm_sq;
    res.norm_constant = std::exp(-0.5 * nb.log_norm_sq);
    res.state = std::move(nb.state);
    return res;
}

/// Odd herald n = 2m+1 on the single-photon-ancilla scheme: even-parity output
/// with bracket (1 - (2k/(2m+1)) r^2/t^2); probability
/// (2m+1) t^2 (1-t^2)^{2m} / ((2m)! K_{2m+1}^2).
inline ConditionResult condition_photon_odd_click(const SchemeConfig& cfg, int m, std::size_t n_max,
                                                  const ConditionOptions& opts = {}) {
    if (cfg.ancilla != Ancilla::single_photon)
        throw std::invalid_argument("condition_photon_odd_click: config must use the photon ancilla");
    if (m < 0) throw std::invalid_argument("condition_photon_odd_click: m must be >= 0");
    const double s = cfg.squeeze.value();
    const double t = cfg.transmittance;
    const double log_t = std::log(t);
    const double r2_over_t2 = (1.0 - t * t) / (t * t);

    std::vector<detail::LogAmp> terms;
    for (std::size_t k = 0; 2 * k <= n_max; ++k) {
        const double lb = detail::log_smsv_amp(s, k + static_cast<std::size_t>(m));
        if (!std::isfinite(lb)) continue;
        const double bracket =
            1.0 - (2.0 * static_cast<double>(k)) / (2.0 * m + 1.0) * r2_over_t2;
        const double lm =
            lb + 2.0 * static_cast<double>(k) * log_t +
            0.5 * (log_factorial(static_cast<int>(2 * (k + static_cast<std::size_t>(m)))) -
                   log_factorial(static_cast<int>(2 * k))) +
            std::log(std::abs(bracket));
        terms.push_back({2 * k, lm, bracket > 0.0 ? 1.0 : (bracket < 0.0 ? -1.0 : 0.0)});
    }
    detail::NormalizedBranch nb = detail::normalize_branch(terms, n_max, Parity::even);
    ConditionResult res;
    res.herald = HeraldOutcome{2 * m + 1};
    if (!nb.state) return res;
    detail::check_branch_tail(terms, s, t, m, nb.log_norm_sq, opts.tail_tol,
                              "condition_photon_odd_click");
    const double log_r2 = std::log1p(-t * t);
    res.log_probability = std::log(2.0 * m + 1.0) + 2.0 * std::log(t) + 2.0 * m * log_r2 -
                          log_factorial(2 * m) + nb.log_norm_sq;
    res.probability = std::exp(res.log_probability);
    res.log_norm_sq = nb.log_norm_sq;
    res.norm_constant = std::exp(-0.5 * nb.log_norm_sq);
    res.state = std::move(nb.state);
    return res;
}

/// Dispatches herald n to the branch operation selected by the configured
/// ancilla and the herald parity.
inline ConditionResult condition(const SchemeConfig& cfg, int n, std::size_t n_max,
                                 const ConditionOptions& opts = {}) {
    if (n < 0) throw std::invalid_argument("condition: herald count must be >= 0");
    if (cfg.ancilla == Ancilla::vacuum)
        return n % 2 == 0 ? condition_vacuum_even(cfg, n / 2, n_max, opts)
                          : condition_vacuum_odd(cfg, n / 2, n_max, opts);
    if (n == 0) return condition_photon_zero_click(cfg, n_max, opts);
    return n % 2 == 0 ? condition_photon_even_click(cfg, n / 2, n_max, opts)
                      : condition_photon_odd_click(cfg, n / 2, n_max, opts);
}

/// F = |<SCS_target | state>|^2. Opposite parities (and degenerate results)
/// report exactly 0.
inline FidelityReport herald_fidelity(const ConditionResult& res, const CatTarget& target,
                                      double cat_tail_tol = 1e-10) {
    if (!res.state) return {0.0, target, res.herald};
    if (res.state->parity() != target.parity) return {0.0, target, res.herald};
    const FockVector cat = cat_state(target, res.state->n_max(), cat_tail_tol);
    const double ip = inner_product(*res.state, cat);
    return {ip * ip, target, res.herald};
}

/// Sum of branch probabilities P_n for n = 0..n_cut (the n = 0 single-photon
/// branch included). Approaches 1 from below as n_cut grows.
inline double probability_completeness(const SchemeConfig& cfg, int n_cut, std::size_t n_max,
                                       const ConditionOptions& opts = {}) {
    if (n_cut < 0 || static_cast<std::size_t>(n_cut) > n_max)
        throw std::invalid_argument("probability_completeness: need 0 <= n_cut <= n_max");
    detail::KahanSum acc;
    for (int n = 0; n <= n_cut; ++n) acc.add(condition(cfg, n, n_max, opts).probability);
    return acc.value();
}

/// Largest per-Fock probability discrepancy max_k |state_k^2 - cat_k^2| and
/// the index attaining it.
inline DiscrepancyReport distribution_discrepancy(const ConditionResult& res,
                                                  const CatTarget& target,
                                                  double cat_tail_tol = 1e-10) {
    if (!res.state)
        throw std::invalid_argument("distribution_discrepancy: degenerate result has no state");
    if (res.state->parity() != target.parity)
        throw std::invalid_argument("distribution_discrepancy: state and target parities differ");
    const FockVector cat = cat_state(target, res.state->n_max(), cat_tail_tol);
    DiscrepancyReport report;
    for (std::size_t k = 0; k <= cat.n_max(); ++k) {
        const double d = std::abs((*res.state)[k] * (*res.state)[k] - cat[k] * cat[k]);
        if (d > report.d_max) {
            report.d_max = d;
            report.argmax_n = k;
        }
    }
    return report;
}

} // namespace catshaper
