#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "catshaper/conditioning.hpp"
#include "catshaper/errors.hpp"
#include "catshaper/fock.hpp"

namespace catshaper {

/// Photon-number-resolving detector with quantum efficiency eta in (0,1],
/// modeled as a loss channel of transmissivity eta before an ideal counter.
/// x_max truncates the loss-index sums; leave unset to size it from the
/// geometric weight ratio (1-eta)(1-t^2) so the dropped tail is < 1e-16 of
/// the retained sum.
struct DetectorModel {
    double eta;
    std::optional<int> x_max;

    explicit DetectorModel(double eta_, std::optional<int> x_max_ = std::nullopt)
        : eta(eta_), x_max(x_max_) {
        if (!(eta > 0.0 && eta <= 1.0) || !std::isfinite(eta))
            throw std::invalid_argument("DetectorModel: eta must be in (0,1]");
        if (x_max && *x_max < 0) throw std::invalid_argument("DetectorModel: x_max must be >= 0");
    }
};

/// Diagonal POVM element of outcome n: weights C(k,n) eta^n (1-eta)^(k-n)
/// over the true photon number k (zero for k < n).
struct PovmDiagonal {
    int outcome = 0;
    std::vector<double> weights;
};

struct SeriesCoefficients {
    double g1 = 0.0;
    double g2 = 0.0;
};

struct ImperfectResult {
    double fidelity = 0.0;
    double probability = 0.0;
    double log_probability = -std::numeric_limits<double>::infinity();
    int terms_used = 0;  ///< number of true-count terms retained in the mixture
};

inline int effective_x_max(const DetectorModel& det, double t) {
    if (det.x_max) return *det.x_max;
    if (det.eta >= 1.0) return 0;
    const double q = (1.0 - det.eta) * (1.0 - t * t);
    if (q <= 0.0) return 0;
    const int x = static_cast<int>(std::ceil(-16.0 * std::log(10.0) / std::log(q))) + 8;
    return std::clamp(x, 1, 512);
}

inline PovmDiagonal povm_element(const DetectorModel& det, int n, std::size_t n_max) {
    if (n < 0 || static_cast<std::size_t>(n) > n_max)
        throw std::invalid_argument("povm_element: need 0 <= n <= n_max");
    PovmDiagonal povm;
    povm.outcome = n;
    povm.weights.assign(n_max + 1, 0.0);
    if (det.eta >= 1.0) {
        povm.weights[static_cast<std::size_t>(n)] = 1.0;
        return povm;
    }
    const double log_eta = std::log(det.eta);
    const double log_loss = std::log1p(-det.eta);
    for (std::size_t k = static_cast<std::size_t>(n); k <= n_max; ++k) {
        const double lw = log_binomial(static_cast<int>(k), n) + n * log_eta +
                          static_cast<double>(k - static_cast<std::size_t>(n)) * log_loss;
        povm.weights[k] = std::exp(lw);
    }
    return povm;
}

namespace detail {

/// ln ||u||^2 of a vacuum branch, or -inf for a degenerate branch.
inline double branch_log_norm_sq(const SchemeConfig& cfg, int n, std::size_t n_max) {
    const ConditionResult res = condition(cfg, n, n_max, {std::numeric_limits<double>::infinity()});
    return res.log_norm_sq;
}

} // namespace detail

/// Mixed-state fidelity of the inefficient-detector outcome n against a cat
/// target, built directly from the POVM mixture over true counts k >= n:
///   F = sum_k w_k P_k |<SCS|Psi_k>|^2 / sum_k w_k P_k,  w_k = C(k,n) eta^n (1-eta)^(k-n),
/// with cross-parity true counts contributing only to the denominator. The
/// denominator is also the heralding probability of outcome n. Works for any
/// ancilla and any herald; throws impossible_outcome_error when the outcome
/// has probability zero.
inline ImperfectResult imperfect_fidelity_direct(const SchemeConfig& cfg, int n,
                                                 const DetectorModel& det, const CatTarget& target,
                                                 std::size_t n_max = 256,
                                                 const ConditionOptions& opts = {}) {
    if (n < 0) throw std::invalid_argument("imperfect_fidelity_direct: herald count must be >= 0");
    const FockVector cat = cat_state(target, n_max);

    const double log_eta = std::log(det.eta);
    const bool lossless = det.eta >= 1.0;
    const double log_loss = lossless ? -std::numeric_limits<double>::infinity() : std::log1p(-det.eta);
    const int x_cap = effective_x_max(det, cfg.transmittance);
    const int k_cap = lossless ? n : n + std::max(2 * x_cap + 8, 24);

    // Scaled accumulation: all terms are divided by exp(log_scale) with
    // log_scale anchored at the first contributing term.
    detail::KahanSum num, den;
    double log_scale = std::numeric_limits<double>::quiet_NaN();
    int used = 0;
    int negligible_run = 0;
    for (int k = n; k <= k_cap && static_cast<std::size_t>(k) <= n_max; ++k) {
        const ConditionResult res = condition(cfg, k, n_max, opts);
        if (!(res.probability > 0.0)) continue;
        const double log_w = lossless ? 0.0
                                      : log_binomial(k, n) + n * log_eta +
                                            static_cast<double>(k - n) * log_loss;
        const double log_term = log_w + res.log_probability;
        if (std::isnan(log_scale)) log_scale = log_term;
        const double term = std::exp(log_term - log_scale);
        double fid = 0.0;
        if (res.state && res.state->parity() == target.parity) {
            const double ip = inner_product(*res.state, cat);
            fid = ip * ip;
        }
        den.add(term);
        num.add(term * fid);
        ++used;
        if (term < 1e-18 * den.value()) {
            if (++negligible_run >= 3) break;
        } else {
            negligible_run = 0;
        }
    }
    if (std::isnan(log_scale) || !(den.value() > 0.0))
        throw impossible_outcome_error("imperfect_fidelity_direct: outcome n=" + std::to_string(n) +
                                       " has probability zero");
    ImperfectResult out;
    out.fidelity = num.value() / den.value();
    out.log_probability = log_scale + std::log(den.value());
    out.probability = std::exp(out.log_probability);
    out.terms_used = used;
    return out;
}

namespace detail {

struct ClosedFidelity {
    double fidelity = 0.0;
    int x_max_used = 0;
};

} // namespace detail

/// Closed-form inefficient-detector fidelity for the vacuum-ancilla even
/// branch n = 2m, evaluated verbatim:
///   F = sum_x W_x |<SCS+|Psi_{2(m+x)}>|^2 /
///       sum_x W_x (1 + (1-eta) t^2 (1-t^2) L^2_{2(m+x)} / ((2x+1) L^2_{2(m+x)+1}))
/// with W_x = (1-eta)^{2x} (1-t^2)^{2x} / ((2x)! L^2_{2(m+x)}). The direct
/// POVM construction above is the module's ground truth; these two must agree
/// to 1e-9 or a transcription issue is flagged by the tests.
inline detail::ClosedFidelity imperfect_fidelity_closed_detailed(const SchemeConfig& cfg, int m,
                                                                 const DetectorModel& det,
                                                                 const CatTarget& target,
                                                                 std::size_t n_max = 256) {
    if (cfg.ancilla != Ancilla::vacuum)
        throw std::invalid_argument("imperfect_fidelity_closed: vacuum-ancilla branch only");
    if (m < 0) throw std::invalid_argument("imperfect_fidelity_closed: m must be >= 0");
    if (target.parity != Parity::even)
        throw std::invalid_argument("imperfect_fidelity_closed: even herald pairs with the even cat");
    const double t = cfg.transmittance;
    const double r2 = 1.0 - t * t;
    const double loss = 1.0 - det.eta;
    const FockVector cat = cat_state(target, n_max);
    const int x_cap = effective_x_max(det, t);

    detail::KahanSum num, den;
    double log_scale = std::numeric_limits<double>::quiet_NaN();
    int x_used = 0;
    for (int x = 0; x <= x_cap; ++x) {
        const ConditionResult even_branch =
            condition_vacuum_even(cfg, m + x, n_max, {std::numeric_limits<double>::infinity()});
        if (!even_branch.state) continue;
        // W_x up to the common factor: (1-eta)^{2x} (1-t^2)^{2x} ||u_{2(m+x)}||^2 / (2x)!
        double log_w = even_branch.log_norm_sq - log_factorial(2 * x);
        if (x > 0) log_w += 2.0 * x * (std::log(loss) + std::log(r2));
        if (std::isnan(log_scale)) log_scale = log_w;
        const double w = std::exp(log_w - log_scale);

        const double ip = inner_product(*even_branch.state, cat);
        double leakage = 0.0;
        if (loss > 0.0) {
            const double log_odd_norm_sq = detail::branch_log_norm_sq(cfg, 2 * (m + x) + 1, n_max);
            if (std::isfinite(log_odd_norm_sq)) {
                // (1-eta) t^2 (1-t^2) L^2_{2(m+x)} / ((2x+1) L^2_{2(m+x)+1})
                //   = (1-eta) t^2 (1-t^2) ||u_{2(m+x)+1}||^2 / ((2x+1) ||u_{2(m+x)}||^2)
                leakage = loss * t * t * r2 *
                          std::exp(log_odd_norm_sq - even_branch.log_norm_sq) /
                          (2.0 * x + 1.0);
            }
        }
        num.add(w * ip * ip);
        den.add(w * (1.0 + leakage));
        x_used = x;
        if (w < 1e-18 * den.value()) break;
        if (loss == 0.0) break;
    }
    if (std::isnan(log_scale) || !(den.value() > 0.0))
        throw impossible_outcome_error("imperfect_fidelity_closed: outcome has probability zero");
    return {num.value() / den.value(), x_used};
}

inline double imperfect_fidelity_closed(const SchemeConfig& cfg, int m, const DetectorModel& det,
                                        const CatTarget& target, std::size_t n_max = 256) {
    return imperfect_fidelity_closed_detailed(cfg, m, det, target, n_max).fidelity;
}

/// First- and second-order coefficients of the inefficiency expansion
/// Fid(eta) = Fid(1) (1 - (1-eta) g1 + (1-eta)^2 g2 + ...), vacuum-ancilla
/// even branch. g1 = t^2 (1-t^2) L^2_{2m} / L^2_{2m+1}; g2 follows the printed
/// second-order expression.
inline SeriesCoefficients series_coefficients(const SchemeConfig& cfg, int m,
                                              const CatTarget& target, std::size_t n_max = 256) {
    if (cfg.ancilla != Ancilla::vacuum)
        throw std::invalid_argument("series_coefficients: vacuum-ancilla branch only");
    if (target.parity != Parity::even)
        throw std::invalid_argument("series_coefficients: even herald pairs with the even cat");
    const double t = cfg.transmittance;
    const double r2 = 1.0 - t * t;
    const ConditionOptions relaxed{std::numeric_limits<double>::infinity()};

    const ConditionResult even_m = condition_vacuum_even(cfg, m, n_max, relaxed);
    const ConditionResult even_m1 = condition_vacuum_even(cfg, m + 1, n_max, relaxed);
    const double log_odd = detail::branch_log_norm_sq(cfg, 2 * m + 1, n_max);
    if (!even_m.state || !even_m1.state || !std::isfinite(log_odd))
        throw impossible_outcome_error("series_coefficients: degenerate branch");

    // L^2_a / L^2_b = ||u_b||^2 / ||u_a||^2
    const double l2m_over_l2m1 = std::exp(log_odd - even_m.log_norm_sq);
    const double l2m_over_l2m2 = std::exp(even_m1.log_norm_sq - even_m.log_norm_sq);

    SeriesCoefficients out;
    out.g1 = t * t * r2 * l2m_over_l2m1;

    const FockVector cat = cat_state(target, n_max);
    const double ip_m = inner_product(*even_m.state, cat);
    const double ip_m1 = inner_product(*even_m1.state, cat);
    const double fid_ratio = ip_m != 0.0 ? (ip_m1 * ip_m1) / (ip_m * ip_m) : 0.0;
    out.g2 = r2 * r2 * l2m_over_l2m2 / 2.0 *
             (2.0 * std::pow(t, 4.0) * l2m_over_l2m1 + fid_ratio - 1.0);
    return out;
}

/// Branch-selected first-order lower bound on the inefficient-detector
/// fidelity, in terms of the ideal fidelity, the ideal heralded state's mean
/// photon number and the herald index:
///   vacuum/even  n=2m  : F(1) (1 - (1-eta) t^2(1-t^2) tanh^2 s (<n> + (m+1)^2))
///   photon/odd   n=2m+1: F(1) (1 - (1-eta) t^2(1-t^2) tanh^2 s (2(m+1)/(2m+1))^2 (<n> + 4m(1+m)))
///   vacuum/odd   n=2m+1: F(1) (1 - (1-eta) ((1-t^2)/t^2) <n>)
///   photon/even  n=2m  : F(1) (1 - (1-eta) ((1-t^2)/t^2) ((2m+1)/(2m))^2 <n>)
/// Stated validity requires t > 0.4; smaller t is refused, not silently wrong.
inline double lower_bound(const SchemeConfig& cfg, int n, const DetectorModel& det,
                          const CatTarget& target, double mean_n, std::size_t n_max = 256) {
    if (!(cfg.transmittance > 0.4))
        throw validity_error("lower_bound: stated validity requires t > 0.4");
    if (n < 0) throw std::invalid_argument("lower_bound: herald count must be >= 0");
    if (branch_parity(cfg.ancilla, n) != target.parity)
        throw std::invalid_argument("lower_bound: target parity does not match the branch parity");
    const double t = cfg.transmittance;
    const double r2 = 1.0 - t * t;
    const double th2 = std::pow(std::tanh(cfg.squeeze.value()), 2.0);
    const int m = n / 2;

    double coeff;
    if (cfg.ancilla == Ancilla::vacuum && n % 2 == 0) {
        coeff = t * t * r2 * th2 * (mean_n + static_cast<double>((m + 1) * (m + 1)));
    } else if (cfg.ancilla == Ancilla::vacuum) {
        coeff = (r2 / (t * t)) * mean_n;
    } else if (n % 2 == 1) {
        const double shape = std::pow(2.0 * (m + 1) / (2.0 * m + 1.0), 2.0);
        coeff = t * t * r2 * th2 * shape * (mean_n + 4.0 * m * (1.0 + m));
    } else {
        if (m < 1)
            throw std::invalid_argument("lower_bound: photon-ancilla even branch requires n >= 2");
        const double shape = std::pow((2.0 * m + 1.0) / (2.0 * m), 2.0);
        coeff = (r2 / (t * t)) * shape * mean_n;
    }

    const ConditionResult ideal = condition(cfg, n, n_max);
    const double fid1 = herald_fidelity(ideal, target).fidelity;
    return fid1 * (1.0 - (1.0 - det.eta) * coeff);
}

} // namespace catshaper
