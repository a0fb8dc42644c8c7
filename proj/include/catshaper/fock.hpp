#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "catshaper/errors.hpp"

namespace catshaper {

enum class Parity { even, odd, mixed };

inline const char* to_string(Parity p) {
    switch (p) {
        case Parity::even: return "even";
        case Parity::odd: return "odd";
        default: return "mixed";
    }
}

namespace detail {

/// Compensated (Kahan) accumulator.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double kahan_total(std::span<const double> xs) {
    KahanSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

} // namespace detail

/// ln(n!) from a table of compensated partial sums of ln k (lgamma beyond).
/// Accurate to well below 1e-12 relative error.
inline double log_factorial(int n) {
    if (n < 0) throw std::invalid_argument("log_factorial: n must be >= 0");
    static std::vector<double> table;
    static std::once_flag once;
    std::call_once(once, [] {
        constexpr int table_size = 8192;
        table.resize(table_size);
        detail::KahanSum acc;
        table[0] = 0.0;
        for (int k = 1; k < table_size; ++k) {
            acc.add(std::log(static_cast<double>(k)));
            table[k] = acc.value();
        }
    });
    if (static_cast<std::size_t>(n) < table.size()) return table[static_cast<std::size_t>(n)];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

/// ln C(n, k) for 0 <= k <= n.
inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("log_binomial: need 0 <= k <= n");
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// Truncated single-mode state with real amplitudes indexed by photon number
/// 0..n_max and an explicit parity tag. Parity is validated at construction:
/// an even (odd) vector must have exactly zero amplitude on every odd (even)
/// index.
class FockVector {
public:
    FockVector(std::vector<double> amplitudes, Parity parity)
        : amps_(std::move(amplitudes)), parity_(parity) {
        if (amps_.empty()) throw std::invalid_argument("FockVector: empty amplitude sequence");
        validate_parity();
    }

    static FockVector zero(std::size_t n_max, Parity parity) {
        return FockVector(std::vector<double>(n_max + 1, 0.0), parity);
    }

    /// Pure number state |n>.
    static FockVector basis(std::size_t n_max, std::size_t n) {
        if (n > n_max) throw std::invalid_argument("FockVector::basis: n exceeds n_max");
        std::vector<double> a(n_max + 1, 0.0);
        a[n] = 1.0;
        return FockVector(std::move(a), n % 2 == 0 ? Parity::even : Parity::odd);
    }

    std::size_t n_max() const { return amps_.size() - 1; }
    std::size_t size() const { return amps_.size(); }
    Parity parity() const { return parity_; }
    double operator[](std::size_t k) const { return amps_[k]; }
    std::span<const double> amplitudes() const { return amps_; }

    double norm_sq() const {
        detail::KahanSum acc;
        for (double a : amps_) acc.add(a * a);
        return acc.value();
    }
    double norm() const { return std::sqrt(norm_sq()); }

    FockVector normalized() const {
        const double n = norm();
        if (n <= 0.0) throw std::invalid_argument("FockVector::normalized: zero vector");
        std::vector<double> a(amps_);
        for (double& x : a) x /= n;
        return FockVector(std::move(a), parity_);
    }

    /// Flips the global sign so the lowest occupied amplitude is non-negative.
    /// "Occupied" uses a relative threshold so a near-zero leading entry does
    /// not decide the sign of the whole vector.
    FockVector canonical_sign() const {
        double peak = 0.0;
        for (double a : amps_) peak = std::max(peak, std::abs(a));
        if (peak == 0.0) return *this;
        const double thresh = 1e-12 * peak;
        for (double a : amps_) {
            if (std::abs(a) > thresh) {
                if (a >= 0.0) return *this;
                std::vector<double> flipped(amps_);
                for (double& x : flipped) x = -x;
                return FockVector(std::move(flipped), parity_);
            }
        }
        return *this;
    }

private:
    void validate_parity() const {
        if (parity_ == Parity::mixed) return;
        const std::size_t start = parity_ == Parity::even ? 1 : 0;
        for (std::size_t k = start; k < amps_.size(); k += 2) {
            if (amps_[k] != 0.0)
                throw std::invalid_argument("FockVector: amplitude at index " + std::to_string(k) +
                                            " violates declared " + std::string(to_string(parity_)) +
                                            " parity");
        }
    }

    std::vector<double> amps_;
    Parity parity_;
};

/// Infers the exact-support parity of an amplitude sequence.
inline Parity infer_parity(std::span<const double> amps) {
    bool has_even = false, has_odd = false;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        if (amps[k] != 0.0) (k % 2 == 0 ? has_even : has_odd) = true;
    }
    if (has_even && has_odd) return Parity::mixed;
    if (has_odd) return Parity::odd;
    return Parity::even;
}

/// Dimensionless squeezing parameter, s >= 0 (so tanh s in [0,1)).
class SqueezeParam {
public:
    explicit SqueezeParam(double s) : s_(s) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw std::invalid_argument("SqueezeParam: s must be finite and >= 0");
    }
    double value() const { return s_; }

private:
    double s_;
};

/// Cat-state specification: coherent amplitude beta > 0 and target parity.
struct CatTarget {
    double beta;
    Parity parity;

    CatTarget(double beta_, Parity parity_) : beta(beta_), parity(parity_) {
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw std::invalid_argument("CatTarget: beta must be finite and > 0");
        if (parity == Parity::mixed)
            throw std::invalid_argument("CatTarget: parity must be even or odd");
    }
};

/// Squeezed-vacuum amplitudes b_{2l} = (cosh s)^{-1/2} (tanh s / 2)^l sqrt((2l)!)/l!,
/// evaluated as exp of compensated log sums. Throws truncation_error when the
/// retained norm falls below 1 - tail_tol.
inline FockVector smsv_state(SqueezeParam s, std::size_t n_max, double tail_tol = 1e-10) {
    std::vector<double> a(n_max + 1, 0.0);
    const double sv = s.value();
    if (sv == 0.0) {
        a[0] = 1.0;
        return FockVector(std::move(a), Parity::even);
    }
    const double log_pref = -0.5 * std::log(std::cosh(sv));
    const double log_ratio = std::log(std::tanh(sv) / 2.0);
    detail::KahanSum norm_acc;
    for (std::size_t l = 0; 2 * l <= n_max; ++l) {
        const double ln = log_pref + static_cast<double>(l) * log_ratio +
                          0.5 * log_factorial(static_cast<int>(2 * l)) -
                          log_factorial(static_cast<int>(l));
        a[2 * l] = std::exp(ln);
        norm_acc.add(a[2 * l] * a[2 * l]);
    }
    if (norm_acc.value() < 1.0 - tail_tol) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "smsv_state: truncated tail mass %.3g exceeds tail_tol %.3g at n_max=%zu",
                      1.0 - norm_acc.value(), tail_tol, n_max);
        throw truncation_error(msg);
    }
    return FockVector(std::move(a), Parity::even);
}

/// Even/odd Schroedinger cat amplitudes with the analytic (untruncated)
/// normalization factors N+/-. Adequate truncation leaves the norm within
/// tail_tol of 1; inadequate truncation throws.
inline FockVector cat_state(const CatTarget& target, std::size_t n_max, double tail_tol = 1e-10) {
    const double b2 = target.beta * target.beta;
    if (static_cast<double>(n_max) < b2 + 10.0 * target.beta)
        throw truncation_error("cat_state: n_max=" + std::to_string(n_max) +
                               " below beta^2 + 10*beta; tail not captured");
    std::vector<double> a(n_max + 1, 0.0);
    // N+- = (2(1 -+ exp(-2 beta^2)))^{-1/2}; expm1 keeps the odd factor exact as beta -> 0.
    const double em = -std::expm1(-2.0 * b2);           // 1 - exp(-2 beta^2)
    const double ep = 2.0 - em;                          // 1 + exp(-2 beta^2)
    const double norm_factor = target.parity == Parity::even ? 1.0 / std::sqrt(2.0 * ep)
                                                             : 1.0 / std::sqrt(2.0 * em);
    const double log_pref = std::log(2.0 * norm_factor) - 0.5 * b2;
    const double log_beta = std::log(target.beta);
    const std::size_t start = target.parity == Parity::even ? 0 : 1;
    detail::KahanSum norm_acc;
    for (std::size_t j = start; j <= n_max; j += 2) {
        const double ln = log_pref + static_cast<double>(j) * log_beta -
                          0.5 * log_factorial(static_cast<int>(j));
        a[j] = std::exp(ln);
        norm_acc.add(a[j] * a[j]);
    }
    if (std::abs(norm_acc.value() - 1.0) > tail_tol)
        throw truncation_error("cat_state: truncated norm deviates from 1 by " +
                               std::to_string(std::abs(norm_acc.value() - 1.0)));
    return FockVector(std::move(a), target.parity);
}

/// Plain real inner product. Opposite pure parities return exactly 0.
inline double inner_product(const FockVector& a, const FockVector& b) {
    if (a.n_max() != b.n_max())
        throw std::invalid_argument("inner_product: dimension mismatch (" +
                                    std::to_string(a.n_max()) + " vs " + std::to_string(b.n_max()) + ")");
    if ((a.parity() == Parity::even && b.parity() == Parity::odd) ||
        (a.parity() == Parity::odd && b.parity() == Parity::even))
        return 0.0;
    detail::KahanSum acc;
    for (std::size_t k = 0; k <= a.n_max(); ++k) acc.add(a[k] * b[k]);
    return acc.value();
}

/// <n> of a normalized vector. Rejects inputs whose norm strays from 1.
inline double mean_photon_number(const FockVector& v) {
    if (std::abs(v.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("mean_photon_number: input not normalized (|norm-1| > 1e-8)");
    detail::KahanSum acc;
    for (std::size_t k = 0; k <= v.n_max(); ++k) acc.add(static_cast<double>(k) * v[k] * v[k]);
    return acc.value();
}

} // namespace catshaper
