#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "catshaper/conditioning.hpp"
#include "catshaper/errors.hpp"
#include "catshaper/fock.hpp"

namespace catshaper {

/// Deterministic search specification: coarse grid over the (s,t) box plus a
/// budgeted simplex refinement. Identical policies give bit-identical results.
struct SearchPolicy {
    int grid_s = 60;
    int grid_t = 60;
    double s_lo = 0.05;
    double s_hi = 2.5;
    double t_lo = 0.3;
    double t_hi = 0.999;
    int refine_budget = 200;
    std::uint64_t seed = 0;          ///< recorded for provenance; the search itself is deterministic
    std::size_t n_max_base = 256;
};

enum class Regime { fid_optimal, prob_optimal };

inline const char* to_string(Regime r) { return r == Regime::fid_optimal ? "fid_optimal" : "prob_optimal"; }

struct LocalOptimum {
    double s = 0.0, t = 0.0, fidelity = 0.0, probability = 0.0;
};

struct OptimizationResult {
    double s = 0.0;
    double t = 0.0;
    double fidelity = 0.0;
    double probability = 0.0;
    Regime regime = Regime::fid_optimal;
    long evaluations = 0;
    std::size_t n_max_used = 0;
    bool feasible = true;            ///< false when no point reaches the requested floor
    double floor = 0.0;              ///< the floor used (prob_optimal regime)
    /// Grid-local maxima within 0.005 of the governing level, kept so abrupt
    /// optimum jumps between ridges stay auditable.
    std::vector<LocalOptimum> local_optima;
};

struct IsolinePoint {
    double s = 0.0, t = 0.0;
};

struct IsolineSet {
    double level = 0.0;
    std::vector<std::vector<IsolinePoint>> polylines;
};

struct ThresholdResult {
    int n = 0;
    double beta_threshold = 0.0;
    double fidelity_below = 0.0;   ///< re-evaluated max fidelity at threshold - resolution
    double fidelity_above = 0.0;   ///< re-evaluated max fidelity at threshold + resolution
    bool bracket_valid = false;
    long evaluations = 0;
};

namespace detail {

/// Truncation adequate for every evaluation in the box: base, the large-n
/// escalation, SMSV tail adequacy at the box's largest squeezing and cat tail
/// adequacy for the target size.
inline std::size_t policy_n_max(const SearchPolicy& p, int n, double beta) {
    std::size_t nm = p.n_max_base;
    if (n >= 24) nm = std::max<std::size_t>(nm, 320);
    const double th2 = std::pow(std::tanh(p.s_hi), 2.0);
    if (th2 > 0.0 && th2 < 1.0) {
        const double l_min = std::ceil(std::log(1e-10 * (1.0 - th2)) / std::log(th2));
        if (l_min > 0.0) nm = std::max(nm, 2 * static_cast<std::size_t>(l_min) + 16);
    }
    nm = std::max(nm, static_cast<std::size_t>(std::ceil(beta * beta + 10.0 * beta)) + 24);
    return nm;
}

struct ObjectiveSample {
    double fidelity = -1.0;
    double probability = 0.0;
};

/// Fidelity/probability of one heralded branch against a fixed cat target.
/// The cat vector is built once; truncation checks are disabled because
/// policy_n_max already sizes the box's worst case.
class BranchObjective {
public:
    BranchObjective(Ancilla ancilla, int n, const CatTarget& target, std::size_t n_max)
        : ancilla_(ancilla), n_(n), n_max_(n_max), cat_(cat_state(target, n_max)) {}

    ObjectiveSample eval(double s, double t) const {
        ++evals_;
        ObjectiveSample out;
        try {
            const SchemeConfig cfg(SqueezeParam(s), t, ancilla_);
            const ConditionResult res =
                condition(cfg, n_, n_max_, {std::numeric_limits<double>::infinity()});
            out.probability = res.probability;
            if (res.state && res.state->parity() == cat_.parity()) {
                const double ip = inner_product(*res.state, cat_);
                out.fidelity = ip * ip;
            } else {
                out.fidelity = 0.0;
            }
        } catch (const std::exception&) {
            out.fidelity = -1.0;
            out.probability = 0.0;
        }
        return out;
    }

    long evaluations() const { return evals_; }
    std::size_t n_max() const { return n_max_; }

private:
    Ancilla ancilla_;
    int n_;
    std::size_t n_max_;
    FockVector cat_;
    mutable long evals_ = 0;
};

struct GridData {
    std::vector<double> s_vals, t_vals;
    std::vector<ObjectiveSample> cells;  // [i * t_vals.size() + j]
    const ObjectiveSample& at(std::size_t i, std::size_t j) const {
        return cells[i * t_vals.size() + j];
    }
};

inline GridData run_grid(const BranchObjective& obj, const SearchPolicy& p) {
    if (p.grid_s < 2 || p.grid_t < 2)
        throw std::invalid_argument("SearchPolicy: grid must be at least 2x2");
    GridData g;
    g.s_vals.resize(static_cast<std::size_t>(p.grid_s));
    g.t_vals.resize(static_cast<std::size_t>(p.grid_t));
    for (int i = 0; i < p.grid_s; ++i)
        g.s_vals[static_cast<std::size_t>(i)] = p.s_lo + (p.s_hi - p.s_lo) * i / (p.grid_s - 1);
    for (int j = 0; j < p.grid_t; ++j)
        g.t_vals[static_cast<std::size_t>(j)] = p.t_lo + (p.t_hi - p.t_lo) * j / (p.grid_t - 1);
    g.cells.resize(g.s_vals.size() * g.t_vals.size());
    for (std::size_t i = 0; i < g.s_vals.size(); ++i)
        for (std::size_t j = 0; j < g.t_vals.size(); ++j)
            g.cells[i * g.t_vals.size() + j] = obj.eval(g.s_vals[i], g.t_vals[j]);
    return g;
}

/// Deterministic box-clamped Nelder-Mead maximization in two variables.
template <typename F>
inline std::pair<std::array<double, 2>, double> nelder_mead_max(F&& f, std::array<double, 2> x0,
                                                                std::array<double, 2> h,
                                                                std::array<double, 2> lo,
                                                                std::array<double, 2> hi, int budget) {
    const auto clamp = [&](std::array<double, 2> x) {
        x[0] = std::clamp(x[0], lo[0], hi[0]);
        x[1] = std::clamp(x[1], lo[1], hi[1]);
        return x;
    };
    int used = 0;
    const auto eval = [&](const std::array<double, 2>& x) {
        ++used;
        return f(x[0], x[1]);
    };

    std::array<std::array<double, 2>, 3> xs{clamp(x0),
                                            clamp({x0[0] + h[0], x0[1]}),
                                            clamp({x0[0], x0[1] + h[1]})};
    std::array<double, 3> fs{};
    for (int i = 0; i < 3 && used < budget; ++i) fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);

    const auto order = [&] {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (fs[static_cast<std::size_t>(a)] != fs[static_cast<std::size_t>(b)])
                return fs[static_cast<std::size_t>(a)] > fs[static_cast<std::size_t>(b)];
            return a < b;
        });
        std::array<std::array<double, 2>, 3> xs2;
        std::array<double, 3> fs2;
        for (int k = 0; k < 3; ++k) {
            xs2[static_cast<std::size_t>(k)] = xs[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            fs2[static_cast<std::size_t>(k)] = fs[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        }
        xs = xs2;
        fs = fs2;
    };

    while (used < budget) {
        order();
        const double diam = std::max(std::abs(xs[0][0] - xs[2][0]) + std::abs(xs[0][1] - xs[2][1]),
                                     std::abs(xs[0][0] - xs[1][0]) + std::abs(xs[0][1] - xs[1][1]));
        if (diam < 1e-11) break;
        const std::array<double, 2> centroid{(xs[0][0] + xs[1][0]) / 2.0, (xs[0][1] + xs[1][1]) / 2.0};
        const auto mix = [&](double c) {
            return clamp({centroid[0] + c * (centroid[0] - xs[2][0]),
                          centroid[1] + c * (centroid[1] - xs[2][1])});
        };
        const std::array<double, 2> xr = mix(1.0);
        const double fr = eval(xr);
        if (fr > fs[0]) {
            if (used >= budget) { if (fr > fs[0]) { xs[2] = xr; fs[2] = fr; } break; }
            const std::array<double, 2> xe = mix(2.0);
            const double fe = eval(xe);
            if (fe > fr) { xs[2] = xe; fs[2] = fe; }
            else { xs[2] = xr; fs[2] = fr; }
        } else if (fr > fs[1]) {
            xs[2] = xr;
            fs[2] = fr;
        } else {
            if (used >= budget) break;
            const std::array<double, 2> xc = mix(0.5);
            const double fc = eval(xc);
            if (fc > fs[2]) {
                xs[2] = xc;
                fs[2] = fc;
            } else {
                for (int k = 1; k < 3 && used < budget; ++k) {
                    xs[static_cast<std::size_t>(k)] = {
                        (xs[static_cast<std::size_t>(k)][0] + xs[0][0]) / 2.0,
                        (xs[static_cast<std::size_t>(k)][1] + xs[0][1]) / 2.0};
                    fs[static_cast<std::size_t>(k)] = eval(xs[static_cast<std::size_t>(k)]);
                }
            }
        }
    }
    order();
    return {xs[0], fs[0]};
}

inline std::vector<LocalOptimum> grid_local_optima(const GridData& g, double threshold) {
    std::vector<LocalOptimum> out;
    const std::size_t ns = g.s_vals.size(), nt = g.t_vals.size();
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            const double f = g.at(i, j).fidelity;
            if (f < threshold) continue;
            bool peak = true;
            for (int di = -1; di <= 1 && peak; ++di) {
                for (int dj = -1; dj <= 1 && peak; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
                    const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
                    if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(ns) ||
                        jj >= static_cast<std::ptrdiff_t>(nt))
                        continue;
                    if (g.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)).fidelity > f)
                        peak = false;
                }
            }
            if (peak)
                out.push_back({g.s_vals[i], g.t_vals[j], f, g.at(i, j).probability});
        }
    }
    return out;
}

} // namespace detail

/// Highest fidelity of branch (ancilla, n) against the target over the policy
/// box, found by the coarse grid plus simplex refinement. An optional warm
/// hint (e.g. the previous point of a beta sweep) seeds a second refinement;
/// the better of the two wins.
inline OptimizationResult maximize_fidelity(Ancilla ancilla, int n, const CatTarget& target,
                                            const SearchPolicy& policy = {},
                                            const std::optional<IsolinePoint>& warm_hint = std::nullopt) {
    if (n < 0) throw std::invalid_argument("maximize_fidelity: herald count must be >= 0");
    if (ancilla == Ancilla::single_photon && n != 0 && n % 2 == 0 && n / 2 < 1)
        throw std::invalid_argument("maximize_fidelity: invalid branch");
    if (branch_parity(ancilla, n) != target.parity)
        throw std::invalid_argument("maximize_fidelity: target parity does not match branch (" +
                                    std::string(to_string(branch_parity(ancilla, n))) + " expected)");

    const std::size_t n_max = detail::policy_n_max(policy, n, target.beta);
    const detail::BranchObjective obj(ancilla, n, target, n_max);
    const detail::GridData grid = detail::run_grid(obj, policy);

    std::size_t bi = 0, bj = 0;
    double best = -2.0;
    for (std::size_t i = 0; i < grid.s_vals.size(); ++i) {
        for (std::size_t j = 0; j < grid.t_vals.size(); ++j) {
            if (grid.at(i, j).fidelity > best) {
                best = grid.at(i, j).fidelity;
                bi = i;
                bj = j;
            }
        }
    }

    const std::array<double, 2> lo{policy.s_lo, policy.t_lo}, hi{policy.s_hi, policy.t_hi};
    const std::array<double, 2> h{(policy.s_hi - policy.s_lo) / (policy.grid_s - 1),
                                  (policy.t_hi - policy.t_lo) / (policy.grid_t - 1)};
    const auto fid_fn = [&](double s, double t) { return obj.eval(s, t).fidelity; };
    auto [xb, fb] = detail::nelder_mead_max(fid_fn, {grid.s_vals[bi], grid.t_vals[bj]}, h, lo, hi,
                                            policy.refine_budget);
    if (warm_hint) {
        auto [xw, fw] = detail::nelder_mead_max(fid_fn, {warm_hint->s, warm_hint->t}, h, lo, hi,
                                                policy.refine_budget);
        if (fw > fb) {
            xb = xw;
            fb = fw;
        }
    }

    OptimizationResult res;
    res.regime = Regime::fid_optimal;
    res.s = xb[0];
    res.t = xb[1];
    const detail::ObjectiveSample final_sample = obj.eval(res.s, res.t);
    res.fidelity = final_sample.fidelity;
    res.probability = final_sample.probability;
    res.n_max_used = n_max;
    res.local_optima = detail::grid_local_optima(grid, res.fidelity - 0.005);
    res.evaluations = obj.evaluations();
    return res;
}

/// Highest success probability subject to fidelity >= floor. The feasible
/// region is located on the grid, refined with a floor-violation penalty, and
/// the fidelity optimum is kept as a feasible fallback so the probability of
/// the returned point never drops below it. An unreachable floor yields an
/// explicit infeasible result carrying the best fidelity found.
inline OptimizationResult maximize_probability_with_floor(Ancilla ancilla, int n,
                                                          const CatTarget& target,
                                                          double floor = 0.99,
                                                          const SearchPolicy& policy = {}) {
    if (branch_parity(ancilla, n) != target.parity)
        throw std::invalid_argument("maximize_probability_with_floor: target parity mismatch");
    const std::size_t n_max = detail::policy_n_max(policy, n, target.beta);
    const detail::BranchObjective obj(ancilla, n, target, n_max);
    const detail::GridData grid = detail::run_grid(obj, policy);

    std::size_t fi = 0, fj = 0;
    double best_fid = -2.0;
    std::ptrdiff_t pi = -1, pj = -1;
    double best_prob = -1.0;
    for (std::size_t i = 0; i < grid.s_vals.size(); ++i) {
        for (std::size_t j = 0; j < grid.t_vals.size(); ++j) {
            const detail::ObjectiveSample& c = grid.at(i, j);
            if (c.fidelity > best_fid) {
                best_fid = c.fidelity;
                fi = i;
                fj = j;
            }
            if (c.fidelity >= floor && c.probability > best_prob) {
                best_prob = c.probability;
                pi = static_cast<std::ptrdiff_t>(i);
                pj = static_cast<std::ptrdiff_t>(j);
            }
        }
    }

    const std::array<double, 2> lo{policy.s_lo, policy.t_lo}, hi{policy.s_hi, policy.t_hi};
    const std::array<double, 2> h{(policy.s_hi - policy.s_lo) / (policy.grid_s - 1),
                                  (policy.t_hi - policy.t_lo) / (policy.grid_t - 1)};
    const auto fid_fn = [&](double s, double t) { return obj.eval(s, t).fidelity; };

    // Refined fidelity optimum: decides feasibility and serves as fallback.
    auto [xf, ff] = detail::nelder_mead_max(fid_fn, {grid.s_vals[fi], grid.t_vals[fj]}, h, lo, hi,
                                            policy.refine_budget);
    OptimizationResult res;
    res.regime = Regime::prob_optimal;
    res.floor = floor;
    res.n_max_used = n_max;
    if (ff < floor) {
        res.feasible = false;
        res.s = xf[0];
        res.t = xf[1];
        const detail::ObjectiveSample sample = obj.eval(res.s, res.t);
        res.fidelity = sample.fidelity;
        res.probability = sample.probability;
        res.local_optima = detail::grid_local_optima(grid, floor - 0.005);
        res.evaluations = obj.evaluations();
        return res;
    }

    const auto penalized = [&](double s, double t) {
        const detail::ObjectiveSample c = obj.eval(s, t);
        const double logp = c.probability > 0.0 ? std::log10(c.probability) : -400.0;
        const double violation = c.fidelity < floor ? (floor - c.fidelity) : 0.0;
        return logp - 1e6 * violation;
    };
    std::array<double, 2> start = pi >= 0
                                      ? std::array<double, 2>{grid.s_vals[static_cast<std::size_t>(pi)],
                                                              grid.t_vals[static_cast<std::size_t>(pj)]}
                                      : xf;
    auto [xp, fp] = detail::nelder_mead_max(penalized, start, h, lo, hi, policy.refine_budget);
    (void)fp;

    detail::ObjectiveSample cand = obj.eval(xp[0], xp[1]);
    detail::ObjectiveSample fall = obj.eval(xf[0], xf[1]);
    const bool cand_ok = cand.fidelity >= floor - 1e-12;
    if (!cand_ok || fall.probability > cand.probability) {
        xp = xf;
        cand = fall;
    }
    res.s = xp[0];
    res.t = xp[1];
    res.fidelity = cand.fidelity;
    res.probability = cand.probability;
    res.local_optima = detail::grid_local_optima(grid, floor - 0.005);
    res.evaluations = obj.evaluations();
    return res;
}

namespace detail {

struct EdgeKey {
    int orient;  // 0: along s at fixed t index, 1: along t at fixed s index
    std::size_t i, j;
    bool operator<(const EdgeKey& o) const {
        if (orient != o.orient) return orient < o.orient;
        if (i != o.i) return i < o.i;
        return j < o.j;
    }
};

} // namespace detail

/// Level-set polylines of the branch fidelity over the policy grid, extracted
/// marching-squares style; every emitted vertex is bisection-refined along its
/// grid edge until |F - level| <= 1e-4.
inline IsolineSet fidelity_isolines(Ancilla ancilla, int n, const CatTarget& target, double level,
                                    const SearchPolicy& policy = {}) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("fidelity_isolines: level must be in (0,1)");
    if (branch_parity(ancilla, n) != target.parity)
        throw std::invalid_argument("fidelity_isolines: target parity mismatch");
    const std::size_t n_max = detail::policy_n_max(policy, n, target.beta);
    const detail::BranchObjective obj(ancilla, n, target, n_max);
    const detail::GridData grid = detail::run_grid(obj, policy);
    const std::size_t ns = grid.s_vals.size(), nt = grid.t_vals.size();

    const auto fid_at = [&](double s, double t) { return obj.eval(s, t).fidelity; };
    const auto refine_edge = [&](double s0, double t0, double s1, double t1,
                                 double f0) -> IsolinePoint {
        double a = 0.0, b = 1.0, fa = f0;
        IsolinePoint best{s0 + (s1 - s0) * 0.5, t0 + (t1 - t0) * 0.5};
        for (int it = 0; it < 60; ++it) {
            const double mid = (a + b) / 2.0;
            const double sm = s0 + (s1 - s0) * mid, tm = t0 + (t1 - t0) * mid;
            const double fm = fid_at(sm, tm);
            best = {sm, tm};
            if (std::abs(fm - level) <= 1e-4) break;
            if ((fa - level) * (fm - level) <= 0.0) {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        return best;
    };

    // Refined crossing per grid edge (shared between neighbor cells).
    std::map<detail::EdgeKey, IsolinePoint> crossings;
    const auto edge_point = [&](int orient, std::size_t i, std::size_t j) -> const IsolinePoint* {
        const detail::EdgeKey key{orient, i, j};
        const auto it = crossings.find(key);
        if (it != crossings.end()) return &it->second;
        double f0, f1, s0, t0, s1, t1;
        if (orient == 0) {
            f0 = grid.at(i, j).fidelity;
            f1 = grid.at(i + 1, j).fidelity;
            s0 = grid.s_vals[i]; t0 = grid.t_vals[j];
            s1 = grid.s_vals[i + 1]; t1 = grid.t_vals[j];
        } else {
            f0 = grid.at(i, j).fidelity;
            f1 = grid.at(i, j + 1).fidelity;
            s0 = grid.s_vals[i]; t0 = grid.t_vals[j];
            s1 = grid.s_vals[i]; t1 = grid.t_vals[j + 1];
        }
        if ((f0 - level) * (f1 - level) > 0.0 || (f0 == f1)) return nullptr;
        return &crossings.emplace(key, refine_edge(s0, t0, s1, t1, f0)).first->second;
    };

    // Cell segments as pairs of edge keys.
    std::vector<std::pair<detail::EdgeKey, detail::EdgeKey>> segments;
    for (std::size_t i = 0; i + 1 < ns; ++i) {
        for (std::size_t j = 0; j + 1 < nt; ++j) {
            const bool c00 = grid.at(i, j).fidelity >= level;
            const bool c10 = grid.at(i + 1, j).fidelity >= level;
            const bool c01 = grid.at(i, j + 1).fidelity >= level;
            const bool c11 = grid.at(i + 1, j + 1).fidelity >= level;
            const detail::EdgeKey south{0, i, j}, north{0, i, j + 1}, west{1, i, j}, east{1, i + 1, j};
            std::vector<detail::EdgeKey> cut;
            if (c00 != c10) cut.push_back(south);
            if (c01 != c11) cut.push_back(north);
            if (c00 != c01) cut.push_back(west);
            if (c10 != c11) cut.push_back(east);
            if (cut.size() == 2) {
                segments.emplace_back(cut[0], cut[1]);
            } else if (cut.size() == 4) {
                // Saddle: disambiguate with the cell-center value.
                const double fc = (grid.at(i, j).fidelity + grid.at(i + 1, j).fidelity +
                                   grid.at(i, j + 1).fidelity + grid.at(i + 1, j + 1).fidelity) /
                                  4.0;
                if ((fc >= level) == c00) {
                    segments.emplace_back(south, east);
                    segments.emplace_back(north, west);
                } else {
                    segments.emplace_back(south, west);
                    segments.emplace_back(north, east);
                }
            }
        }
    }

    // Chain segments into polylines over shared edges.
    std::map<detail::EdgeKey, std::vector<std::size_t>> adj;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        adj[segments[k].first].push_back(k);
        adj[segments[k].second].push_back(k);
    }
    std::vector<bool> seen(segments.size(), false);
    IsolineSet out;
    out.level = level;
    const auto walk = [&](std::size_t seg0, const detail::EdgeKey& start_edge) {
        std::vector<detail::EdgeKey> chain{start_edge};
        std::size_t seg = seg0;
        detail::EdgeKey edge = start_edge;
        while (true) {
            seen[seg] = true;
            const detail::EdgeKey next =
                segments[seg].first < edge || edge < segments[seg].first ? segments[seg].first
                                                                         : segments[seg].second;
            chain.push_back(next);
            edge = next;
            std::size_t cont = segments.size();
            for (std::size_t cand : adj[edge])
                if (!seen[cand]) cont = cand;
            if (cont == segments.size()) break;
            seg = cont;
        }
        std::vector<IsolinePoint> line;
        for (const detail::EdgeKey& e : chain) {
            const IsolinePoint* p = edge_point(e.orient, e.i, e.j);
            if (p) line.push_back(*p);
        }
        if (line.size() >= 2) out.polylines.push_back(std::move(line));
    };
    // Open chains first (degree-1 edges), then remaining loops.
    for (std::size_t k = 0; k < segments.size(); ++k) {
        if (seen[k]) continue;
        const bool first_open = adj[segments[k].first].size() == 1;
        const bool second_open = adj[segments[k].second].size() == 1;
        if (first_open)
            walk(k, segments[k].first);
        else if (second_open)
            walk(k, segments[k].second);
    }
    for (std::size_t k = 0; k < segments.size(); ++k)
        if (!seen[k]) walk(k, segments[k].first);
    return out;
}

/// Largest cat size whose best achievable fidelity at herald n still reaches
/// the floor, located by bisection over beta with warm-started refinements.
/// The decreasing trend is validated by re-evaluating both bracket edges.
inline ThresholdResult beta_threshold(Ancilla ancilla, int n, double floor = 0.99,
                                      double resolution = 0.05, const SearchPolicy& policy = {},
                                      double beta_lo = 0.8, double beta_hi_cap = 8.0) {
    if (!(resolution > 0.0)) throw std::invalid_argument("beta_threshold: resolution must be > 0");
    const Parity parity = branch_parity(ancilla, n);
    long evals = 0;
    std::optional<IsolinePoint> warm;
    const auto max_fid = [&](double beta) {
        const OptimizationResult r =
            maximize_fidelity(ancilla, n, CatTarget(beta, parity), policy, warm);
        evals += r.evaluations;
        warm = IsolinePoint{r.s, r.t};
        return r.fidelity;
    };

    double lo = beta_lo;
    double f_lo = max_fid(lo);
    if (f_lo < floor)
        throw bracketing_error("beta_threshold: max fidelity " + std::to_string(f_lo) +
                               " below floor already at beta=" + std::to_string(lo));
    double hi = lo;
    double f_hi = f_lo;
    while (f_hi >= floor) {
        hi += 1.0;
        if (hi > beta_hi_cap)
            throw bracketing_error("beta_threshold: no upper bracket below beta=" +
                                   std::to_string(beta_hi_cap));
        f_hi = max_fid(hi);
    }
    lo = hi - 1.0;
    while (hi - lo > resolution) {
        const double mid = (lo + hi) / 2.0;
        if (max_fid(mid) >= floor)
            lo = mid;
        else
            hi = mid;
    }

    ThresholdResult out;
    out.n = n;
    out.beta_threshold = lo;
    out.fidelity_below = max_fid(std::max(beta_lo, lo - resolution));
    out.fidelity_above = max_fid(lo + resolution);
    out.bracket_valid = out.fidelity_below >= floor && out.fidelity_above < floor;
    out.evaluations = evals;
    return out;
}

} // namespace catshaper
