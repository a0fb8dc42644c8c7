// Command-line front end: single-shot shaping queries, parameter sweeps,
// optimization runs, figure-data export and the consistency selfcheck.
//
// Exit codes: 0 ok, 1 selfcheck failure, 2 validation, 3 truncation,
// 4 infeasible, 5 unknown figure id.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "catshaper/catshaper.hpp"

namespace cs = catshaper;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSelfcheck = 1;
constexpr int kExitValidation = 2;
constexpr int kExitTruncation = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitUnknownFigure = 5;

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(const std::string& data) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
    } else {
        write_file(out_path, content);
    }
}

struct GlobalOptions {
    std::size_t n_max = 256;
    std::string format = "json";
    std::string out = "-";
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
    int effective_threads() const {
        if (threads > 0) return threads;
        const unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : static_cast<int>(hc);
    }
};

void add_global_options(CLI::App* cmd, GlobalOptions& g) {
    cmd->add_option("--n-max", g.n_max, "Base Fock truncation (escalated automatically when needed)")
        ->capture_default_str();
    cmd->add_option("--format", g.format, "Output format for single results: json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--out", g.out, "Output path ('-' for stdout; dataset commands use it as a prefix)")
        ->capture_default_str();
    cmd->add_option("--seed", g.seed, "Seed recorded in provenance (searches are deterministic)")
        ->capture_default_str();
    cmd->add_option("--threads", g.threads, "Worker threads for sweep/figure (0 = machine parallelism)")
        ->capture_default_str();
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int w = 0; w < nthreads; ++w) {
        pool.emplace_back([&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (first_error.empty()) first_error = e.what();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error(first_error);
}

cs::Ancilla parse_ancilla(const std::string& s) {
    if (s == "vacuum") return cs::Ancilla::vacuum;
    if (s == "photon" || s == "single_photon") return cs::Ancilla::single_photon;
    throw std::invalid_argument("ancilla must be 'vacuum' or 'photon'");
}

ordered_json provenance(const GlobalOptions& g, std::size_t n_max_used,
                        std::optional<int> x_max_used = std::nullopt,
                        std::optional<long> evaluations = std::nullopt) {
    ordered_json p;
    p["engine_version"] = cs::kVersion;
    p["n_max_used"] = n_max_used;
    if (x_max_used) p["x_max_used"] = *x_max_used;
    if (evaluations) p["evaluations"] = *evaluations;
    p["seed"] = g.seed;
    return p;
}

/// Serializes a record with a reproducibility hash over its payload.
std::string finalize_record(ordered_json record) {
    record["provenance"]["repro_hash"] = hash_hex(record.dump());
    return record.dump(2) + "\n";
}

std::string record_to_csv(const ordered_json& record) {
    // Single observation as a one-row CSV: flattened keys, full precision.
    std::vector<std::string> heads, vals;
    const std::function<void(const std::string&, const ordered_json&)> flatten =
        [&](const std::string& prefix, const ordered_json& node) {
            for (const auto& [key, value] : node.items()) {
                const std::string name = prefix.empty() ? key : prefix + "." + key;
                if (value.is_object()) {
                    flatten(name, value);
                } else if (value.is_array()) {
                    continue;  // state vectors etc. stay JSON-only
                } else {
                    heads.push_back(name);
                    vals.push_back(value.is_number_float() ? fmt17(value.get<double>())
                                                           : value.dump());
                }
            }
        };
    flatten("", record);
    std::string out;
    for (std::size_t i = 0; i < heads.size(); ++i) out += (i ? "," : "") + heads[i];
    out += "\n";
    for (std::size_t i = 0; i < vals.size(); ++i) out += (i ? "," : "") + vals[i];
    out += "\n";
    return out;
}

struct Csv {
    std::string data;
    explicit Csv(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) data += (i ? "," : "") + header[i];
        data += "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) data += (i ? "," : "") + cells[i];
        data += "\n";
    }
};

// ---------------------------------------------------------------- shape ----

struct ShapeArgs {
    double s = 0.5;
    double t = 0.8;
    std::string ancilla = "vacuum";
    int n = 0;
    double beta = 0.0;       // 0: no fidelity requested
    std::string parity = "auto";
    double eta = 1.0;
    bool emit_state = false;
    double tail_tol = 1e-12;
};

int run_shape(const GlobalOptions& g, const ShapeArgs& a) {
    const cs::Ancilla anc = parse_ancilla(a.ancilla);
    const cs::SchemeConfig cfg(cs::SqueezeParam(a.s), a.t, anc);
    const cs::ConditionResult res = cs::condition(cfg, a.n, g.n_max, {a.tail_tol});

    ordered_json rec;
    rec["command"] = "shape";
    rec["inputs"] = {{"s", a.s},       {"t", a.t},   {"ancilla", a.ancilla}, {"n", a.n},
                     {"beta", a.beta}, {"eta", a.eta}, {"n_max", g.n_max},
                     {"tail_tol", a.tail_tol}};
    ordered_json out;
    out["probability"] = res.probability;
    out["log10_probability"] = res.log_probability / std::log(10.0);
    out["parity"] = res.state ? to_string(res.state->parity())
                              : to_string(cs::branch_parity(anc, a.n));
    out["degenerate"] = !res.state.has_value();
    out["norm_constant"] = res.norm_constant;

    std::optional<int> x_max_used;
    if (a.beta > 0.0) {
        cs::Parity target_parity = cs::branch_parity(anc, a.n);
        if (a.parity == "even") target_parity = cs::Parity::even;
        else if (a.parity == "odd") target_parity = cs::Parity::odd;
        else if (a.parity != "auto")
            throw std::invalid_argument("parity must be auto, even or odd");
        const cs::CatTarget target(a.beta, target_parity);
        out["fidelity"] = cs::herald_fidelity(res, target).fidelity;
        if (a.eta < 1.0) {
            const cs::DetectorModel det(a.eta);
            const cs::ImperfectResult imp =
                cs::imperfect_fidelity_direct(cfg, a.n, det, target, g.n_max, {a.tail_tol});
            out["fidelity_imperfect"] = imp.fidelity;
            out["probability_imperfect"] = imp.probability;
            x_max_used = cs::effective_x_max(det, a.t);
        }
    }
    if (a.emit_state && res.state) {
        ordered_json amps = ordered_json::array();
        for (std::size_t k = 0; k <= res.state->n_max(); ++k) amps.push_back((*res.state)[k]);
        out["state"] = std::move(amps);
    }
    rec["outputs"] = std::move(out);
    rec["provenance"] = provenance(g, g.n_max, x_max_used);
    const std::string text = finalize_record(rec);
    emit(g.out, g.format == "csv" ? record_to_csv(ordered_json::parse(text)) : text);
    return kExitOk;
}

// ------------------------------------------------------------- optimize ----

struct OptimizeArgs {
    std::string ancilla = "vacuum";
    int n = 10;
    double beta = 2.0;
    std::string regime = "fid";
    double floor = 0.99;
    cs::SearchPolicy policy;
};

int run_optimize(const GlobalOptions& g, OptimizeArgs a) {
    const cs::Ancilla anc = parse_ancilla(a.ancilla);
    a.policy.seed = g.seed;
    a.policy.n_max_base = g.n_max;
    const cs::CatTarget target(a.beta, cs::branch_parity(anc, a.n));

    cs::OptimizationResult r;
    if (a.regime == "fid") {
        r = cs::maximize_fidelity(anc, a.n, target, a.policy);
    } else if (a.regime == "prob") {
        r = cs::maximize_probability_with_floor(anc, a.n, target, a.floor, a.policy);
    } else {
        throw std::invalid_argument("regime must be 'fid' or 'prob'");
    }

    ordered_json rec;
    rec["command"] = "optimize";
    rec["inputs"] = {{"ancilla", a.ancilla}, {"n", a.n},         {"beta", a.beta},
                     {"regime", a.regime},   {"floor", a.floor}, {"grid_s", a.policy.grid_s},
                     {"grid_t", a.policy.grid_t}, {"refine_budget", a.policy.refine_budget}};
    ordered_json out;
    out["s"] = r.s;
    out["t"] = r.t;
    out["fidelity"] = r.fidelity;
    out["probability"] = r.probability;
    out["regime"] = to_string(r.regime);
    out["feasible"] = r.feasible;
    ordered_json locals = ordered_json::array();
    for (const cs::LocalOptimum& lo : r.local_optima)
        locals.push_back({{"s", lo.s}, {"t", lo.t}, {"fidelity", lo.fidelity},
                          {"probability", lo.probability}});
    out["local_optima"] = std::move(locals);
    rec["outputs"] = std::move(out);
    rec["provenance"] = provenance(g, r.n_max_used, std::nullopt, r.evaluations);
    const std::string text = finalize_record(rec);
    emit(g.out, g.format == "csv" ? record_to_csv(ordered_json::parse(text)) : text);
    return r.feasible ? kExitOk : kExitInfeasible;
}

// ---------------------------------------------------------------- sweep ----

struct Range {
    double lo = 0.0, hi = 0.0;
    int steps = 1;
    double at(int i) const {
        return steps <= 1 ? lo : lo + (hi - lo) * i / static_cast<double>(steps - 1);
    }
};

Range parse_range(const std::string& spec) {
    Range r;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &r.lo, &r.hi, &r.steps) != 3 || r.steps < 1)
        throw std::invalid_argument("range must be lo:hi:steps with steps >= 1: " + spec);
    return r;
}

struct SweepArgs {
    ShapeArgs base;
    std::string sweep_s, sweep_t, sweep_beta, sweep_eta;
    std::string sweep_n;  // lo:hi:stride over integers
};

int run_sweep(const GlobalOptions& g, const SweepArgs& a) {
    const cs::Ancilla anc = parse_ancilla(a.base.ancilla);
    const Range rs = a.sweep_s.empty() ? Range{a.base.s, a.base.s, 1} : parse_range(a.sweep_s);
    const Range rt = a.sweep_t.empty() ? Range{a.base.t, a.base.t, 1} : parse_range(a.sweep_t);
    const Range rb = a.sweep_beta.empty() ? Range{a.base.beta, a.base.beta, 1} : parse_range(a.sweep_beta);
    const Range re = a.sweep_eta.empty() ? Range{a.base.eta, a.base.eta, 1} : parse_range(a.sweep_eta);
    std::vector<int> ns{a.base.n};
    if (!a.sweep_n.empty()) {
        int lo = 0, hi = 0, stride = 1;
        if (std::sscanf(a.sweep_n.c_str(), "%d:%d:%d", &lo, &hi, &stride) != 3 || stride < 1 || hi < lo)
            throw std::invalid_argument("--sweep-n must be lo:hi:stride");
        ns.clear();
        for (int n = lo; n <= hi; n += stride) ns.push_back(n);
    }

    struct Point {
        int n;
        double s, t, beta, eta;
    };
    std::vector<Point> points;
    for (int n : ns)
        for (int ib = 0; ib < rb.steps; ++ib)
            for (int ie = 0; ie < re.steps; ++ie)
                for (int is = 0; is < rs.steps; ++is)
                    for (int it = 0; it < rt.steps; ++it)
                        points.push_back({n, rs.at(is), rt.at(it), rb.at(ib), re.at(ie)});

    std::vector<std::string> rows(points.size());
    parallel_for(points.size(), g.effective_threads(), [&](std::size_t i) {
        const Point& p = points[i];
        const cs::SchemeConfig cfg(cs::SqueezeParam(p.s), p.t, anc);
        const cs::ConditionResult res = cs::condition(cfg, p.n, g.n_max, {a.base.tail_tol});
        double fid = 0.0, fid_imp = 0.0, prob_imp = res.probability;
        if (p.beta > 0.0) {
            const cs::CatTarget target(p.beta, cs::branch_parity(anc, p.n));
            fid = cs::herald_fidelity(res, target).fidelity;
            if (p.eta < 1.0) {
                const cs::ImperfectResult imp = cs::imperfect_fidelity_direct(
                    cfg, p.n, cs::DetectorModel(p.eta), target, g.n_max, {a.base.tail_tol});
                fid_imp = imp.fidelity;
                prob_imp = imp.probability;
            } else {
                fid_imp = fid;
            }
        }
        std::string row = a.base.ancilla + "," + std::to_string(p.n) + "," + fmt17(p.s) + "," +
                          fmt17(p.t) + "," + fmt17(p.beta) + "," + fmt17(p.eta) + "," +
                          fmt17(res.probability) + "," + fmt17(fid) + "," + fmt17(prob_imp) + "," +
                          fmt17(fid_imp);
        rows[i] = std::move(row);
    });

    Csv csv({"ancilla", "n", "s", "t", "beta", "eta", "probability", "fidelity",
             "probability_imperfect", "fidelity_imperfect"});
    for (const std::string& r : rows) csv.data += r + "\n";

    const std::string prefix = g.out == "-" ? "catshaper_sweep" : g.out;
    write_file(prefix + ".csv", csv.data);
    ordered_json meta;
    meta["command"] = "sweep";
    meta["inputs"] = {{"ancilla", a.base.ancilla}, {"rows", points.size()}, {"n_max", g.n_max}};
    meta["provenance"] = provenance(g, g.n_max);
    meta["provenance"]["repro_hash"] = hash_hex(csv.data);
    write_file(prefix + ".meta.json", meta.dump(2) + "\n");
    return kExitOk;
}

// --------------------------------------------------------------- figure ----

struct FigureArgs {
    std::string id;
    std::string ancilla = "vacuum";
    int n = 10;
    double beta = 1.6;
    double level = 0.99;
    double floor = 0.99;
    double t_fixed = 0.995;
    std::string n_list = "10,11,12";
    std::string beta_range = "1.4:2.6:7";
    std::string eta_list = "0.9,0.95,0.98,1.0";
    std::string configs = "vacuum:10:1.7,vacuum:11:1.9,photon:10:2.2,photon:11:2.3";
    cs::SearchPolicy policy;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

int run_figure_curves(const GlobalOptions& g, const FigureArgs& a, cs::Ancilla anc) {
    std::vector<int> ns;
    for (const std::string& tok : split(a.n_list, ',')) ns.push_back(std::stoi(tok));
    const Range betas = parse_range(a.beta_range);

    struct Task {
        int n;
        double beta;
    };
    std::vector<Task> tasks;
    for (int n : ns)
        for (int ib = 0; ib < betas.steps; ++ib) tasks.push_back({n, betas.at(ib)});

    std::vector<std::string> rows(tasks.size());
    parallel_for(tasks.size(), g.effective_threads(), [&](std::size_t i) {
        const Task& task = tasks[i];
        const cs::CatTarget target(task.beta, cs::branch_parity(anc, task.n));
        const cs::OptimizationResult rf = cs::maximize_fidelity(anc, task.n, target, a.policy);
        const cs::OptimizationResult rp =
            cs::maximize_probability_with_floor(anc, task.n, target, a.floor, a.policy);
        std::string row;
        row += std::to_string(task.n) + "," + fmt17(task.beta) + ",fid," + fmt17(rf.s) + "," +
               fmt17(rf.t) + "," + fmt17(rf.fidelity) + "," + fmt17(rf.probability) + ",1\n";
        row += std::to_string(task.n) + "," + fmt17(task.beta) + ",prob," + fmt17(rp.s) + "," +
               fmt17(rp.t) + "," + fmt17(rp.fidelity) + "," + fmt17(rp.probability) + "," +
               (rp.feasible ? "1" : "0");
        rows[i] = std::move(row);
    });

    Csv csv({"n", "beta", "regime", "s", "t", "fidelity", "probability", "feasible"});
    for (const std::string& r : rows) csv.data += r + "\n";
    const std::string prefix = g.out == "-" ? "catshaper_" + a.id : g.out;
    write_file(prefix + ".csv", csv.data);
    ordered_json meta;
    meta["command"] = "figure";
    meta["figure"] = a.id;
    meta["inputs"] = {{"ancilla", a.id == "fig2" ? "vacuum" : "photon"},
                      {"n_list", a.n_list},
                      {"beta_range", a.beta_range},
                      {"floor", a.floor}};
    meta["provenance"] = provenance(g, cs::detail::policy_n_max(a.policy, ns.back(), betas.hi));
    meta["provenance"]["repro_hash"] = hash_hex(csv.data);
    write_file(prefix + ".meta.json", meta.dump(2) + "\n");
    return kExitOk;
}

int run_figure_isolines(const GlobalOptions& g, const FigureArgs& a) {
    const cs::Ancilla anc = parse_ancilla(a.ancilla);
    const cs::CatTarget target(a.beta, cs::branch_parity(anc, a.n));
    const cs::detail::BranchObjective obj(anc, a.n, target,
                                          cs::detail::policy_n_max(a.policy, a.n, a.beta));
    const cs::detail::GridData grid = cs::detail::run_grid(obj, a.policy);

    Csv gridcsv({"s", "t", "fidelity", "probability"});
    for (std::size_t i = 0; i < grid.s_vals.size(); ++i)
        for (std::size_t j = 0; j < grid.t_vals.size(); ++j)
            gridcsv.row({fmt17(grid.s_vals[i]), fmt17(grid.t_vals[j]),
                         fmt17(grid.at(i, j).fidelity), fmt17(grid.at(i, j).probability)});

    const cs::IsolineSet iso = cs::fidelity_isolines(anc, a.n, target, a.level, a.policy);
    Csv isocsv({"level", "polyline", "vertex", "s", "t"});
    for (std::size_t p = 0; p < iso.polylines.size(); ++p)
        for (std::size_t v = 0; v < iso.polylines[p].size(); ++v)
            isocsv.row({fmt17(iso.level), std::to_string(p), std::to_string(v),
                        fmt17(iso.polylines[p][v].s), fmt17(iso.polylines[p][v].t)});

    const cs::OptimizationResult rf = cs::maximize_fidelity(anc, a.n, target, a.policy);
    const cs::OptimizationResult rp =
        cs::maximize_probability_with_floor(anc, a.n, target, a.floor, a.policy);

    const std::string prefix = g.out == "-" ? "catshaper_fig3" : g.out;
    write_file(prefix + "_grid.csv", gridcsv.data);
    write_file(prefix + "_isolines.csv", isocsv.data);
    ordered_json meta;
    meta["command"] = "figure";
    meta["figure"] = "fig3";
    meta["inputs"] = {{"ancilla", a.ancilla}, {"n", a.n}, {"beta", a.beta}, {"level", a.level}};
    meta["point_fid"] = {{"s", rf.s}, {"t", rf.t}, {"fidelity", rf.fidelity},
                         {"probability", rf.probability}};
    meta["point_prob"] = {{"s", rp.s}, {"t", rp.t}, {"fidelity", rp.fidelity},
                          {"probability", rp.probability}, {"feasible", rp.feasible}};
    meta["provenance"] = provenance(g, rf.n_max_used, std::nullopt, rf.evaluations + rp.evaluations);
    meta["provenance"]["repro_hash"] = hash_hex(gridcsv.data + isocsv.data);
    write_file(prefix + ".meta.json", meta.dump(2) + "\n");
    return kExitOk;
}

int run_figure_distributions(const GlobalOptions& g, const FigureArgs& a) {
    struct Panel {
        cs::Ancilla anc;
        std::string anc_name;
        int n;
        double beta;
    };
    std::vector<Panel> panels;
    for (const std::string& tok : split(a.configs, ',')) {
        const std::vector<std::string> f = split(tok, ':');
        if (f.size() != 3) throw std::invalid_argument("fig5 config must be ancilla:n:beta");
        panels.push_back({parse_ancilla(f[0]), f[0], std::stoi(f[1]), std::stod(f[2])});
    }

    Csv csv({"panel", "ancilla", "n", "beta", "s", "t", "fidelity", "k", "p_state", "p_target", "d"});
    ordered_json meta_panels = ordered_json::array();
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& panel = panels[p];
        const cs::CatTarget target(panel.beta, cs::branch_parity(panel.anc, panel.n));
        const cs::OptimizationResult rf = cs::maximize_fidelity(panel.anc, panel.n, target, a.policy);
        const cs::SchemeConfig cfg(cs::SqueezeParam(rf.s), rf.t, panel.anc);
        const cs::ConditionResult res = cs::condition(cfg, panel.n, rf.n_max_used);
        const cs::FockVector cat = cs::cat_state(target, res.state->n_max());
        const cs::DiscrepancyReport disc = cs::distribution_discrepancy(res, target);
        const std::size_t k_hi = std::min<std::size_t>(res.state->n_max(),
                                                       static_cast<std::size_t>(4 * panel.beta * panel.beta) + 16);
        for (std::size_t k = 0; k <= k_hi; ++k) {
            const double ps = (*res.state)[k] * (*res.state)[k];
            const double pt = cat[k] * cat[k];
            csv.row({std::to_string(p), panel.anc_name, std::to_string(panel.n), fmt17(panel.beta),
                     fmt17(rf.s), fmt17(rf.t), fmt17(rf.fidelity), std::to_string(k), fmt17(ps),
                     fmt17(pt), fmt17(std::abs(ps - pt))});
        }
        meta_panels.push_back({{"panel", p}, {"ancilla", panel.anc_name}, {"n", panel.n},
                               {"beta", panel.beta}, {"fidelity", rf.fidelity},
                               {"d_max", disc.d_max}, {"argmax_n", disc.argmax_n}});
    }

    const std::string prefix = g.out == "-" ? "catshaper_fig5" : g.out;
    write_file(prefix + ".csv", csv.data);
    ordered_json meta;
    meta["command"] = "figure";
    meta["figure"] = "fig5";
    meta["inputs"] = {{"configs", a.configs}};
    meta["panels"] = std::move(meta_panels);
    meta["provenance"] = provenance(g, g.n_max);
    meta["provenance"]["repro_hash"] = hash_hex(csv.data);
    write_file(prefix + ".meta.json", meta.dump(2) + "\n");
    return kExitOk;
}

int run_figure_inefficiency(const GlobalOptions& g, const FigureArgs& a) {
    const Range betas = parse_range(a.beta_range);
    std::vector<double> etas;
    for (const std::string& tok : split(a.eta_list, ',')) etas.push_back(std::stod(tok));
    if (a.n % 2 != 0)
        throw std::invalid_argument("fig6 sweeps the vacuum-ancilla even branch; n must be even");

    // At fixed high transmittance, pick s by maximizing the ideal fidelity
    // (1-D grid + local shrink), then sweep eta with the closed-form fidelity.
    struct Row {
        double eta, beta, s, fid_ideal, fid_imp, prob_ideal, prob_imp;
    };
    std::vector<Row> rows(static_cast<std::size_t>(betas.steps) * etas.size());
    parallel_for(static_cast<std::size_t>(betas.steps), g.effective_threads(), [&](std::size_t ib) {
        const double beta = betas.at(static_cast<int>(ib));
        const cs::CatTarget target(beta, cs::Parity::even);
        const std::size_t n_max = cs::detail::policy_n_max(a.policy, a.n, beta);
        const cs::detail::BranchObjective obj(cs::Ancilla::vacuum, a.n, target, n_max);
        double best_s = 0.1, best_f = -1.0;
        for (int i = 0; i <= 160; ++i) {
            const double s = 0.02 + (2.0 - 0.02) * i / 160.0;
            const double f = obj.eval(s, a.t_fixed).fidelity;
            if (f > best_f) {
                best_f = f;
                best_s = s;
            }
        }
        for (double h = (2.0 - 0.02) / 160.0; h > 1e-7; h /= 2.0) {
            for (const double cand : {best_s - h, best_s + h}) {
                if (cand <= 0.0) continue;
                const double f = obj.eval(cand, a.t_fixed).fidelity;
                if (f > best_f) {
                    best_f = f;
                    best_s = cand;
                }
            }
        }
        const cs::SchemeConfig cfg(cs::SqueezeParam(best_s), a.t_fixed, cs::Ancilla::vacuum);
        const cs::ConditionResult ideal = cs::condition(cfg, a.n, n_max);
        for (std::size_t ie = 0; ie < etas.size(); ++ie) {
            const double eta = etas[ie];
            double fid_imp = best_f, prob_imp = ideal.probability;
            if (eta < 1.0) {
                const cs::DetectorModel det(eta);
                fid_imp = cs::imperfect_fidelity_closed(cfg, a.n / 2, det, target, n_max);
                prob_imp =
                    cs::imperfect_fidelity_direct(cfg, a.n, det, target, n_max).probability;
            }
            rows[ib * etas.size() + ie] =
                {eta, beta, best_s, best_f, fid_imp, ideal.probability, prob_imp};
        }
    });

    Csv csv({"eta", "beta", "s", "t", "n", "fidelity_ideal", "fidelity_imperfect",
             "probability_ideal", "probability_imperfect"});
    for (const Row& r : rows)
        csv.row({fmt17(r.eta), fmt17(r.beta), fmt17(r.s), fmt17(a.t_fixed), std::to_string(a.n),
                 fmt17(r.fid_ideal), fmt17(r.fid_imp), fmt17(r.prob_ideal), fmt17(r.prob_imp)});

    const std::string prefix = g.out == "-" ? "catshaper_fig6" : g.out;
    write_file(prefix + ".csv", csv.data);
    ordered_json meta;
    meta["command"] = "figure";
    meta["figure"] = "fig6";
    meta["inputs"] = {{"n", a.n}, {"t", a.t_fixed}, {"beta_range", a.beta_range},
                      {"eta_list", a.eta_list}};
    meta["provenance"] = provenance(g, g.n_max);
    meta["provenance"]["repro_hash"] = hash_hex(csv.data);
    write_file(prefix + ".meta.json", meta.dump(2) + "\n");
    return kExitOk;
}

int run_figure(const GlobalOptions& g, FigureArgs a) {
    a.policy.seed = g.seed;
    if (a.id == "fig2") return run_figure_curves(g, a, cs::Ancilla::vacuum);
    if (a.id == "fig4") return run_figure_curves(g, a, cs::Ancilla::single_photon);
    if (a.id == "fig3") return run_figure_isolines(g, a);
    if (a.id == "fig5") return run_figure_distributions(g, a);
    if (a.id == "fig6") return run_figure_inefficiency(g, a);
    std::cerr << "unknown figure id: " << a.id << " (expected fig2..fig6)\n";
    return kExitUnknownFigure;
}

// ------------------------------------------------------------ selfcheck ----

int run_selfcheck_cmd(const GlobalOptions& g, const cs::SelfCheckOptions& opts) {
    const cs::SelfCheckReport report = cs::run_selfcheck(opts);
    ordered_json rec;
    rec["engine_version"] = cs::kVersion;
    rec["all_passed"] = report.all_passed;
    rec["first_failed"] = report.first_failed;
    ordered_json checks = ordered_json::array();
    for (const cs::CheckOutcome& c : report.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"observed", c.observed},
                          {"tolerance", c.tolerance}, {"detail", c.detail}});
    rec["checks"] = std::move(checks);
    emit(g.out, rec.dump(2) + "\n");
    return report.all_passed ? kExitOk : kExitSelfcheck;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"catshaper: heralded Schroedinger-cat shaping in a truncated Fock space"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (key=value); command-line flags take precedence");
    app.fallthrough();

    GlobalOptions g;
    add_global_options(&app, g);

    ShapeArgs shape_args;
    CLI::App* shape = app.add_subcommand(
        "shape", "Heralded conditional state for one (s, t, ancilla, n); optional cat fidelity");
    shape->add_option("--s", shape_args.s, "Squeezing parameter (>= 0)")->capture_default_str();
    shape->add_option("--t", shape_args.t, "Beam-splitter transmittance in (0,1)")->capture_default_str();
    shape->add_option("--ancilla", shape_args.ancilla, "Mode-2 input: vacuum | photon")
        ->capture_default_str();
    shape->add_option("--n", shape_args.n, "Heralded photon count in mode 2")->capture_default_str();
    shape->add_option("--beta", shape_args.beta, "Cat size; 0 skips the fidelity output")
        ->capture_default_str();
    shape->add_option("--parity", shape_args.parity, "Cat parity: auto | even | odd")
        ->capture_default_str();
    shape->add_option("--eta", shape_args.eta, "Detector efficiency; < 1 adds the POVM-mixed outputs")
        ->capture_default_str();
    shape->add_flag("--emit-state", shape_args.emit_state, "Include the state amplitudes in JSON");
    shape->add_option("--tail-tol", shape_args.tail_tol, "Relative truncation-tail tolerance")
        ->capture_default_str();

    OptimizeArgs opt_args;
    CLI::App* optimize = app.add_subcommand(
        "optimize", "Search (s, t) for maximum fidelity, or maximum probability above a floor");
    optimize->add_option("--ancilla", opt_args.ancilla, "vacuum | photon")->capture_default_str();
    optimize->add_option("--n", opt_args.n, "Heralded photon count")->capture_default_str();
    optimize->add_option("--beta", opt_args.beta, "Cat size (target parity follows the branch)")
        ->capture_default_str();
    optimize->add_option("--regime", opt_args.regime, "fid | prob")->capture_default_str();
    optimize->add_option("--floor", opt_args.floor, "Fidelity floor for the prob regime")
        ->capture_default_str();
    optimize->add_option("--grid-s", opt_args.policy.grid_s, "Grid cells along s")->capture_default_str();
    optimize->add_option("--grid-t", opt_args.policy.grid_t, "Grid cells along t")->capture_default_str();
    optimize->add_option("--refine-budget", opt_args.policy.refine_budget,
                         "Simplex refinement evaluation budget")
        ->capture_default_str();
    optimize->add_option("--s-lo", opt_args.policy.s_lo, "Search box lower s")->capture_default_str();
    optimize->add_option("--s-hi", opt_args.policy.s_hi, "Search box upper s")->capture_default_str();
    optimize->add_option("--t-lo", opt_args.policy.t_lo, "Search box lower t")->capture_default_str();
    optimize->add_option("--t-hi", opt_args.policy.t_hi, "Search box upper t")->capture_default_str();

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "Cartesian parameter sweep; writes <out>.csv with columns ancilla,n,s,t,beta,eta,"
                 "probability,fidelity,probability_imperfect,fidelity_imperfect");
    sweep->add_option("--s", sweep_args.base.s, "Fixed s when not swept")->capture_default_str();
    sweep->add_option("--t", sweep_args.base.t, "Fixed t when not swept")->capture_default_str();
    sweep->add_option("--ancilla", sweep_args.base.ancilla, "vacuum | photon")->capture_default_str();
    sweep->add_option("--n", sweep_args.base.n, "Fixed herald when not swept")->capture_default_str();
    sweep->add_option("--beta", sweep_args.base.beta, "Fixed cat size when not swept (0: none)")
        ->capture_default_str();
    sweep->add_option("--eta", sweep_args.base.eta, "Fixed efficiency when not swept")
        ->capture_default_str();
    sweep->add_option("--sweep-s", sweep_args.sweep_s, "lo:hi:steps");
    sweep->add_option("--sweep-t", sweep_args.sweep_t, "lo:hi:steps");
    sweep->add_option("--sweep-beta", sweep_args.sweep_beta, "lo:hi:steps");
    sweep->add_option("--sweep-eta", sweep_args.sweep_eta, "lo:hi:steps");
    sweep->add_option("--sweep-n", sweep_args.sweep_n, "lo:hi:stride (integers)");

    FigureArgs fig_args;
    CLI::App* figure = app.add_subcommand(
        "figure",
        "Export the dataset behind a named figure as CSV (+ .meta.json sidecar). "
        "fig2/fig4: optimized fidelity/probability curves over (n, beta), columns "
        "n,beta,regime,s,t,fidelity,probability,feasible. fig3: fidelity grid + level isolines. "
        "fig5: per-Fock distributions vs targets. fig6: inefficiency curves at fixed high t.");
    figure->add_option("id", fig_args.id, "fig2 | fig3 | fig4 | fig5 | fig6")->required();
    figure->add_option("--ancilla", fig_args.ancilla, "fig3: branch ancilla")->capture_default_str();
    figure->add_option("--n", fig_args.n, "fig3/fig6: herald count")->capture_default_str();
    figure->add_option("--beta", fig_args.beta, "fig3: cat size")->capture_default_str();
    figure->add_option("--level", fig_args.level, "fig3: isoline level")->capture_default_str();
    figure->add_option("--floor", fig_args.floor, "fig2/fig4: fidelity floor for the prob regime")
        ->capture_default_str();
    figure->add_option("--t", fig_args.t_fixed, "fig6: fixed transmittance")->capture_default_str();
    figure->add_option("--n-list", fig_args.n_list, "fig2/fig4: comma-separated heralds")
        ->capture_default_str();
    figure->add_option("--beta-range", fig_args.beta_range, "fig2/fig4/fig6: lo:hi:steps")
        ->capture_default_str();
    figure->add_option("--eta-list", fig_args.eta_list, "fig6: comma-separated efficiencies")
        ->capture_default_str();
    figure->add_option("--configs", fig_args.configs, "fig5: ancilla:n:beta panels, comma-separated")
        ->capture_default_str();
    figure->add_option("--grid-s", fig_args.policy.grid_s, "Search grid cells along s")
        ->capture_default_str();
    figure->add_option("--grid-t", fig_args.policy.grid_t, "Search grid cells along t")
        ->capture_default_str();
    figure->add_option("--refine-budget", fig_args.policy.refine_budget, "Refinement budget")
        ->capture_default_str();

    cs::SelfCheckOptions selfcheck_opts;
    CLI::App* selfcheck = app.add_subcommand(
        "selfcheck", "Run the reduced consistency suite; exit 0 iff every check passes");
    selfcheck->add_option("--n-max-check", selfcheck_opts.n_max, "Truncation used by the checks")
        ->capture_default_str();
    selfcheck->add_flag("--flip-bs-sign", selfcheck_opts.flip_bs_sign,
                        "Testing hook: check against the flipped convention (must fail)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (shape->parsed()) return run_shape(g, shape_args);
        if (optimize->parsed()) return run_optimize(g, opt_args);
        if (sweep->parsed()) return run_sweep(g, sweep_args);
        if (figure->parsed()) return run_figure(g, fig_args);
        if (selfcheck->parsed()) return run_selfcheck_cmd(g, selfcheck_opts);
    } catch (const cs::truncation_error& e) {
        std::cerr << "truncation: " << e.what() << "\n";
        return kExitTruncation;
    } catch (const cs::bracketing_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
