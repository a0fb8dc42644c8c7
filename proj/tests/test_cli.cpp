#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "catshaper/conditioning.hpp"

#ifndef CATSHAPER_CLI_PATH
#error "CATSHAPER_CLI_PATH must be defined by the build"
#endif

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args) {
    const std::string out_path = "cli_stdout.tmp";
    const std::string err_path = "cli_stderr.tmp";
    const std::string cmd =
        std::string(CATSHAPER_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

} // namespace

TEST_CASE("shape: trivial vacuum query", "[cli]") {
    const RunResult r = run_cli("shape --s 0 --t 0.8 --ancilla vacuum --n 0");
    REQUIRE(r.exit_code == 0);
    const nlohmann::json rec = nlohmann::json::parse(r.out);
    CHECK(rec["outputs"]["probability"].get<double>() == 1.0);
    CHECK(rec["outputs"]["parity"] == "even");
    CHECK(rec["outputs"]["degenerate"] == false);
    CHECK(rec["provenance"]["engine_version"].is_string());
    CHECK(rec["provenance"]["repro_hash"].is_string());
}

TEST_CASE("shape equals the library call", "[cli]") {
    const RunResult r = run_cli("shape --s 0.8 --t 0.8 --ancilla vacuum --n 2 --beta 1.5 --n-max 300");
    REQUIRE(r.exit_code == 0);
    const nlohmann::json rec = nlohmann::json::parse(r.out);

    using namespace catshaper;
    const SchemeConfig cfg(SqueezeParam(0.8), 0.8, Ancilla::vacuum);
    const ConditionResult res = condition(cfg, 2, 300);
    const double fid = herald_fidelity(res, CatTarget(1.5, Parity::even)).fidelity;
    CHECK(rec["outputs"]["probability"].get<double>() ==
          Catch::Approx(res.probability).epsilon(1e-15));
    CHECK(rec["outputs"]["fidelity"].get<double>() == Catch::Approx(fid).epsilon(1e-15));
}

TEST_CASE("shape: malformed transmittance exits 2 and names the field", "[cli]") {
    const RunResult r = run_cli("shape --s 0.5 --t 1.5 --ancilla vacuum --n 0");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("transmittance") != std::string::npos);
}

TEST_CASE("shape: truncation violation exits 3", "[cli]") {
    const RunResult r =
        run_cli("shape --s 1.3 --t 0.9 --ancilla vacuum --n 0 --n-max 40 --tail-tol 1e-12");
    CHECK(r.exit_code == 3);
}

TEST_CASE("optimize: determinism and infeasible floor", "[cli]") {
    const std::string args =
        "optimize --ancilla vacuum --n 4 --beta 1.2 --regime fid --grid-s 24 --grid-t 24 "
        "--refine-budget 80 --seed 7";
    const RunResult a = run_cli(args);
    const RunResult b = run_cli(args);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);  // byte-identical

    const RunResult inf = run_cli(
        "optimize --ancilla vacuum --n 4 --beta 1.2 --regime prob --floor 1.0 --grid-s 24 "
        "--grid-t 24 --refine-budget 80");
    CHECK(inf.exit_code == 4);
    const nlohmann::json rec = nlohmann::json::parse(inf.out);
    CHECK(rec["outputs"]["feasible"] == false);
    CHECK(rec["outputs"]["fidelity"].get<double>() > 0.9);
}

TEST_CASE("sweep: canonical CSV with one row per point", "[cli]") {
    const RunResult r = run_cli(
        "sweep --ancilla vacuum --n 2 --beta 1.2 --sweep-s 0.4:0.8:3 --sweep-t 0.6:0.9:2 "
        "--threads 2 --out sweep_test");
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp("sweep_test.csv");
    CHECK(csv.find("ancilla,n,s,t,beta,eta,probability,fidelity,probability_imperfect,"
                   "fidelity_imperfect\n") == 0);
    CHECK(csv.find("\r") == std::string::npos);  // LF endings
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + 3 * 2);
    const std::string meta = slurp("sweep_test.meta.json");
    CHECK(nlohmann::json::parse(meta)["provenance"]["repro_hash"].is_string());
    std::remove("sweep_test.csv");
    std::remove("sweep_test.meta.json");
}

TEST_CASE("figure: unknown id exits 5", "[cli]") {
    const RunResult r = run_cli("figure fig9");
    CHECK(r.exit_code == 5);
}

TEST_CASE("figure: fig5 emits dataset and sidecar", "[cli]") {
    const RunResult r = run_cli(
        "figure fig5 --configs vacuum:4:1.1 --grid-s 20 --grid-t 20 --refine-budget 60 "
        "--out fig5_test");
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp("fig5_test.csv");
    CHECK(csv.find("panel,ancilla,n,beta,s,t,fidelity,k,p_state,p_target,d\n") == 0);
    const nlohmann::json meta = nlohmann::json::parse(slurp("fig5_test.meta.json"));
    REQUIRE(meta["panels"].size() == 1);
    CHECK(meta["panels"][0]["d_max"].get<double>() >= 0.0);
    std::remove("fig5_test.csv");
    std::remove("fig5_test.meta.json");
}

TEST_CASE("selfcheck: green on a fresh build, red under the sign-flip hook", "[cli]") {
    const RunResult ok = run_cli("selfcheck");
    CHECK(ok.exit_code == 0);
    const nlohmann::json rec = nlohmann::json::parse(ok.out);
    // documented report schema: docs/selfcheck.schema.json
    REQUIRE(rec.contains("engine_version"));
    REQUIRE(rec.contains("all_passed"));
    REQUIRE(rec.contains("first_failed"));
    REQUIRE(rec.contains("checks"));
    CHECK(rec["all_passed"] == true);
    for (const auto& check : rec["checks"]) {
        CHECK(check["name"].is_string());
        CHECK(check["passed"].is_boolean());
        CHECK(check["observed"].is_number());
        CHECK(check["tolerance"].is_number());
        CHECK(check["detail"].is_string());
    }

    const RunResult flipped = run_cli("selfcheck --flip-bs-sign");
    CHECK(flipped.exit_code == 1);
    const nlohmann::json frec = nlohmann::json::parse(flipped.out);
    CHECK(frec["all_passed"] == false);
    CHECK(frec["first_failed"] == "bs_sign_convention");
}

TEST_CASE("config file feeds flags, command line wins", "[cli]") {
    {
        std::ofstream cfg("cli_test.cfg");
        cfg << "s=0.5\nt=0.7\nancilla=vacuum\nn=0\n";
    }
    const RunResult from_file = run_cli("shape --config cli_test.cfg");
    REQUIRE(from_file.exit_code == 0);
    CHECK(nlohmann::json::parse(from_file.out)["inputs"]["s"].get<double>() == 0.5);

    const RunResult overridden = run_cli("shape --config cli_test.cfg --s 0.9");
    REQUIRE(overridden.exit_code == 0);
    CHECK(nlohmann::json::parse(overridden.out)["inputs"]["s"].get<double>() == 0.9);
    std::remove("cli_test.cfg");
}
