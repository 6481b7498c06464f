#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "cefr/cli.hpp"
#include "oracle_worlds.hpp"

using namespace cefr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("cefr_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void put(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

struct Outcome {
    int code;
    std::string err;
};

Outcome run_cli(cli::Command c, const fs::path& config, const fs::path& out_dir) {
    std::ostringstream out, err;
    int code = cli::run(c, config.string(), out_dir.string(), std::nullopt, out, err);
    return {code, err.str()};
}

// LATE sample from the oracle world, written next to the configs.
fs::path late_csv(const fs::path& dir, std::size_t n = 800) {
    SeededRng rng(17);
    oracle::World w = oracle::make_world(Estimand::LATE, n, rng);
    fs::path p = dir / "late.csv";
    write_csv(p.string(), w.frame);
    return p;
}

json estimate_config() {
    return json::parse(R"({
        "seed": 7,
        "data": {"path": "late.csv",
                 "mapping": {"outcome": "y", "treatment": "d", "instrument": "z",
                             "covariates": ["x1", "x2"], "target_covariates": ["x1"]}},
        "estimand": {"type": "LATE"},
        "learners": {"outcome": {"kind": "ridge_regression"},
                     "treatment": {"kind": "ridge_regression"},
                     "propensity": {"kind": "ridge_logistic", "lambda": 1.0}},
        "crossfit_folds": 5,
        "model": {"degree": 2, "lambda": 0.0},
        "inference": {"bootstrap_draws": 500, "grid": {"points": 25}}
    })");
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("simulate writes one campaign row") {
    fs::path dir = scratch("simulate");
    put(dir / "sim.json", R"({"seed": 1, "simulation": {"dgp": "DGP_L", "sizes": [500], "replications": 1,
                              "estimators": ["DSR"]}})");
    Outcome o = run_cli(cli::Command::simulate, dir / "sim.json", dir / "out");
    REQUIRE(o.code == 0);
    std::istringstream csv(slurp(dir / "out" / "campaign.csv"));
    std::vector<std::string> lines;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].rfind("estimator,dgp,N,k,lambda", 0) == 0);
    CHECK(lines[1].rfind("DSR,DGP_L,500,CV,CV,1,0,", 0) == 0);
}

TEST_CASE("missing instrument column is a schema error") {
    fs::path dir = scratch("schema");
    ColumnFrame f;
    f.add_column("y", {1, 2, 3, 4});
    f.add_column("d", {0, 1, 0, 1});
    f.add_column("x1", {0.1, 0.2, 0.3, 0.4});
    f.add_column("x2", {1, 2, 3, 4});
    write_csv((dir / "late.csv").string(), f);
    put(dir / "est.json", estimate_config().dump());
    Outcome o = run_cli(cli::Command::estimate, dir / "est.json", dir / "out");
    CHECK(o.code == 3);
    CHECK(o.err.find("instrument") != std::string::npos);
}

TEST_CASE("select refuses IDID") {
    fs::path dir = scratch("idid");
    SeededRng rng(3);
    oracle::World w = oracle::make_world(Estimand::IDID, 300, rng);
    write_csv((dir / "idid.csv").string(), w.frame);
    json cfg = estimate_config();
    cfg["data"]["path"] = "idid.csv";
    cfg["data"]["mapping"]["time"] = "w";
    cfg["estimand"]["type"] = "IDID";
    cfg.erase("model");
    cfg["selection"] = {{"degrees", {1, 2}}, {"lambdas", {0.0}}};
    put(dir / "sel.json", cfg.dump());
    Outcome o = run_cli(cli::Command::select, dir / "sel.json", dir / "out");
    CHECK(o.code == 2);
    CHECK(o.err.find("model selection is refused for estimand IDID") != std::string::npos);
    CHECK(o.err.find("fix model.degree and model.lambda") != std::string::npos);
}

TEST_CASE("config errors name the field") {
    fs::path dir = scratch("config");
    late_csv(dir, 100);
    json cfg = estimate_config();
    cfg["inference"]["bootstrap"] = 10;
    put(dir / "bad.json", cfg.dump());
    Outcome o = run_cli(cli::Command::estimate, dir / "bad.json", dir / "out");
    CHECK(o.code == 2);
    CHECK(o.err.find("inference.bootstrap") != std::string::npos);

    cfg = estimate_config();
    cfg.erase("seed");
    put(dir / "noseed.json", cfg.dump());
    o = run_cli(cli::Command::estimate, dir / "noseed.json", dir / "out");
    CHECK(o.code == 2);
    CHECK(o.err.find("seed") != std::string::npos);

    cfg = estimate_config();
    cfg["learners"]["propensity"]["kind"] = "ridge_regression";
    put(dir / "prop.json", cfg.dump());
    o = run_cli(cli::Command::estimate, dir / "prop.json", dir / "out");
    CHECK(o.code == 2);
}

TEST_CASE("estimate is byte identical across runs and its echo reruns") {
    fs::path dir = scratch("estimate");
    late_csv(dir);
    put(dir / "est.json", estimate_config().dump());
    REQUIRE(run_cli(cli::Command::estimate, dir / "est.json", dir / "a").code == 0);
    REQUIRE(run_cli(cli::Command::estimate, dir / "est.json", dir / "b").code == 0);
    const std::string report = slurp(dir / "a" / "fit_report.json");
    CHECK(report == slurp(dir / "b" / "fit_report.json"));
    CHECK(slurp(dir / "a" / "band.csv") == slurp(dir / "b" / "band.csv"));

    json fit = json::parse(report);
    CHECK(fit["artifact"] == "fit_report");
    CHECK(fit["basis"]["k"] == 3);
    CHECK(fit["inference"]["grid"].size() == 25);
    const std::string band = slurp(dir / "a" / "band.csv");
    CHECK(band.rfind("# cefr config_hash=" + fit["config_hash"].get<std::string>(), 0) == 0);
    CHECK(band.find("\nx1,theta_hat,sigma,pw_lo,pw_hi,unif_lo,unif_hi\n") != std::string::npos);

    // The echoed config lives elsewhere and still reproduces the report.
    fs::path other = scratch("estimate_echo");
    put(other / "echo.json", fit["config"].dump());
    REQUIRE(run_cli(cli::Command::estimate, other / "echo.json", other / "out").code == 0);
    CHECK(slurp(other / "out" / "fit_report.json") == report);
}

TEST_CASE("seed override changes the seed and the hash") {
    fs::path dir = scratch("override");
    late_csv(dir, 300);
    put(dir / "est.json", estimate_config().dump());
    std::ostringstream out, err;
    REQUIRE(cli::run(cli::Command::estimate, (dir / "est.json").string(), (dir / "a").string(), 99, out, err) == 0);
    json fit = json::parse(slurp(dir / "a" / "fit_report.json"));
    CHECK(fit["config"]["seed"] == 99);
    CHECK(fit["seeds"]["base"] == 99);
    REQUIRE(run_cli(cli::Command::estimate, dir / "est.json", dir / "b").code == 0);
    CHECK(json::parse(slurp(dir / "b" / "fit_report.json"))["config_hash"] != fit["config_hash"]);
}

TEST_CASE("select writes scores and estimate can use them") {
    fs::path dir = scratch("select");
    late_csv(dir);
    json cfg = estimate_config();
    cfg.erase("model");
    cfg["estimand"]["denominator_positive"] = true;
    cfg["selection"] = {{"degrees", {0, 1, 2}}, {"lambdas", {0.0, 0.1}}};
    put(dir / "sel.json", cfg.dump());
    REQUIRE(run_cli(cli::Command::select, dir / "sel.json", dir / "out").code == 0);
    json sel = json::parse(slurp(dir / "out" / "selection.json"));
    CHECK(sel["result"]["scores"].size() == 6);
    const std::string scores = slurp(dir / "out" / "scores.csv");
    CHECK(scores.find("degree,k,lambda,score,valid\n") != std::string::npos);
    REQUIRE(run_cli(cli::Command::estimate, dir / "sel.json", dir / "est").code == 0);
    json fit = json::parse(slurp(dir / "est" / "fit_report.json"));
    CHECK(fit["selection"]["chosen"] == sel["result"]["chosen"]);

    cfg["estimand"]["denominator_positive"] = false;
    put(dir / "undeclared.json", cfg.dump());
    CHECK(run_cli(cli::Command::select, dir / "undeclared.json", dir / "no").code == 2);
}

TEST_CASE("band recomputes a stored fit on a new grid") {
    fs::path dir = scratch("band");
    late_csv(dir);
    put(dir / "est.json", estimate_config().dump());
    REQUIRE(run_cli(cli::Command::estimate, dir / "est.json", dir / "fit").code == 0);
    json fit = json::parse(slurp(dir / "fit" / "fit_report.json"));

    json band = {{"seed", 7},
                 {"band", {{"fit_report", "fit/fit_report.json"}}},
                 {"inference", {{"bootstrap_draws", 500}, {"grid", {{"values", fit["inference"]["grid"]}}}}}};
    put(dir / "band.json", band.dump());
    REQUIRE(run_cli(cli::Command::band, dir / "band.json", dir / "band").code == 0);
    json rep = json::parse(slurp(dir / "band" / "band_report.json"));
    CHECK(rep["source_config_hash"] == fit["config_hash"]);
    // Same grid, seed and draws: the band matches the one written by estimate.
    CHECK(rep["inference"]["uniform_lo"] == fit["inference"]["uniform_lo"]);
    CHECK(rep["inference"]["pointwise_hi"] == fit["inference"]["pointwise_hi"]);

    band["inference"] = {{"delta", 0.1}, {"grid", {{"lower", -1.0}, {"upper", 1.0}, {"points", 5}}}};
    put(dir / "band2.json", band.dump());
    REQUIRE(run_cli(cli::Command::band, dir / "band2.json", dir / "band2").code == 0);
    json rep2 = json::parse(slurp(dir / "band2" / "band_report.json"));
    CHECK(rep2["inference"]["grid"].size() == 5);
    CHECK(rep2["inference"]["delta"] == 0.1);
}

TEST_CASE("exit codes") {
    CHECK(cli::exit_code(ErrorKind::config) == 2);
    CHECK(cli::exit_code(ErrorKind::selection) == 2);
    CHECK(cli::exit_code(ErrorKind::schema) == 3);
    CHECK(cli::exit_code(ErrorKind::parse) == 3);
    CHECK(cli::exit_code(ErrorKind::validation) == 3);
    CHECK(cli::exit_code(ErrorKind::singular) == 4);
    CHECK(cli::exit_code(ErrorKind::domain) == 4);
}

TEST_CASE("binary results do not depend on the worker pool") {
    const char* bin = std::getenv("CEFR_BIN");
    REQUIRE(bin != nullptr);
    fs::path dir = scratch("binary");
    late_csv(dir, 600);
    json cfg = estimate_config();
    cfg["learners"] = json::object();
    put(dir / "est.json", cfg.dump());
    const std::string base = std::string(bin) + " estimate --config " + (dir / "est.json").string();
    CHECK(shell("CEFR_THREADS=1 " + base + " --output " + (dir / "t1").string() + " > /dev/null") == 0);
    CHECK(shell("CEFR_THREADS=4 " + base + " --output " + (dir / "t4").string() + " > /dev/null") == 0);
    CHECK(slurp(dir / "t1" / "fit_report.json") == slurp(dir / "t4" / "fit_report.json"));
    CHECK(slurp(dir / "t1" / "band.csv") == slurp(dir / "t4" / "band.csv"));

    CHECK(shell(std::string(bin) + " estimate > /dev/null 2>&1") == 2);
    CHECK(shell("CEFR_THREADS=zero " + base + " --output " + (dir / "tz").string() + " > /dev/null 2>&1") == 2);
}
