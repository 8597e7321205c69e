#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phmcq/phmcq.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = PHMCQ_CLI;
const std::string kData = PHMCQ_TEST_DATA;

std::string data(const char* name) { return kData + "/" + name; }

fs::path workdir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("phmcq_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(const std::string& args, const fs::path& dir) {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = kCli + " " + args + " > " + o.string() + " 2> " + e.string();
    const int st = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    std::ifstream so(o), se(e);
    std::ostringstream a, b;
    a << so.rdbuf();
    b << se.rdbuf();
    r.out = a.str();
    r.err = b.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

struct Handles {
    phmcq_model* m = nullptr;
    phmcq_solution* s = nullptr;
    explicit Handles(const std::string& path) {
        REQUIRE(phmcq_model_load(path.c_str(), &m) == PHMCQ_OK);
        REQUIRE(phmcq_solve(m, nullptr, &s) == PHMCQ_OK);
    }
    ~Handles() {
        phmcq_solution_free(s);
        phmcq_model_free(m);
    }
};

}  // namespace

TEST_CASE("analyze: closed single-server case") {
    const fs::path dir = workdir("analyze");
    const Run r = run("analyze --model " + data("mm1d.json") + " --out " + dir.string(), dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("atom0 ") != std::string::npos);
    const json summary = read_json(dir / "summary.json");
    CHECK(std::abs(summary["atom0"].get<double>() - 0.550643) <= 1e-6);
    CHECK(fs::exists(dir / "solution.json"));
    CHECK(fs::exists(dir / "density.csv"));
}

TEST_CASE("analyze: exit codes for malformed and out-of-scope models") {
    const fs::path dir = workdir("errors");
    const Run bad = run("analyze --model " + data("malformed.json") + " --out " + dir.string(), dir);
    CHECK(bad.code == 2);
    CHECK(bad.err.find("line 2") != std::string::npos);

    const Run red = run("analyze --model " + data("reducible.json") + " --out " + dir.string(), dir);
    CHECK(red.code == 3);
    CHECK(red.err.find("Assumption 1 ii") != std::string::npos);

    CHECK(run("analyze --model /nonexistent.json", dir).code == 2);
    CHECK(run("analyze --model " + data("mm1d.json") + " --grid 1", dir).code == 2);
    CHECK(run("frobnicate", dir).code == 2);
    CHECK(run("compare --model " + data("mm1d.json") + " --tol-ks -1", dir).code == 2);
    CHECK(run("analyze --model " + data("mm1d.json") + " --tol-residual 0", dir).code == 2);
}

TEST_CASE("analyze: written files round-trip to the last digit") {
    for (const char* name : {"mm1d.json", "erlang2.json", "hyperexp.json"}) {
        const fs::path dir = workdir(std::string("roundtrip_") + name);
        REQUIRE(run("analyze --model " + data(name) + " --out " + dir.string() + " --grid 50", dir).code == 0);
        const Handles h(data(name));

        phmcq_decomposition d;
        phmcq_solution_decomposition(h.s, &d);
        const json summary = read_json(dir / "summary.json");
        CHECK(summary["atom0"].get<double>() == d.atom0);
        CHECK(summary["continuous"].get<double>() == d.continuous);
        CHECK(summary["tail"].get<double>() == d.tail);

        const json sol = read_json(dir / "solution.json");
        for (std::size_t k = 0; k < phmcq_solution_phases(h.s); ++k) {
            double re = 0, im = 0;
            phmcq_solution_delta(h.s, k, &re, &im);
            CHECK(sol["delta"][k][0].get<double>() == re);
            CHECK(sol["delta"][k][1].get<double>() == im);
            phmcq_solution_eta(h.s, k, &re, &im);
            CHECK(sol["eta"][k][0].get<double>() == re);
            CHECK(sol["eta"][k][1].get<double>() == im);
        }

        std::string header;
        const auto rows = read_csv(dir / "density.csv", &header);
        CHECK(header == "v,f_spectral,f_matrix_exp");
        REQUIRE(rows.size() == 50);
        for (const auto& row : rows) {
            double f = 0, g = 0;
            REQUIRE(phmcq_virtual_density(h.s, row[0], &f) == PHMCQ_OK);
            REQUIRE(phmcq_matrix_exp_density(h.s, row[0], &g) == PHMCQ_OK);
            CHECK(row[1] == f);
            CHECK(row[2] == g);
        }
    }
}

TEST_CASE("simulate: csv round-trips and is reproducible") {
    const fs::path a = workdir("sim_a"), b = workdir("sim_b");
    const std::string args = "simulate --model " + data("mm1d.json") + " --arrivals 100000 --seed 3 --replications 4";
    REQUIRE(run(args + " --threads 1 --out " + a.string(), a).code == 0);
    REQUIRE(run(args + " --threads 4 --out " + b.string(), b).code == 0);
    CHECK(slurp(a / "simulation.csv") == slurp(b / "simulation.csv"));

    phmcq_model* m = nullptr;
    REQUIRE(phmcq_model_load(data("mm1d.json").c_str(), &m) == PHMCQ_OK);
    phmcq_sim_config cfg;
    phmcq_sim_config_default(&cfg);
    cfg.seed = 3;
    cfg.measured_arrivals = 100000;
    cfg.replications = 4;
    phmcq_sim* sim = nullptr;
    REQUIRE(phmcq_simulate(m, &cfg, &sim) == PHMCQ_OK);
    phmcq_sim_summary s;
    phmcq_sim_summary_get(sim, &s);

    std::ifstream in(a / "simulation.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "stat,estimate,stderr");
    std::getline(in, line);
    CHECK(line.rfind("atom0,", 0) == 0);
    const std::size_t c1 = line.find(','), c2 = line.rfind(',');
    CHECK(std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr) == s.atom0);
    CHECK(std::strtod(line.substr(c2 + 1).c_str(), nullptr) == s.atom0_se);
    std::getline(in, line);
    CHECK(std::strtod(line.substr(line.find(',') + 1).c_str(), nullptr) == s.loss);
    while (std::getline(in, line) && line != "ecdf_v,ecdf_value") {
    }
    std::size_t idx = 0;
    while (std::getline(in, line)) {
        double v = 0, value = 0;
        REQUIRE(phmcq_sim_ecdf(sim, idx++, &v, &value) == PHMCQ_OK);
        CHECK(std::strtod(line.c_str(), nullptr) == v);
        CHECK(std::strtod(line.substr(line.find(',') + 1).c_str(), nullptr) == value);
    }
    CHECK(idx == 1000);
    phmcq_sim_free(sim);
    phmcq_model_free(m);

    CHECK(run("simulate --model " + data("mm1d.json") + " --arrivals 100", a).code == 2);
}

TEST_CASE("compare: default thresholds pass, zero thresholds fail, verdict stable across seeds") {
    const fs::path dir = workdir("compare");
    const std::string base = "compare --model " + data("mm1d.json") + " --out " + dir.string();
    CHECK(run(base, dir).code == 0);
    const json first = read_json(dir / "compare.json");
    CHECK(first["pass"].get<bool>());
    CHECK(first["measured_arrivals"].get<std::uint64_t>() == 1000000);

    CHECK(run(base + " --seed 2", dir).code == 0);
    const json second = read_json(dir / "compare.json");
    CHECK(second["ks"].get<double>() != first["ks"].get<double>());
    CHECK(second["pass"].get<bool>());

    CHECK(run(base + " --tol-ks 0 --z-max 0", dir).code == 1);
    CHECK(!read_json(dir / "compare.json")["pass"].get<bool>());
}

TEST_CASE("check: pass, warn and fail reports") {
    const fs::path dir = workdir("check");
    const Run m1 = run("check --model " + data("mm1d.json"), dir);
    CHECK(m1.code == 0);
    CHECK(m1.out.find("fail") == std::string::npos);
    CHECK(m1.out.find("warn") == std::string::npos);

    const Run h = run("check --model " + data("hyperexp.json") + " --out " + dir.string(), dir);
    CHECK(h.code == 0);
    const json report = read_json(dir / "check.json");
    CHECK(report["status"] == "pass");
    CHECK(report["diagnostics"]["Assumption 1 i: distinct eta"]["value"].get<double>() > 1e-2);

    const fs::path near = dir / "near.json";
    std::ofstream(near) << R"({"gamma": [1, 0, 0], "T": [[-1, 1, 0], [0, -2, 1], [0, 0, -4]], "c": 1,)"
                        << R"( "mu": 2.6694803541984184, "tau": 1})";
    const Run w = run("check --model " + near.string(), dir);
    CHECK(w.code == 0);
    CHECK(w.out.find("warn") != std::string::npos);

    CHECK(run("check --model " + data("reducible.json"), dir).code == 3);
    CHECK(run("check --model " + data("erlang2.json") + " --tol-residual 1e-300", dir).code == 1);
}
