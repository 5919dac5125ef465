#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "sace/cli.hpp"
#include "sace/data.hpp"
#include "sace/error.hpp"

using namespace sace;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

/// A scratch directory removed on destruction.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("sace_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string simulated(const TempDir& dir, const std::string& n = "1000") {
    const std::string file = dir / "d.csv";
    REQUIRE(cli({"simulate", "--n", n, "--delta1", "0", "--delta2", "1", "--seed", "7", "--out", file})
                .code == 0);
    return file;
}

void check_header(const json& j, const std::string& command) {
    CHECK(j.at("command") == command);
    CHECK(j.at("version").is_string());
    CHECK(j.at("seed").is_number_unsigned());
    CHECK(j.at("config").is_object());
    CHECK(j.at("duration_seconds").get<double>() >= 0.0);
}

}  // namespace

TEST_CASE("simulate writes the requested rows and is reproducible") {
    TempDir dir;
    const std::string file = simulated(dir);
    const std::string text = slurp(file);
    CHECK(line_count(text) == 1001);
    CHECK(fs::exists(file + ".oracle.csv"));
    CHECK(line_count(slurp(file + ".oracle.csv")) == 1001);

    const std::string again = dir / "e.csv";
    const auto r = cli({"simulate", "--n", "1000", "--delta1", "0", "--delta2", "1", "--seed", "7",
                        "--out", again});
    REQUIRE(r.code == 0);
    CHECK(slurp(again) == text);
    CHECK(slurp(again + ".oracle.csv") == slurp(file + ".oracle.csv"));
    const json j = json::parse(r.out);
    check_header(j, "simulate");
    CHECK(j.at("seed") == 7);
    CHECK(j.at("rows") == 1000);
    CHECK(j.at("config").at("n") == "1000");
    CHECK(load_dataset(file).size() == 1000);
}

TEST_CASE("simulate usage errors") {
    TempDir dir;
    CHECK(cli({"simulate", "--out", dir / "d.csv"}).code == exit_usage);
    CHECK(cli({"simulate", "--n", "10", "--delta1", "2", "--out", dir / "d.csv"}).code == exit_usage);
    CHECK(cli({}).code == exit_usage);
    CHECK(cli({"nonsense"}).code == exit_usage);
    CHECK(cli({"--help"}).code == exit_ok);
    CHECK(cli({"--version"}).code == exit_ok);
}

TEST_CASE("fit with bootstrap reports every summary field") {
    TempDir dir;
    const std::string file = simulated(dir);
    const auto r = cli({"fit", "--data", file, "--method", "prop-ni", "--bootstrap", "200", "--seed",
                        "3"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    check_header(j, "fit");
    CHECK(j.at("seed") == 3);
    const json& e = j.at("estimate");
    CHECK(e.at("method") == "prop-ni");
    for (const char* k : {"point", "se", "q025", "q50", "q975"}) CHECK(e.at(k).is_number());
    CHECK(e.at("B") == 200);
    CHECK(e.at("q025").get<double>() <= e.at("q50").get<double>());
    CHECK(e.at("q50").get<double>() <= e.at("q975").get<double>());
    CHECK(e.at("warnings").is_array());
    CHECK(e.at("convergence").is_array());
    CHECK_FALSE(e.at("convergence").empty());

    // Parallel and serial bootstraps agree, and the output file matches standard output.
    const std::string out = dir / "fit.json";
    REQUIRE(cli({"fit", "--data", file, "--method", "prop-ni", "--bootstrap", "200", "--seed", "3",
                 "--serial", "--out", out})
                .code == 0);
    CHECK(json::parse(slurp(out)).at("estimate") == e);
}

TEST_CASE("fit errors map to exit codes") {
    TempDir dir;
    const std::string file = simulated(dir);
    const auto sm = cli({"fit", "--data", file, "--method", "prop-sm"});
    CHECK(sm.code == exit_usage);
    CHECK(sm.err.find("--rho") != std::string::npos);
    CHECK(cli({"fit", "--data", file, "--method", "prop-sm", "--rho", "1.5"}).code == exit_usage);
    CHECK(cli({"fit", "--data", file, "--method", "magic"}).code == exit_usage);
    CHECK(cli({"fit", "--data", file, "--method", "naive", "--bootstrap", "1"}).code == exit_usage);
    CHECK(cli({"fit", "--data", dir / "missing.csv", "--method", "naive"}).code == exit_data);

    const std::string dead = dir / "dead.csv";
    {
        std::ofstream f(dead);
        f << "z,a,s,y,x1\n";
        for (int i = 0; i < 20; ++i) f << "1," << i % 2 << ",1," << i << "," << i << "\n";
        for (int i = 0; i < 20; ++i) f << "0," << i % 2 << ",0,NA," << i << "\n";
    }
    const auto r = cli({"fit", "--data", dead, "--method", "naive"});
    CHECK(r.code == exit_data);
    CHECK_FALSE(r.err.empty());

    CHECK(cli({"fit", "--data", file, "--method", "prop-sm", "--rho", "0.5"}).code == exit_ok);
}

TEST_CASE("sensitivity sweep output") {
    TempDir dir;
    const std::string file = simulated(dir);
    const std::string curve = dir / "curve.csv";
    const auto r = cli({"sensitivity", "--data", file, "--rho-grid", "0:1:0.05", "--out", curve});
    REQUIRE(r.code == 0);
    const std::string text = slurp(curve);
    CHECK(text.rfind("rho,pi_dl,delta\n", 0) == 0);
    CHECK(line_count(text) == 22);
    CHECK(text.find("\n0.15,") != std::string::npos);
    CHECK(text.find("\n1,") != std::string::npos);
    check_header(json::parse(r.out), "sensitivity");

    CHECK(cli({"sensitivity", "--data", file, "--rho-grid", "0.5,1.2", "--out", curve}).code ==
          exit_usage);
    CHECK(cli({"sensitivity", "--data", file, "--rho-grid", "0:1", "--out", curve}).code ==
          exit_usage);

    const std::string both = dir / "both.csv";
    const auto two = cli({"sensitivity", "--data", file, "--rho-grid", "0,0.5,1", "--assume-er",
                          "true", "--assume-er", "false", "--out", both});
    REQUIRE(two.code == 0);
    const json outputs = json::parse(two.out).at("outputs");
    REQUIRE(outputs.size() == 2);
    CHECK(outputs[0].at("label") == "assume-er-true");
    CHECK(outputs[1].at("label") == "assume-er-false");
    const std::string solid = dir / "both.assume-er-true.csv", dashed = dir / "both.assume-er-false.csv";
    CHECK(outputs[0].at("path") == solid);
    REQUIRE(fs::exists(solid));
    REQUIRE(fs::exists(dashed));
    CHECK(line_count(slurp(solid)) == 4);
    CHECK(line_count(slurp(dashed)) == 4);
    CHECK(slurp(solid) != slurp(dashed));
}

TEST_CASE("parse_rho_grid") {
    const auto g = parse_rho_grid("0:1:0.05");
    REQUIRE(g.size() == 21);
    CHECK(g[3] == 0.15);
    CHECK(g.back() == 1.0);
    CHECK(parse_rho_grid("0.2, 0.4").size() == 2);
    CHECK(parse_rho_grid("0.5:0.5:0.1") == std::vector<double>{0.5});
    CHECK_THROWS_AS(parse_rho_grid("1.2"), UsageError);
    CHECK_THROWS_AS(parse_rho_grid("0:1:0"), UsageError);
    CHECK_THROWS_AS(parse_rho_grid("1:0:0.1"), UsageError);
    CHECK_THROWS_AS(parse_rho_grid("0.5,0.2"), UsageError);
    CHECK_THROWS_AS(parse_rho_grid("a"), UsageError);
}

TEST_CASE("diagnose and validate emit JSON reports") {
    TempDir dir;
    const std::string file = simulated(dir, "2000");
    const auto r = cli({"diagnose", "--data", file, "--format", "json"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    check_header(j, "diagnose");
    CHECK(j.at("report").at("mode") == "sample");
    CHECK(j.at("config").at("bins") == "2");

    const std::string out = dir / "diag.json";
    const auto table = cli({"diagnose", "--data", file, "--mode", "model", "--rho", "0.5", "--out", out});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("survival-order") != std::string::npos);
    CHECK(json::parse(slurp(out)).at("report").at("mode") == "model");
    CHECK(cli({"diagnose", "--data", file, "--mode", "other"}).code == exit_usage);
    CHECK(cli({"diagnose", "--data", file, "--bins", "0"}).code == exit_usage);

    const auto v = cli({"validate", "--data", file});
    REQUIRE(v.code == 0);
    check_header(json::parse(v.out), "validate");
}

TEST_CASE("bench presets, errors and determinism") {
    const auto r = cli({"bench", "--table2", "--reps", "1", "--seed", "5", "--format", "json"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    check_header(j, "bench");
    CHECK(j.at("report").at("entries").size() == 48);
    const auto again = cli({"bench", "--table2", "--reps", "1", "--seed", "5", "--format", "json",
                            "--serial"});
    CHECK(json::parse(again.out).at("report") == j.at("report"));

    CHECK(cli({"bench", "--reps", "0"}).code == exit_usage);
    CHECK(cli({"bench", "--methods", "prop-sm", "--reps", "1"}).code == exit_usage);
    CHECK(cli({"bench", "--delta1", "3", "--reps", "1"}).code == exit_usage);
    CHECK(cli({"bench", "--format", "xml", "--reps", "1"}).code == exit_usage);

    const auto table = cli({"bench", "--n", "300", "--reps", "2", "--methods", "naive,prop-ni"});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("prop-ni") != std::string::npos);
}

TEST_CASE("config file supplies flags and the command line overrides it") {
    TempDir dir;
    const std::string file = simulated(dir);
    const std::string cfg = dir / "run.ini";
    {
        std::ofstream f(cfg);
        f << "[fit]\nmethod=naive\nseed=11\n";
    }
    const auto r = cli({"--config", cfg, "fit", "--data", file});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("estimate").at("method") == "naive");
    CHECK(j.at("seed") == 11);
    const auto over = cli({"--config", cfg, "fit", "--data", file, "--method", "prop-er"});
    REQUIRE(over.code == 0);
    CHECK(json::parse(over.out).at("estimate").at("method") == "prop-er");
}

#ifdef SACE_CLI_PATH
TEST_CASE("the installed binary returns the documented exit codes") {
    TempDir dir;
    const std::string bin = SACE_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    const std::string file = dir / "d.csv";
    CHECK(status("simulate --n 200 --seed 1 --out " + file) == 0);
    CHECK(status("simulate --out " + file) == 2);
    CHECK(status("fit --data " + dir / "none.csv" + " --method naive") == 3);
    CHECK(status("fit --data " + file + " --method prop-sm") == 2);
}
#endif
