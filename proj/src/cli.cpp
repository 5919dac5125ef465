#include "sace/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sace/data.hpp"
#include "sace/diagnostics.hpp"
#include "sace/error.hpp"
#include "sace/models.hpp"
#include "sace/parallel.hpp"
#include "sace/simulate.hpp"

namespace sace {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double parse_real(const std::string& s, const std::string& what) {
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || b == e)
        throw UsageError("malformed " + what + " '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("expected true or false, got '" + s + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path + "'");
    return f;
}

void write_text(const std::string& path, const std::string& text) {
    auto f = open_out(path);
    f << text;
    if (!f) throw DataError("failed writing '" + path + "'");
}

/// Every option of `sub` that was given or has a default, as strings.
json config_echo(const CLI::App& sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            if (opt->get_expected_max() > 1 || r.size() > 1)
                j[name] = r;
            else if (opt->get_type_size() == 0)
                j[name] = true;
            else
                j[name] = r.empty() ? "" : r.front();
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

struct SchemaFlags {
    Schema schema;
    std::string data_path;
};

void add_data_flags(CLI::App* sub, SchemaFlags& f) {
    sub->add_option("--data", f.data_path, "input dataset CSV")->required();
    sub->add_option("--z-col", f.schema.z_col, "exposure column")->capture_default_str();
    sub->add_option("--a-col", f.schema.a_col, "substitution-variable column")
        ->capture_default_str();
    sub->add_option("--s-col", f.schema.s_col, "survival column")->capture_default_str();
    sub->add_option("--y-col", f.schema.y_col, "outcome column")->capture_default_str();
    sub->add_option("--x-cols", f.schema.x_cols,
                    "covariate columns, comma separated (default: all remaining columns)")
        ->delimiter(',');
    sub->add_option("--a-levels", f.schema.a_levels,
                    "admissible labels of the substitution variable, comma separated")
        ->delimiter(',');
}

struct Options {
    // shared
    std::uint64_t seed = 0;
    std::string out;
    bool serial = false;
    int threads = 0;
    // simulate
    std::size_t n = 0;
    int delta1 = 0, delta2 = 0;
    bool er_violation = false;
    std::string oracle;
    // fit / sensitivity / diagnose / validate
    SchemaFlags fit_data, sens_data, diag_data, val_data;
    std::string method;
    std::optional<double> rho;
    std::size_t bootstrap = 0;
    std::string rho_grid = "0:1:0.05";
    std::vector<std::string> assume_er{"true"};
    int bins = 2;
    double z_threshold = 2.0;
    std::string diag_mode = "sample";
    std::string format = "table";
    // bench
    bool table2 = false, table3 = false;
    std::vector<std::size_t> sizes{1000};
    std::vector<int> delta1s{0}, delta2s{0};
    std::vector<std::string> methods;
    std::size_t reps = 500;
};

json run_header(const std::string& command, const CLI::App& sub, std::uint64_t seed,
                Clock::time_point start) {
    return {{"command", command},
            {"version", SACE_VERSION},
            {"seed", seed},
            {"config", config_echo(sub)},
            {"duration_seconds",
             std::chrono::duration<double>(Clock::now() - start).count()}};
}

void emit_json(const json& j, const std::string& path, std::ostream& out) {
    if (path.empty())
        out << j.dump(2) << '\n';
    else
        write_text(path, j.dump(2) + "\n");
}

int cmd_simulate(const Options& o, const CLI::App& sub, std::ostream& out) {
    const auto start = Clock::now();
    if (o.delta1 != 0 && o.delta1 != 1) throw UsageError("--delta1 must be 0 or 1");
    if (o.delta2 != 0 && o.delta2 != 1) throw UsageError("--delta2 must be 0 or 1");
    SimulationSetting s;
    s.n = o.n;
    s.delta1 = o.delta1;
    s.delta2 = o.delta2;
    s.er_violation = o.er_violation;
    s.seed = o.seed;
    const SimulatedData sim = gen_dataset(s);
    const std::string oracle = o.oracle.empty() ? o.out + ".oracle.csv" : o.oracle;
    {
        auto f = open_out(o.out);
        write_dataset(f, sim.data);
    }
    {
        auto f = open_out(oracle);
        write_oracle_csv(f, sim);
    }
    json rep = run_header("simulate", sub, o.seed, start);
    rep["rows"] = sim.data.size();
    rep["outputs"] = {{"data", o.out}, {"oracle", oracle}};
    rep["true_sace"] = true_sace(s);
    out << rep.dump(2) << '\n';
    return exit_ok;
}

int cmd_fit(const Options& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto start = Clock::now();
    const Method method = parse_method(o.method);
    if (needs_rho(method) && !o.rho) throw UsageError(o.method + " requires --rho");
    if (o.rho && !(*o.rho >= 0 && *o.rho <= 1)) throw UsageError("--rho must lie in [0, 1]");
    if (sub.count("--bootstrap") && o.bootstrap < 2)
        throw UsageError("--bootstrap needs at least 2 replicates");
    const Dataset data = load_dataset(o.fit_data.data_path, o.fit_data.schema);
    EstimateOptions opt;
    opt.rho = o.rho;
    const SaceEstimate est =
        o.bootstrap ? bootstrap(data, method, opt, o.bootstrap, o.seed,
                                o.serial ? Execution::serial : Execution::parallel)
                    : estimate_sace(data, method, opt);
    for (const auto& w : est.warnings) err << "warning: " << w << '\n';
    json rep = run_header("fit", sub, o.seed, start);
    rep["estimate"] = to_json(est);
    rep["n"] = data.size();
    emit_json(rep, o.out, out);
    return exit_ok;
}

int cmd_sensitivity(const Options& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto start = Clock::now();
    const std::vector<double> grid = parse_rho_grid(o.rho_grid);
    std::vector<bool> variants;
    for (const auto& s : o.assume_er) {
        const bool v = parse_bool(s);
        if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
    }
    const Dataset data = load_dataset(o.sens_data.data_path, o.sens_data.schema);
    json outputs = json::array();
    for (bool assume_er : variants) {
        std::string path = o.out;
        if (variants.size() > 1) {
            std::filesystem::path p(o.out);
            const std::string ext = p.extension().string();
            p.replace_extension();
            path = p.string() + (assume_er ? ".assume-er-true" : ".assume-er-false") +
                   (ext.empty() ? ".csv" : ext);
        }
        const auto curve = sensitivity_sweep(data, grid, assume_er);
        std::ostringstream csv;
        write_sweep_csv(csv, curve);
        write_text(path, csv.str());
        std::size_t failed = 0;
        for (const auto& pt : curve)
            if (!pt.delta) {
                ++failed;
                err << "warning: rho=" << pt.rho << ": " << pt.error << '\n';
            }
        outputs.push_back({{"assume_er", assume_er},
                           {"label", assume_er ? "assume-er-true" : "assume-er-false"},
                           {"path", path},
                           {"points", curve.size()},
                           {"failed_points", failed}});
    }
    json rep = run_header("sensitivity", sub, o.seed, start);
    rep["outputs"] = outputs;
    out << rep.dump(2) << '\n';
    return exit_ok;
}

int cmd_diagnose(const Options& o, const CLI::App& sub, std::ostream& out) {
    const auto start = Clock::now();
    if (o.bins < 1) throw UsageError("--bins must be at least 1");
    if (o.rho && !(*o.rho >= 0 && *o.rho <= 1)) throw UsageError("--rho must lie in [0, 1]");
    DiagnosticsOptions opt;
    opt.z_threshold = o.z_threshold;
    opt.rho = o.rho;
    opt.binning.bins_per_covariate = o.bins;
    const Dataset data = load_dataset(o.diag_data.data_path, o.diag_data.schema);
    DiagnosticsReport rep;
    if (o.diag_mode == "sample")
        rep = diagnose(data, opt);
    else if (o.diag_mode == "model")
        rep = diagnose_model(data, opt);
    else
        throw UsageError("--mode must be sample or model");
    json j = run_header("diagnose", sub, o.seed, start);
    j["report"] = to_json(rep);
    if (o.format == "json") {
        emit_json(j, o.out, out);
    } else {
        print_table(out, rep);
        if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_bench(const Options& o, const CLI::App& sub, std::ostream& out) {
    const auto start = Clock::now();
    std::vector<BenchCellSpec> grid;
    if (o.table2 || o.table3) {
        if (o.table2)
            for (const auto& c : preset_grid(false)) grid.push_back(c);
        if (o.table3)
            for (const auto& c : preset_grid(true)) grid.push_back(c);
    } else {
        for (std::size_t n : o.sizes)
            for (int d1 : o.delta1s)
                for (int d2 : o.delta2s) {
                    if ((d1 != 0 && d1 != 1) || (d2 != 0 && d2 != 1))
                        throw UsageError("--delta1 and --delta2 take values 0 or 1");
                    grid.push_back({n, d1, d2, o.er_violation});
                }
    }
    std::vector<Method> methods;
    for (const auto& m : o.methods) methods.push_back(parse_method(m));
    if (methods.empty()) methods = preset_methods();
    for (Method m : methods)
        if (needs_rho(m)) throw UsageError(to_string(m) + " is not available in the benchmark");
    const BenchReport rep = run_benchmark(grid, methods, o.reps, o.seed,
                                          o.serial ? Execution::serial : Execution::parallel);
    json j = run_header("bench", sub, o.seed, start);
    j["report"] = to_json(rep);
    if (o.format == "json") {
        emit_json(j, o.out, out);
    } else {
        print_table(out, rep);
        if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_validate(const Options& o, const CLI::App& sub, std::ostream& out) {
    const auto start = Clock::now();
    const Dataset data = load_dataset(o.val_data.data_path, o.val_data.schema);
    json j = run_header("validate", sub, o.seed, start);
    j["report"] = to_json(validate(data));
    emit_json(j, o.out, out);
    return exit_ok;
}

}  // namespace

std::vector<double> parse_rho_grid(const std::string& text) {
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw UsageError("rho grid must be start:stop:step");
        const double a = parse_real(parts[0], "rho grid start");
        const double b = parse_real(parts[1], "rho grid stop");
        const double step = parse_real(parts[2], "rho grid step");
        if (!(step > 0)) throw UsageError("rho grid step must be positive");
        if (b < a) throw UsageError("rho grid stop is below start");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t k = 0; k < count; ++k) {
            // Rounded to 12 significant digits so 0:1:0.05 yields 0.15, not 0.15000000000000002.
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.12g", a + double(k) * step);
            double v = std::strtod(buf, nullptr);
            if (std::abs(v - b) < 1e-9 * std::max(1.0, std::abs(b))) v = b;
            grid.push_back(v);
        }
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');) grid.push_back(parse_real(p, "rho value"));
    }
    if (grid.empty()) throw UsageError("rho grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0.0 && grid[k] <= 1.0))
            throw UsageError("rho grid value " + format_number(grid[k]) + " outside [0, 1]");
        if (k && grid[k] < grid[k - 1]) throw UsageError("rho grid must be sorted");
    }
    return grid;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Survivor average causal effect estimation with a substitution variable", "sace"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(SACE_VERSION));
    app.set_config("--config", "", "key=value config file; command-line flags take precedence");
    Options o;
    app.add_option("--threads", o.threads, "OpenMP threads for replicate loops (default: all)")
        ->check(CLI::PositiveNumber);

    auto* sim = app.add_subcommand("simulate", "generate a dataset from the simulation design");
    sim->add_option("--n", o.n, "number of units")->required();
    sim->add_option("--delta1", o.delta1, "exposure-outcome confounding switch (0 or 1)")
        ->capture_default_str();
    sim->add_option("--delta2", o.delta2, "survival-outcome confounding switch (0 or 1)")
        ->capture_default_str();
    sim->add_flag("--er-violation", o.er_violation,
                  "outcome means depend on A (exclusion restriction fails)");
    sim->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sim->add_option("--out", o.out, "dataset CSV path")->required();
    sim->add_option("--oracle", o.oracle, "latent-variable CSV path (default: <out>.oracle.csv)");

    auto* fit = app.add_subcommand("fit", "estimate the survivor average causal effect");
    add_data_flags(fit, o.fit_data);
    fit->add_option("--method", o.method,
                    "naive, dgyz, prop-er, prop-ni, prop-sm or prop-sm-ni")
        ->required();
    fit->add_option("--rho", o.rho, "association parameter in [0, 1] (prop-sm, prop-sm-ni)");
    fit->add_option("--bootstrap", o.bootstrap, "bootstrap replicates B (>= 2)");
    fit->add_option("--seed", o.seed, "bootstrap seed")->capture_default_str();
    fit->add_flag("--serial", o.serial, "run replicates on one thread");
    fit->add_option("--out", o.out, "JSON output path (default: standard output)");

    auto* sens = app.add_subcommand("sensitivity", "sweep the association parameter rho");
    add_data_flags(sens, o.sens_data);
    sens->add_option("--rho-grid", o.rho_grid, "start:stop:step or comma list within [0, 1]")
        ->capture_default_str();
    sens->add_option("--assume-er", o.assume_er,
                     "true: per-arm outcome models; false: no-interaction model; repeat for both")
        ->capture_default_str();
    sens->add_option("--out", o.out, "curve CSV path (labelled per variant when both run)")
        ->required();

    auto* diag = app.add_subcommand("diagnose", "check testable implications of the assumptions");
    add_data_flags(diag, o.diag_data);
    diag->add_option("--mode", o.diag_mode, "sample (cell proportions) or model (fitted survival)")
        ->capture_default_str();
    diag->add_option("--bins", o.bins, "quantile bins per continuous covariate")
        ->capture_default_str();
    diag->add_option("--rho", o.rho, "association parameter for the mixture-control check and model mode");
    diag->add_option("--z-threshold", o.z_threshold, "one-sided z threshold")
        ->capture_default_str();
    diag->add_option("--format", o.format, "table or json on standard output")
        ->capture_default_str();
    diag->add_option("--out", o.out, "JSON report path");

    auto* bench = app.add_subcommand("bench", "Monte Carlo comparison of estimators");
    bench->add_flag("--table2", o.table2, "preset: 3 sample sizes x 4 designs, no ER violation");
    bench->add_flag("--table3", o.table3, "preset: 3 sample sizes x 4 designs, ER violation");
    bench->add_option("--n", o.sizes, "sample sizes, comma separated")->delimiter(',')
        ->capture_default_str();
    bench->add_option("--delta1", o.delta1s, "delta1 values")->delimiter(',')->capture_default_str();
    bench->add_option("--delta2", o.delta2s, "delta2 values")->delimiter(',')->capture_default_str();
    bench->add_flag("--er-violation", o.er_violation, "use the ER-violating outcome means");
    bench->add_option("--methods", o.methods, "methods, comma separated (default: naive,dgyz,prop-er,prop-ni)")
        ->delimiter(',');
    bench->add_option("--reps", o.reps, "replicates per cell (>= 1)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("--seed", o.seed, "random seed")->capture_default_str();
    bench->add_flag("--serial", o.serial, "run replicates on one thread");
    bench->add_option("--format", o.format, "table or json on standard output")
        ->capture_default_str();
    bench->add_option("--out", o.out, "JSON report path");

    auto* val = app.add_subcommand("validate", "summarize and check a dataset");
    add_data_flags(val, o.val_data);
    val->add_option("--out", o.out, "JSON output path (default: standard output)");

    std::vector<std::string> argv_store{"sace"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    }

    try {
        if (o.threads > 0) set_max_threads(o.threads);
        if (o.format != "table" && o.format != "json")
            throw UsageError("--format must be table or json");
        if (sim->parsed()) return cmd_simulate(o, *sim, out);
        if (fit->parsed()) return cmd_fit(o, *fit, out, err);
        if (sens->parsed()) return cmd_sensitivity(o, *sens, out, err);
        if (diag->parsed()) return cmd_diagnose(o, *diag, out);
        if (bench->parsed()) return cmd_bench(o, *bench, out);
        if (val->parsed()) return cmd_validate(o, *val, out);
        throw UsageError("no subcommand");
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
}

}  // namespace sace
