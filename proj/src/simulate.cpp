#include "sace/simulate.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sace/error.hpp"
#include "sace/numerics.hpp"

namespace sace {

SimulatedData gen_dataset(const SimulationSetting& setting) {
    RandomStream stream(setting.seed);
    return gen_dataset(setting, stream);
}

SimulatedData gen_dataset(const SimulationSetting& s, RandomStream& rng) {
    const double d1 = s.delta1, d2 = s.delta2;
    const double rho_x = 0.5, cond_sd = std::sqrt(1.0 - rho_x * rho_x);
    std::vector<Unit> units;
    units.reserve(s.n);
    SimulatedData out;
    out.oracle.reserve(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double x1 = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double e1 = rng.normal(), e2 = rng.normal();
        const double x2 = 1.0 + e1;
        const double x3 = -1.0 + rho_x * e1 + cond_sd * e2;
        const double xu = 0.5 * (x1 + x2 + x3);
        const int a = rng.bernoulli(expit(xu));
        const int z = rng.bernoulli(expit(d1 * xu + d1 * a));
        const double theta1 = expit(2.0 + d2 * xu + a);
        const double ratio = expit(d2 * (-1.5 * x1 + 0.5 * x2 + 0.5 * x3) + a);
        const double g = rng.uniform();
        OracleRow o;
        if (g < theta1 * ratio)
            o.g = Stratum::LL;
        else if (g < theta1)
            o.g = Stratum::LD;
        else
            o.g = Stratum::DD;
        o.s1 = survives_treated(o.g);
        o.s0 = survives_control(o.g);

        // Means relative to Y(1)|LL; Y(0)|LL sits 1 below it in both designs.
        const double base = (s.er_violation ? 5.0 + a : 0.0) + xu;
        const double ld_gap = s.er_violation ? 2.0 : 1.0;
        const double e_y1 = rng.normal(0.0, 0.5), e_y0 = rng.normal(0.0, 0.5);
        if (o.s1) o.y1 = base + (o.g == Stratum::LD ? ld_gap : 0.0) + e_y1;
        if (o.s0) o.y0 = base - 1.0 + e_y0;

        Unit u;
        u.z = z;
        u.x = {x1, x2, x3};
        u.a = a;
        u.s = z ? o.s1 : o.s0;
        if (u.s) u.y = z ? o.y1 : o.y0;
        units.push_back(std::move(u));
        out.oracle.push_back(o);
    }
    out.data = Dataset({"x1", "x2", "x3"}, {{0, "0"}, {1, "1"}}, std::move(units));
    return out;
}

double true_sace(const SimulationSetting&) { return 1.0; }

void write_oracle_csv(std::ostream& out, const SimulatedData& sim) {
    out << "g,s1,s0,y1,y0\n";
    for (const auto& o : sim.oracle) {
        out << to_string(o.g) << ',' << o.s1 << ',' << o.s0 << ',';
        if (o.y1) out << format_number(*o.y1);
        out << ',';
        if (o.y0) out << format_number(*o.y0);
        out << '\n';
    }
}

const BenchEntry* BenchReport::find(std::size_t n, int delta1, int delta2, bool er_violation,
                                    Method method) const {
    for (const auto& e : entries)
        if (e.cell.n == n && e.cell.delta1 == delta1 && e.cell.delta2 == delta2 &&
            e.cell.er_violation == er_violation && e.method == method)
            return &e;
    return nullptr;
}

std::vector<BenchCellSpec> preset_grid(bool er_violation) {
    std::vector<BenchCellSpec> grid;
    for (std::size_t n : {200, 1000, 5000})
        for (int d1 : {0, 1})
            for (int d2 : {0, 1}) grid.push_back({n, d1, d2, er_violation});
    return grid;
}

std::vector<Method> preset_methods() {
    return {Method::naive, Method::dgyz, Method::prop_er, Method::prop_ni};
}

BenchReport run_benchmark(const std::vector<BenchCellSpec>& grid, const std::vector<Method>& methods,
                          std::size_t reps, std::uint64_t seed, Execution exec,
                          const EstimateOptions& options) {
    if (reps < 1) throw UsageError("benchmark needs at least 1 replicate");
    if (methods.empty()) throw UsageError("benchmark needs at least one method");
    const std::size_t m = methods.size();
    const std::size_t tasks = grid.size() * reps;
    // Slot (task, method): estimate, success flag, boundary flag.
    std::vector<double> value(tasks * m, 0.0);
    std::vector<char> ok(tasks * m, 0), boundary(tasks * m, 0);

    const RandomStream root(seed);
    for_each_index(tasks, exec, [&](std::size_t t) {
        const std::size_t c = t / reps, r = t % reps;
        RandomStream stream = root.split(c).split(r);
        SimulationSetting s;
        s.n = grid[c].n;
        s.delta1 = grid[c].delta1;
        s.delta2 = grid[c].delta2;
        s.er_violation = grid[c].er_violation;
        const SimulatedData sim = gen_dataset(s, stream);
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t slot = t * m + k;
            try {
                const SaceEstimate e = estimate_sace(sim.data, methods[k], options);
                value[slot] = e.point;
                ok[slot] = std::isfinite(e.point);
                for (const auto& cv : e.convergence)
                    if (cv.boundary) boundary[slot] = 1;
            } catch (const Error&) {
                ok[slot] = 0;
            }
        }
    });

    BenchReport rep;
    rep.reps = reps;
    rep.seed = seed;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        SimulationSetting s;
        s.delta1 = grid[c].delta1;
        s.delta2 = grid[c].delta2;
        s.er_violation = grid[c].er_violation;
        const double truth = true_sace(s);
        for (std::size_t k = 0; k < m; ++k) {
            BenchEntry e;
            e.cell = grid[c];
            e.method = methods[k];
            e.reps = reps;
            for (std::size_t r = 0; r < reps; ++r) {
                const std::size_t slot = (c * reps + r) * m + k;
                if (ok[slot]) {
                    e.estimates.push_back(value[slot]);
                    e.boundary += static_cast<std::size_t>(boundary[slot]);
                } else {
                    ++e.failed;
                }
            }
            if (!e.estimates.empty()) {
                const MeanSd ms = mean_sd(e.estimates);
                e.mean_bias = ms.mean - truth;
                e.sd = ms.sd;
                e.mc_se = ms.sd / std::sqrt(double(e.estimates.size()));
            } else {
                e.mean_bias = std::nan("");
                e.sd = e.mc_se = std::nan("");
            }
            rep.entries.push_back(std::move(e));
        }
    }
    return rep;
}

nlohmann::json to_json(const BenchReport& r) {
    using nlohmann::json;
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"n", e.cell.n},
                           {"delta1", e.cell.delta1},
                           {"delta2", e.cell.delta2},
                           {"er_violation", e.cell.er_violation},
                           {"method", to_string(e.method)},
                           {"reps", e.reps},
                           {"succeeded", e.estimates.size()},
                           {"failed", e.failed},
                           {"boundary", e.boundary},
                           {"mean_bias", num(e.mean_bias)},
                           {"sd", num(e.sd)},
                           {"mc_se", num(e.mc_se)}});
    return {{"reps", r.reps}, {"seed", r.seed}, {"entries", entries}};
}

void print_table(std::ostream& out, const BenchReport& r) {
    std::vector<Method> methods;
    for (const auto& e : r.entries) {
        bool seen = false;
        for (Method m : methods) seen = seen || m == e.method;
        if (!seen) methods.push_back(e.method);
    }
    out << "bias x 100 (Monte Carlo SE x 100), " << r.reps << " replicates, seed " << r.seed
        << "\n";
    out << std::left << std::setw(8) << "n" << std::setw(8) << "d1,d2" << std::setw(5) << "ER";
    for (Method m : methods) out << std::setw(20) << to_string(m);
    out << '\n';
    for (std::size_t i = 0; i < r.entries.size(); i += methods.size()) {
        const BenchCellSpec& c = r.entries[i].cell;
        out << std::setw(8) << c.n << std::setw(8)
            << (std::to_string(c.delta1) + "," + std::to_string(c.delta2)) << std::setw(5)
            << (c.er_violation ? "viol" : "ok");
        for (std::size_t k = 0; k < methods.size() && i + k < r.entries.size(); ++k) {
            const BenchEntry& e = r.entries[i + k];
            std::ostringstream cell;
            cell << std::setprecision(3) << 100 * e.mean_bias << " (" << 100 * e.mc_se << ")";
            if (e.failed) cell << " f" << e.failed;
            out << std::setw(20) << cell.str();
        }
        out << '\n';
    }
}

}  // namespace sace
