#include <doctest.h>

#include <sstream>

#include "oracles/population.hpp"
#include "sace/diagnostics.hpp"
#include "sace/models.hpp"
#include "sace/random.hpp"
#include "sace/simulate.hpp"

using namespace sace;

namespace {

Cell sample_cell(int x, int a, double p1, double p0, std::size_t n) {
    Cell c;
    c.x = x;
    c.a = a;
    c.mass = 0.5;
    c.p1 = p1;
    c.p0 = p0;
    c.n1 = c.n0 = n;
    c.surv1 = std::size_t(p1 * double(n));
    c.surv0 = std::size_t(p0 * double(n));
    return c;
}

CellTable sample_table(std::vector<Cell> cells) {
    CellTable t;
    t.sample_mode = true;
    t.cells = std::move(cells);
    return t;
}

/// Units drawn from a structural population without covariates; `misfit`
/// is added to exposed survivors' outcomes at A level `misfit_level`.
Dataset draw(const std::vector<oracle::StructCell>& pop, std::size_t n, RandomStream& rs,
             double misfit = 0.0, int misfit_level = 1) {
    std::vector<Unit> units;
    for (std::size_t i = 0; i < n; ++i) {
        double u = rs.uniform(), acc = 0;
        const oracle::StructCell* c = &pop.back();
        for (const auto& s : pop)
            if ((acc += s.mass) > u) {
                c = &s;
                break;
            }
        Unit unit;
        unit.z = rs.bernoulli(0.5);
        unit.a = c->a;
        const double g = rs.uniform();
        double mean = 0;
        if (g < c->ll) {
            unit.s = 1;
            mean = unit.z ? c->mu1_ll : c->mu0_ll;
        } else if (g < c->ll + c->ld) {
            unit.s = unit.z;
            mean = c->mu1_ld;
        } else if (g < c->ll + c->ld + c->dl) {
            unit.s = 1 - unit.z;
            mean = c->mu0_dl;
        }
        if (unit.s) unit.y = mean + (unit.z && c->a == misfit_level ? misfit : 0.0) + rs.normal();
        units.push_back(unit);
    }
    std::map<int, std::string> labels;
    for (const auto& s : pop) labels[s.a] = std::to_string(s.a);
    return Dataset({}, labels, units);
}

std::vector<oracle::StructCell> three_levels() {
    std::vector<oracle::StructCell> pop;
    for (int a = 0; a < 3; ++a) {
        oracle::StructCell s;
        s.a = a;
        s.mass = 1.0 / 3;
        // Mixing weights 1/6, 3/5 and 8/9: well spread, so a misfit at the
        // middle level is far from any two-point mixture line.
        s.ll = 0.1 + 0.35 * a;
        s.ld = 0.5 - 0.2 * a;
        s.dd = 1 - s.ll - s.ld;
        s.mu1_ll = 2;
        s.mu1_ld = 0;
        s.mu0_ll = 1;
        pop.push_back(s);
    }
    return pop;
}

}  // namespace

TEST_CASE("status ordering") {
    CHECK(worst(Status::pass, Status::fail) == Status::fail);
    CHECK(worst(Status::warn, Status::pass) == Status::warn);
    CHECK(worst(Status::vacuous, Status::pass) == Status::pass);
    CHECK(worst(Status::vacuous, Status::vacuous) == Status::vacuous);
}

TEST_CASE("monotone survival check on cells") {
    CHECK(check_monotone(sample_table({sample_cell(0, 0, 0.8, 0.5, 5000)})).status == Status::pass);
    CHECK(check_monotone(sample_table({sample_cell(0, 0, 0.4, 0.6, 2000)})).status == Status::fail);
    // A reversal within sampling noise is not flagged.
    CHECK(check_monotone(sample_table({sample_cell(0, 0, 0.50, 0.51, 200)})).status == Status::pass);
    auto pop = oracle::observe(oracle::worked_example());
    CHECK(check_monotone(pop).status == Status::pass);
    pop.cells[0].p0 = 0.9;
    CHECK(check_monotone(pop).status == Status::fail);
}

TEST_CASE("monotone survival check on fitted models") {
    SimulationSetting s;
    s.n = 3000;
    s.seed = 4;
    const Dataset d = gen_dataset(s).data;
    const auto er = fit_survival_er(d);
    const auto rep = check_monotone(er.params, d);
    CHECK(rep.status == Status::vacuous);
    CHECK_FALSE(rep.note.empty());

    SurvivalParamsSM sm;
    sm.beta1 = Vector::Zero(5);
    sm.beta0 = Vector::Zero(5);
    sm.beta0(0) = 1.0;  // theta0 > theta1 everywhere
    CHECK(check_monotone(sm, d).status == Status::fail);
    sm.beta0(0) = -1.0;
    CHECK(check_monotone(sm, d).status == Status::pass);
}

TEST_CASE("relevance check") {
    // Ratios 0.625 and 0.5 across the two levels.
    auto t = sample_table({sample_cell(0, 1, 0.8, 0.5, 5000), sample_cell(0, 0, 0.6, 0.3, 5000)});
    CHECK(check_relevance(t).status == Status::pass);
    // Identical ratios need enough units for the equivalence bound to certify
    // constancy; with few units the cell is inconclusive rather than failed.
    t = sample_table({sample_cell(0, 1, 0.8, 0.4, 50000), sample_cell(0, 0, 0.6, 0.3, 50000)});
    CHECK(check_relevance(t).status == Status::fail);
    t = sample_table({sample_cell(0, 1, 0.8, 0.4, 100), sample_cell(0, 0, 0.6, 0.3, 100)});
    const auto thin = check_relevance(t);
    CHECK(thin.status == Status::pass);
    CHECK(thin.cells[0].detail["inconclusive"] == true);
    t = sample_table({sample_cell(0, 1, 0.8, 0.4, 5000)});
    CHECK(check_relevance(t).status == Status::vacuous);

    auto pop = oracle::observe(oracle::worked_example());
    CHECK(check_relevance(pop).status == Status::pass);
    pop.cells[0].p1 = pop.cells[1].p1;
    pop.cells[0].p0 = pop.cells[1].p0;
    CHECK(check_relevance(pop).status == Status::fail);
}

TEST_CASE("boundedness with two levels is vacuous") {
    const auto reps = check_boundedness(oracle::observe(oracle::worked_example()));
    REQUIRE(reps.size() == 3);
    CHECK(reps[0].constraint == "mixture-treated");
    CHECK(reps[1].constraint == "mixture-control");
    CHECK(reps[2].constraint == "mixture-difference");
    for (const auto& r : reps) {
        CHECK(r.status == Status::vacuous);
        CHECK_FALSE(r.note.empty());
    }
}

TEST_CASE("boundedness with three levels on a consistent population") {
    const auto t = oracle::observe(three_levels());
    DiagnosticsOptions o;
    o.rho = 1.0;
    const auto reps = check_boundedness(t, o);
    CHECK(reps[0].status == Status::pass);
    CHECK(reps[2].status == Status::pass);
    auto bad = three_levels();
    bad[1].mu1_ll += 0.5;
    CHECK(check_boundedness(oracle::observe(bad))[0].status == Status::fail);
}

TEST_CASE("boundedness J test detects a mean misfit in samples") {
    RandomStream root(5);
    int fails = 0, consistent_fails = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        RandomStream rs = root.split(r);
        const auto t = tabulate_cells(draw(three_levels(), 10000, rs, 0.5));
        if (check_boundedness(t)[0].status == Status::fail) ++fails;
        RandomStream rs2 = root.split(1000 + r);
        const auto t2 = tabulate_cells(draw(three_levels(), 10000, rs2));
        if (check_boundedness(t2)[0].status == Status::fail) ++consistent_fails;
    }
    CHECK(fails >= 190);
    CHECK(consistent_fails <= 10);
}

TEST_CASE("diagnostics are calibrated on the simulation design") {
    RandomStream root(6);
    int clean = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        SimulationSetting s;
        s.n = 2000;
        RandomStream rs = root.split(r);
        const auto rep = diagnose(gen_dataset(s, rs).data);
        if (rep.overall() == Status::pass || rep.overall() == Status::vacuous) ++clean;
    }
    CHECK(clean >= 190);
}

TEST_CASE("full report and rendering") {
    SimulationSetting s;
    s.n = 2000;
    s.seed = 8;
    const Dataset d = gen_dataset(s).data;
    const Dataset copy = d;
    const auto rep = diagnose(d);
    CHECK(d == copy);
    CHECK(rep.mode == "sample");
    REQUIRE(rep.constraints.size() == 5);
    for (const char* c : {"survival-order", "mixture-treated", "relevance", "mixture-control", "mixture-difference"}) CHECK(rep.find(c) != nullptr);
    const auto again = diagnose(d);
    CHECK(to_json(again) == to_json(rep));
    std::ostringstream table;
    print_table(table, rep);
    CHECK(table.str().find("relevance") != std::string::npos);

    DiagnosticsOptions o;
    o.rho = 0.5;
    const auto model = diagnose_model(d, o);
    CHECK(model.mode == "model");
    REQUIRE(model.find("survival-order") != nullptr);
    CHECK(diagnose_model(d).find("survival-order")->status == Status::vacuous);
}
