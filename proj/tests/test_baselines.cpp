#include <doctest.h>

#include <cmath>

#include "oracles/population.hpp"
#include "sace/baselines.hpp"
#include "sace/error.hpp"
#include "sace/numerics.hpp"
#include "sace/random.hpp"

using namespace sace;

namespace {

/// Randomized exposure, nobody dies, Y = Z + X'u + noise.
Dataset untruncated(std::size_t n, RandomStream& rs) {
    std::vector<Unit> units;
    for (std::size_t i = 0; i < n; ++i) {
        Unit u;
        u.z = rs.bernoulli(0.5);
        u.x = {rs.normal(), rs.normal()};
        u.a = rs.bernoulli(0.5);
        u.s = 1;
        u.y = u.z + (u.x[0] + u.x[1]) / 2 + rs.normal(0, 0.5);
        units.push_back(u);
    }
    return Dataset({"x1", "x2"}, {{0, "0"}, {1, "1"}}, units);
}

}  // namespace

TEST_CASE("naive estimator without truncation") {
    RandomStream rs(1);
    CHECK(std::abs(naive_estimator(untruncated(5000, rs)) - 1.0) <= 0.05);
}

TEST_CASE("naive estimator is unbiased on untruncated randomized data") {
    RandomStream root(2);
    std::vector<double> est;
    for (std::uint64_t r = 0; r < 200; ++r) {
        RandomStream rs = root.split(r);
        est.push_back(naive_estimator(untruncated(400, rs)));
    }
    const auto m = mean_sd(est);
    CHECK(std::abs(m.mean - 1.0) <= 3 * m.sd / std::sqrt(200.0));
}

TEST_CASE("naive estimator needs survivors in both arms") {
    std::vector<Unit> units;
    for (int i = 0; i < 10; ++i) units.push_back(Unit{1, {}, i % 2, 1, 1.0});
    for (int i = 0; i < 10; ++i) units.push_back(Unit{0, {}, i % 2, 0, std::nullopt});
    CHECK_THROWS_AS(naive_estimator(Dataset({}, {{0, "0"}, {1, "1"}}, units)), DataError);
}

TEST_CASE("mixture plug-in on the worked population") {
    const auto pop = oracle::worked_example();
    CHECK(std::abs(dgyz_from_cells(oracle::observe(pop)) - 1.0) <= 1e-10);
    CHECK(std::abs(dgyz_estimator(oracle::realize(pop, 10, false)) - 1.0) <= 1e-10);
}

TEST_CASE("mixture plug-in errors") {
    auto pop = oracle::worked_example();
    pop[0].ll = pop[1].ll;
    pop[0].ld = pop[1].ld;
    pop[0].dd = pop[1].dd;
    CHECK_THROWS_AS(dgyz_from_cells(oracle::observe(pop)), RelevanceError);
    CHECK_THROWS_AS(dgyz_estimator(oracle::realize(pop, 10, false)), RelevanceError);

    std::mt19937_64 rng(3);
    auto three = oracle::random_er_population(rng, 1, 3, 1.0);
    for (auto& s : three) {
        s.ll = 0.3 + 0.1 * s.a;
        s.ld = 0.2;
        s.dd = 1 - s.ll - s.ld;
    }
    CHECK_THROWS_AS(dgyz_estimator(oracle::realize(three, 10, false)), DataError);
}
