#include <doctest.h>

#include <sstream>

#include "sace/data.hpp"
#include "sace/error.hpp"
#include "sace/random.hpp"

using namespace sace;

namespace {

Dataset parse(const std::string& csv, const Schema& schema = {}) {
    std::istringstream in(csv);
    return read_dataset(in, schema);
}

const char* header = "z,x1,x2,a,s,y\n";

Dataset random_dataset(std::uint64_t seed, std::size_t n) {
    RandomStream rs(seed);
    std::vector<Unit> units;
    for (std::size_t i = 0; i < n; ++i) {
        Unit u;
        u.z = rs.bernoulli(0.5);
        u.x = {rs.normal(), rs.uniform() * 1e-7, rs.normal(0, 1e6)};
        u.a = int(rs.below(3));
        u.s = rs.bernoulli(0.7);
        if (u.s) u.y = rs.normal(2, 3);
        units.push_back(u);
    }
    return Dataset({"x1", "x2", "x3"}, {{0, "0"}, {1, "1"}, {2, "2"}}, units);
}

}  // namespace

TEST_CASE("csv row maps onto unit fields") {
    const Dataset d = parse(std::string(header) + "1,0.3,-1.2,1,1,2.5\n");
    REQUIRE(d.size() == 1);
    const Unit& u = d[0];
    CHECK(u.z == 1);
    CHECK(u.x == std::vector<double>{0.3, -1.2});
    CHECK(u.a == 1);
    CHECK(u.s == 1);
    REQUIRE(u.y);
    CHECK(*u.y == 2.5);
    CHECK(d.covariate_names() == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("empty outcome field encodes truncation") {
    const Dataset d = parse(std::string(header) + "0,0.3,-1.2,0,0,\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].s == 0);
    CHECK_FALSE(d[0].y.has_value());
    const Dataset na = parse(std::string(header) + "0,0.3,-1.2,0,0,NA\n");
    CHECK_FALSE(na[0].y.has_value());
}

TEST_CASE("outcome on a non-survivor is rejected") {
    try {
        parse(std::string(header) + "0,0.3,-1.2,0,0,4.1\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("outcome present for non-survivor") != std::string::npos);
    }
}

TEST_CASE("malformed input is a data error") {
    CHECK_THROWS_AS(parse(std::string(header) + "1,0.3,-1.2,1,1,\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(header) + "2,0.3,-1.2,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(header) + "1,abc,-1.2,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(header) + "1,0.3,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse("z,x1,a,s\n1,0,1,1\n"), DataError);
    CHECK_THROWS_AS(parse(""), DataError);
}

TEST_CASE("schema renames columns and restricts levels") {
    Schema schema;
    schema.z_col = "treat";
    schema.a_col = "sub";
    schema.s_col = "alive";
    schema.y_col = "score";
    schema.x_cols = {"age"};
    const Dataset d = parse("score,age,alive,sub,treat,ignored\n3.5,40,1,low,1,9\n,50,0,high,0,9\n",
                            schema);
    REQUIRE(d.size() == 2);
    CHECK(d.covariate_names() == std::vector<std::string>{"age"});
    CHECK(d[0].x == std::vector<double>{40});
    CHECK(d[0].z == 1);
    CHECK(d[1].s == 0);
    // Non-numeric labels are coded by sorted position.
    CHECK(d.a_labels().at(d[0].a) == "low");
    CHECK(d.a_labels().at(d[1].a) == "high");
    CHECK(d[1].a == 0);

    schema.a_levels = {"low"};
    CHECK_THROWS_AS(parse("score,age,alive,sub,treat\n3.5,40,1,low,1\n,50,0,high,0\n", schema),
                    DataError);
}

TEST_CASE("write then read reproduces the dataset") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Dataset d = random_dataset(seed, 200);
        std::stringstream buf;
        write_dataset(buf, d);
        const Dataset back = read_dataset(buf);
        CHECK(back == d);
    }
}

TEST_CASE("number formatting round-trips exactly") {
    RandomStream rs(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = rs.normal(0, std::pow(10.0, double(rs.below(40)) - 20));
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(3) == "3");
}

TEST_CASE("validate flags an empty arm") {
    std::vector<Unit> units;
    for (int i = 0; i < 5; ++i) units.push_back(Unit{1, {0.0}, i % 2, 1, 1.0});
    const Dataset d({"x"}, {{0, "0"}, {1, "1"}}, units);
    const ValidationReport r = validate(d);
    CHECK(r.units_per_arm[0] == 0);
    CHECK(r.units_per_arm[1] == 5);
    CHECK(std::find(r.flags.begin(), r.flags.end(), "arm 0 empty") != r.flags.end());
    CHECK_THROWS_AS(require_both_arms(d), DataError);
}

TEST_CASE("balanced data validates clean") {
    std::vector<Unit> units;
    for (int z : {0, 1})
        for (int a : {0, 1})
            for (int s : {0, 1})
                for (int k = 0; k < 3; ++k) {
                    Unit u{z, {double(k)}, a, s, std::nullopt};
                    if (s) u.y = k;
                    units.push_back(u);
                }
    const Dataset d({"x"}, {{0, "0"}, {1, "1"}}, units);
    const Dataset copy = d;
    const ValidationReport r = validate(d);
    CHECK(r.clear());
    CHECK(r.n == 24);
    CHECK(r.survivors_per_arm[1] == 6);
    CHECK(r.a_counts[0].at(1) == 6);
    REQUIRE(r.covariates.size() == 1);
    CHECK(r.covariates[0].mean == doctest::Approx(1.0));
    CHECK(r.covariates[0].min == 0.0);
    CHECK(r.covariates[0].max == 2.0);
    CHECK(d == copy);
    const auto j = to_json(r);
    CHECK(j.contains("flags"));
}

TEST_CASE("validate flags missing substitution variation among exposed survivors") {
    std::vector<Unit> units;
    for (int a : {0, 1}) {
        units.push_back(Unit{0, {}, a, 1, 1.0});
        units.push_back(Unit{1, {}, a, a == 1 ? 1 : 0, std::nullopt});
    }
    units[3].y = 2.0;
    const Dataset d({}, {{0, "0"}, {1, "1"}}, units);
    const ValidationReport r = validate(d);
    CHECK(std::find(r.flags.begin(), r.flags.end(), "substitution variation absent in arm 1") !=
          r.flags.end());
}

TEST_CASE("dataset constructor enforces unit invariants") {
    CHECK_THROWS_AS(Dataset({}, {{0, "0"}}, {Unit{0, {}, 0, 0, 1.0}}), DataError);
    CHECK_THROWS_AS(Dataset({}, {{0, "0"}}, {Unit{0, {}, 0, 1, std::nullopt}}), DataError);
    CHECK_THROWS_AS(Dataset({"x"}, {{0, "0"}}, {Unit{0, {}, 0, 0, std::nullopt}}), DataError);
    CHECK_THROWS_AS(Dataset({}, {{0, "0"}}, {Unit{0, {}, 5, 0, std::nullopt}}), DataError);
}

TEST_CASE("subset keeps order and duplicates") {
    const Dataset d = random_dataset(4, 10);
    const Dataset s = d.subset({3, 3, 0});
    REQUIRE(s.size() == 3);
    CHECK(s[0] == d[3]);
    CHECK(s[1] == d[3]);
    CHECK(s[2] == d[0]);
}
