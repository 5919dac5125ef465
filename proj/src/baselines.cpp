#include "sace/baselines.hpp"

#include <map>
#include <string>

#include "sace/error.hpp"
#include "sace/numerics.hpp"

namespace sace {

double naive_estimator(const Dataset& data) {
    std::size_t surv[2] = {0, 0};
    for (const Unit& u : data.units())
        if (u.s) ++surv[u.z];
    for (int z : {0, 1})
        if (surv[z] == 0)
            throw DataError("naive estimator: no survivors in arm " + std::to_string(z));

    const auto p = static_cast<Eigen::Index>(data.dim());
    Matrix design(static_cast<Eigen::Index>(surv[0] + surv[1]), p + 3);
    Vector y(design.rows());
    Eigen::Index r = 0;
    for (const Unit& u : data.units()) {
        if (!u.s) continue;
        design(r, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) design(r, 1 + j) = u.x[j];
        design(r, p + 1) = u.a;
        design(r, p + 2) = u.z;
        y(r) = *u.y;
        ++r;
    }
    std::vector<std::string> names{"intercept"};
    for (const auto& c : data.covariate_names()) names.push_back(c);
    names.push_back("a");
    names.push_back("z");
    return fit_ols(design, y, names)(p + 2);
}

namespace {

struct ArmLevel {
    double units = 0, survivors = 0, ysum = 0;
};

double dgyz_solve(const std::map<int, ArmLevel> (&arm)[2], double control_mean) {
    if (arm[1].size() != 2)
        throw DataError("dgyz estimator needs a binary substitution variable (found " +
                        std::to_string(arm[1].size()) + " levels in arm 1)");
    double ybar[2], mix[2];
    int k = 0;
    for (const auto& [a, t1] : arm[1]) {
        auto it = arm[0].find(a);
        if (it == arm[0].end() || !(it->second.units > 0))
            throw DataError("dgyz estimator: A level " + std::to_string(a) + " absent from arm 0");
        if (!(t1.survivors > 0))
            throw DataError("dgyz estimator: no exposed survivors at A level " + std::to_string(a));
        const double p1 = t1.survivors / t1.units;
        const double p0 = it->second.survivors / it->second.units;
        ybar[k] = t1.ysum / t1.survivors;
        mix[k] = p0 / p1;
        ++k;
    }
    const MixtureMeans m = solve_two_point_mixture(ybar[1], ybar[0], mix[1], mix[0]);
    return m.mu_ll - control_mean;
}

}  // namespace

double dgyz_estimator(const Dataset& data) {
    std::map<int, ArmLevel> arm[2];
    double ysum0 = 0, surv0 = 0;
    for (const Unit& u : data.units()) {
        ArmLevel& t = arm[u.z][u.a];
        t.units += 1;
        if (u.s) {
            t.survivors += 1;
            t.ysum += *u.y;
            if (u.z == 0) {
                ysum0 += *u.y;
                surv0 += 1;
            }
        }
    }
    if (surv0 == 0) throw DataError("dgyz estimator: no survivors in arm 0");
    return dgyz_solve(arm, ysum0 / surv0);
}

double dgyz_from_cells(const CellTable& table) {
    std::map<int, ArmLevel> arm[2];
    double ysum0 = 0, surv0 = 0;
    for (const Cell& c : table.cells) {
        for (int z : {0, 1}) {
            auto p = c.p(z);
            if (!p) continue;
            // Population tables carry probabilities; weight by mass so that
            // "units" and "survivors" are masses rather than counts.
            ArmLevel& t = arm[z][c.a];
            t.units += c.mass;
            t.survivors += c.mass * *p;
            if (*p > 0) {
                auto yb = c.ybar(z);
                if (!yb) throw DataError("cell table: survivor mean missing where survival > 0");
                t.ysum += c.mass * *p * *yb;
                if (z == 0) {
                    ysum0 += c.mass * *p * *yb;
                    surv0 += c.mass * *p;
                }
            }
        }
    }
    if (!(surv0 > 0)) throw DataError("dgyz estimator: no survivors in arm 0");
    return dgyz_solve(arm, ysum0 / surv0);
}

}  // namespace sace
