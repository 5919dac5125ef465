#include "sace/identify.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sace/error.hpp"
#include "sace/numerics.hpp"

namespace sace {

StratumProbabilities strata_probs_monotone(double p1, double p0) {
    constexpr double slack = 1e-12;
    if (p0 > p1 + slack) {
        std::ostringstream msg;
        msg << "monotonicity violated: pr(S=1|Z=0)=" << p0 << " exceeds pr(S=1|Z=1)=" << p1;
        throw MonotonicityError(msg.str());
    }
    p0 = std::min(p0, p1);
    return {p0, p1 - p0, 0.0, 1.0 - p1};
}

StratumProbabilities strata_probs_stochastic(double p1, double p0, double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw UsageError("rho must lie in [0, 1]");
    const double hi = std::max(p1, p0), lo = std::min(p1, p0);
    const double keep = 1.0 - rho;
    StratumProbabilities g;
    g.ll = keep * p1 * p0 + rho * lo;
    if (p1 >= p0) {
        g.ld = keep * p1 * (1 - p0) + rho * (p1 - p0);
        g.dl = keep * p0 * (1 - p1);
    } else {
        g.ld = keep * p1 * (1 - p0);
        g.dl = keep * p0 * (1 - p1) + rho * (p0 - p1);
    }
    g.dd = keep * (1 - p1) * (1 - p0) + rho * (1 - hi);
    return g;
}

MixtureMeans solve_two_point_mixture(double ybar_a1, double ybar_a0, double p_a1, double p_a0,
                                     double eps) {
    const double det = p_a1 - p_a0;
    if (std::abs(det) < eps) {
        std::ostringstream msg;
        msg << "substitution relevance fails: mixing weights " << p_a1 << " and " << p_a0
            << " coincide";
        throw RelevanceError(msg.str());
    }
    return {(ybar_a1 * (1 - p_a0) - ybar_a0 * (1 - p_a1)) / det,
            (p_a1 * ybar_a0 - p_a0 * ybar_a1) / det};
}

GmmResult gmm_overidentified(const std::vector<double>& ybar, const std::vector<double>& p,
                             const std::vector<double>& weights, double eps) {
    const std::size_t k = ybar.size();
    if (p.size() != k || weights.size() != k) throw NumericalError("GMM: length mismatch");
    if (k < 2) throw RelevanceError("substitution relevance fails: fewer than two A levels");
    const auto [pmin, pmax] = std::minmax_element(p.begin(), p.end());
    if (*pmax - *pmin < eps)
        throw RelevanceError("substitution relevance fails: all mixing weights coincide");
    if (k == 2) {
        auto m = solve_two_point_mixture(ybar[0], ybar[1], p[0], p[1], eps);
        return {m.mu_ll, m.mu_other, 0.0, 0};
    }
    // Weighted regression of ybar on p with intercept: ybar = mu_o + p (mu_ll - mu_o).
    double sw = 0, sp = 0, sy = 0;
    for (std::size_t a = 0; a < k; ++a) {
        if (!(weights[a] > 0)) throw NumericalError("GMM: weights must be positive");
        sw += weights[a];
        sp += weights[a] * p[a];
        sy += weights[a] * ybar[a];
    }
    const double pbar = sp / sw, ymean = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t a = 0; a < k; ++a) {
        sxx += weights[a] * (p[a] - pbar) * (p[a] - pbar);
        sxy += weights[a] * (p[a] - pbar) * (ybar[a] - ymean);
    }
    const double slope = sxy / sxx;
    GmmResult out;
    out.mu_other = ymean - slope * pbar;
    out.mu_ll = out.mu_other + slope;
    for (std::size_t a = 0; a < k; ++a) {
        const double r = ybar[a] - p[a] * out.mu_ll - (1 - p[a]) * out.mu_other;
        out.j_stat += weights[a] * r * r;
    }
    out.df = int(k) - 2;
    return out;
}

std::map<int, std::vector<const Cell*>> CellTable::by_x() const {
    std::map<int, std::vector<const Cell*>> groups;
    for (const Cell& c : cells) groups[c.x].push_back(&c);
    for (auto& [x, g] : groups)
        std::sort(g.begin(), g.end(), [](const Cell* l, const Cell* r) { return l->a < r->a; });
    return groups;
}

std::vector<int> CellTable::a_levels() const {
    std::set<int> levels;
    for (const Cell& c : cells) levels.insert(c.a);
    return {levels.begin(), levels.end()};
}

namespace {

std::optional<double> opt_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

void put_opt(nlohmann::json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
}

}  // namespace

CellTable cell_table_from_json(const nlohmann::json& j) {
    CellTable t;
    try {
        t.sample_mode = j.value("mode", std::string("population")) == "sample";
        t.n = j.value("n", std::size_t{0});
        for (const auto& jc : j.at("cells")) {
            Cell c;
            c.x = jc.value("x", 0);
            c.a = jc.at("a").get<int>();
            c.mass = jc.at("mass").get<double>();
            c.p1 = opt_number(jc, "p1");
            c.p0 = opt_number(jc, "p0");
            c.ybar1 = opt_number(jc, "ybar1");
            c.ybar0 = opt_number(jc, "ybar0");
            c.n1 = jc.value("n1", std::size_t{0});
            c.n0 = jc.value("n0", std::size_t{0});
            c.surv1 = jc.value("surv1", std::size_t{0});
            c.surv0 = jc.value("surv0", std::size_t{0});
            c.var1 = opt_number(jc, "var1");
            c.var0 = opt_number(jc, "var0");
            for (auto v : {c.p1, c.p0})
                if (v && (*v < 0 || *v > 1)) throw DataError("cell probability outside [0, 1]");
            if (c.mass < 0) throw DataError("negative cell mass");
            t.cells.push_back(c);
        }
        if (j.contains("x_labels"))
            for (const auto& [k, v] : j.at("x_labels").items()) t.x_labels[std::stoi(k)] = v;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed cell table: ") + e.what());
    }
    return t;
}

nlohmann::json to_json(const CellTable& t) {
    nlohmann::json j;
    j["mode"] = t.sample_mode ? "sample" : "population";
    j["n"] = t.n;
    j["cells"] = nlohmann::json::array();
    for (const Cell& c : t.cells) {
        nlohmann::json jc{{"x", c.x}, {"a", c.a}, {"mass", c.mass}};
        put_opt(jc, "p1", c.p1);
        put_opt(jc, "p0", c.p0);
        put_opt(jc, "ybar1", c.ybar1);
        put_opt(jc, "ybar0", c.ybar0);
        if (t.sample_mode) {
            jc["n1"] = c.n1;
            jc["n0"] = c.n0;
            jc["surv1"] = c.surv1;
            jc["surv0"] = c.surv0;
            put_opt(jc, "var1", c.var1);
            put_opt(jc, "var0", c.var0);
        }
        j["cells"].push_back(jc);
    }
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [x, l] : t.x_labels) labels[std::to_string(x)] = l;
    j["x_labels"] = labels;
    return j;
}

CellTable tabulate_cells(const Dataset& data, const Binning& binning) {
    if (binning.bins_per_covariate < 1) throw UsageError("bins per covariate must be at least 1");
    const std::size_t d = data.dim();
    // Per covariate: sorted cutpoints; bin = number of cutpoints <= value.
    std::vector<std::vector<double>> cuts(d);
    std::vector<int> radix(d, 1);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> v;
        v.reserve(data.size());
        for (const Unit& u : data.units()) v.push_back(u.x[j]);
        std::sort(v.begin(), v.end());
        std::vector<double> distinct = v;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        auto& c = cuts[j];
        if (int(distinct.size()) <= binning.bins_per_covariate) {
            for (std::size_t k = 1; k < distinct.size(); ++k) c.push_back(distinct[k]);
        } else {
            for (int k = 1; k < binning.bins_per_covariate; ++k) {
                const double q = quantile_linear(v, double(k) / binning.bins_per_covariate);
                // Cut strictly above the quantile's tie block so ties share a bin.
                auto it = std::upper_bound(v.begin(), v.end(), q);
                if (it != v.end() && (c.empty() || *it > c.back())) c.push_back(*it);
            }
        }
        radix[j] = int(c.size()) + 1;
    }

    struct Acc {
        std::size_t n[2] = {0, 0}, surv[2] = {0, 0};
        double sum[2] = {0, 0}, sq[2] = {0, 0};
    };
    std::map<std::pair<int, int>, Acc> acc;
    CellTable t;
    t.sample_mode = true;
    t.n = data.size();
    for (const Unit& u : data.units()) {
        int x = 0;
        std::string label;
        for (std::size_t j = 0; j < d; ++j) {
            const int bin = int(std::upper_bound(cuts[j].begin(), cuts[j].end(), u.x[j]) -
                                cuts[j].begin());
            x = x * radix[j] + bin;
            label += (j ? "," : "") + data.covariate_names()[j] + "#" + std::to_string(bin);
        }
        t.x_labels.emplace(x, label);
        Acc& a = acc[{x, u.a}];
        ++a.n[u.z];
        if (u.s == 1) {
            ++a.surv[u.z];
            a.sum[u.z] += *u.y;
        }
    }
    // Second pass for centred variances.
    std::map<std::pair<int, int>, double> means[2];
    for (const auto& [key, a] : acc)
        for (int z = 0; z < 2; ++z)
            if (a.surv[z] > 0) means[z][key] = a.sum[z] / double(a.surv[z]);
    for (const Unit& u : data.units()) {
        if (u.s != 1) continue;
        int x = 0;
        for (std::size_t j = 0; j < d; ++j)
            x = x * radix[j] + int(std::upper_bound(cuts[j].begin(), cuts[j].end(), u.x[j]) -
                                   cuts[j].begin());
        const auto key = std::make_pair(x, u.a);
        const double dev = *u.y - means[u.z][key];
        acc[key].sq[u.z] += dev * dev;
    }

    for (const auto& [key, a] : acc) {
        Cell c;
        c.x = key.first;
        c.a = key.second;
        c.mass = double(a.n[0] + a.n[1]) / double(data.size());
        c.n1 = a.n[1];
        c.n0 = a.n[0];
        c.surv1 = a.surv[1];
        c.surv0 = a.surv[0];
        if (a.n[1]) c.p1 = double(a.surv[1]) / double(a.n[1]);
        if (a.n[0]) c.p0 = double(a.surv[0]) / double(a.n[0]);
        if (a.surv[1]) c.ybar1 = means[1].at(key);
        if (a.surv[0]) c.ybar0 = means[0].at(key);
        if (a.surv[1] > 1) c.var1 = a.sq[1] / double(a.surv[1] - 1);
        if (a.surv[0] > 1) c.var0 = a.sq[0] / double(a.surv[0] - 1);
        t.cells.push_back(c);
    }
    return t;
}

namespace {

std::string cell_name(const Cell& c) {
    return "cell (x=" + std::to_string(c.x) + ", a=" + std::to_string(c.a) + ")";
}

struct LevelMoment {
    const Cell* cell;
    double ybar;
    double mixing;
    double weight;
};

double moment_weight(const CellTable& t, const Cell& c, int z) {
    if (t.sample_mode) {
        const double s = double(c.survivors(z));
        auto v = c.var(z);
        return v && *v > 0 ? s / *v : s;
    }
    return c.mass * c.p(z).value_or(0.0);
}

/// Always-survivor mean of one arm within an x cell, from the two-point
/// mixture across A levels. Returns nullopt when every survivor of the arm is
/// an always-survivor (no mixture to resolve; use the cell means directly).
std::optional<double> arm_mixture_mean(const CellTable& t, const std::vector<LevelMoment>& levels,
                                       int x, int z, const IdentifyOptions& opt,
                                       std::vector<std::string>& warnings) {
    const std::string where = "x=" + std::to_string(x) + ", arm " + std::to_string(z) + ": ";
    if (!levels.empty() &&
        std::all_of(levels.begin(), levels.end(),
                    [&](const LevelMoment& l) { return l.mixing >= 1.0 - opt.relevance_eps; }))
        return std::nullopt;
    if (levels.size() < 2)
        throw RelevanceError(where + "substitution relevance fails: fewer than two A levels with "
                                     "survivors");
    std::vector<double> ybar, p, w;
    for (const auto& l : levels) {
        ybar.push_back(l.ybar);
        p.push_back(l.mixing);
        w.push_back(l.weight);
    }
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    if (t.sample_mode && *hi - *lo < opt.weak_threshold) {
        std::ostringstream msg;
        msg << where << "weak substitution: mixing-weight spread " << (*hi - *lo);
        warnings.push_back(msg.str());
    }
    try {
        if (levels.size() == 2)
            return solve_two_point_mixture(ybar[0], ybar[1], p[0], p[1], opt.relevance_eps).mu_ll;
        return gmm_overidentified(ybar, p, w, opt.relevance_eps).mu_ll;
    } catch (const RelevanceError& e) {
        throw RelevanceError(where + e.what());
    }
}

struct Usable {
    const Cell* cell;
    StratumProbabilities strata;
};

template <class StrataFn>
std::vector<Usable> usable_cells(const std::vector<const Cell*>& cells, StrataFn strata,
                                 std::vector<std::string>& warnings) {
    std::vector<Usable> out;
    for (const Cell* c : cells) {
        if (!c->p1 || !c->p0) {
            warnings.push_back(cell_name(*c) + " dropped: an exposure arm has no units");
            continue;
        }
        try {
            out.push_back({c, strata(*c->p1, *c->p0)});
        } catch (const MonotonicityError& e) {
            throw MonotonicityError(cell_name(*c) + ": " + e.what());
        }
    }
    return out;
}

std::vector<LevelMoment> arm_levels(const CellTable& t, const std::vector<Usable>& cells, int z) {
    std::vector<LevelMoment> levels;
    for (const auto& u : cells) {
        if (!u.cell->ybar(z) || *u.cell->p(z) <= 0) continue;
        const double mixing = z ? u.strata.mixing_treated() : u.strata.mixing_control();
        levels.push_back({u.cell, *u.cell->ybar(z), mixing, moment_weight(t, *u.cell, z)});
    }
    return levels;
}

struct PlugIn {
    double num1 = 0, num0 = 0, den = 0;

    void add(double pi_ll, double mass, double mu1, double mu0) {
        num1 += pi_ll * mass * mu1;
        num0 += pi_ll * mass * mu0;
        den += pi_ll * mass;
    }

    IdentifyResult finish(std::vector<std::string> warnings) const {
        if (!(den > 0)) throw NumericalError("empty always-survivor stratum: pi_LL is zero in every cell");
        IdentifyResult r;
        r.mean_treated_ll = num1 / den;
        r.mean_control_ll = num0 / den;
        r.delta = (num1 - num0) / den;
        r.pi_ll = den;
        r.warnings = std::move(warnings);
        return r;
    }
};

/// Mean for a cell with positive pi_LL; warns and returns nullopt if the
/// survivor mean is unavailable.
std::optional<double> cell_mean(const Cell& c, int z, std::vector<std::string>& warnings) {
    if (auto y = c.ybar(z)) return y;
    warnings.push_back(cell_name(c) + " dropped: no survivors in arm " + std::to_string(z));
    return std::nullopt;
}

}  // namespace

IdentifyResult identify_thm1(const CellTable& table, const IdentifyOptions& opt) {
    std::vector<std::string> warnings;
    PlugIn plug;
    for (const auto& [x, cells] : table.by_x()) {
        auto usable = usable_cells(cells, strata_probs_monotone, warnings);
        auto mu1 = arm_mixture_mean(table, arm_levels(table, usable, 1), x, 1, opt, warnings);
        for (const auto& u : usable) {
            if (u.strata.ll <= 0) continue;
            auto y1 = mu1 ? mu1 : cell_mean(*u.cell, 1, warnings);
            auto y0 = cell_mean(*u.cell, 0, warnings);
            if (y1 && y0) plug.add(u.strata.ll, u.cell->mass, *y1, *y0);
        }
    }
    return plug.finish(std::move(warnings));
}

IdentifyResult identify_thm2(const CellTable& table, double rho, const IdentifyOptions& opt) {
    if (!(rho >= 0 && rho <= 1)) throw UsageError("rho must lie in [0, 1]");
    std::vector<std::string> warnings;
    PlugIn plug;
    auto strata = [rho](double p1, double p0) { return strata_probs_stochastic(p1, p0, rho); };
    for (const auto& [x, cells] : table.by_x()) {
        auto usable = usable_cells(cells, strata, warnings);
        auto mu1 = arm_mixture_mean(table, arm_levels(table, usable, 1), x, 1, opt, warnings);
        auto mu0 = arm_mixture_mean(table, arm_levels(table, usable, 0), x, 0, opt, warnings);
        for (const auto& u : usable) {
            if (u.strata.ll <= 0) continue;
            auto y1 = mu1 ? mu1 : cell_mean(*u.cell, 1, warnings);
            auto y0 = mu0 ? mu0 : cell_mean(*u.cell, 0, warnings);
            if (y1 && y0) plug.add(u.strata.ll, u.cell->mass, *y1, *y0);
        }
    }
    return plug.finish(std::move(warnings));
}

IdentifyResult identify_thm3(const CellTable& table, const IdentifyOptions& opt) {
    std::vector<std::string> warnings;
    PlugIn plug;
    for (const auto& [x, cells] : table.by_x()) {
        auto usable = usable_cells(cells, strata_probs_monotone, warnings);
        // Levels carrying survivors in both arms, in code order.
        std::vector<const Usable*> both;
        for (const auto& u : usable)
            if (u.cell->ybar1 && u.cell->ybar0 && *u.cell->p0 > 0) both.push_back(&u);
        const std::string where = "x=" + std::to_string(x) + ": ";

        // Contrast mu_1,LL,x,a - mu_0,LL,x,a; constant in a under no-interaction.
        std::optional<double> contrast;
        const bool pure = !both.empty() &&
                          std::all_of(both.begin(), both.end(), [&](const Usable* u) {
                              return u->strata.mixing_treated() >= 1.0 - opt.relevance_eps;
                          });
        if (!pure) {
            if (both.size() < 2)
                throw RelevanceError(where + "substitution relevance fails: fewer than two A "
                                             "levels with survivors in both arms");
            const Usable& first = *both.front();
            const double p_first = first.strata.mixing_treated();
            const Usable* second = nullptr;
            for (std::size_t k = 1; k < both.size() && !second; ++k)
                if (std::abs(both[k]->strata.mixing_treated() - p_first) >= opt.relevance_eps)
                    second = both[k];
            if (!second)
                throw RelevanceError(where + "substitution relevance fails: all mixing weights "
                                             "coincide");
            const double p_second = second->strata.mixing_treated();
            if (table.sample_mode && std::abs(p_second - p_first) < opt.weak_threshold) {
                std::ostringstream msg;
                msg << where << "weak substitution: mixing-weight spread "
                    << std::abs(p_second - p_first);
                warnings.push_back(msg.str());
            }
            // Shift the second level's exposed mean by the A-increment seen in
            // the unexposed always-survivors, then solve the mixture.
            const double shift = *first.cell->ybar0 - *second->cell->ybar0;
            auto m = solve_two_point_mixture(*first.cell->ybar1, *second->cell->ybar1 + shift,
                                             p_first, p_second, opt.relevance_eps);
            contrast = m.mu_ll - *first.cell->ybar0;
        }
        for (const auto& u : usable) {
            if (u.strata.ll <= 0) continue;
            auto y0 = cell_mean(*u.cell, 0, warnings);
            if (!y0) continue;
            if (contrast) {
                plug.add(u.strata.ll, u.cell->mass, *y0 + *contrast, *y0);
            } else if (auto y1 = cell_mean(*u.cell, 1, warnings)) {
                plug.add(u.strata.ll, u.cell->mass, *y1, *y0);
            }
        }
    }
    return plug.finish(std::move(warnings));
}

}  // namespace sace
