#include "sace/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "sace/error.hpp"

namespace sace {

const char* to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::warn: return "warn";
        case Status::fail: return "fail";
        case Status::vacuous: return "vacuous";
    }
    return "?";
}

namespace {
int rank(Status s) {
    switch (s) {
        case Status::vacuous: return 0;
        case Status::pass: return 1;
        case Status::warn: return 2;
        case Status::fail: return 3;
    }
    return 0;
}
}  // namespace

Status worst(Status a, Status b) { return rank(a) >= rank(b) ? a : b; }

const ConstraintReport* DiagnosticsReport::find(const std::string& constraint) const {
    for (const auto& c : constraints)
        if (c.constraint == constraint) return &c;
    return nullptr;
}

Status DiagnosticsReport::overall() const {
    Status s = Status::vacuous;
    for (const auto& c : constraints) s = worst(s, c.status);
    return s;
}

namespace {

std::string xa_name(const CellTable& t, int x, int a) {
    auto it = t.x_labels.find(x);
    const std::string xl = it != t.x_labels.end() && !it->second.empty() ? it->second
                                                                          : std::to_string(x);
    return "x=" + xl + ", a=" + std::to_string(a);
}

std::string x_name(const CellTable& t, int x) {
    auto it = t.x_labels.find(x);
    return "x=" + (it != t.x_labels.end() && !it->second.empty() ? it->second : std::to_string(x));
}

void aggregate(ConstraintReport& r) {
    r.status = Status::vacuous;
    for (const auto& c : r.cells) r.status = worst(r.status, c.status);
}

double chi2_upper(double stat, int df) {
    if (df <= 0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

double chi2_quantile(double prob, int df) {
    return boost::math::quantile(boost::math::chi_squared(df), prob);
}

/// Per-level survival ratio with its delta-method variance on the log scale.
struct RatioLevel {
    const Cell* cell;
    double ratio;
    double var_log;  // 0 in population mode
};

std::vector<RatioLevel> ratio_levels(const CellTable& t, const std::vector<const Cell*>& cells) {
    std::vector<RatioLevel> out;
    for (const Cell* c : cells) {
        if (!c->p1 || !c->p0 || !(*c->p1 > 0)) continue;
        RatioLevel r{c, *c->p0 / *c->p1, 0.0};
        if (t.sample_mode) {
            if (!(*c->p0 > 0)) continue;  // log-ratio undefined
            r.var_log = (1 - *c->p0) / (double(c->n0) * *c->p0) +
                        (1 - *c->p1) / (double(c->n1) * *c->p1);
            r.var_log = std::max(r.var_log, 1e-12);  // all units survive in both arms
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace

ConstraintReport check_monotone(const CellTable& t, const DiagnosticsOptions& opt) {
    ConstraintReport r;
    r.constraint = "survival-order";
    r.description = "unexposed survival does not exceed exposed survival";
    for (const Cell& c : t.cells) {
        CellCheck cc;
        cc.cell = xa_name(t, c.x, c.a);
        if (!c.p1 || !c.p0) {
            cc.detail = {{"note", "an exposure arm has no units"}};
            r.cells.push_back(cc);
            continue;
        }
        const double p1 = *c.p1, p0 = *c.p0;
        cc.detail = {{"p1", p1}, {"p0", p0}};
        if (t.sample_mode) {
            const double se = std::sqrt(p1 * (1 - p1) / double(c.n1) + p0 * (1 - p0) / double(c.n0));
            const double diff = p0 - p1;
            if (se > 0) {
                const double zstat = diff / se;
                cc.detail["z"] = zstat;
                cc.status = zstat > opt.z_threshold ? Status::fail : Status::pass;
            } else {
                cc.status = diff > 0 ? Status::fail : Status::pass;
            }
        } else {
            cc.status = p0 > p1 + 1e-12 ? Status::fail : Status::pass;
        }
        r.cells.push_back(cc);
    }
    aggregate(r);
    if (r.cells.empty()) r.note = "no cells";
    return r;
}

ConstraintReport check_monotone(const SurvivalParamsER&, const Dataset&) {
    ConstraintReport r;
    r.constraint = "survival-order";
    r.description = "unexposed survival does not exceed exposed survival";
    r.status = Status::vacuous;
    r.note = "holds by construction: unexposed survival is modelled as exposed survival times a "
             "ratio in (0, 1)";
    return r;
}

ConstraintReport check_monotone(const SurvivalParamsSM& m, const Dataset& data) {
    ConstraintReport r;
    r.constraint = "survival-order";
    r.description = "unexposed survival does not exceed exposed survival";
    std::size_t violations = 0;
    double worst_gap = 0.0;
    for (const Unit& u : data.units()) {
        const double gap = m.theta0(u) - m.theta1(u);
        if (gap > 0) {
            ++violations;
            worst_gap = std::max(worst_gap, gap);
        }
    }
    CellCheck cc;
    cc.cell = "all units";
    cc.status = violations ? Status::fail : Status::pass;
    cc.detail = {{"units", data.size()}, {"violations", violations}, {"max_excess", worst_gap}};
    r.cells.push_back(cc);
    aggregate(r);
    if (violations)
        r.note = std::to_string(violations) + " units with fitted theta0 > theta1";
    return r;
}

ConstraintReport check_relevance(const CellTable& t, const DiagnosticsOptions& opt) {
    ConstraintReport r;
    r.constraint = "relevance";
    r.description = "survival ratio varies with the substitution variable";
    const double alpha = 2.0 * (1.0 - boost::math::cdf(boost::math::normal(), opt.z_threshold));
    std::size_t inconclusive_cells = 0;
    for (const auto& [x, cells] : t.by_x()) {
        CellCheck cc;
        cc.cell = x_name(t, x);
        const auto levels = ratio_levels(t, cells);
        nlohmann::json ratios = nlohmann::json::object();
        for (const auto& l : levels) ratios[std::to_string(l.cell->a)] = l.ratio;
        cc.detail = {{"ratios", ratios}};
        if (levels.size() < 2) {
            cc.status = Status::vacuous;
            cc.detail["note"] = "fewer than two usable A levels";
            r.cells.push_back(cc);
            continue;
        }
        // Equivalence bound: every pairwise difference is confidently inside
        // the tolerance -> the ratio is constant for practical purposes.
        double max_spread = 0.0, max_upper = 0.0;
        for (std::size_t i = 0; i < levels.size(); ++i)
            for (std::size_t j = i + 1; j < levels.size(); ++j) {
                const double d = std::abs(levels[i].ratio - levels[j].ratio);
                const double sd = std::sqrt(levels[i].ratio * levels[i].ratio * levels[i].var_log +
                                            levels[j].ratio * levels[j].ratio * levels[j].var_log);
                max_spread = std::max(max_spread, d);
                max_upper = std::max(max_upper, d + opt.z_threshold * sd);
            }
        cc.detail["max_spread"] = max_spread;
        cc.detail["equivalence_bound"] = max_upper;

        if (!t.sample_mode) {
            cc.status = max_spread > 1e-12 ? Status::pass : Status::fail;
            r.cells.push_back(cc);
            continue;
        }
        // Chi-square contrast of the log ratios.
        double wsum = 0, wl = 0;
        for (const auto& l : levels) {
            const double w = 1.0 / l.var_log;
            wsum += w;
            wl += w * std::log(l.ratio);
        }
        const double center = wl / wsum;
        double q = 0;
        for (const auto& l : levels) {
            const double d = std::log(l.ratio) - center;
            q += d * d / l.var_log;
        }
        const int df = int(levels.size()) - 1;
        const double pval = chi2_upper(q, df);
        cc.detail["chi2"] = q;
        cc.detail["df"] = df;
        cc.detail["p_value"] = pval;
        // Only a confidently constant ratio falsifies relevance. A small,
        // non-significant spread in a thin cell is recorded as inconclusive.
        cc.status = max_upper < opt.relevance_tolerance ? Status::fail : Status::pass;
        const bool inconclusive = cc.status == Status::pass && pval >= alpha &&
                                  max_spread < opt.relevance_tolerance;
        cc.detail["inconclusive"] = inconclusive;
        inconclusive_cells += inconclusive;
        r.cells.push_back(cc);
    }
    aggregate(r);
    if (inconclusive_cells)
        r.note = std::to_string(inconclusive_cells) +
                 " cell(s) inconclusive: spread below tolerance but neither significant nor "
                 "confidently constant";
    return r;
}

namespace {

/// One over-identified mixture test within an x cell.
struct MixtureLevel {
    double mean;
    double mixing;
    double mean_var;    // sampling variance of `mean`
    double mixing_var;  // sampling variance of `mixing`
};

CellCheck j_test(const CellTable& t, const std::string& name, const std::vector<MixtureLevel>& lv,
                 const DiagnosticsOptions& opt) {
    CellCheck cc;
    cc.cell = name;
    if (lv.size() < 3) {
        cc.status = Status::vacuous;
        cc.detail = {{"levels", lv.size()}, {"note", "fewer than three levels: not over-identified"}};
        return cc;
    }
    std::vector<double> y, p, w;
    for (const auto& l : lv) {
        y.push_back(l.mean);
        p.push_back(l.mixing);
    }
    try {
        if (!t.sample_mode) {
            // Exact population moments: any misfit at all is a violation.
            w.assign(lv.size(), 1.0);
            const GmmResult g = gmm_overidentified(y, p, w);
            double scale = 1.0;
            for (double v : y) scale = std::max(scale, std::abs(v));
            cc.detail = {{"levels", lv.size()}, {"j", g.j_stat}, {"df", g.df}};
            cc.status = g.j_stat > 1e-20 * scale * scale ? Status::fail : Status::pass;
            return cc;
        }
        // Two-step weights: the first pass estimates the stratum-mean gap,
        // which scales the contribution of mixing-weight noise.
        for (const auto& l : lv) w.push_back(1.0 / l.mean_var);
        const GmmResult first = gmm_overidentified(y, p, w);
        const double gap = first.mu_ll - first.mu_other;
        w.clear();
        for (const auto& l : lv) w.push_back(1.0 / (l.mean_var + gap * gap * l.mixing_var));
        const GmmResult g = gmm_overidentified(y, p, w);
        const double crit = chi2_quantile(1.0 - opt.j_level, g.df);
        cc.detail = {{"levels", lv.size()},
                     {"j", g.j_stat},
                     {"df", g.df},
                     {"critical", crit},
                     {"p_value", chi2_upper(g.j_stat, g.df)}};
        cc.status = g.j_stat > crit ? Status::fail : Status::pass;
    } catch (const RelevanceError& e) {
        cc.status = Status::vacuous;
        cc.detail = {{"levels", lv.size()}, {"note", e.what()}};
    }
    return cc;
}

bool usable_mean_var(const CellTable& t, const Cell& c, int z, double& out) {
    if (!c.ybar(z)) return false;
    if (!t.sample_mode) {
        out = 0.0;
        return true;
    }
    auto v = c.var(z);
    if (!v || !(*v > 0) || c.survivors(z) < 2) return false;
    out = *v / double(c.survivors(z));
    return true;
}

ConstraintReport boundedness_report(const char* id, const char* description, const CellTable& t,
                                    const DiagnosticsOptions& opt, int which) {
    ConstraintReport r;
    r.constraint = id;
    r.description = description;
    if (which == 11 && !opt.rho) {
        r.status = Status::vacuous;
        r.note = "mixing weights of unexposed survivors depend on rho; supply rho to test";
        return r;
    }
    std::size_t max_levels = 0;
    for (const auto& [x, cells] : t.by_x()) {
        max_levels = std::max(max_levels, cells.size());
        std::vector<MixtureLevel> lv;
        for (const auto& rl : ratio_levels(t, cells)) {
            const Cell& c = *rl.cell;
            MixtureLevel m{};
            double v1 = 0, v0 = 0;
            if (which == 9) {
                if (!usable_mean_var(t, c, 1, v1)) continue;
                m = {*c.ybar1, rl.ratio, v1, rl.ratio * rl.ratio * rl.var_log};
            } else if (which == 12) {
                if (!usable_mean_var(t, c, 1, v1) || !usable_mean_var(t, c, 0, v0)) continue;
                m = {*c.ybar1 - *c.ybar0, rl.ratio, v1 + v0, rl.ratio * rl.ratio * rl.var_log};
            } else {
                if (!usable_mean_var(t, c, 0, v0)) continue;
                const StratumProbabilities st = strata_probs_stochastic(*c.p1, *c.p0, *opt.rho);
                const double mix = st.mixing_control();
                // Mixing-weight noise is not propagated here; rho is fixed.
                m = {*c.ybar0, mix, v0, 0.0};
            }
            lv.push_back(m);
        }
        if (which == 11 && std::all_of(lv.begin(), lv.end(), [](const MixtureLevel& l) {
                return l.mixing >= 1.0 - 1e-12;
            })) {
            CellCheck cc;
            cc.cell = x_name(t, x);
            cc.status = Status::vacuous;
            cc.detail = {{"note", "unexposed survivors are all always-survivors at this rho"}};
            r.cells.push_back(cc);
            continue;
        }
        r.cells.push_back(j_test(t, x_name(t, x), lv, opt));
    }
    aggregate(r);
    if (max_levels <= 2)
        r.note = "at most two A levels per covariate cell: a finite range is bounded, so the "
                 "constraint holds for any data";
    return r;
}

}  // namespace

std::vector<ConstraintReport> check_boundedness(const CellTable& t, const DiagnosticsOptions& opt) {
    return {
        boundedness_report("mixture-treated", "exposed-survivor means are a two-point mixture across A", t, opt,
                           9),
        boundedness_report("mixture-control", "unexposed-survivor means are a two-point mixture across A", t,
                           opt, 11),
        boundedness_report("mixture-difference", "between-arm mean difference is a two-point mixture across A",
                           t, opt, 12),
    };
}

DiagnosticsReport diagnose(const CellTable& table, const DiagnosticsOptions& options) {
    DiagnosticsReport rep;
    rep.mode = table.sample_mode ? "sample" : "population";
    rep.constraints.push_back(check_monotone(table, options));
    auto b = check_boundedness(table, options);
    rep.constraints.push_back(b[0]);
    rep.constraints.push_back(check_relevance(table, options));
    rep.constraints.push_back(b[1]);
    rep.constraints.push_back(b[2]);
    return rep;
}

DiagnosticsReport diagnose(const Dataset& data, const DiagnosticsOptions& options) {
    return diagnose(tabulate_cells(data, options.binning), options);
}

DiagnosticsReport diagnose_model(const Dataset& data, const DiagnosticsOptions& options,
                                 const OptimizerOptions& optimizer) {
    DiagnosticsReport rep;
    rep.mode = "model";
    ConstraintReport r;
    if (options.rho) {
        const SurvivalFitSM f = fit_survival_sm(data, optimizer);
        r = check_monotone(f.at(*options.rho), data);
    } else {
        const SurvivalFitER f = fit_survival_er(data, optimizer);
        r = check_monotone(f.params, data);
        if (f.result.boundary_flag) {
            r.status = Status::warn;
            r.note += "; the ratio model stopped at the boundary, which indicates a "
                      "monotonicity violation";
        }
    }
    rep.constraints.push_back(r);
    return rep;
}

nlohmann::json to_json(const DiagnosticsReport& rep) {
    nlohmann::json cons = nlohmann::json::array();
    for (const auto& c : rep.constraints) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& cc : c.cells)
            cells.push_back({{"cell", cc.cell}, {"status", to_string(cc.status)}, {"detail", cc.detail}});
        cons.push_back({{"constraint", c.constraint},
                        {"description", c.description},
                        {"status", to_string(c.status)},
                        {"note", c.note},
                        {"cells", cells}});
    }
    return {{"mode", rep.mode}, {"overall", to_string(rep.overall())}, {"constraints", cons}};
}

void print_table(std::ostream& out, const DiagnosticsReport& rep) {
    out << "constraint          status   cells(pass/warn/fail/vacuous)  description\n";
    for (const auto& c : rep.constraints) {
        int counts[4] = {0, 0, 0, 0};
        for (const auto& cc : c.cells) ++counts[int(cc.status)];
        std::ostringstream cnt;
        cnt << counts[0] << '/' << counts[1] << '/' << counts[2] << '/' << counts[3];
        out << std::left << std::setw(20) << c.constraint << std::setw(9) << to_string(c.status)
            << std::setw(31) << cnt.str() << c.description << '\n';
        if (!c.note.empty()) out << std::string(20, ' ') << "note: " << c.note << '\n';
    }
}

}  // namespace sace
