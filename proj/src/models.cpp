#include "sace/models.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "sace/baselines.hpp"
#include "sace/error.hpp"
#include "sace/identify.hpp"
#include "sace/random.hpp"

namespace sace {

std::string to_string(Method m) {
    switch (m) {
        case Method::naive: return "naive";
        case Method::dgyz: return "dgyz";
        case Method::prop_er: return "prop-er";
        case Method::prop_ni: return "prop-ni";
        case Method::prop_sm: return "prop-sm";
        case Method::prop_sm_ni: return "prop-sm-ni";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::naive, Method::dgyz, Method::prop_er, Method::prop_ni, Method::prop_sm,
                     Method::prop_sm_ni})
        if (to_string(m) == name) return m;
    throw UsageError("unknown method '" + name +
                     "' (expected naive, dgyz, prop-er, prop-ni, prop-sm or prop-sm-ni)");
}

bool needs_rho(Method m) { return m == Method::prop_sm || m == Method::prop_sm_ni; }

namespace {

double linear_predictor(const Vector& b, const Unit& u) {
    double t = b(0);
    const auto p = static_cast<Eigen::Index>(u.x.size());
    for (Eigen::Index j = 0; j < p; ++j) t += b(1 + j) * u.x[j];
    return t + b(p + 1) * u.a;
}

std::vector<std::string> base_names(const Dataset& data) {
    std::vector<std::string> names{"intercept"};
    for (const auto& c : data.covariate_names()) names.push_back(c);
    return names;
}

double sample_sd(const std::vector<double>& v) { return v.size() < 2 ? 0.0 : mean_sd(v).sd; }

/// Rows of the units selected by `keep`, with (1, x) followed by `extra`.
template <class Keep, class Extra>
std::pair<Matrix, Vector> survivor_design(const Dataset& data, Keep keep, int n_extra,
                                          Extra extra) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].s && keep(data[i])) idx.push_back(i);
    const auto p = static_cast<Eigen::Index>(data.dim());
    Matrix design(static_cast<Eigen::Index>(idx.size()), p + 1 + n_extra);
    Vector y(design.rows());
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
        const std::size_t i = idx[static_cast<std::size_t>(r)];
        const Unit& u = data[i];
        design(r, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) design(r, 1 + j) = u.x[j];
        auto tail = design.row(r).tail(n_extra);
        extra(i, u, tail);
        y(r) = *u.y;
    }
    return {std::move(design), std::move(y)};
}

void require_survivors(const Dataset& data) {
    std::size_t surv[2] = {0, 0};
    for (const Unit& u : data.units())
        if (u.s) ++surv[u.z];
    for (int z : {0, 1})
        if (surv[z] == 0) throw DataError("no survivors in arm " + std::to_string(z));
}

Vector ols_in(const std::string& stage, const Matrix& design, const Vector& y,
              const std::vector<std::string>& names) {
    try {
        return fit_ols(design, y, names);
    } catch (const CollinearityError& e) {
        throw CollinearityError(stage + ": " + e.what(), e.columns());
    }
}

}  // namespace

double SurvivalParamsER::theta1(const Unit& u) const { return expit(linear_predictor(beta1, u)); }
double SurvivalParamsER::ratio(const Unit& u) const { return expit(linear_predictor(gamma, u)); }
double SurvivalParamsSM::theta1(const Unit& u) const { return expit(linear_predictor(beta1, u)); }
double SurvivalParamsSM::theta0(const Unit& u) const { return expit(linear_predictor(beta0, u)); }

Matrix survival_design(const Dataset& data) {
    const auto p = static_cast<Eigen::Index>(data.dim());
    Matrix v(static_cast<Eigen::Index>(data.size()), p + 2);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const Unit& u = data[static_cast<std::size_t>(i)];
        v(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) v(i, 1 + j) = u.x[j];
        v(i, p + 1) = u.a;
    }
    return v;
}

JointSurvivalObjective::JointSurvivalObjective(const Dataset& data)
    : design_(survival_design(data)),
      z_(static_cast<Eigen::Index>(data.size())),
      s_(static_cast<Eigen::Index>(data.size())) {
    for (Eigen::Index i = 0; i < z_.size(); ++i) {
        z_(i) = data[static_cast<std::size_t>(i)].z;
        s_(i) = data[static_cast<std::size_t>(i)].s;
    }
}

// Arm 1 contributes a logistic term in eta = v'beta1. Arm 0 has success
// probability P = theta1 * q with q = expit(zeta), zeta = v'gamma; writing
// l as a function of log P gives dl = (s - P)/(1 - P) and
// d2l = -(1 - s) P / (1 - P)^2, and log P = log expit(eta) + log expit(zeta)
// has d/deta = 1 - theta1, d/dzeta = 1 - q.
SmoothObjective::Evaluation JointSurvivalObjective::evaluate(const Vector& params,
                                                             bool with_hessian) const {
    const Eigen::Index p = design_.cols();
    const Eigen::Index n = design_.rows();
    const Vector eta = design_ * params.head(p);
    const Vector zeta = design_ * params.tail(p);

    Vector d_eta(n), d_zeta(n), h_ee(n), h_zz(n), h_ez(n);
    CompensatedSum value;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t1 = expit(eta(i));
        const double c1 = expit(-eta(i));  // 1 - theta1
        if (z_(i) == 1) {
            value.add(s_(i) ? log_expit(eta(i)) : log_expit(-eta(i)));
            d_eta(i) = s_(i) - t1;
            d_zeta(i) = 0.0;
            h_ee(i) = -t1 * c1;
            h_zz(i) = 0.0;
            h_ez(i) = 0.0;
            continue;
        }
        const double q = expit(zeta(i));
        const double cq = expit(-zeta(i));
        double la, laa;
        if (s_(i)) {
            value.add(log_expit(eta(i)) + log_expit(zeta(i)));
            la = 1.0;
            laa = 0.0;
        } else {
            const double fail = c1 + t1 * cq;  // 1 - theta1 q without cancellation
            const double prob = t1 * q;
            value.add(std::log(fail));
            la = -prob / fail;
            laa = -prob / (fail * fail);
        }
        d_eta(i) = la * c1;
        d_zeta(i) = la * cq;
        h_ee(i) = laa * c1 * c1 - la * t1 * c1;
        h_zz(i) = laa * cq * cq - la * q * cq;
        h_ez(i) = laa * c1 * cq;
    }

    Evaluation ev;
    ev.value = value.value();
    ev.gradient.resize(2 * p);
    ev.gradient.head(p) = design_.transpose() * d_eta;
    ev.gradient.tail(p) = design_.transpose() * d_zeta;
    if (with_hessian) {
        ev.hessian.resize(2 * p, 2 * p);
        ev.hessian.topLeftCorner(p, p) = design_.transpose() * h_ee.asDiagonal() * design_;
        ev.hessian.bottomRightCorner(p, p) = design_.transpose() * h_zz.asDiagonal() * design_;
        ev.hessian.topRightCorner(p, p) = design_.transpose() * h_ez.asDiagonal() * design_;
        ev.hessian.bottomLeftCorner(p, p) = ev.hessian.topRightCorner(p, p).transpose();
    }
    return ev;
}

bool JointSurvivalObjective::near_boundary(const Vector& params, double eps) const {
    const Eigen::Index p = design_.cols();
    const Vector eta = design_ * params.head(p);
    const Vector zeta = design_ * params.tail(p);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        for (double t : {eta(i), zeta(i)}) {
            if (expit(t) < eps || expit(-t) < eps) return true;
        }
    }
    return false;
}

SurvivalFitER fit_survival_er(const Dataset& data, const OptimizerOptions& options,
                              const SurvivalParamsER* init) {
    require_both_arms(data);
    const Matrix design = survival_design(data);
    const Eigen::Index p = design.cols();

    Vector start(2 * p);
    if (init) {
        if (init->beta1.size() != p || init->gamma.size() != p)
            throw UsageError("survival initial values have the wrong length");
        start << init->beta1, init->gamma;
    } else {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < design.rows(); ++i)
            if (data[static_cast<std::size_t>(i)].z == 1) rows.push_back(i);
        Matrix d1(static_cast<Eigen::Index>(rows.size()), p);
        Vector s1(d1.rows());
        for (Eigen::Index r = 0; r < d1.rows(); ++r) {
            d1.row(r) = design.row(rows[static_cast<std::size_t>(r)]);
            s1(r) = data[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])].s;
        }
        start << fit_logistic(d1, s1, options).params, Vector::Zero(p);
    }

    JointSurvivalObjective objective(data);
    SurvivalFitER fit;
    fit.result = maximize_loglik(objective, start, options);
    fit.params.beta1 = fit.result.params.head(p);
    fit.params.gamma = fit.result.params.tail(p);
    return fit;
}

OutcomeFit fit_outcome_er(const Dataset& data, const SurvivalParamsER& survival,
                          double weak_threshold) {
    require_survivors(data);
    OutcomeFit fit;
    auto names = base_names(data);
    names.push_back("a");
    {
        auto [design, y] = survivor_design(
            data, [](const Unit& u) { return u.z == 0; }, 1,
            [](std::size_t, const Unit& u, auto& tail) { tail(0) = u.a; });
        fit.params.alpha1 = ols_in("unexposed-arm outcome model", design, y, names);
    }

    names.back() = "theta_0/1";
    std::vector<double> ratios;
    auto [design, y] = survivor_design(
        data, [](const Unit& u) { return u.z == 1; }, 1,
        [&](std::size_t, const Unit& u, auto& tail) {
            tail(0) = survival.ratio(u);
            ratios.push_back(tail(0));
        });
    if (sample_sd(ratios) < weak_threshold) {
        std::ostringstream msg;
        msg << "weak substitution: fitted survival ratio has SD " << sample_sd(ratios)
            << " among exposed survivors";
        fit.warnings.push_back(msg.str());
    }
    fit.params.alpha2 = ols_in("exposed-arm outcome model (relevance)", design, y, names);
    return fit;
}

OutcomeFit fit_ni(const Dataset& data, const SurvivalParamsER& survival, double weak_threshold) {
    require_survivors(data);
    OutcomeFit fit;
    auto names = base_names(data);
    for (const char* c : {"a", "g", "z"}) names.push_back(c);

    std::vector<double> ratios;
    auto [design, y] = survivor_design(
        data, [](const Unit&) { return true; }, 3,
        [&](std::size_t, const Unit& u, auto& tail) {
            tail(0) = u.a;
            if (u.z == 1) {
                tail(1) = survival.ratio(u);
                ratios.push_back(tail(1));
            } else {
                tail(1) = 1.0;
            }
            tail(2) = u.z;
        });
    if (sample_sd(ratios) < weak_threshold) {
        std::ostringstream msg;
        msg << "weak substitution: fitted survival ratio has SD " << sample_sd(ratios)
            << " among exposed survivors";
        fit.warnings.push_back(msg.str());
    }
    fit.params.alpha4 = ols_in("no-interaction outcome model (relevance)", design, y, names);
    return fit;
}

SurvivalFitSM fit_survival_sm(const Dataset& data, const OptimizerOptions& options) {
    require_both_arms(data);
    const Matrix design = survival_design(data);
    SurvivalFitSM fit;
    for (int z : {1, 0}) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < design.rows(); ++i)
            if (data[static_cast<std::size_t>(i)].z == z) rows.push_back(i);
        Matrix d(static_cast<Eigen::Index>(rows.size()), design.cols());
        Vector s(d.rows());
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            d.row(r) = design.row(rows[static_cast<std::size_t>(r)]);
            s(r) = data[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])].s;
        }
        OptimizerResult res = fit_logistic(d, s, options);
        if (z == 1) {
            fit.beta1 = res.params;
            fit.arm1 = std::move(res);
        } else {
            fit.beta0 = res.params;
            fit.arm0 = std::move(res);
        }
    }
    return fit;
}

namespace {

// An arm whose survivors all have mixing weight 1 (to rounding) contains only
// always-survivors; its G column would duplicate another column.
constexpr double kPureSlack = 1e-12;

void note_weak(std::vector<std::string>& warnings, const std::vector<double>& g, int z,
               double weak_threshold) {
    if (sample_sd(g) < weak_threshold) {
        std::ostringstream msg;
        msg << "weak substitution: fitted mixing weight has SD " << sample_sd(g)
            << " among arm-" << z << " survivors";
        warnings.push_back(msg.str());
    }
}

}  // namespace

SmOutcomeFit fit_sm_outcome(const Dataset& data, const SurvivalParamsSM& survival, bool assume_er,
                            double weak_threshold) {
    if (!(survival.rho >= 0.0 && survival.rho <= 1.0)) throw UsageError("rho must lie in [0, 1]");
    require_survivors(data);
    const std::size_t n = data.size();
    std::vector<double> pi(n), g1(n), g0(n);
    double pi_sum = 0.0, dl_sum = 0.0;
    bool pure[2] = {true, true};
    std::vector<double> g_surv[2];
    for (std::size_t i = 0; i < n; ++i) {
        const Unit& u = data[i];
        const StratumProbabilities st =
            strata_probs_stochastic(survival.theta1(u), survival.theta0(u), survival.rho);
        pi[i] = st.ll;
        g1[i] = st.mixing_treated();
        g0[i] = st.mixing_control();
        pi_sum += st.ll;
        dl_sum += st.dl;
        if (u.s) {
            const double g = u.z ? g1[i] : g0[i];
            g_surv[u.z].push_back(g);
            if (g < 1.0 - kPureSlack) pure[u.z] = false;
        }
    }
    SmOutcomeFit out;
    out.pi_dl = n ? dl_sum / static_cast<double>(n) : 0.0;
    if (!(pi_sum > 1e-12 * static_cast<double>(n)))
        throw NumericalError("empty always-survivor stratum: fitted pi_LL is zero for every unit");

    auto& warnings = out.outcome.warnings;
    for (int z : {1, 0}) {
        if (pure[z]) {
            warnings.push_back("arm-" + std::to_string(z) +
                               " survivors are all always-survivors at this rho; G term dropped");
        } else {
            note_weak(warnings, g_surv[z], z, weak_threshold);
        }
    }

    const auto p = static_cast<Eigen::Index>(data.dim());
    if (assume_er) {
        Vector alpha[2];
        for (int z : {1, 0}) {
            auto names = base_names(data);
            const int extra = pure[z] ? 0 : 1;
            if (extra) names.push_back("g");
            auto [design, y] = survivor_design(
                data, [z](const Unit& u) { return u.z == z; }, extra,
                [&](std::size_t i, const Unit&, auto& tail) {
                    if (extra) tail(0) = z ? g1[i] : g0[i];
                });
            Vector a = ols_in("arm-" + std::to_string(z) + " outcome model", design, y, names);
            alpha[z] = Vector::Zero(p + 2);
            alpha[z].head(a.size()) = a;
        }
        out.outcome.params.alpha2 = alpha[1];
        out.outcome.params.alpha3 = alpha[0];

        // m2(X, G=1) - m3(X, G=1) weighted by pi_LL.
        double num = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Unit& u = data[i];
            double diff = alpha[1](0) - alpha[0](0) + alpha[1](p + 1) - alpha[0](p + 1);
            for (Eigen::Index j = 0; j < p; ++j) diff += (alpha[1](1 + j) - alpha[0](1 + j)) * u.x[j];
            num += pi[i] * diff;
        }
        out.delta = num / pi_sum;
        return out;
    }

    // Columns after (1, X): A, Z*g1, Z, (1-Z)*g0; the g columns of pure arms
    // are left out.
    auto names = base_names(data);
    names.push_back("a");
    if (!pure[1]) names.push_back("z*g1");
    names.push_back("z");
    if (!pure[0]) names.push_back("(1-z)*g0");
    const int extra = 2 + !pure[1] + !pure[0];
    auto [design, y] = survivor_design(
        data, [](const Unit&) { return true; }, extra,
        [&](std::size_t i, const Unit& u, auto& tail) {
            int c = 0;
            tail(c++) = u.a;
            if (!pure[1]) tail(c++) = u.z ? g1[i] : 0.0;
            tail(c++) = u.z;
            if (!pure[0]) tail(c++) = u.z ? 0.0 : g0[i];
        });
    const Vector a = ols_in("stochastic-monotonicity outcome model", design, y, names);
    Vector alpha5 = Vector::Zero(p + 5);
    alpha5.head(p + 2) = a.head(p + 2);
    Eigen::Index c = p + 2;
    if (!pure[1]) alpha5(p + 2) = a(c++);
    alpha5(p + 3) = a(c++);
    if (!pure[0]) alpha5(p + 4) = a(c++);
    out.outcome.params.alpha5 = alpha5;
    out.delta = alpha5(p + 2) + alpha5(p + 3) - alpha5(p + 4);
    return out;
}

FittedModel fit_sm(const Dataset& data, double rho, bool assume_er,
                   const OptimizerOptions& options, double weak_threshold) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw UsageError("rho must lie in [0, 1]");
    FittedModel m;
    m.survival_fit = fit_survival_sm(data, options);
    m.survival = m.survival_fit.at(rho);
    m.outcome = fit_sm_outcome(data, m.survival, assume_er, weak_threshold);
    return m;
}

namespace {

void record_fit(SaceEstimate& est, const std::string& part, const OptimizerResult& r) {
    est.convergence.push_back({part, r.converged, r.iterations, r.grad_norm, r.boundary_flag,
                               r.loglik});
    if (r.converged) return;
    if (r.boundary_flag) {
        est.warnings.push_back(part +
                               " stopped at the boundary of the parameter space (fitted "
                               "probabilities near 0 or 1; possible monotonicity violation)");
        return;
    }
    std::ostringstream msg;
    msg << part << " did not converge after " << r.iterations << " iterations (gradient norm "
        << r.grad_norm << ")";
    if (!r.message.empty()) msg << ": " << r.message;
    throw ConvergenceError(msg.str());
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from) {
    to.insert(to.end(), from.begin(), from.end());
}

}  // namespace

SaceEstimate estimate_sace(const Dataset& data, Method method, const EstimateOptions& options) {
    SaceEstimate est;
    est.method = method;
    switch (method) {
        case Method::naive:
            est.point = naive_estimator(data);
            return est;
        case Method::dgyz:
            est.point = dgyz_estimator(data);
            return est;
        case Method::prop_er:
        case Method::prop_ni: {
            const SurvivalFitER sf = fit_survival_er(data, options.optimizer);
            record_fit(est, "joint survival model", sf.result);
            double pi_sum = 0.0;
            std::vector<double> pi(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                pi[i] = sf.params.theta1(data[i]) * sf.params.ratio(data[i]);
                pi_sum += pi[i];
            }
            if (!(pi_sum > 1e-12 * static_cast<double>(data.size())))
                throw NumericalError(
                    "empty always-survivor stratum: fitted pi_LL is zero for every unit");
            if (method == Method::prop_ni) {
                const OutcomeFit of = fit_ni(data, sf.params, options.weak_threshold);
                append(est.warnings, of.warnings);
                const Vector& a4 = *of.params.alpha4;
                est.point = a4(a4.size() - 1);
                return est;
            }
            const OutcomeFit of = fit_outcome_er(data, sf.params, options.weak_threshold);
            append(est.warnings, of.warnings);
            const Vector& a1 = *of.params.alpha1;
            const Vector& a2 = *of.params.alpha2;
            const auto p = static_cast<Eigen::Index>(data.dim());
            double num = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const Unit& u = data[i];
                double diff = a2(0) + a2(p + 1) - a1(0) - a1(p + 1) * u.a;
                for (Eigen::Index j = 0; j < p; ++j) diff += (a2(1 + j) - a1(1 + j)) * u.x[j];
                num += pi[i] * diff;
            }
            est.point = num / pi_sum;
            return est;
        }
        case Method::prop_sm:
        case Method::prop_sm_ni: {
            if (!options.rho) throw UsageError(to_string(method) + " requires rho");
            if (!(*options.rho >= 0.0 && *options.rho <= 1.0))
                throw UsageError("rho must lie in [0, 1]");
            const SurvivalFitSM sf = fit_survival_sm(data, options.optimizer);
            record_fit(est, "arm-1 survival model", sf.arm1);
            record_fit(est, "arm-0 survival model", sf.arm0);
            const SmOutcomeFit of = fit_sm_outcome(data, sf.at(*options.rho),
                                                   method == Method::prop_sm, options.weak_threshold);
            append(est.warnings, of.outcome.warnings);
            est.point = of.delta;
            return est;
        }
    }
    throw UsageError("unsupported method");
}

SaceEstimate bootstrap(const Dataset& data, Method method, const EstimateOptions& options,
                       std::size_t B, std::uint64_t seed, Execution exec) {
    if (B < 2) throw UsageError("bootstrap needs at least 2 replicates");
    SaceEstimate est = estimate_sace(data, method, options);
    est.B = B;

    const RandomStream root(seed);
    const std::size_t n = data.size();
    std::vector<double> value(B, 0.0);
    std::vector<char> ok(B, 0), boundary(B, 0);
    for_each_index(B, exec, [&](std::size_t b) {
        RandomStream stream = root.split(b);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = stream.below(n);
        try {
            const SaceEstimate r = estimate_sace(data.subset(idx), method, options);
            value[b] = r.point;
            ok[b] = std::isfinite(r.point);
            for (const auto& c : r.convergence)
                if (c.boundary) boundary[b] = 1;
        } catch (const Error&) {
            ok[b] = 0;
        }
    });

    std::vector<double> kept;
    for (std::size_t b = 0; b < B; ++b) {
        if (ok[b]) kept.push_back(value[b]);
        est.boundary_replicates += static_cast<std::size_t>(ok[b] && boundary[b]);
    }
    est.failed_replicates = B - kept.size();
    if (kept.empty()) throw NumericalError("all bootstrap replicates failed");
    if (est.failed_replicates > 0)
        est.warnings.push_back(std::to_string(est.failed_replicates) + " of " + std::to_string(B) +
                               " bootstrap replicates failed and were dropped");
    if (est.boundary_replicates > 0)
        est.warnings.push_back(std::to_string(est.boundary_replicates) +
                               " bootstrap replicates had a survival fit at the boundary");
    est.unreliable = 10 * est.failed_replicates > B;
    if (est.unreliable) est.warnings.push_back("more than 10% of bootstrap replicates failed");

    est.se = kept.size() >= 2 ? mean_sd(kept).sd : 0.0;
    est.q025 = quantile_linear(kept, 0.025);
    est.q50 = quantile_linear(kept, 0.5);
    est.q975 = quantile_linear(kept, 0.975);
    return est;
}

nlohmann::json to_json(const SaceEstimate& e) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json conv = json::array();
    for (const auto& c : e.convergence)
        conv.push_back({{"part", c.part},
                        {"converged", c.converged},
                        {"iterations", c.iterations},
                        {"grad_norm", c.grad_norm},
                        {"boundary", c.boundary},
                        {"loglik", c.loglik}});
    return {{"method", to_string(e.method)},
            {"point", e.point},
            {"se", opt(e.se)},
            {"q025", opt(e.q025)},
            {"q50", opt(e.q50)},
            {"q975", opt(e.q975)},
            {"B", e.B},
            {"failed_replicates", e.failed_replicates},
            {"boundary_replicates", e.boundary_replicates},
            {"unreliable", e.unreliable},
            {"warnings", e.warnings},
            {"convergence", conv}};
}

std::vector<SweepPoint> sensitivity_sweep(const Dataset& data, const std::vector<double>& rho_grid,
                                          bool assume_er, const EstimateOptions& options) {
    if (rho_grid.empty()) throw UsageError("rho grid is empty");
    for (std::size_t k = 0; k < rho_grid.size(); ++k) {
        if (!(rho_grid[k] >= 0.0 && rho_grid[k] <= 1.0))
            throw UsageError("rho grid value outside [0, 1]");
        if (k && rho_grid[k] < rho_grid[k - 1]) throw UsageError("rho grid is not sorted");
    }
    const SurvivalFitSM sf = fit_survival_sm(data, options.optimizer);
    SaceEstimate probe;
    record_fit(probe, "arm-1 survival model", sf.arm1);
    record_fit(probe, "arm-0 survival model", sf.arm0);

    std::vector<SweepPoint> curve;
    for (double rho : rho_grid) {
        SweepPoint pt;
        pt.rho = rho;
        const SurvivalParamsSM params = sf.at(rho);
        double dl = 0.0;
        for (const Unit& u : data.units())
            dl += strata_probs_stochastic(params.theta1(u), params.theta0(u), rho).dl;
        pt.pi_dl = data.empty() ? 0.0 : dl / static_cast<double>(data.size());
        try {
            pt.delta = fit_sm_outcome(data, params, assume_er, options.weak_threshold).delta;
        } catch (const Error& e) {
            pt.error = e.what();
        }
        curve.push_back(std::move(pt));
    }
    return curve;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& curve) {
    out << "rho,pi_dl,delta\n";
    for (const auto& pt : curve) {
        out << format_number(pt.rho) << ',' << format_number(pt.pi_dl) << ',';
        if (pt.delta) out << format_number(*pt.delta);
        out << '\n';
    }
}

}  // namespace sace
