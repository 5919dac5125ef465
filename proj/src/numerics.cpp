#include "sace/numerics.hpp"

#include <algorithm>
#include <limits>

#include "sace/error.hpp"

namespace sace {

Vector fit_ols(const Matrix& design, const Vector& response, const std::vector<std::string>& names) {
    const Eigen::Index n = design.rows(), p = design.cols();
    if (response.size() != n) throw NumericalError("OLS: response length does not match design");
    auto name = [&](Eigen::Index j) {
        return j < Eigen::Index(names.size()) ? names[j] : "col" + std::to_string(j);
    };
    if (n < p)
        throw CollinearityError("OLS: " + std::to_string(n) + " rows for " + std::to_string(p) +
                                    " columns",
                                {});
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::vector<std::string> bad;
        std::string list;
        for (Eigen::Index k = qr.rank(); k < p; ++k) {
            bad.push_back(name(qr.colsPermutation().indices()(k)));
            list += (list.empty() ? "" : ", ") + bad.back();
        }
        throw CollinearityError("OLS: design is rank deficient; collinear column(s): " + list,
                                std::move(bad));
    }
    // Iterative refinement with residuals accumulated in extended precision:
    // the least-squares fit of the exact residual is zero, so each pass only
    // removes rounding left by the previous solve.
    Vector beta = qr.solve(response);
    Vector resid(n);
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < n; ++i) {
            long double r = response(i);
            for (Eigen::Index j = 0; j < p; ++j)
                r -= static_cast<long double>(design(i, j)) * beta(j);
            resid(i) = static_cast<double>(r);
        }
        const Vector step = qr.solve(resid);
        if (step.isZero(0.0)) break;
        beta += step;
    }
    return beta;
}

OptimizerResult maximize_loglik(const SmoothObjective& objective, const Vector& init,
                                const OptimizerOptions& options) {
    OptimizerResult r;
    Vector theta = init;
    auto ev = objective.evaluate(theta, true);
    if (!std::isfinite(ev.value)) throw NumericalError("objective is not finite at the initial point");

    constexpr double eps = std::numeric_limits<double>::epsilon();
    double gnorm = ev.gradient.lpNorm<Eigen::Infinity>();
    while (true) {
        if (gnorm <= options.tol) break;
        if (r.iterations >= options.max_iterations) {
            r.message = "maximum iterations reached";
            break;
        }
        Vector dir;
        Eigen::LLT<Matrix> llt(-ev.hessian);
        if (llt.info() == Eigen::Success) {
            dir = llt.solve(ev.gradient);
        }
        if (dir.size() == 0 || !dir.allFinite()) {
            dir = ev.gradient / std::max(1.0, ev.gradient.norm());
        }

        bool accepted = false;
        double step = 1.0;
        Vector candidate;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            candidate = theta + step * dir;
            auto trial = objective.evaluate(candidate, false);
            if (!std::isfinite(trial.value)) continue;
            // Ties within rounding are accepted only if the gradient shrinks.
            const double slack = 8 * eps * std::abs(ev.value);
            if (trial.value > ev.value ||
                (trial.value >= ev.value - slack &&
                 trial.gradient.lpNorm<Eigen::Infinity>() < gnorm)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            r.message = "line search failed to improve the objective";
            break;
        }
        theta = candidate;
        ev = objective.evaluate(theta, true);
        gnorm = ev.gradient.lpNorm<Eigen::Infinity>();
        ++r.iterations;
    }

    r.params = theta;
    r.loglik = ev.value;
    r.grad_norm = gnorm;
    r.boundary_flag = objective.near_boundary(theta, options.boundary_eps);
    r.converged = gnorm <= options.tol && !r.boundary_flag;
    if (r.boundary_flag) r.message = "fitted probabilities at the boundary";
    return r;
}

double check_gradient(const SmoothObjective& objective, const Vector& point) {
    const Vector analytic = objective.evaluate(point, false).gradient;
    double worst = 0.0;
    Vector x = point;
    for (Eigen::Index j = 0; j < point.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(point(j)));
        x(j) = point(j) + h;
        const double up = objective.evaluate(x, false).value;
        x(j) = point(j) - h;
        const double down = objective.evaluate(x, false).value;
        x(j) = point(j);
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({1.0, std::abs(analytic(j)), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic(j) - numeric) / scale);
    }
    return worst;
}

SmoothObjective::Evaluation LogisticObjective::evaluate(const Vector& params,
                                                        bool with_hessian) const {
    Evaluation ev;
    const Vector eta = design_ * params;
    Vector resid(eta.size()), weight(eta.size());
    CompensatedSum value;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = expit(eta(i));
        const double y = response_(i);
        value.add(y * log_expit(eta(i)) + (1 - y) * log_expit(-eta(i)));
        resid(i) = y - p;
        weight(i) = p * (1 - p);
    }
    ev.value = value.value();
    ev.gradient = design_.transpose() * resid;
    if (with_hessian)
        ev.hessian = -(design_.transpose() * weight.asDiagonal() * design_);
    return ev;
}

bool LogisticObjective::near_boundary(const Vector& params, double eps) const {
    const Vector eta = design_ * params;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = expit(eta(i));
        if (p < eps || p > 1 - eps) return true;
    }
    return false;
}

OptimizerResult fit_logistic(const Matrix& design, const Vector& response,
                             const OptimizerOptions& options, const Vector* init) {
    LogisticObjective objective(design, response);
    return maximize_loglik(objective, init ? *init : Vector::Zero(design.cols()), options);
}

double quantile_linear(std::vector<double> values, double prob) {
    if (values.empty()) throw NumericalError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (double(values.size()) - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - double(lo)) * (values[lo + 1] - values[lo]);
}

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    double m2 = 0.0;
    std::size_t k = 0;
    for (double v : values) {
        ++k;
        const double delta = v - out.mean;
        out.mean += delta / double(k);
        m2 += delta * (v - out.mean);
    }
    out.sd = k > 1 ? std::sqrt(m2 / double(k - 1)) : 0.0;
    return out;
}

}  // namespace sace
