#include <doctest.h>

#include <cmath>
#include <limits>

#include "sace/error.hpp"
#include "sace/numerics.hpp"
#include "sace/random.hpp"

using namespace sace;

namespace {

struct Quadratic final : SmoothObjective {
    double centre = 2.0;
    double corrupt = 0.0;
    Eigen::Index dimension() const override { return 1; }
    Evaluation evaluate(const Vector& p, bool with_hessian) const override {
        Evaluation e;
        const double d = p(0) - centre;
        e.value = -d * d;
        e.gradient = Vector::Constant(1, -2 * d + corrupt);
        if (with_hessian) e.hessian = Matrix::Constant(1, 1, -2.0);
        return e;
    }
};

struct CorruptedLogistic final : SmoothObjective {
    LogisticObjective inner;
    CorruptedLogistic(Matrix x, Vector y) : inner(std::move(x), std::move(y)) {}
    Eigen::Index dimension() const override { return inner.dimension(); }
    Evaluation evaluate(const Vector& p, bool h) const override {
        auto e = inner.evaluate(p, h);
        e.gradient(1) += 0.1;
        return e;
    }
};

}  // namespace

TEST_CASE("expit values and symmetry") {
    CHECK(expit(0.0) == 0.5);
    CHECK(expit(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(expit(-std::log(3.0)) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(expit(800.0) == 1.0);
    CHECK(expit(-800.0) >= 0.0);
    RandomStream rs(1);
    for (int i = 0; i < 1000; ++i) {
        const double t = rs.normal(0, 20);
        CHECK(std::abs(expit(t) + expit(-t) - 1.0) <= std::numeric_limits<double>::epsilon());
        CHECK(logit(expit(t / 10)) == doctest::Approx(t / 10).epsilon(1e-9));
        CHECK(log_expit(t) == doctest::Approx(std::log(expit(t))).epsilon(1e-12));
    }
    CHECK(log_expit(-800.0) == -800.0);
}

TEST_CASE("ols identity design") {
    const Vector b = fit_ols(Matrix::Identity(2, 2), Vector{{3.0, 7.0}});
    CHECK(b(0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(b(1) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("ols duplicated column names the dependent column") {
    Matrix x(5, 3);
    x << 1, 1, 1, 1, 2, 2, 1, 3, 3, 1, 4, 4, 1, 5, 5;
    try {
        fit_ols(x, Vector::LinSpaced(5, 0, 4), {"one", "u", "u_copy"});
        FAIL("expected CollinearityError");
    } catch (const CollinearityError& e) {
        REQUIRE_FALSE(e.columns().empty());
        const auto& c = e.columns();
        CHECK((std::find(c.begin(), c.end(), "u") != c.end() ||
               std::find(c.begin(), c.end(), "u_copy") != c.end()));
    }
}

TEST_CASE("ols recovers known coefficients and leaves orthogonal residuals") {
    RandomStream rs(2);
    const int n = 10000;
    Matrix x(n, 3);
    Vector y(n);
    const Vector truth{{1.0, -2.0, 0.5}};
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1;
        x(i, 1) = rs.normal();
        x(i, 2) = rs.normal(3, 2);
        y(i) = x.row(i).dot(truth) + rs.normal(0, 0.5);
    }
    const Vector b = fit_ols(x, y);
    const Matrix cov = 0.25 * (x.transpose() * x).inverse();
    for (int j = 0; j < 3; ++j) CHECK(std::abs(b(j) - truth(j)) <= 3 * std::sqrt(cov(j, j)));
    const Vector r = y - x * b;
    const double scale = x.norm() * y.norm();
    CHECK((x.transpose() * r).cwiseAbs().maxCoeff() <= 1e-8 * scale);
}

TEST_CASE("newton finds the quadratic optimum") {
    Quadratic q;
    const auto r = maximize_loglik(q, Vector::Zero(1));
    CHECK(r.converged);
    CHECK_FALSE(r.boundary_flag);
    CHECK(std::abs(r.params(0) - 2.0) <= 1e-8);
    const auto again = maximize_loglik(q, Vector::Zero(1));
    CHECK(again.params(0) == r.params(0));
    CHECK(again.iterations == r.iterations);
}

TEST_CASE("all successes push the logistic fit to the boundary") {
    Matrix x = Matrix::Ones(20, 1);
    const auto r = fit_logistic(x, Vector::Ones(20));
    CHECK(r.boundary_flag);
    CHECK_FALSE(r.converged);
}

TEST_CASE("logistic regression recovers known coefficients") {
    RandomStream rs(3);
    const int n = 50000;
    Matrix x(n, 3);
    Vector y(n);
    const Vector truth{{0.5, -1.0, 0.8}};
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1;
        x(i, 1) = rs.normal();
        x(i, 2) = rs.bernoulli(0.4);
        y(i) = rs.bernoulli(expit(x.row(i).dot(truth)));
    }
    const auto r = fit_logistic(x, y);
    REQUIRE(r.converged);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(r.params(j) - truth(j)) <= 0.05);
}

TEST_CASE("log-likelihood never decreases along accepted steps") {
    RandomStream rs(4);
    const int n = 300;
    Matrix x(n, 2);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1;
        x(i, 1) = rs.normal();
        y(i) = rs.bernoulli(expit(0.3 + 2 * x(i, 1)));
    }
    LogisticObjective obj(x, y);
    double previous = obj.evaluate(Vector::Zero(2), false).value;
    for (int iters = 1; iters <= 8; ++iters) {
        OptimizerOptions o;
        o.max_iterations = iters;
        const auto r = maximize_loglik(obj, Vector::Zero(2), o);
        CHECK(r.loglik >= previous - 1e-12);
        previous = r.loglik;
    }
}

TEST_CASE("gradient check on quadratic and corrupted gradients") {
    Quadratic q;
    CHECK(check_gradient(q, Vector::Constant(1, 0.7)) <= 1e-8);
    q.corrupt = 0.1;
    CHECK(check_gradient(q, Vector::Constant(1, 0.7)) > 1e-3);

    RandomStream rs(5);
    Matrix x(50, 2);
    Vector y(50);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = 1;
        x(i, 1) = rs.normal();
        y(i) = rs.bernoulli(0.5);
    }
    CHECK(check_gradient(LogisticObjective(x, y), Vector{{0.2, -0.4}}) <= 1e-6);
    CHECK(check_gradient(CorruptedLogistic(x, y), Vector{{0.2, -0.4}}) > 1e-3);
}

TEST_CASE("type 7 quantiles and welford moments") {
    CHECK(quantile_linear({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile_linear({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(quantile_linear({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK(quantile_linear({10, 20}, 0.25) == 12.5);
    const auto m = mean_sd({2, 4, 4, 4, 5, 5, 7, 9});
    CHECK(m.mean == 5.0);
    CHECK(m.sd == doctest::Approx(std::sqrt(32.0 / 7)));
    const auto c = mean_sd(std::vector<double>(17, 0.1));
    CHECK(c.sd == 0.0);
}
