#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Inverse logit, evaluated without overflow for either sign of t.
inline double expit(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(expit(t)), stable in both tails.
inline double log_expit(double t) {
    return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

/// Neumaier-compensated running sum; log-likelihood values are accumulated
/// with it so finite-difference checks are not swamped by summation error.
class CompensatedSum {
  public:
    void add(double v) {
        const double t = sum_ + v;
        comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Least squares via column-pivoted Householder QR. Throws CollinearityError
/// naming the dependent columns when the design is numerically rank deficient.
/// `names` labels the design columns in error messages (default "col<j>").
Vector fit_ols(const Matrix& design, const Vector& response,
               const std::vector<std::string>& names = {});

/// Smooth scalar objective with analytic derivatives, to be maximized.
class SmoothObjective {
  public:
    struct Evaluation {
        double value = 0.0;
        Vector gradient;
        Matrix hessian;  // left empty when not requested
    };

    virtual ~SmoothObjective() = default;
    virtual Eigen::Index dimension() const = 0;
    virtual Evaluation evaluate(const Vector& params, bool with_hessian) const = 0;
    /// True when some fitted probability lies within `eps` of 0 or 1.
    virtual bool near_boundary(const Vector& /*params*/, double /*eps*/) const { return false; }
};

struct OptimizerOptions {
    double tol = 1e-8;  // on the max-norm of the gradient
    int max_iterations = 100;
    double boundary_eps = 1e-6;
};

struct OptimizerResult {
    Vector params;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    bool boundary_flag = false;
    std::string message;
};

/// Newton ascent with step halving. When the Hessian is not negative
/// definite the step falls back to the gradient direction. A fit whose
/// fitted probabilities reach the boundary is reported as not converged
/// (the maximizer sits at infinity) with `boundary_flag` set.
OptimizerResult maximize_loglik(const SmoothObjective& objective, const Vector& init,
                                const OptimizerOptions& options = {});

/// Worst relative discrepancy between the analytic gradient and central
/// differences with step 1e-6 * max(1, |x_j|). The denominator is
/// max(1, |analytic_j|, |numeric_j|).
double check_gradient(const SmoothObjective& objective, const Vector& point);

/// Bernoulli log-likelihood of a logistic model, y_i ~ Bern(expit(row_i' b)).
class LogisticObjective final : public SmoothObjective {
  public:
    LogisticObjective(Matrix design, Vector response)
        : design_(std::move(design)), response_(std::move(response)) {}

    Eigen::Index dimension() const override { return design_.cols(); }
    Evaluation evaluate(const Vector& params, bool with_hessian) const override;
    bool near_boundary(const Vector& params, double eps) const override;

  private:
    Matrix design_;
    Vector response_;
};

/// Logistic regression MLE; starts at the zero vector unless `init` is given.
OptimizerResult fit_logistic(const Matrix& design, const Vector& response,
                             const OptimizerOptions& options = {}, const Vector* init = nullptr);

/// Linear-interpolation quantile of a sample (Hyndman-Fan type 7).
double quantile_linear(std::vector<double> values, double prob);

/// Sample mean and standard deviation (n-1 denominator) by Welford's update,
/// so a sample of identical values has standard deviation exactly 0.
struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& values);

}  // namespace sace
