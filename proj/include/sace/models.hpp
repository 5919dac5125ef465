#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sace/data.hpp"
#include "sace/numerics.hpp"
#include "sace/parallel.hpp"

namespace sace {

enum class Method { naive, dgyz, prop_er, prop_ni, prop_sm, prop_sm_ni };

std::string to_string(Method m);
/// Accepts "naive", "dgyz", "prop-er", "prop-ni", "prop-sm", "prop-sm-ni".
Method parse_method(const std::string& name);
bool needs_rho(Method m);

/// Survival model under monotonicity:
///   pr(S=1|Z=1,X,A) = theta1 = expit(b10 + X'b11 + A b12)
///   pr(S=1|Z=0,X,A) = theta1 * ratio,  ratio = expit(g0 + X'g1 + A g2)
/// so the unexposed survival probability never exceeds the exposed one.
struct SurvivalParamsER {
    Vector beta1;
    Vector gamma;

    double theta1(const Unit& u) const;
    double ratio(const Unit& u) const;
};

/// Survival model under stochastic monotonicity: separate logistic models
/// theta1 = pr(S(1)=1|X,A), theta0 = pr(S(0)=1|X,A) and a constant rho.
struct SurvivalParamsSM {
    Vector beta1;
    Vector beta0;
    double rho = 1.0;

    double theta1(const Unit& u) const;
    double theta0(const Unit& u) const;
};

/// Outcome-model coefficients; only the blocks used by a method are set.
///   alpha1: (a10, a11.., a12)            m1 = a10 + X'a11 + A a12
///   alpha2: (a20, a21.., a23)            m2 = a20 + X'a21 + G a23   (LL=1, LD=0)
///   alpha3: (a30, a31.., a33)            m3 = a30 + X'a31 + G a33   (LL=1, DL=0)
///   alpha4: (a40, a41.., a42, a43, a44)  m4 = a40 + X'a41 + A a42 + G a43 + Z a44
///   alpha5: (a50, a51.., a52, a53, a54, a55)
///           m5 = a50 + X'a51 + A a52 + ZG a53 + Z a54 + (1-Z)G a55
struct OutcomeParams {
    std::optional<Vector> alpha1, alpha2, alpha3, alpha4, alpha5;
};

/// Joint Bernoulli log-likelihood of both arms under SurvivalParamsER;
/// parameters are stacked as (beta1, gamma).
class JointSurvivalObjective final : public SmoothObjective {
  public:
    explicit JointSurvivalObjective(const Dataset& data);

    Eigen::Index dimension() const override { return 2 * design_.cols(); }
    Evaluation evaluate(const Vector& params, bool with_hessian) const override;
    bool near_boundary(const Vector& params, double eps) const override;

  private:
    Matrix design_;  // rows (1, x, a)
    Eigen::VectorXi z_, s_;
};

/// Design row (1, x, a) for every unit.
Matrix survival_design(const Dataset& data);

struct SurvivalFitER {
    SurvivalParamsER params;
    OptimizerResult result;
};

/// Joint MLE of (beta1, gamma). Default start: beta1 from an exposed-arm
/// logistic fit, gamma = 0.
SurvivalFitER fit_survival_er(const Dataset& data, const OptimizerOptions& options = {},
                              const SurvivalParamsER* init = nullptr);

struct OutcomeFit {
    OutcomeParams params;
    std::vector<std::string> warnings;
};

/// alpha1 by OLS of Y on (1, X, A) among unexposed survivors; alpha2 by OLS
/// of Y on (1, X, ratio) among exposed survivors, the mixture mean being
/// linear in the fitted always-survivor share.
OutcomeFit fit_outcome_er(const Dataset& data, const SurvivalParamsER& survival,
                          double weak_threshold = 0.02);

/// alpha4 by one OLS over all survivors with design (1, X, A, g, Z), where
/// g = 1 for unexposed survivors and the fitted ratio for exposed survivors.
OutcomeFit fit_ni(const Dataset& data, const SurvivalParamsER& survival,
                  double weak_threshold = 0.02);

struct SurvivalFitSM {
    Vector beta1, beta0;
    OptimizerResult arm1, arm0;

    SurvivalParamsSM at(double rho) const { return {beta1, beta0, rho}; }
};

/// Independent per-arm logistic fits; they do not depend on rho.
SurvivalFitSM fit_survival_sm(const Dataset& data, const OptimizerOptions& options = {});

struct SmOutcomeFit {
    OutcomeFit outcome;
    double delta = 0.0;
    double pi_dl = 0.0;  // mean over units of theta0 - pi_LL
};

/// Outcome stage at a given rho. With assume_er, alpha2 and alpha3 come from
/// per-arm OLS on the fitted mixing weights; otherwise alpha5 from one OLS
/// over all survivors. An arm whose survivors are all always-survivors at
/// this rho has no stratum contrast to fit; its G column is dropped and the
/// coefficient reported as 0.
SmOutcomeFit fit_sm_outcome(const Dataset& data, const SurvivalParamsSM& survival, bool assume_er,
                            double weak_threshold = 0.02);

struct FittedModel {
    SurvivalParamsSM survival;
    SurvivalFitSM survival_fit;
    SmOutcomeFit outcome;
};

FittedModel fit_sm(const Dataset& data, double rho, bool assume_er,
                   const OptimizerOptions& options = {}, double weak_threshold = 0.02);

struct EstimateOptions {
    std::optional<double> rho;
    double weak_threshold = 0.02;
    OptimizerOptions optimizer;
};

struct ConvergenceInfo {
    std::string part;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    bool boundary = false;
    double loglik = 0.0;
};

struct SaceEstimate {
    Method method = Method::prop_er;
    double point = 0.0;
    std::optional<double> se, q025, q50, q975;
    std::size_t B = 0;
    std::size_t failed_replicates = 0;
    std::size_t boundary_replicates = 0;
    bool unreliable = false;
    std::vector<std::string> warnings;
    std::vector<ConvergenceInfo> convergence;
};

/// Point estimate: fit pipeline of `method`, then the always-survivor
/// weighted average over the empirical covariate distribution. Survival fits
/// that stop at the boundary are kept with a warning; any other
/// non-convergence throws ConvergenceError.
SaceEstimate estimate_sace(const Dataset& data, Method method, const EstimateOptions& options = {});

/// Nonparametric bootstrap. Replicate b resamples with stream
/// RandomStream(seed).split(b); failed replicates are dropped and counted,
/// and more than 10% failures marks the result unreliable. Quantiles use
/// linear interpolation of order statistics.
SaceEstimate bootstrap(const Dataset& data, Method method, const EstimateOptions& options,
                       std::size_t B, std::uint64_t seed, Execution exec = Execution::parallel);

nlohmann::json to_json(const SaceEstimate& estimate);

struct SweepPoint {
    double rho = 0.0;
    double pi_dl = 0.0;
    std::optional<double> delta;
    std::string error;
};

/// Delta and pi_DL over a rho grid, reusing one pair of survival fits.
std::vector<SweepPoint> sensitivity_sweep(const Dataset& data, const std::vector<double>& rho_grid,
                                          bool assume_er, const EstimateOptions& options = {});

/// Header "rho,pi_dl,delta"; a failed point leaves delta empty.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& curve);

}  // namespace sace
