#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sace/data.hpp"

namespace sace {

/// Principal-stratum probabilities for one covariate cell.
struct StratumProbabilities {
    double ll = 0.0, ld = 0.0, dl = 0.0, dd = 0.0;

    double sum() const { return ll + ld + dl + dd; }
    /// p_{LL|1,w,s=1}: share of always-survivors among exposed survivors.
    double mixing_treated() const { return ll + ld > 0 ? ll / (ll + ld) : 0.0; }
    /// p_{LL|0,w,s=1}: share of always-survivors among unexposed survivors.
    double mixing_control() const { return ll + dl > 0 ? ll / (ll + dl) : 0.0; }
};

/// Strata under individual monotonicity S(1) >= S(0). Throws
/// MonotonicityError when p0 > p1 (beyond 1e-12 rounding slack).
StratumProbabilities strata_probs_monotone(double p1, double p0);

/// Strata under stochastic monotonicity with association parameter rho in
/// [0, 1]: a convex combination of the independence coupling (rho = 0) and
/// the maximal-overlap coupling pi_LL = min(p1, p0) (rho = 1). Every stratum
/// is computed as a sum of non-negative products, so none can round below 0.
StratumProbabilities strata_probs_stochastic(double p1, double p0, double rho);

struct MixtureMeans {
    double mu_ll = 0.0;
    double mu_other = 0.0;
};

/// Solves ybar_a = p_a mu_ll + (1 - p_a) mu_other for the two levels.
/// Throws RelevanceError when |p_a1 - p_a0| < eps.
MixtureMeans solve_two_point_mixture(double ybar_a1, double ybar_a0, double p_a1, double p_a0,
                                     double eps = 1e-8);

struct GmmResult {
    double mu_ll = 0.0;
    double mu_other = 0.0;
    double j_stat = 0.0;
    int df = 0;
};

/// One-step GMM for the over-identified two-point mixture: minimizes
/// sum_a w_a (ybar_a - p_a mu_ll - (1 - p_a) mu_other)^2 with diagonal weights
/// w_a. J = the minimized criterion, df = levels - 2. With inverse-variance
/// weights (n_a / s_a^2) J is asymptotically chi-square(df). Two levels
/// reduce to solve_two_point_mixture.
GmmResult gmm_overidentified(const std::vector<double>& ybar, const std::vector<double>& p,
                             const std::vector<double>& weights, double eps = 1e-8);

/// Summary statistics of one (x, a) covariate cell.
struct Cell {
    int x = 0;
    int a = 0;
    double mass = 0.0;  // pr(X=x, A=a)
    std::optional<double> p1, p0;          // pr(S=1 | Z=z, x, a)
    std::optional<double> ybar1, ybar0;    // E(Y | Z=z, S=1, x, a)
    // Sample mode only.
    std::size_t n1 = 0, n0 = 0;            // units per arm
    std::size_t surv1 = 0, surv0 = 0;      // survivors per arm
    std::optional<double> var1, var0;      // survivor outcome variances

    std::optional<double> p(int z) const { return z ? p1 : p0; }
    std::optional<double> ybar(int z) const { return z ? ybar1 : ybar0; }
    std::size_t n(int z) const { return z ? n1 : n0; }
    std::size_t survivors(int z) const { return z ? surv1 : surv0; }
    std::optional<double> var(int z) const { return z ? var1 : var0; }
};

/// Cells keyed by (x, a). Population tables carry exact probabilities and
/// masses summing to 1; sample tables come from tabulate_cells.
struct CellTable {
    bool sample_mode = false;
    std::size_t n = 0;
    std::vector<Cell> cells;
    std::map<int, std::string> x_labels;

    /// Cells grouped by x, each group sorted by a.
    std::map<int, std::vector<const Cell*>> by_x() const;
    std::vector<int> a_levels() const;
};

CellTable cell_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CellTable& table);

/// Discretization of continuous covariates: each covariate is cut at its
/// empirical quantiles into `bins_per_covariate` bins; a covariate with no
/// more distinct values than that keeps one bin per value.
struct Binning {
    int bins_per_covariate = 2;
};

CellTable tabulate_cells(const Dataset& data, const Binning& binning = {});

struct IdentifyOptions {
    double relevance_eps = 1e-8;
    /// Sample mode: mixing-weight spread below this is flagged as weak.
    double weak_threshold = 0.02;
};

struct IdentifyResult {
    double delta = 0.0;
    double mean_treated_ll = 0.0;  // E{Y(1) | G=LL}
    double mean_control_ll = 0.0;  // E{Y(0) | G=LL}
    double pi_ll = 0.0;            // sum over used cells of pi_LL|w * mass
    std::vector<std::string> warnings;
};

/// Monotonicity + exclusion restriction + relevance.
IdentifyResult identify_thm1(const CellTable& table, const IdentifyOptions& options = {});
/// Stochastic monotonicity at constant rho, exclusion restriction in both
/// arms. Cell-varying rho(W) would slot in by replacing the scalar.
IdentifyResult identify_thm2(const CellTable& table, double rho,
                             const IdentifyOptions& options = {});
/// Monotonicity + no-interaction in place of the exclusion restriction.
IdentifyResult identify_thm3(const CellTable& table, const IdentifyOptions& options = {});

}  // namespace sace
