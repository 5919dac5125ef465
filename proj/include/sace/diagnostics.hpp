#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sace/data.hpp"
#include "sace/identify.hpp"
#include "sace/models.hpp"

namespace sace {

enum class Status { pass, warn, fail, vacuous };
const char* to_string(Status s);

/// Worst of two statuses: fail > warn > pass > vacuous.
Status worst(Status a, Status b);

struct CellCheck {
    std::string cell;
    Status status = Status::vacuous;
    nlohmann::json detail;
};

/// One testable implication of the identification assumptions.
///   survival-order      pr(S=1|Z=0,x,a) <= pr(S=1|Z=1,x,a)
///   mixture-treated     exposed-survivor means form a two-point mixture across a
///   relevance           survival ratio pr(S=1|Z=0,x,a)/pr(S=1|Z=1,x,a) varies with a
///   mixture-control     unexposed-survivor means form a two-point mixture (needs rho)
///   mixture-difference  the between-arm survivor mean difference forms a two-point mixture
/// With two A levels the mixture constraints are satisfied by any data; with
/// three or more they are checked by the over-identification J statistic.
struct ConstraintReport {
    std::string constraint;  // "survival-order" ... "mixture-difference"
    std::string description;
    Status status = Status::vacuous;
    std::string note;
    std::vector<CellCheck> cells;
};

struct DiagnosticsOptions {
    /// One-sided z threshold for the monotonicity check; also sets the
    /// confidence level of the relevance equivalence bound and the size of
    /// its chi-square contrast.
    double z_threshold = 2.0;
    /// Ratios within this distance of one another count as constant.
    double relevance_tolerance = 0.02;
    /// Upper-tail level for J-statistic rejection.
    double j_level = 0.01;
    std::optional<double> rho;
    Binning binning;
};

struct DiagnosticsReport {
    std::string mode;  // "sample", "population" or "model"
    std::vector<ConstraintReport> constraints;

    const ConstraintReport* find(const std::string& constraint) const;
    /// Worst status over all constraints.
    Status overall() const;
};

ConstraintReport check_monotone(const CellTable& table, const DiagnosticsOptions& options = {});
/// Holds by construction for the ratio parameterization: always vacuous.
ConstraintReport check_monotone(const SurvivalParamsER& model, const Dataset& data);
/// Pointwise comparison of fitted theta0 and theta1 at every unit.
ConstraintReport check_monotone(const SurvivalParamsSM& model, const Dataset& data);

ConstraintReport check_relevance(const CellTable& table, const DiagnosticsOptions& options = {});

/// The mixture-treated, mixture-control and mixture-difference checks, in that order.
std::vector<ConstraintReport> check_boundedness(const CellTable& table,
                                                const DiagnosticsOptions& options = {});

/// All five constraints on a cell table.
DiagnosticsReport diagnose(const CellTable& table, const DiagnosticsOptions& options = {});
/// Cells from tabulate_cells with options.binning.
DiagnosticsReport diagnose(const Dataset& data, const DiagnosticsOptions& options = {});

/// Model mode: fit the survival models and check survival-order pointwise. With rho the
/// stochastic-monotonicity fits are checked, otherwise the ratio model.
DiagnosticsReport diagnose_model(const Dataset& data, const DiagnosticsOptions& options = {},
                                 const OptimizerOptions& optimizer = {});

nlohmann::json to_json(const DiagnosticsReport& report);
void print_table(std::ostream& out, const DiagnosticsReport& report);

}  // namespace sace
