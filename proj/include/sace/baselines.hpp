#pragma once

#include "sace/data.hpp"
#include "sace/identify.hpp"

namespace sace {

/// Coefficient on Z from OLS of Y on (1, X, A, Z) among survivors.
double naive_estimator(const Dataset& data);

/// Covariate-free mixture plug-in with a binary substitution variable:
/// p_a = pr(S=1|Z=0,A=a) / pr(S=1|Z=1,A=a), the always-survivor mean in the
/// exposed arm from the two-point mixture solve, and the plain survivor mean
/// in the unexposed arm.
double dgyz_estimator(const Dataset& data);

/// The same plug-in on a cell table, collapsing covariate cells by mass.
double dgyz_from_cells(const CellTable& table);

}  // namespace sace
