#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sace/data.hpp"
#include "sace/models.hpp"
#include "sace/parallel.hpp"
#include "sace/random.hpp"

namespace sace {

/// Simulation design with three covariates: X1 = +-1 with equal probability,
/// (X2, X3) bivariate normal with means (1, -1), unit variances and
/// correlation 0.5; u = (1, 1, 1)/2.
///   A ~ Bern(expit(X'u)),  Z ~ Bern(expit(delta1 X'u + delta1 A))
///   theta1 = expit(2 + delta2 (X1 + X2 + X3)/2 + A)
///   ratio  = expit(delta2 (-3 X1 + X2 + X3)/2 + A)
///   pr(LL) = theta1 ratio, pr(LD) = theta1 (1 - ratio), pr(DD) = 1 - theta1
/// Outcome means (sd 0.5), Y(1)|LL, Y(1)|LD, Y(0)|LL:
///   default:           X'u,          1 + X'u,      -1 + X'u
///   er_violation:      5 + X'u + A,  7 + X'u + A,   4 + X'u + A
struct SimulationSetting {
    int delta1 = 0;
    int delta2 = 0;
    bool er_violation = false;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

/// Latent quantities for one unit. Potential outcomes that do not exist
/// (a non-survivor's outcome) are empty.
struct OracleRow {
    Stratum g = Stratum::DD;
    int s1 = 0, s0 = 0;
    std::optional<double> y1, y0;
};

struct SimulatedData {
    Dataset data;
    std::vector<OracleRow> oracle;
};

/// Draws from RandomStream(setting.seed).
SimulatedData gen_dataset(const SimulationSetting& setting);
/// Draws from `stream`; setting.seed is ignored.
SimulatedData gen_dataset(const SimulationSetting& setting, RandomStream& stream);

/// The true survivor average causal effect, 1 in every setting.
double true_sace(const SimulationSetting& setting);

/// Header "g,s1,s0,y1,y0"; row i describes unit i of the dataset.
void write_oracle_csv(std::ostream& out, const SimulatedData& sim);

struct BenchCellSpec {
    std::size_t n = 0;
    int delta1 = 0;
    int delta2 = 0;
    bool er_violation = false;
};

struct BenchEntry {
    BenchCellSpec cell;
    Method method = Method::naive;
    std::size_t reps = 0;
    std::size_t failed = 0;    // replicates whose estimate threw
    std::size_t boundary = 0;  // kept replicates with a survival fit at the boundary
    double mean_bias = 0.0;
    double sd = 0.0;
    double mc_se = 0.0;  // sd / sqrt(successful replicates)
    std::vector<double> estimates;  // successful replicates, in replicate order
};

struct BenchReport {
    std::vector<BenchEntry> entries;  // cell-major, methods in request order
    std::size_t reps = 0;
    std::uint64_t seed = 0;

    const BenchEntry* find(std::size_t n, int delta1, int delta2, bool er_violation,
                           Method method) const;
};

/// Settings of the published comparison: n in {200, 1000, 5000} crossed with
/// (delta1, delta2) in {0, 1}^2.
std::vector<BenchCellSpec> preset_grid(bool er_violation);
std::vector<Method> preset_methods();

/// Replicate r of grid cell c uses RandomStream(seed).split(c).split(r) and
/// is estimated by every method on the same dataset.
BenchReport run_benchmark(const std::vector<BenchCellSpec>& grid, const std::vector<Method>& methods,
                          std::size_t reps, std::uint64_t seed,
                          Execution exec = Execution::parallel,
                          const EstimateOptions& options = {});

nlohmann::json to_json(const BenchReport& report);
/// Bias and Monte Carlo standard error, both multiplied by 100, one row per
/// cell and one column per method.
void print_table(std::ostream& out, const BenchReport& report);

}  // namespace sace
