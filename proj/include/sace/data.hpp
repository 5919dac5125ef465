#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sace {

/// Principal stratum, one per potential-survival pair (S(1), S(0)).
enum class Stratum { LL, LD, DL, DD };

inline constexpr Stratum stratum_from_survival(int s1, int s0) {
    if (s1 == 1) return s0 == 1 ? Stratum::LL : Stratum::LD;
    return s0 == 1 ? Stratum::DL : Stratum::DD;
}
inline constexpr int survives_treated(Stratum g) { return g == Stratum::LL || g == Stratum::LD; }
inline constexpr int survives_control(Stratum g) { return g == Stratum::LL || g == Stratum::DL; }
const char* to_string(Stratum g);

/// One observed record. `y` is engaged iff `s == 1`; a truncated outcome is
/// never represented by a sentinel number.
struct Unit {
    int z = 0;
    std::vector<double> x;
    int a = 0;
    int s = 0;
    std::optional<double> y;

    bool operator==(const Unit&) const = default;
};

/// Column mapping for CSV ingestion. Empty `x_cols` means every header column
/// not claimed by z/a/s/y, in header order. A non-empty `a_levels` restricts
/// the admissible labels of the substitution variable.
struct Schema {
    std::string z_col = "z";
    std::string a_col = "a";
    std::string s_col = "s";
    std::string y_col = "y";
    std::vector<std::string> x_cols;
    std::vector<std::string> a_levels;
};

/// Immutable collection of units sharing one covariate dimension and one
/// A-level alphabet. A levels are integer codes; labels that parse as
/// non-negative integers map to themselves, any other label maps to its
/// position in the sorted label set.
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::vector<std::string> covariate_names, std::map<int, std::string> a_labels,
            std::vector<Unit> units);

    const std::vector<Unit>& units() const noexcept { return units_; }
    const Unit& operator[](std::size_t i) const { return units_[i]; }
    std::size_t size() const noexcept { return units_.size(); }
    bool empty() const noexcept { return units_.empty(); }
    std::size_t dim() const noexcept { return covariate_names_.size(); }
    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    const std::map<int, std::string>& a_labels() const noexcept { return a_labels_; }

    /// Units at the given indices, in that order (duplicates allowed).
    Dataset subset(const std::vector<std::size_t>& indices) const;

    bool operator==(const Dataset&) const = default;

  private:
    std::vector<std::string> covariate_names_;
    std::map<int, std::string> a_labels_;
    std::vector<Unit> units_;
};

Dataset load_dataset(const std::string& path, const Schema& schema = {});
Dataset read_dataset(std::istream& in, const Schema& schema = {});

/// Writes header `z,<covariates>,a,s,y`; numbers use round-trip precision.
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Throws DataError unless both exposure arms are non-empty.
void require_both_arms(const Dataset& data);

struct CovariateSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct ValidationReport {
    std::size_t n = 0;
    std::size_t units_per_arm[2] = {0, 0};
    std::size_t survivors_per_arm[2] = {0, 0};
    /// a code -> count, per arm.
    std::map<int, std::size_t> a_counts[2];
    std::map<int, std::size_t> a_survivor_counts[2];
    std::vector<CovariateSummary> covariates;
    std::vector<std::string> flags;

    bool clear() const noexcept { return flags.empty(); }
};

ValidationReport validate(const Dataset& data);
nlohmann::json to_json(const ValidationReport& report);

}  // namespace sace
