#include "sace/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sace/error.hpp"

namespace sace {

const char* to_string(Stratum g) {
    switch (g) {
        case Stratum::LL: return "LL";
        case Stratum::LD: return "LD";
        case Stratum::DL: return "DL";
        case Stratum::DD: return "DD";
    }
    return "?";
}

Dataset::Dataset(std::vector<std::string> covariate_names, std::map<int, std::string> a_labels,
                 std::vector<Unit> units)
    : covariate_names_(std::move(covariate_names)),
      a_labels_(std::move(a_labels)),
      units_(std::move(units)) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        const Unit& u = units_[i];
        const std::string where = "unit " + std::to_string(i) + ": ";
        if (u.z != 0 && u.z != 1) throw DataError(where + "exposure must be 0 or 1");
        if (u.s != 0 && u.s != 1) throw DataError(where + "survival must be 0 or 1");
        if (u.x.size() != covariate_names_.size())
            throw DataError(where + "covariate dimension mismatch");
        if (u.s == 1 && !u.y) throw DataError(where + "outcome missing for survivor");
        if (u.s == 0 && u.y) throw DataError(where + "outcome present for non-survivor");
        if (u.y && !std::isfinite(*u.y)) throw DataError(where + "non-finite outcome");
        if (!a_labels_.contains(u.a))
            throw DataError(where + "unknown A level " + std::to_string(u.a));
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.covariate_names_ = covariate_names_;
    out.a_labels_ = a_labels_;
    out.units_.reserve(indices.size());
    for (std::size_t i : indices) out.units_.push_back(units_.at(i));
    return out;
}

void require_both_arms(const Dataset& data) {
    bool seen[2] = {false, false};
    for (const Unit& u : data.units()) seen[u.z] = true;
    if (!seen[0]) throw DataError("exposure arm 0 is empty");
    if (!seen[1]) throw DataError("exposure arm 1 is empty");
}

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_nonneg_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && out >= 0;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "*"; }

int parse_binary(const std::string& s, const char* what, std::size_t line) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw DataError("line " + std::to_string(line) + ": " + what + " must be 0 or 1, got '" + s +
                    "'");
}

std::map<std::string, int> encode_levels(const std::set<std::string>& labels) {
    std::map<std::string, int> codes;
    bool all_int = true;
    for (const auto& l : labels) {
        int v;
        if (!parse_nonneg_int(l, v)) all_int = false;
    }
    int next = 0;
    for (const auto& l : labels) {
        int v = 0;
        if (all_int) parse_nonneg_int(l, v);
        codes[l] = all_int ? v : next++;
    }
    return codes;
}

}  // namespace

Dataset read_dataset(std::istream& in, const Schema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("missing header row");
    const auto header = split_row(line);

    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t zc = find_col(schema.z_col), ac = find_col(schema.a_col),
                      sc = find_col(schema.s_col), yc = find_col(schema.y_col);
    std::vector<std::size_t> xc;
    std::vector<std::string> x_names;
    if (schema.x_cols.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == zc || j == ac || j == sc || j == yc) continue;
            xc.push_back(j);
            x_names.push_back(header[j]);
        }
    } else {
        for (const auto& name : schema.x_cols) {
            xc.push_back(find_col(name));
            x_names.push_back(name);
        }
    }

    struct Raw {
        Unit unit;
        std::string a_label;
    };
    std::vector<Raw> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto f = split_row(line);
        const std::string at = "line " + std::to_string(line_no) + ": ";
        if (f.size() != header.size())
            throw DataError(at + "malformed row: expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(f.size()));
        Raw r;
        r.unit.z = parse_binary(f[zc], "exposure", line_no);
        r.unit.s = parse_binary(f[sc], "survival", line_no);
        for (std::size_t j : xc) {
            double v;
            if (!parse_double(f[j], v))
                throw DataError(at + "malformed covariate '" + header[j] + "' value '" + f[j] + "'");
            r.unit.x.push_back(v);
        }
        if (is_missing(f[yc])) {
            if (r.unit.s == 1) throw DataError(at + "outcome missing for survivor");
        } else {
            if (r.unit.s == 0) throw DataError(at + "outcome present for non-survivor");
            double v;
            if (!parse_double(f[yc], v)) throw DataError(at + "malformed outcome '" + f[yc] + "'");
            r.unit.y = v;
        }
        if (f[ac].empty()) throw DataError(at + "missing A level");
        if (!schema.a_levels.empty() &&
            std::find(schema.a_levels.begin(), schema.a_levels.end(), f[ac]) ==
                schema.a_levels.end())
            throw DataError(at + "unknown A level '" + f[ac] + "'");
        r.a_label = f[ac];
        rows.push_back(std::move(r));
    }

    std::set<std::string> labels(schema.a_levels.begin(), schema.a_levels.end());
    for (const auto& r : rows) labels.insert(r.a_label);
    const auto codes = encode_levels(labels);
    std::map<int, std::string> a_labels;
    for (const auto& [label, code] : codes) a_labels[code] = label;

    std::vector<Unit> units;
    units.reserve(rows.size());
    for (auto& r : rows) {
        r.unit.a = codes.at(r.a_label);
        units.push_back(std::move(r.unit));
    }
    return Dataset(std::move(x_names), std::move(a_labels), std::move(units));
}

Dataset load_dataset(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_dataset(in, schema);
}

std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {
void put_number(std::ostream& out, double v) { out << format_number(v); }
}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
    out << "z";
    for (const auto& name : data.covariate_names()) out << ',' << name;
    out << ",a,s,y\n";
    for (const Unit& u : data.units()) {
        out << u.z;
        for (double v : u.x) {
            out << ',';
            put_number(out, v);
        }
        out << ',' << data.a_labels().at(u.a) << ',' << u.s << ',';
        if (u.y) put_number(out, *u.y);
        out << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_dataset(out, data);
}

ValidationReport validate(const Dataset& data) {
    ValidationReport r;
    r.n = data.size();
    for (const Unit& u : data.units()) {
        ++r.units_per_arm[u.z];
        ++r.a_counts[u.z][u.a];
        if (u.s == 1) {
            ++r.survivors_per_arm[u.z];
            ++r.a_survivor_counts[u.z][u.a];
        }
    }
    for (std::size_t j = 0; j < data.dim(); ++j) {
        CovariateSummary c;
        c.name = data.covariate_names()[j];
        if (!data.empty()) {
            double sum = 0, sq = 0;
            c.min = c.max = data[0].x[j];
            for (const Unit& u : data.units()) {
                sum += u.x[j];
                c.min = std::min(c.min, u.x[j]);
                c.max = std::max(c.max, u.x[j]);
            }
            c.mean = sum / double(data.size());
            for (const Unit& u : data.units()) sq += (u.x[j] - c.mean) * (u.x[j] - c.mean);
            c.sd = data.size() > 1 ? std::sqrt(sq / double(data.size() - 1)) : 0.0;
        }
        r.covariates.push_back(c);
    }

    for (int z = 0; z < 2; ++z) {
        if (r.units_per_arm[z] == 0) {
            r.flags.push_back("arm " + std::to_string(z) + " empty");
            continue;
        }
        if (r.survivors_per_arm[z] == 0)
            r.flags.push_back("no survivors in arm " + std::to_string(z));
        for (const auto& [code, label] : data.a_labels())
            if (!r.a_counts[z].contains(code))
                r.flags.push_back("A level " + label + " absent from arm " + std::to_string(z));
        if (r.survivors_per_arm[z] > 0 && r.a_survivor_counts[z].size() < 2)
            r.flags.push_back("substitution variation absent in arm " + std::to_string(z));
    }
    return r;
}

nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    for (int z = 0; z < 2; ++z) {
        nlohmann::json arm;
        arm["units"] = r.units_per_arm[z];
        arm["survivors"] = r.survivors_per_arm[z];
        nlohmann::json levels = nlohmann::json::object();
        for (const auto& [code, count] : r.a_counts[z]) {
            auto it = r.a_survivor_counts[z].find(code);
            levels[std::to_string(code)] = {
                {"units", count},
                {"survivors", it == r.a_survivor_counts[z].end() ? 0 : it->second}};
        }
        arm["a_levels"] = levels;
        j["arms"][std::to_string(z)] = arm;
    }
    j["covariates"] = nlohmann::json::array();
    for (const auto& c : r.covariates)
        j["covariates"].push_back(
            {{"name", c.name}, {"mean", c.mean}, {"sd", c.sd}, {"min", c.min}, {"max", c.max}});
    j["flags"] = r.flags;
    return j;
}

}  // namespace sace
