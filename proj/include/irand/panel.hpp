#pragma once

// Two-point panel data: baseline (time 0) and follow-up (time 1) records per
// individual, plus the one-row-per-unit views derived from it.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "irand/error.hpp"
#include "irand/rng.hpp"

namespace irand {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_missing(double value) noexcept { return std::isnan(value); }

enum class VariableKind { binary, ordinal, continuous };

[[nodiscard]] inline std::string_view to_string(VariableKind kind) noexcept {
    switch (kind) {
        case VariableKind::binary: return "binary";
        case VariableKind::ordinal: return "ordinal";
        case VariableKind::continuous: return "continuous";
    }
    return "continuous";
}

[[nodiscard]] inline VariableKind parse_variable_kind(std::string_view text) {
    if (text == "binary") return VariableKind::binary;
    if (text == "ordinal") return VariableKind::ordinal;
    if (text == "continuous") return VariableKind::continuous;
    throw Error(ErrorKind::InvalidSchema, "unknown variable kind '" + std::string(text) + "'");
}

struct VariableSchema {
    std::string id_column = "id";
    std::string time_column = "time";
    // Empty means the panel has no designated binary treatment; analyses then
    // name their own (possibly ordinal) treatment column.
    std::string treatment_column;
    std::vector<std::string> confounder_columns;
    std::optional<std::string> mediator_column;
    std::string outcome_column;
    // Kinds for columns not listed here default to continuous, except the
    // treatment and time columns which are always binary.
    std::map<std::string, VariableKind> variable_kinds;

    [[nodiscard]] VariableKind kind_of(const std::string& name) const {
        if (name == time_column || (!treatment_column.empty() && name == treatment_column)) {
            return VariableKind::binary;
        }
        const auto it = variable_kinds.find(name);
        return it == variable_kinds.end() ? VariableKind::continuous : it->second;
    }

    /// Treatment, confounders, mediator (if any) and outcome, in that order.
    [[nodiscard]] std::vector<std::string> role_columns() const {
        std::vector<std::string> out;
        if (!treatment_column.empty()) out.push_back(treatment_column);
        out.insert(out.end(), confounder_columns.begin(), confounder_columns.end());
        if (mediator_column) out.push_back(*mediator_column);
        out.push_back(outcome_column);
        return out;
    }

    void validate() const {
        std::vector<std::string> names{id_column, time_column};
        const auto roles = role_columns();
        names.insert(names.end(), roles.begin(), roles.end());
        for (const auto& name : names) {
            if (name.empty()) throw Error(ErrorKind::InvalidSchema, "empty column name");
        }
        std::set<std::string> unique(names.begin(), names.end());
        if (unique.size() != names.size()) {
            throw Error(ErrorKind::InvalidSchema, "schema columns must be distinct");
        }
        for (const auto* name : {&treatment_column, &time_column}) {
            const auto it = variable_kinds.find(*name);
            if (it != variable_kinds.end() && it->second != VariableKind::binary) {
                throw Error(ErrorKind::InvalidSchema, "column '" + *name + "' must be binary");
            }
        }
    }
};

/// Baseline/follow-up values per individual. Immutable after construction.
class TwoPointPanel {
public:
    using TimePair = std::array<std::vector<double>, 2>;

    TwoPointPanel(VariableSchema schema, std::vector<std::string> ids, std::vector<std::string> variables,
                  std::vector<TimePair> values)
        : schema_(std::move(schema)), ids_(std::move(ids)), variables_(std::move(variables)), values_(std::move(values)) {
        validate();
    }

    [[nodiscard]] const VariableSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t n_individuals() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::vector<std::string>& variables() const noexcept { return variables_; }

    [[nodiscard]] bool has_variable(std::string_view name) const noexcept { return index_.contains(std::string(name)); }

    [[nodiscard]] std::size_t variable_index(std::string_view name) const {
        const auto it = index_.find(std::string(name));
        if (it == index_.end()) throw Error(ErrorKind::MissingColumn, "no column '" + std::string(name) + "'");
        return it->second;
    }

    [[nodiscard]] std::span<const double> values(std::string_view name, int time) const {
        return values_[variable_index(name)][static_cast<std::size_t>(time)];
    }

    [[nodiscard]] const TimePair& pair(std::size_t variable) const { return values_[variable]; }

    /// Copy of this panel with one more (or a replaced) variable.
    [[nodiscard]] TwoPointPanel with_variable(const std::string& name, VariableKind kind, TimePair column) const {
        VariableSchema schema = schema_;
        schema.variable_kinds[name] = kind;
        auto variables = variables_;
        auto values = values_;
        if (const auto it = index_.find(name); it != index_.end()) {
            values[it->second] = std::move(column);
        } else {
            variables.push_back(name);
            values.push_back(std::move(column));
        }
        return TwoPointPanel(std::move(schema), ids_, std::move(variables), std::move(values));
    }

    friend bool operator==(const TwoPointPanel& a, const TwoPointPanel& b) {
        if (a.ids_ != b.ids_ || a.variables_ != b.variables_) return false;
        for (std::size_t v = 0; v < a.values_.size(); ++v) {
            for (int t = 0; t < 2; ++t) {
                const auto& x = a.values_[v][t];
                const auto& y = b.values_[v][t];
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (is_missing(x[i]) != is_missing(y[i])) return false;
                    if (!is_missing(x[i]) && std::bit_cast<std::uint64_t>(x[i]) != std::bit_cast<std::uint64_t>(y[i])) {
                        return false;
                    }
                }
            }
        }
        return true;
    }

private:
    void validate() {
        schema_.validate();
        if (values_.size() != variables_.size()) {
            throw Error(ErrorKind::LengthMismatch, "one value pair is required per variable");
        }
        for (std::size_t v = 0; v < variables_.size(); ++v) {
            if (variables_[v] == schema_.id_column || variables_[v] == schema_.time_column) {
                throw Error(ErrorKind::InvalidSchema, "id/time columns cannot be variables");
            }
            if (!index_.emplace(variables_[v], v).second) {
                throw Error(ErrorKind::InvalidSchema, "duplicate column '" + variables_[v] + "'");
            }
            for (const auto& column : values_[v]) {
                if (column.size() != ids_.size()) {
                    throw Error(ErrorKind::LengthMismatch, "column '" + variables_[v] + "' has wrong length");
                }
            }
        }
        std::set<std::string> seen;
        for (const auto& id : ids_) {
            if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateTimePoint, "id '" + id + "' repeated");
        }
        for (const auto& role : schema_.role_columns()) {
            if (!index_.contains(role)) throw Error(ErrorKind::MissingColumn, "no column '" + role + "'");
        }
        for (std::size_t v = 0; v < variables_.size(); ++v) {
            if (schema_.kind_of(variables_[v]) != VariableKind::binary) continue;
            for (const auto& column : values_[v]) {
                for (double x : column) {
                    if (!is_missing(x) && x != 0.0 && x != 1.0) {
                        if (variables_[v] == schema_.treatment_column) {
                            throw Error(ErrorKind::NonBinaryTreatment,
                                        "treatment '" + variables_[v] + "' takes a value outside {0,1}");
                        }
                        throw Error(ErrorKind::InvalidSchema, "binary column '" + variables_[v] + "' is not 0/1");
                    }
                }
            }
        }
    }

    VariableSchema schema_;
    std::vector<std::string> ids_;
    std::vector<std::string> variables_;
    std::vector<TimePair> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class Provenance { pooled, subsample, did_reorganized };

[[nodiscard]] inline std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::pooled: return "pooled";
        case Provenance::subsample: return "subsample";
        case Provenance::did_reorganized: return "did_reorganized";
    }
    return "pooled";
}

/// One observation per unit. For pooled and subsample views `unit_times`
/// holds the visit; for the reorganized view it marks the image
/// (1 = treatment image, 0 = control image).
struct CrossSection {
    Provenance provenance = Provenance::pooled;
    std::size_t subsample_index = 0;
    std::vector<std::string> unit_ids;
    std::vector<int> unit_times;
    std::vector<std::string> variables;
    std::vector<std::vector<double>> columns;
    std::map<std::string, VariableKind> kinds;

    [[nodiscard]] std::size_t size() const noexcept { return unit_ids.size(); }

    [[nodiscard]] std::span<const double> column(std::string_view name) const {
        for (std::size_t v = 0; v < variables.size(); ++v) {
            if (variables[v] == name) return columns[v];
        }
        throw Error(ErrorKind::MissingColumn, "no column '" + std::string(name) + "'");
    }

    [[nodiscard]] VariableKind kind_of(const std::string& name) const {
        const auto it = kinds.find(name);
        return it == kinds.end() ? VariableKind::continuous : it->second;
    }
};

/// Every individual contributes both visits as separate units.
[[nodiscard]] inline CrossSection pool(const TwoPointPanel& panel) {
    CrossSection out;
    out.provenance = Provenance::pooled;
    out.variables = panel.variables();
    out.columns.assign(out.variables.size(), {});
    for (const auto& name : out.variables) out.kinds[name] = panel.schema().kind_of(name);
    const std::size_t n = panel.n_individuals();
    out.unit_ids.reserve(2 * n);
    out.unit_times.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int t = 0; t < 2; ++t) {
            out.unit_ids.push_back(panel.ids()[i]);
            out.unit_times.push_back(t);
        }
    }
    for (std::size_t v = 0; v < out.variables.size(); ++v) {
        auto& column = out.columns[v];
        column.reserve(2 * n);
        const auto& pair = panel.pair(v);
        for (std::size_t i = 0; i < n; ++i) {
            column.push_back(pair[0][i]);
            column.push_back(pair[1][i]);
        }
    }
    return out;
}

/// Per-individual differences (follow-up minus baseline) with baseline values kept.
struct DifferencedData {
    std::vector<std::string> ids;
    std::vector<std::string> variables;
    std::vector<std::vector<double>> differences;
    std::vector<std::vector<double>> baseline;
    std::size_t dropped = 0;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }

    [[nodiscard]] std::span<const double> diff(std::string_view name) const { return differences[index(name)]; }
    [[nodiscard]] std::span<const double> base(std::string_view name) const { return baseline[index(name)]; }

private:
    [[nodiscard]] std::size_t index(std::string_view name) const {
        for (std::size_t v = 0; v < variables.size(); ++v) {
            if (variables[v] == name) return v;
        }
        throw Error(ErrorKind::MissingColumn, "no differenced column '" + std::string(name) + "'");
    }
};

/// Differences the listed variables. Individuals missing any of them at
/// either visit are dropped and counted.
[[nodiscard]] inline DifferencedData difference(const TwoPointPanel& panel, const std::vector<std::string>& variables) {
    DifferencedData out;
    out.variables = variables;
    std::vector<std::size_t> idx;
    for (const auto& name : variables) idx.push_back(panel.variable_index(name));
    out.differences.assign(variables.size(), {});
    out.baseline.assign(variables.size(), {});
    for (std::size_t i = 0; i < panel.n_individuals(); ++i) {
        bool complete = true;
        for (auto v : idx) {
            const auto& pair = panel.pair(v);
            if (is_missing(pair[0][i]) || is_missing(pair[1][i])) {
                complete = false;
                break;
            }
        }
        if (!complete) {
            ++out.dropped;
            continue;
        }
        out.ids.push_back(panel.ids()[i]);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& pair = panel.pair(idx[k]);
            out.differences[k].push_back(pair[1][i] - pair[0][i]);
            out.baseline[k].push_back(pair[0][i]);
        }
    }
    return out;
}

[[nodiscard]] inline DifferencedData difference(const TwoPointPanel& panel) {
    return difference(panel, panel.schema().role_columns());
}

/// Builds the treatment-image / control-image cross-section: for each
/// individual a row (T = dT, Y = dY, X = X at baseline) followed by a row
/// (T = 0, Y = 0, X = X at baseline). Other variables carry baseline values.
[[nodiscard]] inline CrossSection reorganize_did(const TwoPointPanel& panel, const std::string& treatment,
                                                 const std::string& outcome) {
    if (treatment == outcome) throw Error(ErrorKind::InvalidConfig, "treatment and outcome must differ");
    CrossSection out;
    out.provenance = Provenance::did_reorganized;
    out.variables = panel.variables();
    out.columns.assign(out.variables.size(), {});
    for (const auto& name : out.variables) out.kinds[name] = panel.schema().kind_of(name);
    out.kinds[treatment] = VariableKind::binary;
    out.kinds[outcome] = VariableKind::continuous;
    const std::size_t n = panel.n_individuals();
    const std::size_t t_idx = panel.variable_index(treatment);
    const std::size_t y_idx = panel.variable_index(outcome);
    for (std::size_t i = 0; i < n; ++i) {
        out.unit_ids.push_back(panel.ids()[i]);
        out.unit_times.push_back(1);
        out.unit_ids.push_back(panel.ids()[i]);
        out.unit_times.push_back(0);
    }
    for (std::size_t v = 0; v < out.variables.size(); ++v) {
        auto& column = out.columns[v];
        column.reserve(2 * n);
        const auto& pair = panel.pair(v);
        for (std::size_t i = 0; i < n; ++i) {
            if (v == t_idx || v == y_idx) {
                column.push_back(pair[1][i] - pair[0][i]);
                column.push_back(0.0);
            } else {
                column.push_back(pair[0][i]);
                column.push_back(pair[0][i]);
            }
        }
    }
    return out;
}

[[nodiscard]] inline CrossSection reorganize_did(const TwoPointPanel& panel) {
    return reorganize_did(panel, panel.schema().treatment_column, panel.schema().outcome_column);
}

enum class SubsampleStrategy { independent_uniform, min_overlap };

[[nodiscard]] inline std::string_view to_string(SubsampleStrategy s) noexcept {
    return s == SubsampleStrategy::independent_uniform ? "independent_uniform" : "min_overlap";
}

[[nodiscard]] inline SubsampleStrategy parse_strategy(std::string_view text) {
    if (text == "independent_uniform") return SubsampleStrategy::independent_uniform;
    if (text == "min_overlap") return SubsampleStrategy::min_overlap;
    throw Error(ErrorKind::InvalidConfig, "unknown subsampling strategy '" + std::string(text) + "'");
}

using Assignment = std::vector<std::uint8_t>;

/// M time-point assignments over n individuals.
struct SubsamplePlan {
    std::size_t n = 0;
    std::vector<Assignment> assignments;
    SubsampleStrategy strategy = SubsampleStrategy::min_overlap;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t size() const noexcept { return assignments.size(); }

    friend bool operator==(const SubsamplePlan&, const SubsamplePlan&) = default;
};

/// Draws M assignment vectors.
///
/// independent_uniform: every entry is an independent fair coin.
/// min_overlap: each individual's column over the M subsamples holds
/// floor(M/2) zeros and floor(M/2) ones (plus one fair coin when M is odd),
/// in an independently shuffled order. Marginally every entry is still a fair
/// coin, but subsamples share fewer observations than independent draws.
[[nodiscard]] inline SubsamplePlan draw_subsamples(std::size_t n, std::size_t m, SubsampleStrategy strategy,
                                                   std::uint64_t seed) {
    if (m < 1) throw Error(ErrorKind::InvalidConfig, "subsample count must be at least 1");
    if (n < 1) throw Error(ErrorKind::EmptyData, "panel has no individuals");
    SubsamplePlan plan{n, std::vector<Assignment>(m, Assignment(n, 0)), strategy, seed};
    if (strategy == SubsampleStrategy::independent_uniform) {
        for (std::size_t s = 0; s < m; ++s) {
            CounterRng rng(seed, StreamTag::plan_uniform, static_cast<std::uint32_t>(s));
            for (std::size_t i = 0; i < n; ++i) plan.assignments[s][i] = rng.coin() ? 1 : 0;
        }
        return plan;
    }
    Assignment column(m);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, StreamTag::plan_balanced, static_cast<std::uint32_t>(i));
        const std::size_t half = m / 2;
        std::fill(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(half), std::uint8_t{0});
        std::fill(column.begin() + static_cast<std::ptrdiff_t>(half), column.end(), std::uint8_t{1});
        if (m % 2 == 1) column[m - 1] = rng.coin() ? 1 : 0;
        shuffle(std::span<std::uint8_t>(column), rng);
        for (std::size_t s = 0; s < m; ++s) plan.assignments[s][i] = column[s];
    }
    return plan;
}

[[nodiscard]] inline SubsamplePlan draw_subsamples(const TwoPointPanel& panel, std::size_t m,
                                                   SubsampleStrategy strategy, std::uint64_t seed) {
    return draw_subsamples(panel.n_individuals(), m, strategy, seed);
}

/// One row per individual, taken at the assigned visit.
[[nodiscard]] inline CrossSection select_subsample(const TwoPointPanel& panel, std::span<const std::uint8_t> assignment,
                                                   std::size_t index = 0) {
    const std::size_t n = panel.n_individuals();
    if (assignment.size() != n) {
        throw Error(ErrorKind::LengthMismatch, "assignment length " + std::to_string(assignment.size()) +
                                                   " does not match " + std::to_string(n) + " individuals");
    }
    CrossSection out;
    out.provenance = Provenance::subsample;
    out.subsample_index = index;
    out.unit_ids = panel.ids();
    out.unit_times.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] > 1) throw Error(ErrorKind::InvalidConfig, "assignment entries must be 0 or 1");
        out.unit_times[i] = assignment[i];
    }
    out.variables = panel.variables();
    out.columns.assign(out.variables.size(), std::vector<double>(n));
    for (const auto& name : out.variables) out.kinds[name] = panel.schema().kind_of(name);
    for (std::size_t v = 0; v < out.variables.size(); ++v) {
        const auto& pair = panel.pair(v);
        for (std::size_t i = 0; i < n; ++i) out.columns[v][i] = pair[assignment[i]][i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Delimited text I/O. Long format, comma separated, one row per (id, time),
// empty cell = missing.

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

}  // namespace detail

/// Shortest decimal text that parses back to the same double.
[[nodiscard]] inline std::string format_number(double value) {
    if (is_missing(value)) return {};
    char buffer[32];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

[[nodiscard]] inline TwoPointPanel parse_panel(std::istream& in, const VariableSchema& schema) {
    schema.validate();
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::EmptyData, "input is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header;
    for (auto field : detail::split_csv_line(line)) header.emplace_back(detail::trim(field));

    auto find_column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorKind::MissingColumn, "header lacks column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = find_column(schema.id_column);
    const std::size_t time_col = find_column(schema.time_column);
    for (const auto& role : schema.role_columns()) (void)find_column(role);

    std::vector<std::string> variables;
    std::vector<std::size_t> variable_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == id_col || c == time_col) continue;
        variables.push_back(header[c]);
        variable_cols.push_back(c);
    }

    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> position;
    std::vector<std::array<bool, 2>> present;
    std::vector<TwoPointPanel::TimePair> values(variables.size());

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorKind::LengthMismatch, "line " + std::to_string(line_no) + " has " +
                                                       std::to_string(fields.size()) + " fields, expected " +
                                                       std::to_string(header.size()));
        }
        const std::string id(detail::trim(fields[id_col]));
        const auto time_value = detail::parse_number(detail::trim(fields[time_col]));
        if (!time_value || (*time_value != 0.0 && *time_value != 1.0)) {
            throw Error(ErrorKind::InvalidTime, "line " + std::to_string(line_no) + ": time must be 0 or 1");
        }
        const int t = static_cast<int>(*time_value);
        auto [it, inserted] = position.emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            present.push_back({false, false});
            for (auto& pair : values) {
                pair[0].push_back(kMissing);
                pair[1].push_back(kMissing);
            }
        }
        const std::size_t i = it->second;
        if (present[i][t]) {
            throw Error(ErrorKind::DuplicateTimePoint, "id '" + id + "' appears twice at time " + std::to_string(t));
        }
        present[i][t] = true;
        for (std::size_t v = 0; v < variables.size(); ++v) {
            const auto cell = detail::trim(fields[variable_cols[v]]);
            if (cell.empty()) continue;
            const auto number = detail::parse_number(cell);
            if (!number) {
                throw Error(ErrorKind::NonNumericVariable, "line " + std::to_string(line_no) + ", column '" +
                                                               variables[v] + "': '" + std::string(cell) + "'");
            }
            values[v][t][i] = *number;
        }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!present[i][0] || !present[i][1]) {
            throw Error(ErrorKind::OrphanIndividual, "id '" + ids[i] + "' lacks a row at time " +
                                                         std::string(present[i][0] ? "1" : "0"));
        }
    }
    if (ids.empty()) throw Error(ErrorKind::EmptyData, "no data rows");
    return TwoPointPanel(schema, std::move(ids), std::move(variables), std::move(values));
}

[[nodiscard]] inline TwoPointPanel load_panel(const std::string& path, const VariableSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    return parse_panel(in, schema);
}

inline void write_panel(std::ostream& out, const TwoPointPanel& panel) {
    const auto& schema = panel.schema();
    out << schema.id_column << ',' << schema.time_column;
    for (const auto& name : panel.variables()) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < panel.n_individuals(); ++i) {
        for (int t = 0; t < 2; ++t) {
            out << panel.ids()[i] << ',' << t;
            for (std::size_t v = 0; v < panel.variables().size(); ++v) {
                out << ',' << format_number(panel.pair(v)[t][i]);
            }
            out << '\n';
        }
    }
}

inline void save_panel(const TwoPointPanel& panel, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    write_panel(out, panel);
    if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace irand
