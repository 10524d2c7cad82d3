#pragma once

// Nearest-neighbour propensity score matching with replacement and the
// matching estimator of the average treatment effect.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "irand/error.hpp"
#include "irand/panel.hpp"
#include "irand/propensity.hpp"

namespace irand {

/// For every unit, the indices of its matched opposite-group units, ordered
/// by (distance, index).
struct MatchSet {
    std::vector<std::vector<std::size_t>> matched;
    std::size_t k = 1;
    bool with_replacement = true;
};

/// k nearest opposite-group units by |e_i - e_j|, with replacement. Equal
/// distances go to the lower unit index.
[[nodiscard]] inline MatchSet match_nearest(std::span<const double> scores, std::span<const int> treatment,
                                            std::size_t k) {
    const std::size_t n = scores.size();
    if (treatment.size() != n) throw Error(ErrorKind::LengthMismatch, "scores and treatment differ in length");
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
    std::array<std::vector<std::pair<double, std::size_t>>, 2> groups;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) throw Error(ErrorKind::DimensionMismatch, "non-finite propensity score");
        if (treatment[i] != 0 && treatment[i] != 1) throw Error(ErrorKind::NonBinaryTreatment, "labels must be 0/1");
        groups[static_cast<std::size_t>(treatment[i])].emplace_back(scores[i], i);
    }
    if (groups[0].empty() || groups[1].empty()) throw Error(ErrorKind::EmptyGroup, "both groups must be nonempty");
    for (auto& g : groups) std::sort(g.begin(), g.end());

    MatchSet result;
    result.k = k;
    result.matched.resize(n);
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pool = groups[static_cast<std::size_t>(1 - treatment[i])];
        const std::size_t want = std::min(k, pool.size());
        const double e = scores[i];
        auto pos = std::lower_bound(pool.begin(), pool.end(), std::make_pair(e, std::size_t{0}));
        std::ptrdiff_t left = (pos - pool.begin()) - 1;
        std::size_t right = static_cast<std::size_t>(pos - pool.begin());
        candidates.clear();
        auto left_distance = [&] { return std::abs(e - pool[static_cast<std::size_t>(left)].first); };
        auto right_distance = [&] { return std::abs(e - pool[right].first); };
        // Walk outwards in distance order. Once `want` units are held, keep
        // taking units tied with the farthest one so the index rule can pick.
        for (;;) {
            const bool has_left = left >= 0;
            const bool has_right = right < pool.size();
            if (!has_left && !has_right) break;
            bool take_left;
            if (has_left && has_right) {
                take_left = left_distance() <= right_distance();
            } else {
                take_left = has_left;
            }
            const double d = take_left ? left_distance() : right_distance();
            if (candidates.size() >= want && d > candidates.back().first) break;
            if (take_left) {
                candidates.emplace_back(d, pool[static_cast<std::size_t>(left)].second);
                --left;
            } else {
                candidates.emplace_back(d, pool[right].second);
                ++right;
            }
        }
        std::sort(candidates.begin(), candidates.end());
        auto& out = result.matched[i];
        out.reserve(want);
        for (std::size_t c = 0; c < want; ++c) out.push_back(candidates[c].second);
    }
    return result;
}

/// (1/n) sum_i s_i (Y_i - mean_{j in J_i} Y_j) with s_i = +1 for treated and
/// -1 for control units.
[[nodiscard]] inline double estimate_ate(std::span<const double> outcomes, std::span<const int> treatment,
                                         const MatchSet& matches) {
    const std::size_t n = outcomes.size();
    if (treatment.size() != n || matches.matched.size() != n) {
        throw Error(ErrorKind::LengthMismatch, "outcomes, treatment and matches differ in length");
    }
    if (n == 0) throw Error(ErrorKind::EmptyData, "no units");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& group = matches.matched[i];
        double sum = 0.0;
        for (auto j : group) sum += outcomes[j];
        const double imputed = sum / static_cast<double>(group.size());
        const double sign = treatment[i] == 1 ? 1.0 : -1.0;
        total += sign * (outcomes[i] - imputed);
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Cross-section pipeline

/// Binarizes an ordinal treatment: rows at `treated_level` become 1, rows at
/// `control_level` become 0, all other rows are excluded.
struct Contrast {
    double control_level = 0.0;
    double treated_level = 1.0;

    friend bool operator==(const Contrast&, const Contrast&) = default;
};

struct AnalysisSpec {
    std::string treatment;
    std::string outcome;
    std::vector<std::string> confounders;
    std::optional<Contrast> contrast;

    static AnalysisSpec from_schema(const VariableSchema& schema) {
        return {schema.treatment_column, schema.outcome_column, schema.confounder_columns, std::nullopt};
    }

    void validate() const {
        if (treatment.empty() || outcome.empty()) throw Error(ErrorKind::InvalidConfig, "treatment and outcome required");
        std::set<std::string> names{treatment, outcome};
        if (names.size() != 2) throw Error(ErrorKind::InvalidConfig, "treatment and outcome must differ");
        for (const auto& c : confounders) {
            if (!names.insert(c).second) throw Error(ErrorKind::InvalidConfig, "column '" + c + "' used twice");
        }
    }
};

/// Complete-case units of a cross-section, ready for matching.
struct MatchingUnits {
    std::vector<std::size_t> rows;  // row index in the source cross-section
    Eigen::MatrixXd design;         // confounder design, no intercept
    std::vector<std::string> design_names;
    std::vector<int> treatment;
    std::vector<double> outcome;
    std::size_t dropped = 0;
    // Confounder columns left out of the design because they are constant
    // over the retained rows.
    std::vector<std::string> constant_columns;

    [[nodiscard]] std::size_t size() const noexcept { return treatment.size(); }
};

/// Drops rows missing any analysis column (or any of `also_required`) and
/// rows outside the contrast, then builds the confounder design. Ordinal
/// confounders are one-hot encoded over their observed levels with the first
/// level dropped. Constant columns duplicate the intercept and are left out.
[[nodiscard]] inline MatchingUnits prepare_units(const CrossSection& cs, const AnalysisSpec& spec,
                                                 const std::vector<std::string>& also_required = {}) {
    spec.validate();
    const auto t_col = cs.column(spec.treatment);
    const auto y_col = cs.column(spec.outcome);
    std::vector<std::span<const double>> x_cols;
    for (const auto& c : spec.confounders) x_cols.push_back(cs.column(c));
    std::vector<std::span<const double>> extra_cols;
    for (const auto& c : also_required) extra_cols.push_back(cs.column(c));

    MatchingUnits units;
    for (std::size_t r = 0; r < cs.size(); ++r) {
        bool complete = !is_missing(t_col[r]) && !is_missing(y_col[r]);
        for (const auto& col : x_cols) complete = complete && !is_missing(col[r]);
        for (const auto& col : extra_cols) complete = complete && !is_missing(col[r]);
        if (!complete) {
            ++units.dropped;
            continue;
        }
        int label;
        if (spec.contrast) {
            if (t_col[r] == spec.contrast->treated_level) {
                label = 1;
            } else if (t_col[r] == spec.contrast->control_level) {
                label = 0;
            } else {
                continue;
            }
        } else {
            if (t_col[r] != 0.0 && t_col[r] != 1.0) {
                throw Error(ErrorKind::NonBinaryTreatment,
                            "treatment '" + spec.treatment + "' takes value " + format_number(t_col[r]));
            }
            label = static_cast<int>(t_col[r]);
        }
        units.rows.push_back(r);
        units.treatment.push_back(label);
        units.outcome.push_back(y_col[r]);
    }

    const std::size_t n = units.rows.size();
    std::vector<std::vector<double>> design_cols;
    for (std::size_t c = 0; c < spec.confounders.size(); ++c) {
        const auto& name = spec.confounders[c];
        if (cs.kind_of(name) == VariableKind::ordinal) {
            std::set<double> levels;
            for (auto r : units.rows) levels.insert(x_cols[c][r]);
            bool first = true;
            for (double level : levels) {
                if (first) {
                    first = false;
                    continue;
                }
                std::vector<double> dummy(n);
                for (std::size_t u = 0; u < n; ++u) dummy[u] = x_cols[c][units.rows[u]] == level ? 1.0 : 0.0;
                design_cols.push_back(std::move(dummy));
                units.design_names.push_back(name + "=" + format_number(level));
            }
        } else {
            std::vector<double> values(n);
            for (std::size_t u = 0; u < n; ++u) values[u] = x_cols[c][units.rows[u]];
            if (std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end()) {
                units.constant_columns.push_back(name);
                continue;
            }
            design_cols.push_back(std::move(values));
            units.design_names.push_back(name);
        }
    }
    units.design.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(design_cols.size()));
    for (std::size_t c = 0; c < design_cols.size(); ++c) {
        for (std::size_t u = 0; u < n; ++u) {
            units.design(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c)) = design_cols[c][u];
        }
    }
    return units;
}

struct MatchingOptions {
    std::size_t k = 1;
    // Neighbour count for the single re-match attempted when balance fails.
    std::size_t retry_k = 3;
    bool retry_on_imbalance = true;
    double balance_threshold = kBalanceThreshold;
    LogisticOptions logistic;
};

struct AteDiagnostics {
    bool propensity_converged = false;
    int propensity_iterations = 0;
    std::size_t dropped_rows = 0;
    bool balance_retry_applied = false;
};

struct AteEstimate {
    double ate = 0.0;
    std::size_t n_units = 0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
    std::size_t k_used = 1;
    BalanceReport balance;
    AteDiagnostics diagnostics;
    std::vector<double> coefficients;
};

/// Fit propensity -> score -> k-NN match -> ATE -> balance check, with one
/// re-match at `retry_k` neighbours if the balance check fails.
[[nodiscard]] inline AteEstimate matching_ate(const Eigen::MatrixXd& design, const std::vector<std::string>& names,
                                              std::span<const int> treatment, std::span<const double> outcome,
                                              const MatchingOptions& options = {}) {
    AteEstimate est;
    est.n_units = treatment.size();
    for (int t : treatment) (t == 1 ? est.n_treated : est.n_control) += 1;
    if (est.n_treated == 0 || est.n_control == 0) {
        throw Error(ErrorKind::EmptyGroup, "need at least one treated and one control unit (have " +
                                               std::to_string(est.n_treated) + " treated, " +
                                               std::to_string(est.n_control) + " control)");
    }
    const auto model = fit_logistic(design, treatment, options.logistic);
    est.diagnostics.propensity_converged = model.converged;
    est.diagnostics.propensity_iterations = model.iterations;
    est.coefficients.assign(model.coefficients.data(), model.coefficients.data() + model.coefficients.size());
    const auto scores = predict_propensity(model, design);

    auto run = [&](std::size_t k) {
        const auto matches = match_nearest(scores, treatment, k);
        est.ate = estimate_ate(outcome, treatment, matches);
        est.k_used = k;
        est.balance = check_balance(design, names, treatment, matches.matched, options.balance_threshold);
    };
    run(options.k);
    if (!est.balance.pass && options.retry_on_imbalance && options.retry_k != options.k) {
        est.diagnostics.balance_retry_applied = true;
        run(options.retry_k);
    }
    return est;
}

[[nodiscard]] inline AteEstimate matching_ate(const MatchingUnits& units, const MatchingOptions& options = {}) {
    auto est = matching_ate(units.design, units.design_names, units.treatment, units.outcome, options);
    est.diagnostics.dropped_rows = units.dropped;
    return est;
}

[[nodiscard]] inline AteEstimate matching_ate(const CrossSection& cs, const AnalysisSpec& spec,
                                              const MatchingOptions& options = {}) {
    return matching_ate(prepare_units(cs, spec), options);
}

}  // namespace irand
