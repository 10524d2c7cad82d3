#pragma once

// The I-Rand estimator, permutation tests, and the pooled and
// difference-in-differences baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irand/error.hpp"
#include "irand/matching.hpp"
#include "irand/panel.hpp"
#include "irand/parallel.hpp"
#include "irand/rng.hpp"

namespace irand {

enum class Tail { lower, upper, two_sided };

[[nodiscard]] inline std::string_view to_string(Tail tail) noexcept {
    switch (tail) {
        case Tail::lower: return "lower";
        case Tail::upper: return "upper";
        case Tail::two_sided: return "two_sided";
    }
    return "lower";
}

[[nodiscard]] inline Tail parse_tail(std::string_view text) {
    if (text == "lower") return Tail::lower;
    if (text == "upper") return Tail::upper;
    if (text == "two_sided") return Tail::two_sided;
    throw Error(ErrorKind::InvalidConfig, "unknown tail '" + std::string(text) + "'");
}

/// Whether a permuted statistic counts against the observed one.
[[nodiscard]] inline bool beats(double permuted, double observed, Tail tail) noexcept {
    switch (tail) {
        case Tail::lower: return permuted < observed;
        case Tail::upper: return permuted > observed;
        case Tail::two_sided: return std::abs(permuted) > std::abs(observed);
    }
    return false;
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct PermutationResult {
    double p_value = kNaN;         // count / S
    double p_conservative = kNaN;  // (count + 1) / (S + 1)
    std::size_t exceed_count = 0;
    std::size_t permutations = 0;
    std::vector<double> null_distribution;
};

struct PermutationOptions {
    std::size_t permutations = 500;
    Tail tail = Tail::lower;
    std::uint64_t seed = 0;
    // Second stream coordinate; I-Rand passes the subsample index.
    std::uint32_t stream = 0;
    unsigned threads = 1;
};

namespace detail {

inline PermutationResult summarize_null(std::vector<double> null, double observed, Tail tail) {
    PermutationResult result;
    result.permutations = null.size();
    for (double v : null) result.exceed_count += beats(v, observed, tail) ? 1 : 0;
    if (!null.empty()) {
        const double s = static_cast<double>(null.size());
        result.p_value = static_cast<double>(result.exceed_count) / s;
        result.p_conservative = static_cast<double>(result.exceed_count + 1) / (s + 1.0);
    }
    result.null_distribution = std::move(null);
    return result;
}

}  // namespace detail

/// Treatment labels of permutation replicate s: a uniform shuffle drawn from
/// stream (seed, permutation, stream, s).
[[nodiscard]] inline std::vector<int> permuted_labels(std::span<const int> labels, std::uint64_t seed,
                                                      std::uint32_t stream, std::size_t s) {
    std::vector<int> out(labels.begin(), labels.end());
    CounterRng rng(seed, StreamTag::permutation, stream, static_cast<std::uint32_t>(s));
    shuffle(std::span<int>(out), rng);
    return out;
}

/// Monte-Carlo permutation test: shuffle the treatment column S times with
/// confounders and outcomes fixed, re-run the matching estimator on each
/// shuffle, and count shuffles whose ATE beats the observed one.
[[nodiscard]] inline PermutationResult permutation_test(const MatchingUnits& units, double observed_ate,
                                                        const PermutationOptions& options,
                                                        const MatchingOptions& matching = {}) {
    std::vector<double> null(options.permutations);
    const std::size_t treated = static_cast<std::size_t>(std::count(units.treatment.begin(), units.treatment.end(), 1));
    parallel_for(options.permutations, options.threads, [&](std::size_t s) {
        const auto labels = permuted_labels(units.treatment, options.seed, options.stream, s);
        if (static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)) != treated) {
            throw Error(ErrorKind::EmptyGroup, "shuffle changed group sizes");
        }
        null[s] = matching_ate(units.design, units.design_names, labels, units.outcome, matching).ate;
    });
    return detail::summarize_null(std::move(null), observed_ate, options.tail);
}

[[nodiscard]] inline PermutationResult permutation_test(const CrossSection& cs, const AnalysisSpec& spec,
                                                        double observed_ate, const PermutationOptions& options,
                                                        const MatchingOptions& matching = {}) {
    return permutation_test(prepare_units(cs, spec), observed_ate, options, matching);
}

/// Exact permutation test over every distinct rearrangement of the
/// treatment labels (n choose n_treated of them). Feasible for small n only.
[[nodiscard]] inline PermutationResult permutation_test_exact(const MatchingUnits& units, double observed_ate, Tail tail,
                                                              const MatchingOptions& matching = {}) {
    const std::size_t n = units.size();
    if (n > 24) throw Error(ErrorKind::InvalidConfig, "exact enumeration is limited to 24 units");
    std::vector<int> labels(units.treatment);
    std::sort(labels.begin(), labels.end());
    std::vector<double> null;
    do {
        null.push_back(matching_ate(units.design, units.design_names, labels, units.outcome, matching).ate);
    } while (std::next_permutation(labels.begin(), labels.end()));
    return detail::summarize_null(std::move(null), observed_ate, tail);
}

// ---------------------------------------------------------------------------
// I-Rand

struct IrandConfig {
    std::size_t subsamples = 500;    // M
    std::size_t permutations = 500;  // S; 0 skips the permutation test
    Tail tail = Tail::lower;
    SubsampleStrategy strategy = SubsampleStrategy::min_overlap;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    MatchingOptions matching;
    // Keep each subsample's permutation null distribution in the report.
    bool keep_null = false;

    void validate() const {
        if (subsamples < 1) throw Error(ErrorKind::InvalidConfig, "M must be at least 1");
    }
};

struct SubsampleResult {
    std::size_t index = 0;
    bool completed = false;
    std::string error;
    AteEstimate estimate;
    PermutationResult permutation;
};

struct IrandReport {
    IrandConfig config;
    std::string treatment;
    std::string outcome;
    std::vector<std::string> confounders;
    double mean_ate = kNaN;
    double mean_p_value = kNaN;
    double mean_p_conservative = kNaN;
    std::size_t completed = 0;
    std::size_t skipped = 0;
    std::vector<SubsampleResult> per_subsample;
};

namespace detail {

inline bool is_skippable(const Error& e) {
    return e.kind() == ErrorKind::EmptyGroup || e.kind() == ErrorKind::SingleClass;
}

inline double mean_over_completed(const std::vector<SubsampleResult>& results, double (*field)(const SubsampleResult&)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : results) {
        if (!r.completed) continue;
        sum += field(r);
        ++count;
    }
    return count == 0 ? kNaN : sum / static_cast<double>(count);
}

}  // namespace detail

/// Estimate and (optionally) permutation test for one subsample.
[[nodiscard]] inline SubsampleResult evaluate_subsample(const TwoPointPanel& panel, const AnalysisSpec& spec,
                                                        const IrandConfig& config, const Assignment& assignment,
                                                        std::size_t index) {
    SubsampleResult result;
    result.index = index;
    try {
        const auto cs = select_subsample(panel, assignment, index);
        const auto units = prepare_units(cs, spec);
        result.estimate = matching_ate(units, config.matching);
        if (config.permutations > 0) {
            PermutationOptions popt{config.permutations, config.tail, config.seed, static_cast<std::uint32_t>(index), 1};
            result.permutation = permutation_test(units, result.estimate.ate, popt, config.matching);
            if (!config.keep_null) result.permutation.null_distribution.clear();
        }
        result.completed = true;
    } catch (const Error& e) {
        if (!detail::is_skippable(e)) throw;
        result.error = e.what();
    }
    return result;
}

/// Averages matching ATEs (and permutation p-values) over the subsamples of
/// `plan`. Subsamples where matching is impossible are skipped and counted.
[[nodiscard]] inline IrandReport irand_estimate(const TwoPointPanel& panel, const AnalysisSpec& spec,
                                                const IrandConfig& config, const SubsamplePlan& plan) {
    config.validate();
    spec.validate();
    if (plan.n != panel.n_individuals()) throw Error(ErrorKind::PlanMismatch, "plan was drawn for another panel size");
    IrandReport report;
    report.config = config;
    report.config.subsamples = plan.size();
    report.treatment = spec.treatment;
    report.outcome = spec.outcome;
    report.confounders = spec.confounders;
    report.per_subsample.resize(plan.size());
    parallel_for(plan.size(), config.threads, [&](std::size_t m) {
        report.per_subsample[m] = evaluate_subsample(panel, spec, config, plan.assignments[m], m);
    });
    for (const auto& r : report.per_subsample) (r.completed ? report.completed : report.skipped) += 1;
    report.mean_ate = detail::mean_over_completed(report.per_subsample,
                                                  [](const SubsampleResult& r) { return r.estimate.ate; });
    if (config.permutations > 0) {
        report.mean_p_value = detail::mean_over_completed(report.per_subsample,
                                                          [](const SubsampleResult& r) { return r.permutation.p_value; });
        report.mean_p_conservative = detail::mean_over_completed(
            report.per_subsample, [](const SubsampleResult& r) { return r.permutation.p_conservative; });
    }
    return report;
}

[[nodiscard]] inline IrandReport irand_estimate(const TwoPointPanel& panel, const AnalysisSpec& spec,
                                                const IrandConfig& config) {
    config.validate();
    const auto plan = draw_subsamples(panel, config.subsamples, config.strategy, config.seed);
    return irand_estimate(panel, spec, config, plan);
}

// ---------------------------------------------------------------------------
// Baselines

struct PooledResult {
    AteEstimate estimate;
    PermutationResult permutation;
};

/// Matching estimate on the pooled cross-section (both visits as separate
/// units), with a permutation test when `permutations` > 0.
[[nodiscard]] inline PooledResult pooled_estimate(const TwoPointPanel& panel, const AnalysisSpec& spec,
                                                  std::size_t permutations, Tail tail, std::uint64_t seed,
                                                  const MatchingOptions& matching = {}, unsigned threads = 1) {
    const auto units = prepare_units(pool(panel), spec);
    PooledResult result;
    result.estimate = matching_ate(units, matching);
    if (permutations > 0) {
        result.permutation = permutation_test(units, result.estimate.ate, {permutations, tail, seed, 0, threads}, matching);
    }
    return result;
}

inline constexpr double kCollinearityCondition = 1e8;

struct DidRegressionResult {
    double delta_hat = kNaN;
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> singular_values;
    double condition_number = kNaN;
    bool collinear = false;
    std::size_t rank = 0;
    std::size_t n_used = 0;
    std::size_t dropped = 0;
};

/// Least squares of dY on (dT, dX) without intercept. Rank-deficient designs
/// get the minimum-norm solution; the collinearity flag is raised when the
/// condition number exceeds 1e8.
[[nodiscard]] inline DidRegressionResult did_regression_estimate(const TwoPointPanel& panel, const AnalysisSpec& spec) {
    spec.validate();
    std::vector<std::string> variables{spec.treatment};
    variables.insert(variables.end(), spec.confounders.begin(), spec.confounders.end());
    variables.push_back(spec.outcome);
    const auto diff = difference(panel, variables);
    DidRegressionResult result;
    result.dropped = diff.dropped;
    result.n_used = diff.size();
    if (diff.size() == 0) throw Error(ErrorKind::EmptyData, "no individual has complete differenced data");

    const auto n = static_cast<Eigen::Index>(diff.size());
    const auto p = static_cast<Eigen::Index>(variables.size() - 1);
    Eigen::MatrixXd design(n, p);
    for (Eigen::Index c = 0; c < p; ++c) {
        const auto column = diff.diff(variables[static_cast<std::size_t>(c)]);
        for (Eigen::Index i = 0; i < n; ++i) design(i, c) = column[static_cast<std::size_t>(i)];
        result.names.push_back("D" + variables[static_cast<std::size_t>(c)]);
    }
    const auto dy = diff.diff(spec.outcome);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(dy.data(), n);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    result.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double s_max = sv.size() > 0 ? sv[0] : 0.0;
    const double s_min = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
    const double cutoff = s_max * static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon();
    result.condition_number = s_min > 0.0 ? s_max / s_min : std::numeric_limits<double>::infinity();
    // Fewer rows than columns also leaves the coefficients unidentified.
    result.collinear = result.condition_number > kCollinearityCondition || n < p;

    Eigen::VectorXd projected = svd.matrixU().transpose() * y;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv[k] > cutoff && s_max > 0.0) {
            projected[k] /= sv[k];
            ++result.rank;
        } else {
            projected[k] = 0.0;
        }
    }
    const Eigen::VectorXd beta = svd.matrixV() * projected;
    result.coefficients.assign(beta.data(), beta.data() + beta.size());
    result.delta_hat = beta[0];
    return result;
}

struct DidReorganizedResult {
    AteEstimate estimate;
    PermutationResult permutation;
    std::size_t dropped_individuals = 0;
};

/// Matching on the treatment-image / control-image reorganization. The
/// permutation null flips, for each individual independently with
/// probability 1/2, which of its two images carries the treatment label.
[[nodiscard]] inline DidReorganizedResult did_reorganized_estimate(const TwoPointPanel& panel, const AnalysisSpec& spec,
                                                                   std::size_t permutations, Tail tail,
                                                                   std::uint64_t seed,
                                                                   const MatchingOptions& matching = {},
                                                                   unsigned threads = 1) {
    spec.validate();
    // Keep individuals whose treatment and outcome are known at both visits
    // and whose confounders are known at baseline, so images stay paired.
    const auto t_pair = panel.pair(panel.variable_index(spec.treatment));
    const auto y_pair = panel.pair(panel.variable_index(spec.outcome));
    std::vector<std::size_t> x_idx;
    for (const auto& c : spec.confounders) x_idx.push_back(panel.variable_index(c));
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < panel.n_individuals(); ++i) {
        bool ok = !is_missing(t_pair[0][i]) && !is_missing(t_pair[1][i]) && !is_missing(y_pair[0][i]) &&
                  !is_missing(y_pair[1][i]);
        for (auto v : x_idx) ok = ok && !is_missing(panel.pair(v)[0][i]);
        if (ok) keep.push_back(i);
    }
    DidReorganizedResult result;
    result.dropped_individuals = panel.n_individuals() - keep.size();

    auto cs = reorganize_did(panel, spec.treatment, spec.outcome);
    if (!keep.empty() && keep.size() != panel.n_individuals()) {
        CrossSection filtered = cs;
        filtered.unit_ids.clear();
        filtered.unit_times.clear();
        for (auto& col : filtered.columns) col.clear();
        for (auto i : keep) {
            for (std::size_t r = 2 * i; r < 2 * i + 2; ++r) {
                filtered.unit_ids.push_back(cs.unit_ids[r]);
                filtered.unit_times.push_back(cs.unit_times[r]);
                for (std::size_t v = 0; v < cs.columns.size(); ++v) filtered.columns[v].push_back(cs.columns[v][r]);
            }
        }
        cs = std::move(filtered);
    }
    if (keep.empty()) throw Error(ErrorKind::EmptyData, "no individual has complete data");
    const auto units = prepare_units(cs, spec);
    result.estimate = matching_ate(units, matching);
    if (permutations > 0) {
        std::vector<double> null(permutations);
        parallel_for(permutations, threads, [&](std::size_t s) {
            std::vector<int> labels = units.treatment;
            CounterRng rng(seed, StreamTag::did_permutation, 0, static_cast<std::uint32_t>(s));
            for (std::size_t i = 0; i + 1 < labels.size(); i += 2) {
                if (rng.coin()) std::swap(labels[i], labels[i + 1]);
            }
            null[s] = matching_ate(units.design, units.design_names, labels, units.outcome, matching).ate;
        });
        result.permutation = detail::summarize_null(std::move(null), result.estimate.ate, tail);
    }
    return result;
}

}  // namespace irand
