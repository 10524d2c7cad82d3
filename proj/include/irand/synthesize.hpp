#pragma once

// Synthetic two-point panels from per-visit summary statistics.
//
// Continuous variables are truncated normals whose mean and sd match the
// summary; binary variables are Bernoulli(mean); ordinal variables threshold
// a Gaussian latent at the quantiles of their category frequencies. Latent
// uniforms are Latin-hypercube stratified, so sample moments sit close to the
// targets even for small n.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "irand/error.hpp"
#include "irand/panel.hpp"
#include "irand/rng.hpp"

namespace irand {

struct MomentSummary {
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    // Observed count at this visit; drives optional missingness.
    std::optional<std::size_t> count;
};

struct VariableSummary {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    MomentSummary baseline;
    // Absent for time-invariant variables, whose follow-up equals baseline.
    std::optional<MomentSummary> follow_up;
    // Correlation of the Gaussian latents at the two visits.
    double time_correlation = 0.0;
};

struct PanelSummary {
    std::vector<VariableSummary> variables;
    // Binary columns equal to the visit indicator (treatment given between
    // the visits).
    std::vector<std::string> time_indicators;
    // Number of individuals the counts refer to.
    std::size_t reference_count = 0;
    // Roles for the generated panel's schema.
    std::string treatment;
    std::vector<std::string> confounders;
    std::optional<std::string> mediator;
    std::string outcome;
};

struct SynthOptions {
    std::size_t n = 256;
    std::uint64_t seed = 0;
    bool missingness = false;
};

namespace detail {

inline const boost::math::normal& std_normal() {
    static const boost::math::normal dist;
    return dist;
}
inline double phi(double x) { return boost::math::pdf(std_normal(), x); }
inline double big_phi(double x) { return boost::math::cdf(std_normal(), x); }
inline double big_phi_c(double x) { return boost::math::cdf(boost::math::complement(std_normal(), x)); }
inline double phi_inv(double p) { return boost::math::quantile(std_normal(), p); }
inline double phi_c_inv(double q) { return boost::math::quantile(boost::math::complement(std_normal(), q)); }

struct TruncMoments {
    double mean;
    double sd;
};

// Mean and sd of N(mu, s^2) truncated to [a, b].
inline TruncMoments truncated_moments(double mu, double s, double a, double b) {
    const double al = (a - mu) / s;
    const double be = (b - mu) / s;
    const double z = al > 0.0 ? big_phi_c(al) - big_phi_c(be) : big_phi(be) - big_phi(al);
    const double pa = phi(al), pb = phi(be);
    const double ratio = (pa - pb) / z;
    const double var = s * s * (1.0 + (al * pa - be * pb) / z - ratio * ratio);
    return {mu + s * ratio, std::sqrt(std::max(var, 0.0))};
}

}  // namespace detail

/// Parent normal (mu, s) whose truncation to [min, max] has the given mean
/// and sd. Throws InvalidSummary when no such parent is found.
[[nodiscard]] inline std::array<double, 2> match_truncated_normal(const MomentSummary& m) {
    const double width = m.max - m.min;
    double mu = m.mean;
    double log_s = std::log(m.sd);
    auto residual = [&](double u, double ls) {
        const auto t = detail::truncated_moments(u, std::exp(ls), m.min, m.max);
        return std::array<double, 2>{(t.mean - m.mean) / width, (t.sd - m.sd) / width};
    };
    auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };
    auto r = residual(mu, log_s);
    for (int iter = 0; iter < 200 && norm(r) > 1e-13; ++iter) {
        const double h_mu = 1e-7 * std::max(width, 1e-300);
        const double h_ls = 1e-7;
        const auto r_mu = residual(mu + h_mu, log_s);
        const auto r_ls = residual(mu, log_s + h_ls);
        const double j00 = (r_mu[0] - r[0]) / h_mu, j10 = (r_mu[1] - r[1]) / h_mu;
        const double j01 = (r_ls[0] - r[0]) / h_ls, j11 = (r_ls[1] - r[1]) / h_ls;
        const double det = j00 * j11 - j01 * j10;
        if (!std::isfinite(det) || det == 0.0) break;
        double d_mu = -(j11 * r[0] - j01 * r[1]) / det;
        double d_ls = -(-j10 * r[0] + j00 * r[1]) / det;
        double step = 1.0;
        bool improved = false;
        for (int k = 0; k < 40; ++k) {
            const auto trial = residual(mu + step * d_mu, log_s + step * d_ls);
            if (std::isfinite(norm(trial)) && norm(trial) < norm(r)) {
                mu += step * d_mu;
                log_s += step * d_ls;
                r = trial;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    if (!(norm(r) <= 1e-9)) {
        throw Error(ErrorKind::InvalidSummary, "mean " + format_number(m.mean) + " and sd " + format_number(m.sd) +
                                                   " are not attainable on [" + format_number(m.min) + ", " +
                                                   format_number(m.max) + "]");
    }
    return {mu, std::exp(log_s)};
}

/// Category probabilities of an ordinal variable on the integer levels
/// min..max, from its mean and sd. Closed form for two or three levels.
[[nodiscard]] inline std::vector<double> ordinal_probabilities(const MomentSummary& m) {
    const double levels = m.max - m.min + 1.0;
    if (m.min != std::floor(m.min) || m.max != std::floor(m.max) || (levels != 2.0 && levels != 3.0)) {
        throw Error(ErrorKind::InvalidSummary, "ordinal variables need two or three integer levels");
    }
    const double mean = m.mean - m.min;
    if (levels == 2.0) return {1.0 - mean, mean};
    // Convert the sample sd to the population second moment when the count is known.
    const double n = m.count ? static_cast<double>(*m.count) : 0.0;
    const double var = n > 1.0 ? m.sd * m.sd * (n - 1.0) / n : m.sd * m.sd;
    const double second = var + mean * mean;
    const double p2 = (second - mean) / 2.0;
    const double p1 = mean - 2.0 * p2;
    const double p0 = 1.0 - p1 - p2;
    if (p0 < -1e-12 || p1 < -1e-12 || p2 < -1e-12) {
        throw Error(ErrorKind::InvalidSummary, "no three-level distribution has mean " + format_number(m.mean) +
                                                   " and sd " + format_number(m.sd));
    }
    return {std::max(p0, 0.0), std::max(p1, 0.0), std::max(p2, 0.0)};
}

inline void validate_moments(const std::string& name, const MomentSummary& m, VariableKind kind) {
    auto fail = [&](const std::string& why) { throw Error(ErrorKind::InvalidSummary, name + ": " + why); };
    for (double v : {m.mean, m.sd, m.min, m.max}) {
        if (!std::isfinite(v)) fail("non-finite summary value");
    }
    if (m.sd < 0.0) fail("sd must be non-negative");
    if (m.min > m.max) fail("min exceeds max");
    if (m.mean < m.min || m.mean > m.max) fail("mean lies outside [min, max]");
    if (kind == VariableKind::binary && (m.min < 0.0 || m.max > 1.0)) fail("binary mean must lie in [0, 1]");
    if (kind == VariableKind::ordinal) (void)ordinal_probabilities(m);
}

inline void validate_summary(const PanelSummary& summary) {
    if (summary.variables.empty() && summary.time_indicators.empty()) {
        throw Error(ErrorKind::InvalidSummary, "summary lists no variables");
    }
    for (const auto& v : summary.variables) {
        if (v.name.empty()) throw Error(ErrorKind::InvalidSummary, "variable without a name");
        validate_moments(v.name, v.baseline, v.kind);
        if (v.follow_up) validate_moments(v.name, *v.follow_up, v.kind);
        if (!(std::abs(v.time_correlation) <= 1.0)) {
            throw Error(ErrorKind::InvalidSummary, v.name + ": time correlation must lie in [-1, 1]");
        }
    }
}

namespace detail {

// Stratified standard normals: one draw in each of n equal-probability bins,
// bins visited in random order.
inline std::vector<double> lhs_normals(std::size_t n, CounterRng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(order[i]) + rng.uniform_open()) / static_cast<double>(n);
        z[i] = phi_inv(u);
    }
    return z;
}

// Maps a latent standard normal to a draw from the summarized distribution.
class Marginal {
public:
    Marginal(const MomentSummary& m, VariableKind kind) : m_(m), kind_(kind) {
        if (kind == VariableKind::ordinal) {
            const auto p = ordinal_probabilities(m);
            double cum = 0.0;
            for (std::size_t k = 0; k + 1 < p.size(); ++k) {
                cum += p[k];
                cuts_.push_back(cum);
            }
        } else if (kind == VariableKind::continuous && m.sd > 0.0 && m.min < m.max) {
            const auto parent = match_truncated_normal(m);
            mu_ = parent[0];
            s_ = parent[1];
        }
    }

    [[nodiscard]] double operator()(double z) const {
        if (kind_ == VariableKind::binary) return big_phi(z) < m_.mean ? 1.0 : 0.0;
        if (kind_ == VariableKind::ordinal) {
            const double u = big_phi(z);
            std::size_t level = 0;
            while (level < cuts_.size() && u >= cuts_[level]) ++level;
            return m_.min + static_cast<double>(level);
        }
        if (!(m_.sd > 0.0) || m_.min == m_.max) return m_.mean;
        const double al = (m_.min - mu_) / s_;
        const double be = (m_.max - mu_) / s_;
        double x;
        if (al > 0.0) {
            // Upper tail: work with complements for accuracy.
            const double qa = big_phi_c(al), qb = big_phi_c(be);
            x = mu_ + s_ * phi_c_inv(qa - big_phi(z) * (qa - qb));
        } else {
            const double pa = big_phi(al), pb = big_phi(be);
            x = mu_ + s_ * phi_inv(pa + big_phi(z) * (pb - pa));
        }
        return std::clamp(x, m_.min, m_.max);
    }

private:
    MomentSummary m_;
    VariableKind kind_;
    std::vector<double> cuts_;
    double mu_ = 0.0;
    double s_ = 1.0;
};

inline std::size_t missing_count(const MomentSummary& m, std::size_t reference, std::size_t n) {
    if (!m.count || reference == 0 || *m.count >= reference) return 0;
    const double share = 1.0 - static_cast<double>(*m.count) / static_cast<double>(reference);
    return std::min(n, static_cast<std::size_t>(std::llround(share * static_cast<double>(n))));
}

}  // namespace detail

[[nodiscard]] inline TwoPointPanel synthesize_panel(const PanelSummary& summary, const SynthOptions& options) {
    validate_summary(summary);
    if (options.n < 1) throw Error(ErrorKind::InvalidConfig, "n must be at least 1");
    const std::size_t n = options.n;

    VariableSchema schema;
    schema.treatment_column = summary.treatment;
    schema.confounder_columns = summary.confounders;
    schema.mediator_column = summary.mediator;
    schema.outcome_column = summary.outcome;

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
    std::vector<std::string> names;
    std::vector<TwoPointPanel::TimePair> values;

    for (const auto& name : summary.time_indicators) {
        names.push_back(name);
        values.push_back({std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)});
        schema.variable_kinds[name] = VariableKind::binary;
    }
    for (std::size_t v = 0; v < summary.variables.size(); ++v) {
        const auto& var = summary.variables[v];
        const auto idx = static_cast<std::uint32_t>(v);
        schema.variable_kinds[var.name] = var.kind;
        CounterRng base_rng(options.seed, StreamTag::synthesis, idx, 0);
        const auto z0 = detail::lhs_normals(n, base_rng);
        TwoPointPanel::TimePair column{std::vector<double>(n), std::vector<double>(n)};
        const detail::Marginal first(var.baseline, var.kind);
        for (std::size_t i = 0; i < n; ++i) column[0][i] = first(z0[i]);
        if (!var.follow_up) {
            column[1] = column[0];
        } else {
            const detail::Marginal second(*var.follow_up, var.kind);
            const double r = var.time_correlation;
            std::vector<double> z1 = z0;
            if (r != 1.0) {
                CounterRng innovation_rng(options.seed, StreamTag::synthesis, idx, 1);
                const auto w = detail::lhs_normals(n, innovation_rng);
                const double c = std::sqrt(1.0 - r * r);
                for (std::size_t i = 0; i < n; ++i) z1[i] = r * z0[i] + c * w[i];
            }
            for (std::size_t i = 0; i < n; ++i) column[1][i] = second(z1[i]);
        }
        if (options.missingness) {
            for (std::size_t t = 0; t < 2; ++t) {
                const auto& m = (t == 1 && var.follow_up) ? *var.follow_up : var.baseline;
                const std::size_t k = detail::missing_count(m, summary.reference_count, n);
                if (k == 0) continue;
                std::vector<std::size_t> order(n);
                for (std::size_t i = 0; i < n; ++i) order[i] = i;
                // Time-invariant variables go missing for the same individuals at both visits.
                CounterRng rng(options.seed, StreamTag::synthesis, idx, var.follow_up ? 2 + static_cast<std::uint32_t>(t) : 2);
                shuffle(std::span<std::size_t>(order), rng);
                for (std::size_t j = 0; j < k; ++j) column[t][order[j]] = kMissing;
            }
        }
        names.push_back(var.name);
        values.push_back(std::move(column));
    }
    return TwoPointPanel(std::move(schema), std::move(ids), std::move(names), std::move(values));
}

/// Summary statistics of the two-visit low-carbohydrate diet cohort (256
/// patients). The treatment indicator LCD equals the visit.
[[nodiscard]] inline PanelSummary cohort_summary() {
    using M = MomentSummary;
    PanelSummary s;
    s.reference_count = 256;
    s.time_indicators = {"LCD"};
    s.treatment = "LCD";
    s.confounders = {"Gender", "Age"};
    s.mediator = "BMI";
    s.outcome = "T2D";
    s.variables = {
        {"Gender", VariableKind::binary, M{0.590, 0.493, 0.0, 1.0, 256}, std::nullopt, 1.0},
        {"Age", VariableKind::continuous, M{61.574, 12.111, 23.0, 91.0, 256}, M{63.424, 12.387, 23.167, 91.5, 256}, 1.0},
        {"Height", VariableKind::continuous, M{1.706, 0.092, 1.473, 1.9, 75}, std::nullopt, 1.0},
        {"Weight", VariableKind::continuous, M{96.160, 18.621, 55.3, 159.0, 251}, M{87.070, 17.352, 51.0, 140.0, 251}, 0.0},
        {"BMI", VariableKind::continuous, M{33.887, 6.071, 21.66, 57.1, 66}, M{30.356, 5.923, 19.24, 53.62, 65}, 0.0},
        {"T2D", VariableKind::ordinal, M{1.281, 0.811, 0.0, 2.0, 256}, M{0.719, 0.867, 0.0, 2.0, 256}, 0.0},
        {"HbA1c", VariableKind::continuous, M{61.376, 20.652, 37.0, 135.0, 202}, M{45.925, 9.319, 32.0, 84.0, 201}, 0.0},
        {"TBC", VariableKind::continuous, M{5.314, 1.302, 2.5, 9.3, 176}, M{4.892, 1.247, 2.4, 8.8, 174}, 0.0},
        {"HDL", VariableKind::continuous, M{1.280, 0.421, 0.6, 3.5, 195}, M{1.413, 0.542, 0.7, 4.9, 189}, 0.0},
        {"SBP", VariableKind::continuous, M{143.503, 15.476, 114.0, 223.0, 171}, M{132.100, 11.021, 108.0, 170.0, 170}, 0.0},
    };
    return s;
}

}  // namespace irand
