#pragma once

// Propensity scores by penalized logistic regression, and covariate balance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irand/error.hpp"

namespace irand {

struct LogisticOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;
    // Penalty on the slopes (not the intercept). Keeps the fit finite when the
    // labels are separable, which small subsamples make plausible.
    double ridge = 1e-6;
};

struct PropensityModel {
    Eigen::VectorXd coefficients;  // intercept first, then one slope per column
    bool converged = false;
    int iterations = 0;
    double max_abs_score_logit = 0.0;
    // Penalized log-likelihood at the start value and after every iteration.
    std::vector<double> objective_trace;

    [[nodiscard]] std::size_t n_slopes() const noexcept {
        return coefficients.size() > 0 ? static_cast<std::size_t>(coefficients.size() - 1) : 0;
    }
};

namespace detail {

inline constexpr double kQuadraticRegion = 1e-6;

// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double inverse_logit(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double penalized_loglik(const Eigen::MatrixXd& design, std::span<const int> labels, const Eigen::VectorXd& beta,
                               double ridge, Eigen::VectorXd& eta) {
    eta.noalias() = design * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += (labels[static_cast<std::size_t>(i)] != 0 ? eta[i] : 0.0) - log1p_exp(eta[i]);
    }
    return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace detail

/// Fits P(T = 1 | x) by Newton-Raphson / IRLS with step halving.
///
/// `x` holds one row per unit without an intercept column. Each recorded
/// objective is at least the previous one. Once the Newton step is below
/// 1e-6 it is taken without halving, and only increases are recorded.
/// Convergence means the largest Newton step fell below `tolerance`; if that
/// does not happen within `max_iterations` the model has converged = false.
[[nodiscard]] inline PropensityModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> labels,
                                                  const LogisticOptions& options = {}) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols() + 1;
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw Error(ErrorKind::DimensionMismatch, "design rows and label count differ");
    }
    if (n == 0) throw Error(ErrorKind::EmptyData, "no rows to fit");
    std::size_t treated = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) throw Error(ErrorKind::NonBinaryTreatment, "labels must be 0 or 1");
        treated += static_cast<std::size_t>(label);
    }
    if (treated == 0 || treated == labels.size()) {
        throw Error(ErrorKind::SingleClass, "all labels are " + std::to_string(treated == 0 ? 0 : 1));
    }
    if (!x.allFinite()) throw Error(ErrorKind::DimensionMismatch, "design contains non-finite values");

    Eigen::MatrixXd design(n, p);
    design.col(0).setOnes();
    design.rightCols(p - 1) = x;

    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, options.ridge);
    penalty[0] = 0.0;

    PropensityModel model;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double share = static_cast<double>(treated) / static_cast<double>(n);
    beta[0] = std::log(share / (1.0 - share));

    Eigen::VectorXd eta(n), prob(n), weight(n), residual(n), trial(p), scratch(n);
    double objective = detail::penalized_loglik(design, labels, beta, options.ridge, eta);
    model.objective_trace.push_back(objective);

    Eigen::MatrixXd hessian(p, p);
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = detail::inverse_logit(eta[i]);
            weight[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-300);
            residual[i] = static_cast<double>(labels[static_cast<std::size_t>(i)]) - prob[i];
        }
        Eigen::VectorXd gradient = design.transpose() * residual - penalty.cwiseProduct(beta);
        hessian.noalias() = design.transpose() * weight.asDiagonal() * design;
        hessian.diagonal() += penalty;
        Eigen::VectorXd step = hessian.ldlt().solve(gradient);
        if (!step.allFinite()) step = hessian.completeOrthogonalDecomposition().solve(gradient);

        model.iterations = iter;
        const double full = step.cwiseAbs().maxCoeff();
        if (full < detail::kQuadraticRegion) {
            // Objective gains here are at rounding level, so the line search
            // cannot judge the step. Take it unhalved.
            trial = beta + step;
            const double candidate = detail::penalized_loglik(design, labels, trial, options.ridge, scratch);
            beta = trial;
            eta.swap(scratch);
            if (candidate >= objective) {
                objective = candidate;
                model.objective_trace.push_back(objective);
            }
            if (full < options.tolerance) {
                model.converged = true;
                break;
            }
            continue;
        }

        double scale = 1.0;
        double candidate = -std::numeric_limits<double>::infinity();
        for (int halving = 0; halving < 40; ++halving) {
            trial = beta + scale * step;
            candidate = detail::penalized_loglik(design, labels, trial, options.ridge, scratch);
            if (candidate >= objective) break;
            scale *= 0.5;
        }
        if (!(candidate >= objective)) break;  // no ascent found; converged stays false
        beta = trial;
        eta.swap(scratch);
        objective = candidate;
        model.objective_trace.push_back(objective);
    }
    model.coefficients = beta;
    model.max_abs_score_logit = eta.cwiseAbs().maxCoeff();
    return model;
}

[[nodiscard]] inline PropensityModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                                  const LogisticOptions& options = {}) {
    return fit_logistic(x, std::span<const int>(labels), options);
}

inline constexpr double kScoreClamp = 1e-12;

/// Inverse-logit of the linear predictor, clamped to [1e-12, 1 - 1e-12].
[[nodiscard]] inline std::vector<double> predict_propensity(const PropensityModel& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != model.n_slopes() || model.coefficients.size() == 0) {
        throw Error(ErrorKind::DimensionMismatch, "rows have " + std::to_string(x.cols()) + " columns, model expects " +
                                                      std::to_string(model.n_slopes()));
    }
    std::vector<double> scores(static_cast<std::size_t>(x.rows()));
    const double intercept = model.coefficients[0];
    const auto slopes = model.coefficients.tail(model.coefficients.size() - 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = intercept + x.row(i).dot(slopes);
        scores[static_cast<std::size_t>(i)] = std::clamp(detail::inverse_logit(eta), kScoreClamp, 1.0 - kScoreClamp);
    }
    return scores;
}

/// Gradient of the penalized log-likelihood at the fitted coefficients:
/// sum_i (T_i - e_i) x_i minus the ridge term. Zero at the optimum.
[[nodiscard]] inline Eigen::VectorXd score_residual(const PropensityModel& model, const Eigen::MatrixXd& x,
                                                    std::span<const int> labels, double ridge) {
    const Eigen::Index p = model.coefficients.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = model.coefficients[0] + x.row(i).dot(model.coefficients.tail(p - 1));
        const double r = labels[static_cast<std::size_t>(i)] - detail::inverse_logit(eta);
        g[0] += r;
        g.tail(p - 1) += r * x.row(i).transpose();
    }
    g.tail(p - 1) -= ridge * model.coefficients.tail(p - 1);
    return g;
}

// ---------------------------------------------------------------------------
// Balance diagnostics

inline constexpr double kBalanceThreshold = 0.25;

namespace detail {

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double standardize(double treated_mean, double control_mean, double treated_sd) {
    const double diff = treated_mean - control_mean;
    if (treated_sd > 0.0) return diff / treated_sd;
    if (diff == 0.0) return 0.0;
    throw Error(ErrorKind::ZeroVariance, "treated group has zero variance but group means differ");
}

}  // namespace detail

/// (mean_treated - mean_control) / sd_treated, with the sample standard
/// deviation of the treated group only.
[[nodiscard]] inline double standardized_mean_difference(std::span<const double> treated,
                                                         std::span<const double> control) {
    if (treated.empty() || control.empty()) throw Error(ErrorKind::EmptyGroup, "both groups must be nonempty");
    const double mt = detail::mean_of(treated);
    const double mc = detail::mean_of(control);
    return detail::standardize(mt, mc, detail::sample_sd(treated, mt));
}

struct BalanceReport {
    std::vector<std::string> confounders;
    std::vector<double> differences;      // matched sample
    std::vector<double> raw_differences;  // before matching
    double threshold = kBalanceThreshold;
    bool pass = true;
};

/// Standardized differences of the confounder columns between the treated
/// units and their matched controls. A control counts once per treated unit
/// that selected it, weighted by 1/|J_i|. Columns whose treated sd is zero
/// report 0 when the means coincide and +-inf otherwise.
[[nodiscard]] inline BalanceReport check_balance(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                                                 std::span<const int> treatment,
                                                 std::span<const std::vector<std::size_t>> matched,
                                                 double threshold = kBalanceThreshold) {
    const std::size_t n = treatment.size();
    if (static_cast<std::size_t>(x.rows()) != n || matched.size() != n ||
        names.size() != static_cast<std::size_t>(x.cols())) {
        throw Error(ErrorKind::DimensionMismatch, "balance inputs have inconsistent sizes");
    }
    std::vector<double> weight(n, 0.0);
    std::size_t n_treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (treatment[i] != 1) continue;
        ++n_treated;
        const auto& group = matched[i];
        for (auto j : group) weight[j] += 1.0 / static_cast<double>(group.size());
    }
    BalanceReport report;
    report.confounders = names;
    report.threshold = threshold;
    if (n_treated == 0 || n_treated == n) throw Error(ErrorKind::EmptyGroup, "balance needs both groups");

    auto safe = [](double tm, double cm, double sd) {
        try {
            return detail::standardize(tm, cm, sd);
        } catch (const Error&) {
            return tm > cm ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        }
    };

    std::vector<double> treated_values;
    treated_values.reserve(n_treated);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        treated_values.clear();
        double control_sum = 0.0, control_weight = 0.0, raw_sum = 0.0;
        std::size_t raw_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = x(static_cast<Eigen::Index>(i), c);
            if (treatment[i] == 1) {
                treated_values.push_back(v);
            } else {
                control_sum += weight[i] * v;
                control_weight += weight[i];
                raw_sum += v;
                ++raw_count;
            }
        }
        const double tm = detail::mean_of(treated_values);
        const double sd = detail::sample_sd(treated_values, tm);
        const double matched_mean = control_weight > 0.0 ? control_sum / control_weight : raw_sum / raw_count;
        const double d = safe(tm, matched_mean, sd);
        report.differences.push_back(d);
        report.raw_differences.push_back(safe(tm, raw_sum / static_cast<double>(raw_count), sd));
        if (!(std::abs(d) < threshold)) report.pass = false;
    }
    return report;
}

}  // namespace irand
