#pragma once

// JSON and CSV serialization of plans, reports, surfaces and summaries.
// Non-finite numbers are written as null.

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "irand/inference.hpp"
#include "irand/mediation.hpp"
#include "irand/simulation.hpp"
#include "irand/synthesize.hpp"

namespace irand {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& values) {
    Json out = Json::array();
    for (double v : values) out.push_back(number(v));
    return out;
}

}  // namespace detail

[[nodiscard]] inline Json to_json(const SubsamplePlan& plan) {
    Json assignments = Json::array();
    for (const auto& a : plan.assignments) {
        std::string bits(a.size(), '0');
        for (std::size_t i = 0; i < a.size(); ++i) bits[i] = a[i] ? '1' : '0';
        assignments.push_back(bits);
    }
    return Json{{"n", plan.n},
                {"m", plan.size()},
                {"strategy", to_string(plan.strategy)},
                {"seed", plan.seed},
                {"assignments", std::move(assignments)}};
}

[[nodiscard]] inline Json to_json(const BalanceReport& b) {
    Json rows = Json::array();
    for (std::size_t c = 0; c < b.confounders.size(); ++c) {
        rows.push_back({{"confounder", b.confounders[c]},
                        {"smd", detail::number(b.differences[c])},
                        {"raw_smd", detail::number(b.raw_differences[c])}});
    }
    return Json{{"threshold", b.threshold}, {"pass", b.pass}, {"confounders", std::move(rows)}};
}

[[nodiscard]] inline Json to_json(const AteEstimate& e) {
    return Json{{"ate", detail::number(e.ate)},
                {"n_units", e.n_units},
                {"n_treated", e.n_treated},
                {"n_control", e.n_control},
                {"k_used", e.k_used},
                {"propensity_coefficients", detail::numbers(e.coefficients)},
                {"balance", to_json(e.balance)},
                {"diagnostics",
                 {{"propensity_converged", e.diagnostics.propensity_converged},
                  {"propensity_iterations", e.diagnostics.propensity_iterations},
                  {"dropped_rows", e.diagnostics.dropped_rows},
                  {"balance_retry_applied", e.diagnostics.balance_retry_applied}}}};
}

[[nodiscard]] inline Json to_json(const PermutationResult& p, bool with_null = false) {
    Json out{{"p_value", detail::number(p.p_value)},
             {"p_conservative", detail::number(p.p_conservative)},
             {"exceed_count", p.exceed_count},
             {"permutations", p.permutations}};
    if (with_null) out["null_distribution"] = detail::numbers(p.null_distribution);
    return out;
}

[[nodiscard]] inline Json to_json(const MatchingOptions& m) {
    return Json{{"k", m.k},
                {"retry_k", m.retry_k},
                {"retry_on_imbalance", m.retry_on_imbalance},
                {"balance_threshold", m.balance_threshold},
                {"logistic",
                 {{"max_iterations", m.logistic.max_iterations},
                  {"tolerance", m.logistic.tolerance},
                  {"ridge", m.logistic.ridge}}}};
}

/// Config echo. The thread count is left out so that output does not depend
/// on the degree of parallelism.
[[nodiscard]] inline Json to_json(const IrandConfig& c) {
    return Json{{"m", c.subsamples},
                {"s", c.permutations},
                {"tail", to_string(c.tail)},
                {"strategy", to_string(c.strategy)},
                {"seed", c.seed},
                {"matching", to_json(c.matching)}};
}

[[nodiscard]] inline Json to_json(const IrandReport& r) {
    Json per = Json::array();
    for (const auto& s : r.per_subsample) {
        Json row{{"index", s.index}, {"completed", s.completed}};
        if (s.completed) {
            row["ate"] = detail::number(s.estimate.ate);
            row["p_value"] = detail::number(s.permutation.p_value);
            row["n_treated"] = s.estimate.n_treated;
            row["n_control"] = s.estimate.n_control;
            row["k_used"] = s.estimate.k_used;
            row["balance_pass"] = s.estimate.balance.pass;
            row["propensity_converged"] = s.estimate.diagnostics.propensity_converged;
            row["dropped_rows"] = s.estimate.diagnostics.dropped_rows;
        } else {
            row["error"] = s.error;
        }
        per.push_back(std::move(row));
    }
    return Json{{"estimator", "irand"},
                {"treatment", r.treatment},
                {"outcome", r.outcome},
                {"confounders", r.confounders},
                {"mean_ate", detail::number(r.mean_ate)},
                {"mean_p_value", detail::number(r.mean_p_value)},
                {"mean_p_conservative", detail::number(r.mean_p_conservative)},
                {"completed", r.completed},
                {"skipped", r.skipped},
                {"per_subsample", std::move(per)}};
}

[[nodiscard]] inline Json to_json(const PooledResult& r) {
    Json out{{"estimator", "pooled"}, {"ate", detail::number(r.estimate.ate)}};
    out["p_value"] = detail::number(r.permutation.p_value);
    out["permutation"] = to_json(r.permutation);
    out["estimate"] = to_json(r.estimate);
    return out;
}

[[nodiscard]] inline Json to_json(const DidRegressionResult& r) {
    Json coefs = Json::object();
    for (std::size_t k = 0; k < r.names.size(); ++k) coefs[r.names[k]] = detail::number(r.coefficients[k]);
    return Json{{"estimator", "did_regression"},
                {"delta_hat", detail::number(r.delta_hat)},
                {"coefficients", std::move(coefs)},
                {"singular_values", detail::numbers(r.singular_values)},
                {"condition_number", detail::number(r.condition_number)},
                {"collinear", r.collinear},
                {"rank", r.rank},
                {"n_used", r.n_used},
                {"dropped", r.dropped}};
}

[[nodiscard]] inline Json to_json(const DidReorganizedResult& r) {
    Json out{{"estimator", "did_reorganized"}, {"ate", detail::number(r.estimate.ate)}};
    out["p_value"] = detail::number(r.permutation.p_value);
    out["permutation"] = to_json(r.permutation);
    out["dropped_individuals"] = r.dropped_individuals;
    out["estimate"] = to_json(r.estimate);
    return out;
}

[[nodiscard]] inline Json to_json(const EffectEstimate& e) {
    Json completed = Json::array();
    for (auto c : e.completed) completed.push_back(c != 0);
    return Json{{"kind", to_string(e.kind)},
                {"engine", to_string(e.engine)},
                {"ate", detail::number(e.ate)},
                {"p_value", detail::number(e.p_value)},
                {"p_conservative", detail::number(e.p_conservative)},
                {"skipped", e.skipped},
                {"subsample_ates", detail::numbers(e.subsample_ates)},
                {"subsample_p_values", detail::numbers(e.subsample_p_values)},
                {"completed", std::move(completed)}};
}

[[nodiscard]] inline Json to_json(const MediationReport& r) {
    const auto& s = r.spec;
    Json graph{{"treatment", s.treatment},
               {"outcome", s.outcome},
               {"confounders", s.confounders},
               {"mediator", s.mediator},
               {"engine", to_string(s.engine)}};
    graph["contrast"] = s.contrast ? Json{{"control_level", s.contrast->control_level},
                                          {"treated_level", s.contrast->treated_level}}
                                   : Json(nullptr);
    return Json{{"graph", std::move(graph)},
                {"total", to_json(r.total)},
                {"direct", to_json(r.direct)},
                {"indirect", to_json(r.indirect)}};
}

[[nodiscard]] inline Json to_json(const DgpConfig& c) {
    return Json{{"design", to_string(c.design)},
                {"alpha", c.alpha},
                {"beta", c.beta},
                {"delta", c.delta},
                {"rho", c.rho},
                {"drift", c.drift}};
}

[[nodiscard]] inline Json to_json(const MseSurface& s) {
    Json estimators = Json::array();
    for (auto e : s.options.estimators) estimators.push_back(to_string(e));
    Json cells = Json::array();
    for (const auto& c : s.cells) {
        cells.push_back({{"n", c.n},
                         {"sigma", c.sigma},
                         {"estimator", to_string(c.estimator)},
                         {"mse", detail::number(c.mse)},
                         {"bias", detail::number(c.bias)},
                         {"variance", detail::number(c.variance)},
                         {"replicates", c.replicates},
                         {"failures", c.failures}});
    }
    return Json{{"dgp", to_json(s.base)},
                {"grid_n", s.options.grid_n},
                {"grid_sigma", s.options.grid_sigma},
                {"estimators", std::move(estimators)},
                {"replicates", s.options.replicates},
                {"seed", s.options.seed},
                {"irand_m", s.options.irand_subsamples},
                {"strategy", to_string(s.options.strategy)},
                {"cells", std::move(cells)}};
}

/// Plot-ready CSV, one row per (n, sigma, estimator).
/// `design` labels the rows; defaults to the generator's design name.
inline void write_mse_csv(std::ostream& out, const MseSurface& s, std::string_view design = {}) {
    if (design.empty()) design = to_string(s.base.design);
    out << "design,n,sigma,estimator,mse,bias,variance,replicates\n";
    for (const auto& c : s.cells) {
        out << design << ',' << c.n << ',' << format_number(c.sigma) << ',' << to_string(c.estimator)
            << ',' << format_number(c.mse) << ',' << format_number(c.bias) << ',' << format_number(c.variance) << ','
            << c.replicates << '\n';
    }
}

// ---------------------------------------------------------------------------
// Summary files

namespace detail {

inline MomentSummary moments_from_json(const Json& j, const std::string& where) {
    try {
        MomentSummary m;
        m.mean = j.at("mean").get<double>();
        m.sd = j.at("sd").get<double>();
        m.min = j.at("min").get<double>();
        m.max = j.at("max").get<double>();
        if (j.contains("count")) m.count = j.at("count").get<std::size_t>();
        return m;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InvalidSummary, where + ": " + e.what());
    }
}

inline Json moments_to_json(const MomentSummary& m) {
    Json j{{"mean", m.mean}, {"sd", m.sd}, {"min", m.min}, {"max", m.max}};
    if (m.count) j["count"] = *m.count;
    return j;
}

}  // namespace detail

[[nodiscard]] inline PanelSummary summary_from_json(const Json& j) {
    PanelSummary s;
    try {
        s.reference_count = j.value("reference_count", std::size_t{0});
        s.time_indicators = j.value("time_indicators", std::vector<std::string>{});
        const auto& roles = j.at("roles");
        s.treatment = roles.at("treatment").get<std::string>();
        s.confounders = roles.value("confounders", std::vector<std::string>{});
        if (roles.contains("mediator") && !roles.at("mediator").is_null()) {
            s.mediator = roles.at("mediator").get<std::string>();
        }
        s.outcome = roles.at("outcome").get<std::string>();
        for (const auto& v : j.at("variables")) {
            VariableSummary var;
            var.name = v.at("name").get<std::string>();
            var.kind = parse_variable_kind(v.at("kind").get<std::string>());
            var.baseline = detail::moments_from_json(v.at("baseline"), var.name);
            if (v.contains("follow_up")) var.follow_up = detail::moments_from_json(v.at("follow_up"), var.name);
            var.time_correlation = v.value("time_correlation", var.follow_up ? 0.0 : 1.0);
            s.variables.push_back(std::move(var));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InvalidSummary, e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidSummary) throw;
        throw Error(ErrorKind::InvalidSummary, e.what());
    }
    validate_summary(s);
    return s;
}

[[nodiscard]] inline Json to_json(const PanelSummary& s) {
    Json vars = Json::array();
    for (const auto& v : s.variables) {
        Json j{{"name", v.name}, {"kind", to_string(v.kind)}, {"baseline", detail::moments_to_json(v.baseline)}};
        if (v.follow_up) j["follow_up"] = detail::moments_to_json(*v.follow_up);
        j["time_correlation"] = v.time_correlation;
        vars.push_back(std::move(j));
    }
    Json roles{{"treatment", s.treatment}, {"confounders", s.confounders}};
    roles["mediator"] = s.mediator ? Json(*s.mediator) : Json(nullptr);
    roles["outcome"] = s.outcome;
    return Json{{"reference_count", s.reference_count},
                {"time_indicators", s.time_indicators},
                {"roles", std::move(roles)},
                {"variables", std::move(vars)}};
}

[[nodiscard]] inline PanelSummary load_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InvalidSummary, path + ": " + e.what());
    }
    return summary_from_json(j);
}

}  // namespace irand
