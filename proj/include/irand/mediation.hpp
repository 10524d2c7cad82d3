#pragma once

// Total, direct and indirect effects. The total effect adjusts for the
// confounders only, the direct effect also adjusts for the mediator, and the
// indirect effect is their difference, taken per subsample and per
// permutation so that the three estimates share one plan and one set of
// shuffles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irand/error.hpp"
#include "irand/inference.hpp"
#include "irand/matching.hpp"
#include "irand/panel.hpp"
#include "irand/parallel.hpp"

namespace irand {

enum class Engine { irand, pooled };

[[nodiscard]] inline std::string_view to_string(Engine e) noexcept { return e == Engine::irand ? "irand" : "pooled"; }

[[nodiscard]] inline Engine parse_engine(std::string_view text) {
    if (text == "irand") return Engine::irand;
    if (text == "pooled") return Engine::pooled;
    throw Error(ErrorKind::InvalidConfig, "unknown engine '" + std::string(text) + "'");
}

struct MediationSpec {
    std::string treatment;
    std::string outcome;
    std::vector<std::string> confounders;
    std::string mediator;
    std::optional<Contrast> contrast;
    Engine engine = Engine::irand;
    // M, S, tail, strategy, seed and matching options. With the pooled engine
    // only S, tail, seed and matching are used.
    IrandConfig config;

    static MediationSpec from_schema(const VariableSchema& schema) {
        if (!schema.mediator_column) throw Error(ErrorKind::InvalidConfig, "schema has no mediator column");
        MediationSpec spec;
        spec.treatment = schema.treatment_column;
        spec.outcome = schema.outcome_column;
        spec.confounders = schema.confounder_columns;
        spec.mediator = *schema.mediator_column;
        return spec;
    }

    void validate() const {
        if (mediator.empty()) throw Error(ErrorKind::InvalidConfig, "mediator required");
        if (mediator == treatment || mediator == outcome) {
            throw Error(ErrorKind::InvalidConfig, "mediator must differ from treatment and outcome");
        }
        if (std::find(confounders.begin(), confounders.end(), mediator) != confounders.end()) {
            throw Error(ErrorKind::InvalidConfig, "mediator must not be a confounder");
        }
        total_spec().validate();
        config.validate();
    }

    [[nodiscard]] AnalysisSpec total_spec() const { return {treatment, outcome, confounders, contrast}; }

    [[nodiscard]] AnalysisSpec direct_spec() const {
        AnalysisSpec s = total_spec();
        s.confounders.push_back(mediator);
        return s;
    }
};

enum class EffectKind { total, direct, indirect };

[[nodiscard]] inline std::string_view to_string(EffectKind k) noexcept {
    switch (k) {
        case EffectKind::total: return "total";
        case EffectKind::direct: return "direct";
        case EffectKind::indirect: return "indirect";
    }
    return "total";
}

struct EffectEstimate {
    EffectKind kind = EffectKind::total;
    Engine engine = Engine::irand;
    double ate = kNaN;
    double p_value = kNaN;
    double p_conservative = kNaN;
    // One entry per subsample (a single entry for the pooled engine).
    std::vector<double> subsample_ates;
    std::vector<double> subsample_p_values;
    std::vector<std::uint8_t> completed;
    std::vector<std::vector<double>> null_distributions;
    std::size_t skipped = 0;
    // Identifies the subsample plan and permutation streams used.
    std::uint64_t plan_fingerprint = 0;
    std::uint64_t permutation_seed = 0;
    Tail tail = Tail::lower;
};

struct MediationReport {
    MediationSpec spec;
    EffectEstimate total;
    EffectEstimate direct;
    EffectEstimate indirect;
};

[[nodiscard]] inline std::uint64_t plan_fingerprint(const SubsamplePlan& plan) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ plan.n;
    for (const auto& a : plan.assignments) {
        for (auto bit : a) {
            h ^= bit;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

// Pooled runs have no plan; they get a fixed marker instead.
inline constexpr std::uint64_t kPooledFingerprint = 0x706f6f6c6564ULL;

inline void aggregate_effect(EffectEstimate& e, std::size_t permutations) {
    e.ate = e.p_value = e.p_conservative = kNaN;
    double ate_sum = 0.0, p_sum = 0.0, pc_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < e.subsample_ates.size(); ++m) {
        if (!e.completed[m]) continue;
        ate_sum += e.subsample_ates[m];
        if (permutations > 0) {
            p_sum += e.subsample_p_values[m];
            const double exceed = std::round(e.subsample_p_values[m] * static_cast<double>(permutations));
            pc_sum += (exceed + 1.0) / (static_cast<double>(permutations) + 1.0);
        }
        ++count;
    }
    e.skipped = e.subsample_ates.size() - count;
    if (count == 0) return;
    e.ate = ate_sum / static_cast<double>(count);
    if (permutations > 0) {
        e.p_value = p_sum / static_cast<double>(count);
        e.p_conservative = pc_sum / static_cast<double>(count);
    }
}

inline EffectEstimate empty_effect(EffectKind kind, const MediationSpec& spec, std::size_t slots,
                                   std::uint64_t fingerprint) {
    EffectEstimate e;
    e.kind = kind;
    e.engine = spec.engine;
    e.subsample_ates.assign(slots, kNaN);
    e.subsample_p_values.assign(slots, kNaN);
    e.completed.assign(slots, 0);
    e.null_distributions.assign(slots, {});
    e.plan_fingerprint = fingerprint;
    e.permutation_seed = spec.config.seed;
    e.tail = spec.config.tail;
    return e;
}

// Runs one effect. Rows are the complete cases over treatment, outcome,
// confounders and mediator for both kinds, so total and direct runs see the
// same units and, through identical treatment vectors, the same shuffles.
inline EffectEstimate run_effect(const TwoPointPanel& panel, const MediationSpec& spec, EffectKind kind,
                                 const SubsamplePlan* plan) {
    const AnalysisSpec analysis = kind == EffectKind::direct ? spec.direct_spec() : spec.total_spec();
    const std::vector<std::string> also{spec.mediator};
    const auto& cfg = spec.config;
    const std::size_t slots = plan ? plan->size() : 1;
    auto effect = empty_effect(kind, spec, slots, plan ? plan_fingerprint(*plan) : kPooledFingerprint);
    parallel_for(slots, cfg.threads, [&](std::size_t m) {
        try {
            const auto cs = plan ? select_subsample(panel, plan->assignments[m], m) : pool(panel);
            const auto units = prepare_units(cs, analysis, also);
            const double ate = matching_ate(units, cfg.matching).ate;
            effect.subsample_ates[m] = ate;
            if (cfg.permutations > 0) {
                PermutationOptions popt{cfg.permutations, cfg.tail, cfg.seed, static_cast<std::uint32_t>(m),
                                         plan ? 1u : cfg.threads};
                auto perm = permutation_test(units, ate, popt, cfg.matching);
                effect.subsample_p_values[m] = perm.p_value;
                effect.null_distributions[m] = std::move(perm.null_distribution);
            }
            effect.completed[m] = 1;
        } catch (const Error& e) {
            if (!is_skippable(e)) throw;
        }
    });
    aggregate_effect(effect, cfg.permutations);
    return effect;
}

inline std::optional<SubsamplePlan> plan_for(const TwoPointPanel& panel, const MediationSpec& spec) {
    if (spec.engine == Engine::pooled) return std::nullopt;
    return draw_subsamples(panel, spec.config.subsamples, spec.config.strategy, spec.config.seed);
}

}  // namespace detail

[[nodiscard]] inline EffectEstimate total_effect(const TwoPointPanel& panel, const MediationSpec& spec) {
    spec.validate();
    const auto plan = detail::plan_for(panel, spec);
    return detail::run_effect(panel, spec, EffectKind::total, plan ? &*plan : nullptr);
}

[[nodiscard]] inline EffectEstimate direct_effect(const TwoPointPanel& panel, const MediationSpec& spec) {
    spec.validate();
    const auto plan = detail::plan_for(panel, spec);
    return detail::run_effect(panel, spec, EffectKind::direct, plan ? &*plan : nullptr);
}

/// total - direct, per subsample and per permutation replicate. Both inputs
/// must come from the same plan and permutation streams.
[[nodiscard]] inline EffectEstimate indirect_effect(const EffectEstimate& total, const EffectEstimate& direct) {
    if (total.kind != EffectKind::total || direct.kind != EffectKind::direct) {
        throw Error(ErrorKind::InvalidConfig, "indirect effect needs a total and a direct estimate");
    }
    if (total.plan_fingerprint != direct.plan_fingerprint || total.engine != direct.engine ||
        total.subsample_ates.size() != direct.subsample_ates.size() ||
        total.permutation_seed != direct.permutation_seed || total.tail != direct.tail) {
        throw Error(ErrorKind::PlanMismatch, "total and direct effects were estimated on different plans");
    }
    EffectEstimate out = total;
    out.kind = EffectKind::indirect;
    out.skipped = 0;
    const std::size_t slots = total.subsample_ates.size();
    std::size_t permutations = 0;
    for (std::size_t m = 0; m < slots; ++m) {
        out.null_distributions[m].clear();
        out.completed[m] = total.completed[m] && direct.completed[m];
        if (!out.completed[m]) {
            out.subsample_ates[m] = kNaN;
            out.subsample_p_values[m] = kNaN;
            continue;
        }
        const double observed = total.subsample_ates[m] - direct.subsample_ates[m];
        out.subsample_ates[m] = observed;
        const auto& tn = total.null_distributions[m];
        const auto& dn = direct.null_distributions[m];
        if (tn.size() != dn.size()) throw Error(ErrorKind::PlanMismatch, "permutation counts differ");
        if (tn.empty()) continue;
        permutations = tn.size();
        std::vector<double> null(tn.size());
        for (std::size_t s = 0; s < tn.size(); ++s) null[s] = tn[s] - dn[s];
        auto summary = detail::summarize_null(std::move(null), observed, total.tail);
        out.subsample_p_values[m] = summary.p_value;
        out.null_distributions[m] = std::move(summary.null_distribution);
    }
    detail::aggregate_effect(out, permutations);
    // Aggregate identity: the indirect effect is the difference of the two
    // aggregates when both were averaged over the same subsamples.
    bool same_support = true;
    for (std::size_t m = 0; m < slots; ++m) {
        same_support = same_support && total.completed[m] == out.completed[m] && direct.completed[m] == out.completed[m];
    }
    if (same_support) out.ate = total.ate - direct.ate;
    return out;
}

[[nodiscard]] inline MediationReport mediation_report(const TwoPointPanel& panel, const MediationSpec& spec) {
    spec.validate();
    const auto plan = detail::plan_for(panel, spec);
    const SubsamplePlan* p = plan ? &*plan : nullptr;
    MediationReport report;
    report.spec = spec;
    report.total = detail::run_effect(panel, spec, EffectKind::total, p);
    report.direct = detail::run_effect(panel, spec, EffectKind::direct, p);
    // A subsample counts only if both runs completed on it, so all three
    // effects average over the same subsamples.
    for (std::size_t m = 0; m < report.total.completed.size(); ++m) {
        const bool both = report.total.completed[m] && report.direct.completed[m];
        report.total.completed[m] = report.direct.completed[m] = both ? 1 : 0;
    }
    detail::aggregate_effect(report.total, spec.config.permutations);
    detail::aggregate_effect(report.direct, spec.config.permutations);
    report.indirect = indirect_effect(report.total, report.direct);
    if (!spec.config.keep_null) {
        for (auto* e : {&report.total, &report.direct, &report.indirect}) {
            for (auto& v : e->null_distributions) v.clear();
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Ordinal treatments

/// Adds an ordinal column `name` with level = number of cuts strictly below
/// the source value. Missing values stay missing.
[[nodiscard]] inline TwoPointPanel discretize(const TwoPointPanel& panel, const std::string& source,
                                              std::vector<double> cuts, const std::string& name) {
    if (cuts.empty()) throw Error(ErrorKind::InvalidConfig, "at least one cut point is required");
    if (!std::is_sorted(cuts.begin(), cuts.end()) ||
        std::adjacent_find(cuts.begin(), cuts.end()) != cuts.end()) {
        throw Error(ErrorKind::InvalidConfig, "cut points must be strictly increasing");
    }
    const auto& src = panel.pair(panel.variable_index(source));
    TwoPointPanel::TimePair levels;
    for (std::size_t t = 0; t < 2; ++t) {
        levels[t].resize(src[t].size());
        for (std::size_t i = 0; i < src[t].size(); ++i) {
            const double v = src[t][i];
            levels[t][i] = is_missing(v) ? kMissing
                                         : static_cast<double>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
        }
    }
    return panel.with_variable(name, VariableKind::ordinal, std::move(levels));
}

/// Observed levels of an ordinal column, ascending.
[[nodiscard]] inline std::vector<double> observed_levels(const TwoPointPanel& panel, const std::string& column) {
    std::set<double> levels;
    for (const auto& values : panel.pair(panel.variable_index(column))) {
        for (double v : values) {
            if (!is_missing(v)) levels.insert(v);
        }
    }
    return {levels.begin(), levels.end()};
}

/// One contrast per pair of consecutive observed treatment levels.
[[nodiscard]] inline std::vector<Contrast> consecutive_contrasts(const TwoPointPanel& panel, const std::string& column) {
    const auto levels = observed_levels(panel, column);
    std::vector<Contrast> out;
    for (std::size_t k = 1; k < levels.size(); ++k) out.push_back({levels[k - 1], levels[k]});
    return out;
}

/// One mediation report per consecutive pair of ordinal treatment levels.
[[nodiscard]] inline std::vector<MediationReport> mediation_contrasts(const TwoPointPanel& panel,
                                                                      const MediationSpec& spec) {
    std::vector<MediationReport> out;
    for (const auto& c : consecutive_contrasts(panel, spec.treatment)) {
        MediationSpec s = spec;
        s.contrast = c;
        out.push_back(mediation_report(panel, s));
    }
    return out;
}

}  // namespace irand
