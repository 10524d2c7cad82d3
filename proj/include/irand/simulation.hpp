#pragma once

// Synthetic two-point panels from a linear structural model, and Monte-Carlo
// MSE comparisons between estimators on paired replicates.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irand/error.hpp"
#include "irand/inference.hpp"
#include "irand/panel.hpp"
#include "irand/parallel.hpp"
#include "irand/rng.hpp"

namespace irand {

using TimePair = TwoPointPanel::TimePair;

enum class Design { lcd_like, bmi_like };

[[nodiscard]] inline std::string_view to_string(Design d) noexcept {
    return d == Design::lcd_like ? "lcd_like" : "bmi_like";
}

[[nodiscard]] inline Design parse_design(std::string_view text) {
    if (text == "lcd_like") return Design::lcd_like;
    if (text == "bmi_like") return Design::bmi_like;
    throw Error(ErrorKind::InvalidConfig, "unknown design '" + std::string(text) + "'");
}

/// Y = alpha + T delta + X beta + eps, eps ~ N(0, sigma^2).
/// X1 at follow-up is rho X1(0) + sqrt(1 - rho^2) xi + drift.
/// lcd_like: T = time. bmi_like: X2 = time and T = 1{X2 + xi_T > 0}.
struct DgpConfig {
    std::size_t n = 200;
    double alpha = 0.0;
    std::vector<double> beta{-1.0};
    double delta = 1.0;
    double sigma = 0.5;
    double rho = 1.0;
    double drift = 0.0;
    Design design = Design::lcd_like;
    std::uint64_t seed = 0;

    /// Time-invariant confounder, treatment equal to time.
    static DgpConfig lcd_like() { return {}; }

    /// As lcd_like but with an autocorrelated, drifting confounder.
    static DgpConfig lcd_drift() {
        DgpConfig c;
        c.rho = 0.99;
        c.drift = 1.0 / 12.0;
        return c;
    }

    static DgpConfig bmi_like() {
        DgpConfig c;
        c.beta = {-1.0, 1.0};
        c.rho = 0.99;
        c.drift = 1.0 / 12.0;
        c.design = Design::bmi_like;
        return c;
    }

    [[nodiscard]] std::size_t n_confounders() const noexcept { return design == Design::bmi_like ? 2 : 1; }

    void validate() const {
        if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "sigma must be non-negative");
        if (!(std::abs(rho) <= 1.0)) throw Error(ErrorKind::InvalidConfig, "rho must lie in [-1, 1]");
        if (n < 1) throw Error(ErrorKind::InvalidConfig, "n must be at least 1");
        if (beta.size() != n_confounders()) {
            throw Error(ErrorKind::InvalidConfig, std::string(to_string(design)) + " needs " +
                                                      std::to_string(n_confounders()) + " beta coefficients");
        }
        for (double v : {alpha, delta, drift}) {
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, "non-finite model parameter");
        }
    }
};

[[nodiscard]] inline TimePair generate_confounders(std::size_t n, double rho, double drift, std::uint64_t seed) {
    if (!(std::abs(rho) <= 1.0)) throw Error(ErrorKind::InvalidConfig, "rho must lie in [-1, 1]");
    CounterRng rng(seed, StreamTag::confounders);
    const double innovation = std::sqrt(1.0 - rho * rho);
    TimePair x{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        x[0][i] = rng.normal();
        const double xi = rng.normal();
        x[1][i] = rho * x[0][i] + innovation * xi + drift;
    }
    return x;
}

struct TreatmentDraw {
    TimePair treatment;
    // bmi_like only: the time indicator used as a second confounder.
    std::optional<TimePair> indicator;
};

[[nodiscard]] inline TreatmentDraw assign_treatment(Design design, std::size_t n, std::uint64_t seed) {
    TreatmentDraw draw;
    draw.treatment = {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    if (design == Design::lcd_like) return draw;
    draw.indicator = draw.treatment;
    CounterRng rng(seed, StreamTag::treatment);
    for (int t = 0; t < 2; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            draw.treatment[static_cast<std::size_t>(t)][i] = (*draw.indicator)[static_cast<std::size_t>(t)][i] + rng.normal() > 0.0 ? 1.0 : 0.0;
        }
    }
    return draw;
}

[[nodiscard]] inline TimePair generate_outcomes(const TimePair& treatment, const std::vector<const TimePair*>& confounders,
                                                const DgpConfig& config) {
    if (confounders.size() != config.beta.size()) {
        throw Error(ErrorKind::DimensionMismatch, "one beta coefficient per confounder is required");
    }
    const std::size_t n = treatment[0].size();
    CounterRng rng(config.seed, StreamTag::outcome);
    TimePair y{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t t = 0; t < 2; ++t) {
        for (const auto* x : confounders) {
            if ((*x)[t].size() != n) throw Error(ErrorKind::DimensionMismatch, "confounder length differs from treatment");
        }
        for (std::size_t i = 0; i < n; ++i) {
            double value = config.alpha + treatment[t][i] * config.delta;
            for (std::size_t j = 0; j < confounders.size(); ++j) value += (*confounders[j])[t][i] * config.beta[j];
            y[t][i] = value + config.sigma * rng.normal();
        }
    }
    return y;
}

/// Schema of simulated panels: T, X1 (and X2 for bmi_like), Y.
[[nodiscard]] inline VariableSchema simulation_schema(Design design) {
    VariableSchema schema;
    schema.treatment_column = "T";
    schema.confounder_columns = {"X1"};
    if (design == Design::bmi_like) {
        schema.confounder_columns.push_back("X2");
        schema.variable_kinds["X2"] = VariableKind::binary;
    }
    schema.outcome_column = "Y";
    return schema;
}

[[nodiscard]] inline TwoPointPanel simulate_panel(const DgpConfig& config) {
    config.validate();
    auto x1 = generate_confounders(config.n, config.rho, config.drift, config.seed);
    auto draw = assign_treatment(config.design, config.n, config.seed);
    std::vector<const TimePair*> confounders{&x1};
    if (draw.indicator) confounders.push_back(&*draw.indicator);
    auto y = generate_outcomes(draw.treatment, confounders, config);

    std::vector<std::string> ids(config.n);
    for (std::size_t i = 0; i < config.n; ++i) ids[i] = std::to_string(i + 1);
    std::vector<std::string> names{"T", "X1"};
    std::vector<TimePair> values{std::move(draw.treatment), std::move(x1)};
    if (draw.indicator) {
        names.push_back("X2");
        values.push_back(std::move(*draw.indicator));
    }
    names.push_back("Y");
    values.push_back(std::move(y));
    return TwoPointPanel(simulation_schema(config.design), std::move(ids), std::move(names), std::move(values));
}

// ---------------------------------------------------------------------------
// Mediation model: T = time, X fixed over time,
// M = eta T + zeta X + nu, Y = delta T + gamma M + beta X + eps.

struct MediationDgpConfig {
    std::size_t n = 500;
    double delta = 1.0;
    double gamma = 0.5;
    double eta = 1.0;
    double zeta = 0.5;
    double beta = -1.0;
    double mediator_sd = 1.0;
    double sigma = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw Error(ErrorKind::InvalidConfig, "n must be at least 1");
        if (!(sigma >= 0.0) || !(mediator_sd >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise sd must be non-negative");
    }
};

[[nodiscard]] inline TwoPointPanel simulate_mediation_panel(const MediationDgpConfig& config) {
    config.validate();
    const std::size_t n = config.n;
    auto x = generate_confounders(n, 1.0, 0.0, config.seed);
    TimePair t{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    TimePair m{std::vector<double>(n), std::vector<double>(n)};
    TimePair y{std::vector<double>(n), std::vector<double>(n)};
    CounterRng mrng(config.seed, StreamTag::mediator);
    CounterRng yrng(config.seed, StreamTag::outcome);
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            m[k][i] = config.eta * t[k][i] + config.zeta * x[k][i] + config.mediator_sd * mrng.normal();
            y[k][i] = config.delta * t[k][i] + config.gamma * m[k][i] + config.beta * x[k][i] + config.sigma * yrng.normal();
        }
    }
    VariableSchema schema;
    schema.treatment_column = "T";
    schema.confounder_columns = {"X"};
    schema.mediator_column = "M";
    schema.outcome_column = "Y";
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
    return TwoPointPanel(std::move(schema), std::move(ids), {"T", "X", "M", "Y"},
                         {std::move(t), std::move(x), std::move(m), std::move(y)});
}

// ---------------------------------------------------------------------------
// MSE experiments

enum class Estimator { irand, pooled, did_regression, did_reorganized };

[[nodiscard]] inline std::string_view to_string(Estimator e) noexcept {
    switch (e) {
        case Estimator::irand: return "irand";
        case Estimator::pooled: return "pooled";
        case Estimator::did_regression: return "did_regression";
        case Estimator::did_reorganized: return "did_reorganized";
    }
    return "irand";
}

[[nodiscard]] inline Estimator parse_estimator(std::string_view text) {
    if (text == "irand") return Estimator::irand;
    if (text == "pooled") return Estimator::pooled;
    if (text == "did_regression") return Estimator::did_regression;
    if (text == "did_reorganized") return Estimator::did_reorganized;
    throw Error(ErrorKind::InvalidConfig, "unknown estimator '" + std::string(text) + "'");
}

/// FNV-1a over ids, names and the bit patterns of every value.
[[nodiscard]] inline std::uint64_t panel_fingerprint(const TwoPointPanel& panel) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t word) {
        for (int b = 0; b < 8; ++b) {
            h ^= (word >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    };
    auto mix_string = [&](const std::string& s) {
        for (unsigned char c : s) mix(c);
        mix(0xffULL);
    };
    for (const auto& id : panel.ids()) mix_string(id);
    for (std::size_t v = 0; v < panel.variables().size(); ++v) {
        mix_string(panel.variables()[v]);
        for (const auto& column : panel.pair(v)) {
            for (double x : column) mix(std::bit_cast<std::uint64_t>(x));
        }
    }
    return h;
}

struct MseOptions {
    std::vector<std::size_t> grid_n{50, 100, 200, 400};
    std::vector<double> grid_sigma{0.25, 0.5, 1.0, 2.0};
    std::vector<Estimator> estimators{Estimator::irand, Estimator::pooled, Estimator::did_regression};
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    std::size_t irand_subsamples = 50;
    SubsampleStrategy strategy = SubsampleStrategy::min_overlap;
    unsigned threads = 1;

    void validate() const {
        if (replicates < 2) throw Error(ErrorKind::InvalidConfig, "at least 2 replicates are required");
        if (grid_n.empty() || grid_sigma.empty()) throw Error(ErrorKind::InvalidConfig, "grid is empty");
        if (estimators.empty()) throw Error(ErrorKind::InvalidConfig, "no estimators selected");
        if (irand_subsamples < 1) throw Error(ErrorKind::InvalidConfig, "M must be at least 1");
        for (auto n : grid_n) {
            if (n < 2) throw Error(ErrorKind::InvalidConfig, "grid sample sizes must be at least 2");
        }
        for (auto s : grid_sigma) {
            if (!(s >= 0.0)) throw Error(ErrorKind::InvalidConfig, "grid noise levels must be non-negative");
        }
    }
};

struct MseCell {
    std::size_t n = 0;
    double sigma = 0.0;
    Estimator estimator = Estimator::irand;
    double mse = kNaN;
    double bias = kNaN;
    double variance = kNaN;
    std::size_t replicates = 0;  // successful replicates
    std::size_t failures = 0;
    std::vector<double> estimates;  // NaN where the estimator failed
};

struct MseSurface {
    DgpConfig base;
    MseOptions options;
    std::vector<MseCell> cells;  // grid_n-major, then grid_sigma, then estimator
    // Fingerprint of the panel every estimator consumed, per (grid cell, replicate).
    std::vector<std::vector<std::uint64_t>> panel_fingerprints;

    [[nodiscard]] const MseCell& cell(std::size_t n, double sigma, Estimator estimator) const {
        for (const auto& c : cells) {
            if (c.n == n && c.sigma == sigma && c.estimator == estimator) return c;
        }
        throw Error(ErrorKind::InvalidConfig, "no such grid cell");
    }
};

/// One estimate of delta from a simulated panel.
[[nodiscard]] inline double run_estimator(Estimator estimator, const TwoPointPanel& panel, std::uint64_t seed,
                                          std::size_t irand_subsamples, SubsampleStrategy strategy) {
    const auto spec = AnalysisSpec::from_schema(panel.schema());
    switch (estimator) {
        case Estimator::irand: {
            IrandConfig config;
            config.subsamples = irand_subsamples;
            config.permutations = 0;
            config.strategy = strategy;
            config.seed = seed;
            const auto report = irand_estimate(panel, spec, config);
            if (report.completed == 0) throw Error(ErrorKind::EmptyGroup, "every subsample was skipped");
            return report.mean_ate;
        }
        case Estimator::pooled: return pooled_estimate(panel, spec, 0, Tail::lower, seed).estimate.ate;
        case Estimator::did_regression: return did_regression_estimate(panel, spec).delta_hat;
        case Estimator::did_reorganized: return did_reorganized_estimate(panel, spec, 0, Tail::lower, seed).estimate.ate;
    }
    return kNaN;
}

[[nodiscard]] inline MseSurface run_mse_experiment(const DgpConfig& base, const MseOptions& options) {
    options.validate();
    MseSurface surface;
    surface.base = base;
    surface.options = options;
    const std::size_t n_cells = options.grid_n.size() * options.grid_sigma.size();
    const std::size_t n_est = options.estimators.size();
    const std::size_t reps = options.replicates;
    // estimates[(cell * n_est + e) * reps + r]
    std::vector<double> estimates(n_cells * n_est * reps, kNaN);
    surface.panel_fingerprints.assign(n_cells, std::vector<std::uint64_t>(reps, 0));

    parallel_for(n_cells * reps, options.threads, [&](std::size_t task) {
        const std::size_t cell = task / reps;
        const std::size_t r = task % reps;
        DgpConfig config = base;
        config.n = options.grid_n[cell / options.grid_sigma.size()];
        config.sigma = options.grid_sigma[cell % options.grid_sigma.size()];
        config.seed = derive_seed(options.seed, StreamTag::replicate, static_cast<std::uint32_t>(cell),
                                  static_cast<std::uint32_t>(r));
        const auto panel = simulate_panel(config);
        surface.panel_fingerprints[cell][r] = panel_fingerprint(panel);
        for (std::size_t e = 0; e < n_est; ++e) {
            double value = kNaN;
            try {
                value = run_estimator(options.estimators[e], panel, config.seed, options.irand_subsamples,
                                      options.strategy);
            } catch (const Error&) {
                value = kNaN;
            }
            estimates[(cell * n_est + e) * reps + r] = std::isfinite(value) ? value : kNaN;
        }
    });

    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        for (std::size_t e = 0; e < n_est; ++e) {
            MseCell out;
            out.n = options.grid_n[cell / options.grid_sigma.size()];
            out.sigma = options.grid_sigma[cell % options.grid_sigma.size()];
            out.estimator = options.estimators[e];
            const auto first = estimates.begin() + static_cast<std::ptrdiff_t>((cell * n_est + e) * reps);
            out.estimates.assign(first, first + static_cast<std::ptrdiff_t>(reps));
            double sum = 0.0;
            for (double v : out.estimates) {
                if (is_missing(v)) {
                    ++out.failures;
                } else {
                    sum += v;
                    ++out.replicates;
                }
            }
            if (out.replicates > 0) {
                const double mean = sum / static_cast<double>(out.replicates);
                double sq_err = 0.0, sq_dev = 0.0;
                for (double v : out.estimates) {
                    if (is_missing(v)) continue;
                    sq_err += (v - base.delta) * (v - base.delta);
                    sq_dev += (v - mean) * (v - mean);
                }
                out.mse = sq_err / static_cast<double>(out.replicates);
                out.variance = sq_dev / static_cast<double>(out.replicates);
                out.bias = mean - base.delta;
            }
            surface.cells.push_back(std::move(out));
        }
    }
    return surface;
}

}  // namespace irand
