#pragma once

// Command-line front end: synth, estimate, mediate, bench.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// On failure a JSON object {"error": {...}} is written to the error stream.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irand/json_io.hpp"
#include "irand/mediation.hpp"
#include "irand/simulation.hpp"
#include "irand/synthesize.hpp"

namespace irand::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

[[nodiscard]] inline int exit_code(ErrorKind kind) noexcept {
    switch (classify(kind)) {
        case ErrorClass::usage: return kUsage;
        case ErrorClass::numeric: return kNumeric;
        case ErrorClass::data: return kData;
    }
    return kData;
}

inline void write_error(std::ostream& err, std::string_view kind, const std::string& message, int code) {
    Json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    err << j.dump() << '\n';
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto trimmed = irand::detail::trim(item);
        if (!trimmed.empty()) out.emplace_back(trimmed);
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        const auto v = irand::detail::parse_number(item);
        if (!v) throw Error(ErrorKind::InvalidConfig, flag + ": '" + item + "' is not a number");
        out.push_back(*v);
    }
    return out;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& flag) {
    std::vector<std::size_t> out;
    for (double v : parse_doubles(text, flag)) {
        if (v < 0 || v != std::floor(v)) throw Error(ErrorKind::InvalidConfig, flag + " takes non-negative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    file << text;
    if (!file) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

}  // namespace detail

// Options shared by the analysis commands.
struct AnalysisArgs {
    std::string input;
    std::string output;
    std::string id_column = "id";
    std::string time_column = "time";
    std::string treatment;
    std::string outcome;
    std::string confounders;
    std::string ordinal;
    std::string tail;
    std::string strategy = "min_overlap";
    std::size_t m = 500;
    std::size_t s = 500;
    std::size_t k = 1;
    std::string contrast;
};

inline void add_analysis_options(CLI::App& cmd, AnalysisArgs& a) {
    cmd.add_option("--input,-i", a.input, "Long-format panel CSV")->required();
    cmd.add_option("--output,-o", a.output, "JSON report path (default: stdout)");
    cmd.add_option("--id-column", a.id_column, "Individual id column")->capture_default_str();
    cmd.add_option("--time-column", a.time_column, "Visit column (0/1)")->capture_default_str();
    cmd.add_option("--treatment", a.treatment, "Treatment column")->required();
    cmd.add_option("--outcome", a.outcome, "Outcome column")->required();
    cmd.add_option("--confounders", a.confounders, "Comma-separated confounder columns");
    cmd.add_option("--ordinal", a.ordinal, "Comma-separated columns to treat as ordinal");
    cmd.add_option("--tail", a.tail, "Permutation test tail")->check(CLI::IsMember({"lower", "upper", "two_sided"}));
    cmd.add_option("--strategy", a.strategy, "Subsampling strategy")
        ->check(CLI::IsMember({"min_overlap", "independent_uniform"}))
        ->capture_default_str();
    cmd.add_option("--m", a.m, "Number of subsamples")->capture_default_str();
    cmd.add_option("--s", a.s, "Permutations per subsample (0 disables the test)")->capture_default_str();
    cmd.add_option("--k", a.k, "Neighbours per unit")->capture_default_str();
    cmd.add_option("--contrast", a.contrast, "Control and treated levels of an ordinal treatment, e.g. 1,2");
}

inline VariableSchema analysis_schema(const AnalysisArgs& a, bool binary_treatment) {
    VariableSchema schema;
    schema.id_column = a.id_column;
    schema.time_column = a.time_column;
    if (binary_treatment) schema.treatment_column = a.treatment;
    schema.confounder_columns = detail::split_list(a.confounders);
    schema.outcome_column = a.outcome;
    for (const auto& name : detail::split_list(a.ordinal)) schema.variable_kinds[name] = VariableKind::ordinal;
    return schema;
}

inline std::optional<Contrast> parse_contrast(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto v = detail::parse_doubles(text, "--contrast");
    if (v.size() != 2 || v[0] == v[1]) throw Error(ErrorKind::InvalidConfig, "--contrast takes two distinct levels");
    return Contrast{v[0], v[1]};
}

inline IrandConfig irand_config(const AnalysisArgs& a, std::uint64_t seed, unsigned threads) {
    IrandConfig c;
    c.subsamples = a.m;
    c.permutations = a.s;
    c.tail = a.tail.empty() ? Tail::lower : parse_tail(a.tail);
    c.strategy = parse_strategy(a.strategy);
    c.seed = seed;
    c.threads = threads;
    c.matching.k = a.k;
    if (a.k < 1) throw Error(ErrorKind::InvalidConfig, "--k must be at least 1");
    return c;
}

inline Json analysis_echo(const AnalysisArgs& a, const std::string& command, std::uint64_t seed) {
    Json j{{"command", command},
           {"input", a.input},
           {"id_column", a.id_column},
           {"time_column", a.time_column},
           {"treatment", a.treatment},
           {"outcome", a.outcome},
           {"confounders", detail::split_list(a.confounders)},
           {"ordinal", detail::split_list(a.ordinal)},
           {"seed", seed}};
    j["tail"] = a.tail.empty() ? Json(nullptr) : Json(a.tail);
    if (!a.contrast.empty()) j["contrast"] = detail::parse_doubles(a.contrast, "--contrast");
    return j;
}

inline void require_tail(const AnalysisArgs& a, bool uses_permutations) {
    if (uses_permutations && a.s > 0 && a.tail.empty()) {
        throw Error(ErrorKind::InvalidConfig, "--tail is required for permutation-based estimators");
    }
}

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(int argc, const char* const* argv) {
        CLI::App app{"Causal effects from two-point panels without a control group"};
        app.set_config("--config", "", "TOML config file; command-line flags take precedence");
        app.add_option("--seed", seed_, "Master seed")->capture_default_str();
        app.add_option("--threads", threads_, "Worker threads (0 = all cores); output does not depend on it")
            ->capture_default_str();
        app.require_subcommand(1);

        auto* synth = app.add_subcommand("synth", "Write a synthetic two-point panel");
        synth->add_option("--output,-o", synth_output_, "Panel CSV path")->required();
        synth->add_option("--n", synth_n_, "Individuals")->capture_default_str();
        synth->add_option("--design", synth_design_, "cohort, lcd_like, lcd_drift, bmi_like or mediation")
            ->check(CLI::IsMember({"cohort", "lcd_like", "lcd_drift", "bmi_like", "mediation"}))
            ->capture_default_str();
        synth->add_option("--summary", summary_path_, "Summary-statistics JSON (default: bundled cohort summary)");
        synth->add_flag("--missing", synth_missing_, "Blank cells in proportion to the summary counts");
        add_dgp_options(*synth);

        auto* estimate = app.add_subcommand("estimate", "Estimate a treatment effect");
        add_analysis_options(*estimate, analysis_);
        estimate->add_option("--estimator", estimator_, "irand, pooled, did_regression or did_reorganized")
            ->check(CLI::IsMember({"irand", "pooled", "did_regression", "did_reorganized"}))
            ->required();
        estimate->add_flag("--plan", emit_plan_, "Include the subsample plan in the report");

        auto* mediate = app.add_subcommand("mediate", "Total, direct and indirect effects");
        add_analysis_options(*mediate, analysis_);
        mediate->add_option("--mediator", mediator_, "Mediator column")->required();
        mediate->add_option("--engine", engine_, "irand or pooled")
            ->check(CLI::IsMember({"irand", "pooled"}))
            ->capture_default_str();
        mediate->add_option("--cuts", cuts_, "Cut points turning a numeric treatment into ordinal levels");

        auto* bench = app.add_subcommand("bench", "Monte-Carlo MSE surfaces");
        bench->add_option("--output,-o", bench_output_, "CSV path")->required();
        bench->add_option("--json", bench_json_, "JSON path (default: <output>.json)");
        bench->add_option("--design", bench_design_, "lcd_like, lcd_drift or bmi_like")
            ->check(CLI::IsMember({"lcd_like", "lcd_drift", "bmi_like"}))
            ->capture_default_str();
        bench->add_option("--grid-n", grid_n_, "Comma-separated sample sizes")->capture_default_str();
        bench->add_option("--grid-sigma", grid_sigma_, "Comma-separated noise levels")->capture_default_str();
        bench->add_option("--replicates", replicates_, "Replicates per cell")->capture_default_str();
        bench->add_option("--estimators", bench_estimators_, "Comma-separated estimators")->capture_default_str();
        bench->add_option("--m", bench_m_, "I-Rand subsamples per replicate")->capture_default_str();
        add_dgp_options(*bench);

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp&) {
            out_ << app.help();
            return kOk;
        } catch (const CLI::CallForAllHelp&) {
            out_ << app.help("", CLI::AppFormatMode::All);
            return kOk;
        } catch (const CLI::ParseError& e) {
            write_error(err_, "Usage", e.what(), kUsage);
            return kUsage;
        }

        try {
            if (*synth) return cmd_synth();
            if (*estimate) return cmd_estimate();
            if (*mediate) return cmd_mediate();
            if (*bench) return cmd_bench();
        } catch (const Error& e) {
            const int code = exit_code(e.kind());
            write_error(err_, to_string(e.kind()), e.what(), code);
            return code;
        } catch (const nlohmann::json::exception& e) {
            write_error(err_, "InvalidData", e.what(), kData);
            return kData;
        } catch (const std::exception& e) {
            write_error(err_, "NumericFailure", e.what(), kNumeric);
            return kNumeric;
        }
        return kUsage;
    }

private:
    void add_dgp_options(CLI::App& cmd) {
        cmd.add_option("--delta", dgp_delta_, "Treatment effect");
        cmd.add_option("--alpha", dgp_alpha_, "Intercept");
        cmd.add_option("--beta", dgp_beta_, "Comma-separated confounder coefficients");
        cmd.add_option("--sigma", dgp_sigma_, "Outcome noise sd");
        cmd.add_option("--rho", dgp_rho_, "Confounder autocorrelation");
        cmd.add_option("--drift", dgp_drift_, "Confounder drift between visits");
    }

    DgpConfig dgp_config(const std::string& design) const {
        DgpConfig c = design == "bmi_like" ? DgpConfig::bmi_like()
                      : design == "lcd_drift" ? DgpConfig::lcd_drift()
                                              : DgpConfig::lcd_like();
        if (dgp_delta_) c.delta = *dgp_delta_;
        if (dgp_alpha_) c.alpha = *dgp_alpha_;
        if (dgp_beta_) c.beta = detail::parse_doubles(*dgp_beta_, "--beta");
        if (dgp_sigma_) c.sigma = *dgp_sigma_;
        if (dgp_rho_) c.rho = *dgp_rho_;
        if (dgp_drift_) c.drift = *dgp_drift_;
        return c;
    }

    int cmd_synth() {
        Json echo{{"command", "synth"}, {"design", synth_design_}, {"n", synth_n_}, {"seed", seed_}};
        std::optional<TwoPointPanel> panel;
        if (synth_design_ == "cohort") {
            const auto summary = summary_path_.empty() ? cohort_summary() : load_summary(summary_path_);
            echo["summary"] = summary_path_.empty() ? Json("bundled") : Json(summary_path_);
            echo["missing"] = synth_missing_;
            echo["summary_statistics"] = to_json(summary);
            panel = synthesize_panel(summary, {synth_n_, seed_, synth_missing_});
        } else if (synth_design_ == "mediation") {
            MediationDgpConfig c;
            c.n = synth_n_;
            c.seed = seed_;
            if (dgp_delta_) c.delta = *dgp_delta_;
            if (dgp_sigma_) c.sigma = *dgp_sigma_;
            echo["dgp"] = {{"delta", c.delta}, {"gamma", c.gamma}, {"eta", c.eta}, {"zeta", c.zeta},
                           {"beta", c.beta}, {"mediator_sd", c.mediator_sd}, {"sigma", c.sigma}};
            panel = simulate_mediation_panel(c);
        } else {
            auto c = dgp_config(synth_design_);
            c.n = synth_n_;
            c.seed = seed_;
            echo["dgp"] = to_json(c);
            echo["dgp"]["sigma"] = c.sigma;
            panel = simulate_panel(c);
        }
        echo["output"] = synth_output_;
        std::ostringstream csv;
        write_panel(csv, *panel);
        detail::write_text(synth_output_, csv.str(), out_);
        detail::write_text(synth_output_ + ".config.json", echo.dump(2) + "\n", out_);
        out_ << "wrote " << 2 * panel->n_individuals() << " rows (" << panel->n_individuals() << " individuals) to "
             << synth_output_ << '\n';
        return kOk;
    }

    int cmd_estimate() {
        const auto& a = analysis_;
        const auto contrast = parse_contrast(a.contrast);
        const bool permutes = estimator_ != "did_regression";
        require_tail(a, permutes);
        const auto panel = load_panel(a.input, analysis_schema(a, !contrast));
        AnalysisSpec spec{a.treatment, a.outcome, detail::split_list(a.confounders), contrast};
        const auto config = irand_config(a, seed_, threads_);

        Json echo = analysis_echo(a, "estimate", seed_);
        echo["estimator"] = estimator_;
        Json result;
        if (estimator_ == "irand") {
            echo["irand"] = to_json(config);
            const auto plan = draw_subsamples(panel, config.subsamples, config.strategy, config.seed);
            result = to_json(irand_estimate(panel, spec, config, plan));
            if (emit_plan_) result["plan"] = to_json(plan);
        } else if (estimator_ == "pooled") {
            echo["s"] = a.s;
            echo["matching"] = to_json(config.matching);
            result = to_json(pooled_estimate(panel, spec, a.s, config.tail, seed_, config.matching, threads_));
        } else if (estimator_ == "did_regression") {
            result = to_json(did_regression_estimate(panel, spec));
        } else {
            echo["s"] = a.s;
            echo["matching"] = to_json(config.matching);
            result = to_json(did_reorganized_estimate(panel, spec, a.s, config.tail, seed_, config.matching, threads_));
        }
        Json report{{"config", std::move(echo)}, {"result", std::move(result)}};
        detail::write_text(a.output, report.dump(2) + "\n", out_);
        return kOk;
    }

    int cmd_mediate() {
        const auto& a = analysis_;
        require_tail(a, true);
        auto contrast = parse_contrast(a.contrast);
        const auto cuts = cuts_.empty() ? std::vector<double>{} : detail::parse_doubles(cuts_, "--cuts");
        const bool ordinal_treatment = !cuts.empty() || contrast ||
                                       std::ranges::count(detail::split_list(a.ordinal), a.treatment) > 0;
        auto schema = analysis_schema(a, !ordinal_treatment);
        schema.mediator_column = mediator_;
        auto panel = load_panel(a.input, schema);

        MediationSpec spec;
        spec.treatment = a.treatment;
        spec.outcome = a.outcome;
        spec.confounders = detail::split_list(a.confounders);
        spec.mediator = mediator_;
        spec.engine = parse_engine(engine_);
        spec.config = irand_config(a, seed_, threads_);
        spec.contrast = contrast;
        if (!cuts.empty()) {
            spec.treatment = a.treatment + "_level";
            panel = discretize(panel, a.treatment, cuts, spec.treatment);
        }

        Json echo = analysis_echo(a, "mediate", seed_);
        echo["mediator"] = mediator_;
        echo["engine"] = engine_;
        echo["irand"] = to_json(spec.config);
        echo["cuts"] = cuts;
        Json reports = Json::array();
        if (ordinal_treatment && !contrast) {
            for (const auto& r : mediation_contrasts(panel, spec)) reports.push_back(to_json(r));
            if (reports.empty()) throw Error(ErrorKind::EmptyGroup, "treatment has fewer than two observed levels");
        } else {
            reports.push_back(to_json(mediation_report(panel, spec)));
        }
        Json report{{"config", std::move(echo)}, {"reports", std::move(reports)}};
        detail::write_text(a.output, report.dump(2) + "\n", out_);
        return kOk;
    }

    int cmd_bench() {
        MseOptions options;
        options.grid_n = detail::parse_sizes(grid_n_, "--grid-n");
        options.grid_sigma = detail::parse_doubles(grid_sigma_, "--grid-sigma");
        options.replicates = replicates_;
        options.estimators.clear();
        for (const auto& e : detail::split_list(bench_estimators_)) options.estimators.push_back(parse_estimator(e));
        options.irand_subsamples = bench_m_;
        options.seed = seed_;
        options.threads = threads_;
        const auto base = dgp_config(bench_design_);
        base.validate();
        const auto surface = run_mse_experiment(base, options);

        std::ostringstream csv;
        write_mse_csv(csv, surface, bench_design_);
        detail::write_text(bench_output_, csv.str(), out_);
        Json report{{"config", {{"command", "bench"}, {"design", bench_design_}, {"seed", seed_}}},
                    {"result", to_json(surface)}};
        report["result"]["failures"] = 0;
        std::size_t failures = 0;
        for (const auto& c : surface.cells) failures += c.failures;
        report["result"]["failures"] = failures;
        const auto json_path = bench_json_.empty() ? bench_output_ + ".json" : bench_json_;
        detail::write_text(json_path, report.dump(2) + "\n", out_);
        return kOk;
    }

    std::ostream& out_;
    std::ostream& err_;
    std::uint64_t seed_ = 0;
    unsigned threads_ = 1;

    std::string synth_output_;
    std::size_t synth_n_ = 256;
    std::string synth_design_ = "cohort";
    std::string summary_path_;
    bool synth_missing_ = false;

    std::optional<double> dgp_delta_, dgp_alpha_, dgp_sigma_, dgp_rho_, dgp_drift_;
    std::optional<std::string> dgp_beta_;

    AnalysisArgs analysis_;
    std::string estimator_;
    bool emit_plan_ = false;
    std::string mediator_;
    std::string engine_ = "irand";
    std::string cuts_;

    std::string bench_output_;
    std::string bench_json_;
    std::string bench_design_ = "lcd_like";
    std::string grid_n_ = "50,100,200,400";
    std::string grid_sigma_ = "0.25,0.5,1,2";
    std::size_t replicates_ = 200;
    std::string bench_estimators_ = "irand,pooled,did_regression";
    std::size_t bench_m_ = 50;
};

[[nodiscard]] inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
                             std::ostream& err = std::cerr) {
    return Runner(out, err).run(argc, argv);
}

}  // namespace irand::cli
