// Acceptance gate. Runs every primary criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is nonzero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../common/oracles.hpp"
#include "irand/cli.hpp"
#include "irand/inference.hpp"
#include "irand/mediation.hpp"
#include "irand/simulation.hpp"

using namespace irand;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Line {
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Line> lines;

void report(const std::string& name, bool pass, const std::string& detail) {
    lines.push_back({name, pass, detail});
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

unsigned threads() { return resolve_threads(0); }

MseSurface surface(const DgpConfig& base, std::vector<Estimator> estimators) {
    MseOptions o;
    o.estimators = std::move(estimators);
    o.replicates = 200;
    o.seed = kSeed;
    o.irand_subsamples = 50;
    o.threads = threads();
    return run_mse_experiment(base, o);
}

void print_table(const MseSurface& s, Estimator a, Estimator b) {
    std::printf("  %5s %6s %14s %14s %14s\n", "n", "sigma", to_string(a).data(), to_string(b).data(), "difference");
    for (auto n : s.options.grid_n) {
        for (auto sigma : s.options.grid_sigma) {
            const double ma = s.cell(n, sigma, a).mse, mb = s.cell(n, sigma, b).mse;
            std::printf("  %5zu %6.2f %14.6g %14.6g %14.6g\n", n, sigma, ma, mb, ma - mb);
        }
    }
}

// Figure-style surfaces.
void mse_orderings() {
    {
        const auto s = surface(DgpConfig::lcd_like(), {Estimator::irand, Estimator::pooled});
        print_table(s, Estimator::pooled, Estimator::irand);
        std::size_t good = 0, total = 0;
        for (auto n : s.options.grid_n) {
            for (auto sigma : s.options.grid_sigma) {
                ++total;
                good += s.cell(n, sigma, Estimator::pooled).mse - s.cell(n, sigma, Estimator::irand).mse > 0.0;
            }
        }
        report("mse_pooled_exceeds_irand_lcd", good == total,
               std::to_string(good) + "/" + std::to_string(total) + " cells with MSE(pooled) - MSE(I-Rand) > 0");
    }
    {
        const auto s = surface(DgpConfig::lcd_drift(), {Estimator::irand, Estimator::did_regression});
        print_table(s, Estimator::did_regression, Estimator::irand);
        std::size_t good = 0, total = 0;
        for (auto n : s.options.grid_n) {
            for (auto sigma : s.options.grid_sigma) {
                ++total;
                good += s.cell(n, sigma, Estimator::did_regression).mse - s.cell(n, sigma, Estimator::irand).mse > 0.0;
            }
        }
        report("mse_did_exceeds_irand_lcd_drift", good == total,
               std::to_string(good) + "/" + std::to_string(total) + " cells with MSE(DiD) - MSE(I-Rand) > 0");
    }
    {
        const auto s = surface(DgpConfig::bmi_like(), {Estimator::irand, Estimator::pooled, Estimator::did_regression});
        print_table(s, Estimator::pooled, Estimator::irand);
        print_table(s, Estimator::did_regression, Estimator::irand);
        std::size_t similar = 0, cells = 0, ordered = 0, small = 0;
        std::string worst_ratio, misordered;
        double worst = 0.0;
        for (auto n : s.options.grid_n) {
            for (auto sigma : s.options.grid_sigma) {
                const double irand = s.cell(n, sigma, Estimator::irand).mse;
                const double ratio = std::abs(s.cell(n, sigma, Estimator::pooled).mse - irand) / irand;
                ++cells;
                similar += ratio < 0.5;
                if (ratio > worst) {
                    worst = ratio;
                    worst_ratio = "n=" + std::to_string(n) + " sigma=" + fmt("%g", sigma);
                }
                if (n <= 100) {
                    ++small;
                    const bool ok = s.cell(n, sigma, Estimator::did_regression).mse > irand;
                    ordered += ok;
                    if (!ok) misordered += " n=" + std::to_string(n) + "/sigma=" + fmt("%g", sigma);
                }
            }
        }
        report("mse_pooled_similar_irand_bmi", similar == cells,
               std::to_string(similar) + "/" + std::to_string(cells) + " cells with ratio < 0.5; largest " +
                   fmt("%.3f", worst) + " at " + worst_ratio);
        report("mse_did_exceeds_irand_bmi_small_n", ordered == small,
               std::to_string(ordered) + "/" + std::to_string(small) + " cells at n <= 100" +
                   (misordered.empty() ? std::string() : "; reversed at" + misordered));
    }
}

void unbiasedness() {
    MseOptions o;
    o.grid_n = {200};
    o.grid_sigma = {0.5};
    o.estimators = {Estimator::irand};
    o.replicates = 500;
    o.irand_subsamples = 50;
    o.seed = kSeed;
    o.threads = threads();
    const auto s = run_mse_experiment(DgpConfig::lcd_like(), o);
    const auto& c = s.cells[0];
    const double mean = c.bias + 1.0;
    const double se = std::sqrt(c.variance * c.replicates / (c.replicates - 1.0) / c.replicates);
    report("irand_unbiased", c.failures == 0 && std::abs(c.bias) < 2.0 * se,
           "mean " + fmt("%.5f", mean) + ", 2 SE = " + fmt("%.5f", 2 * se) + " over " + std::to_string(c.replicates));
}

double ks_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
    }
    return d;
}

void null_calibration() {
    const std::size_t seeds = 200, s = 200;
    std::vector<double> p(seeds);
    parallel_for(seeds, threads(), [&](std::size_t k) {
        DgpConfig c;
        c.n = 100;
        c.delta = 0.0;
        c.seed = derive_seed(kSeed, StreamTag::replicate, 1000, static_cast<std::uint32_t>(k));
        const auto panel = simulate_panel(c);
        IrandConfig cfg;
        cfg.subsamples = 1;
        cfg.permutations = s;
        cfg.tail = Tail::lower;
        cfg.seed = c.seed;
        p[k] = irand_estimate(panel, AnalysisSpec::from_schema(panel.schema()), cfg).per_subsample[0].permutation.p_value;
    });
    const double d = ks_uniform(p);
    const double limit = 0.1 + 1.0 / static_cast<double>(s);
    report("null_p_values_uniform", d < limit,
           "KS statistic " + fmt("%.4f", d) + " < " + fmt("%.3f", limit) + " over " + std::to_string(seeds) + " seeds");
}

void matching_oracle() {
    std::size_t instances = 0, mismatches = 0;
    for (std::uint64_t seed = 0; instances < 1000; ++seed) {
        DgpConfig c = seed % 2 == 0 ? DgpConfig::lcd_drift() : DgpConfig::bmi_like();
        c.n = 4 + seed % 9;
        c.rho = 0.5;
        c.sigma = seed % 5 == 0 ? 0.0 : 0.5;
        c.seed = seed;
        const auto panel = simulate_panel(c);
        const auto plan = draw_subsamples(panel, 1, SubsampleStrategy::independent_uniform, seed);
        const auto cs = seed % 3 == 0 && c.n <= 6 ? pool(panel) : select_subsample(panel, plan.assignments[0]);
        MatchingUnits units;
        AteEstimate est;
        try {
            units = prepare_units(cs, AnalysisSpec::from_schema(panel.schema()));
            est = matching_ate(units);
        } catch (const Error&) {
            continue;
        }
        if (units.size() > 12) continue;
        ++instances;
        const auto scores = predict_propensity(fit_logistic(units.design, units.treatment), units.design);
        std::vector<std::vector<double>> rows(units.size());
        for (std::size_t i = 0; i < units.size(); ++i) {
            for (Eigen::Index j = 0; j < units.design.cols(); ++j) rows[i].push_back(units.design(static_cast<Eigen::Index>(i), j));
        }
        auto matches = oracle::brute_force_matches(scores, units.treatment, 1);
        if (!oracle::balanced(rows, units.treatment, matches, kBalanceThreshold)) {
            matches = oracle::brute_force_matches(scores, units.treatment, 3);
        }
        mismatches += est.ate != oracle::direct_ate(units.outcome, units.treatment, matches);
    }
    report("matching_oracle_exact", mismatches == 0,
           std::to_string(mismatches) + " mismatches over " + std::to_string(instances) + " instances (n <= 12)");
}

void permutation_oracle() {
    const std::size_t s = 2000;
    std::size_t instances = 0, outside = 0, enumeration_mismatch = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; instances < 50; ++seed) {
        DgpConfig c = DgpConfig::lcd_drift();
        c.n = 6;
        c.seed = seed;
        c.delta = seed % 2 == 0 ? 0.0 : 1.0;
        const auto panel = simulate_panel(c);
        const auto plan = draw_subsamples(panel, 1, SubsampleStrategy::min_overlap, seed);
        MatchingUnits units;
        double observed = 0.0;
        try {
            units = prepare_units(select_subsample(panel, plan.assignments[0]), AnalysisSpec::from_schema(panel.schema()));
            observed = matching_ate(units).ate;
        } catch (const Error&) {
            continue;
        }
        ++instances;
        const auto exact = permutation_test_exact(units, observed, Tail::lower);
        const double enumerated = oracle::enumerate_p_value(units.treatment, observed, true, [&](const std::vector<int>& l) {
            return matching_ate(units.design, units.design_names, l, units.outcome).ate;
        });
        enumeration_mismatch += exact.p_value != enumerated;
        const auto mc = permutation_test(units, observed, {s, Tail::lower, seed, 0, threads()});
        const double gap = std::abs(mc.p_value - exact.p_value);
        worst = std::max(worst, gap);
        outside += gap > 2.0 / std::sqrt(static_cast<double>(s));
    }
    report("permutation_oracle", outside == 0 && enumeration_mismatch == 0,
           std::to_string(instances) + " instances at n = 6, S = " + std::to_string(s) + "; largest gap " +
               fmt("%.4f", worst) + " vs bound " + fmt("%.4f", 2.0 / std::sqrt(double(s))));
}

bool identity_holds(const MediationReport& r) {
    bool ok = r.indirect.ate == r.total.ate - r.direct.ate;
    for (std::size_t m = 0; m < r.total.completed.size(); ++m) {
        if (!r.indirect.completed[m]) continue;
        ok = ok && r.indirect.subsample_ates[m] == r.total.subsample_ates[m] - r.direct.subsample_ates[m];
        const auto& n = r.indirect.null_distributions[m];
        for (std::size_t s = 0; s < n.size(); ++s) {
            ok = ok && n[s] == r.total.null_distributions[m][s] - r.direct.null_distributions[m][s];
        }
    }
    return ok;
}

void mediation() {
    const std::size_t seeds = 100;
    std::vector<MediationReport> reports(seeds);
    parallel_for(seeds, threads(), [&](std::size_t k) {
        MediationDgpConfig c;
        c.seed = derive_seed(kSeed, StreamTag::replicate, 2000, static_cast<std::uint32_t>(k));
        const auto panel = simulate_mediation_panel(c);
        auto spec = MediationSpec::from_schema(panel.schema());
        spec.config.subsamples = 50;
        spec.config.permutations = 0;
        spec.config.seed = c.seed;
        reports[k] = mediation_report(panel, spec);
    });
    std::size_t within = 0;
    double worst_total = 0, worst_direct = 0, worst_indirect = 0;
    for (const auto& r : reports) {
        const double et = std::abs(r.total.ate - 1.5), ed = std::abs(r.direct.ate - 1.0), ei = std::abs(r.indirect.ate - 0.5);
        worst_total = std::max(worst_total, et);
        worst_direct = std::max(worst_direct, ed);
        worst_indirect = std::max(worst_indirect, ei);
        within += et <= 0.15 && ed <= 0.15 && ei <= 0.15;
    }
    report("mediation_recovery", within == seeds,
           std::to_string(within) + "/" + std::to_string(seeds) + " seeds within 0.15; largest errors total " +
               fmt("%.3f", worst_total) + ", direct " + fmt("%.3f", worst_direct) + ", indirect " +
               fmt("%.3f", worst_indirect));

    // Identity on every run above plus runs with permutation nulls, both engines,
    // and an ordinal treatment.
    std::size_t runs = 0, broken = 0;
    for (const auto& r : reports) {
        ++runs;
        broken += !identity_holds(r);
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        MediationDgpConfig c;
        c.n = 150;
        c.seed = seed;
        c.gamma = seed % 2 == 0 ? 0.5 : -0.8;
        auto panel = simulate_mediation_panel(c);
        auto spec = MediationSpec::from_schema(panel.schema());
        spec.config.subsamples = 8;
        spec.config.permutations = 20;
        spec.config.seed = seed;
        spec.config.keep_null = true;
        spec.engine = seed % 3 == 0 ? Engine::pooled : Engine::irand;
        const auto r = mediation_report(panel, spec);
        ++runs;
        broken += !identity_holds(r);
        panel = discretize(panel, "X", {-0.5, 0.5}, "XL");
        MediationSpec ordinal;
        ordinal.treatment = "XL";
        ordinal.outcome = "Y";
        ordinal.mediator = "M";
        ordinal.config = spec.config;
        for (const auto& rr : mediation_contrasts(panel, ordinal)) {
            ++runs;
            broken += !identity_holds(rr);
        }
    }
    report("mediation_decomposition_identity", broken == 0,
           std::to_string(runs - broken) + "/" + std::to_string(runs) + " runs exact per aggregate, subsample and permutation");
}

void balance() {
    const std::size_t runs = 100;
    std::size_t subsample_pass = 0, pooled_pass = 0;
    for (std::size_t k = 0; k < runs; ++k) {
        DgpConfig c = DgpConfig::lcd_drift();
        c.n = 200;
        c.seed = derive_seed(kSeed, StreamTag::replicate, 3000, static_cast<std::uint32_t>(k));
        const auto panel = simulate_panel(c);
        const auto spec = AnalysisSpec::from_schema(panel.schema());
        const auto plan = draw_subsamples(panel, 1, SubsampleStrategy::min_overlap, c.seed);
        MatchingOptions strict;
        strict.retry_on_imbalance = false;
        const auto sub = matching_ate(select_subsample(panel, plan.assignments[0]), spec, strict);
        const auto pooled = matching_ate(pool(panel), spec, strict);
        subsample_pass += std::abs(sub.balance.differences[0]) < 0.25;
        pooled_pass += std::abs(pooled.balance.differences[0]) < 0.25;
    }
    const bool ok = subsample_pass * 100 >= 95 * runs && pooled_pass * 100 >= 95 * runs;
    report("post_matching_balance", ok,
           "k=1 matches with |SMD| < 0.25: subsample " + std::to_string(subsample_pass) + "/" + std::to_string(runs) +
               ", pooled " + std::to_string(pooled_pass) + "/" + std::to_string(runs));
}

void logistic() {
    std::size_t within = 0, monotone = 0;
    const std::size_t fits = 20;
    double worst = 0.0;
    for (std::size_t k = 0; k < fits; ++k) {
        const std::size_t n = 10000;
        CounterRng rng(kSeed, StreamTag::test, 4000, static_cast<std::uint32_t>(k));
        Eigen::MatrixXd x(n, 1);
        std::vector<int> t(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = rng.normal();
            x(static_cast<Eigen::Index>(i), 0) = v;
            t[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-v));
        }
        const auto m = fit_logistic(x, t);
        const double err = std::max(std::abs(m.coefficients[0]), std::abs(m.coefficients[1] - 1.0));
        worst = std::max(worst, err);
        within += m.converged && err <= 0.1;
        monotone += std::is_sorted(m.objective_trace.begin(), m.objective_trace.end());
    }
    report("logistic_recovery", within == fits && monotone == fits,
           std::to_string(within) + "/" + std::to_string(fits) + " fits within 0.1 (largest error " + fmt("%.4f", worst) +
               "), " + std::to_string(monotone) + "/" + std::to_string(fits) + " with non-decreasing objective");
}

// Runs the CLI in-process and returns stdout plus the bytes of every file it wrote.
std::string cli_output(std::vector<std::string> args, const std::vector<std::string>& files) {
    args.insert(args.begin(), "irand");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    std::string all = std::to_string(code) + "\n" + out.str() + err.str();
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        all += s.str();
    }
    return all;
}

void determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "irand_acceptance_determinism";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    std::size_t commands = 0, differing = 0;
    auto check = [&](const std::vector<std::string>& args, const std::vector<std::string>& files) {
        std::string first;
        for (const char* t : {"1", "2", "4"}) {
            for (int repeat = 0; repeat < 2; ++repeat) {
                auto a = args;
                a.insert(a.begin(), {"--seed", "17", "--threads", t});
                const auto got = cli_output(a, files);
                if (first.empty()) {
                    first = got;
                } else if (got != first) {
                    ++differing;
                    return;
                }
            }
        }
        ++commands;
        if (first.rfind("0\n", 0) != 0) ++differing;
    };
    check({"synth", "--missing", "--output", p("cohort.csv")}, {p("cohort.csv"), p("cohort.csv.config.json")});
    check({"synth", "--design", "mediation", "--n", "150", "--output", p("med.csv")}, {p("med.csv")});
    const std::vector<std::string> cohort{"--input", p("cohort.csv"), "--treatment", "LCD", "--outcome", "T2D",
                                          "--confounders", "Gender,Age", "--tail", "lower", "--m", "10", "--s", "20"};
    for (const char* est : {"irand", "pooled", "did_regression", "did_reorganized"}) {
        auto a = std::vector<std::string>{"estimate", "--estimator", est};
        a.insert(a.end(), cohort.begin(), cohort.end());
        check(a, {});
    }
    check({"mediate", "--input", p("med.csv"), "--treatment", "T", "--outcome", "Y", "--confounders", "X", "--mediator",
           "M", "--tail", "upper", "--m", "6", "--s", "10"},
          {});
    check({"mediate", "--input", p("cohort.csv"), "--treatment", "BMI", "--cuts", "25,30,35", "--outcome", "SBP",
           "--confounders", "Gender,Age", "--mediator", "T2D", "--ordinal", "T2D", "--tail", "upper", "--m", "4", "--s", "5"},
          {});
    check({"bench", "--output", p("bench.csv"), "--design", "bmi_like", "--grid-n", "30,60", "--grid-sigma", "0.5",
           "--replicates", "4", "--m", "5", "--estimators", "irand,pooled,did_regression,did_reorganized"},
          {p("bench.csv"), p("bench.csv.json")});
    report("determinism", differing == 0,
           std::to_string(commands - differing) + "/" + std::to_string(commands) +
               " commands byte-identical over repeats at 1, 2 and 4 threads");
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::pair<const char*, std::function<void()>>> steps{
        {"mse surfaces", mse_orderings},  {"unbiasedness", unbiasedness}, {"null calibration", null_calibration},
        {"matching oracle", matching_oracle}, {"permutation oracle", permutation_oracle}, {"mediation", mediation},
        {"balance", balance},              {"logistic", logistic},         {"determinism", determinism},
    };
    for (const auto& [name, step] : steps) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            step();
        } catch (const std::exception& e) {
            report(name, false, std::string("threw: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("  (%s: %.1f s)\n", name, secs);
    }
    std::size_t failed = 0;
    for (const auto& l : lines) failed += !l.pass;
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("\n%zu/%zu criteria passed in %.1f s\n", lines.size() - failed, lines.size(), total);
    for (const auto& l : lines) {
        if (!l.pass) std::printf("  failed: %s\n", l.name.c_str());
    }
    return failed == 0 ? 0 : 1;
}
