#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "irand/simulation.hpp"

using namespace irand;

namespace {

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Confounders, FixedWhenRhoIsOne) {
    const auto x = generate_confounders(1000, 1.0, 0.0, 3);
    EXPECT_EQ(x[0], x[1]);
}

TEST(Confounders, AutocorrelationAndDrift) {
    const std::size_t n = 100000;
    const auto x = generate_confounders(n, 0.99, 1.0 / 12.0, 4);
    EXPECT_NEAR(correlation(x[0], x[1]), 0.99, 0.002);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[1][i] - x[0][i];
    // sd of the change is sqrt(2 - 2 rho) ~ 0.141.
    EXPECT_NEAR(mean(d), 1.0 / 12.0, 4 * 0.142 / std::sqrt(double(n)));
    EXPECT_NEAR(mean(x[0]), 0.0, 4 / std::sqrt(double(n)));
}

TEST(Confounders, IndependentWhenRhoIsZero) {
    const std::size_t n = 20000;
    const auto x = generate_confounders(n, 0.0, 0.0, 5);
    EXPECT_NEAR(correlation(x[0], x[1]), 0.0, 3 / std::sqrt(double(n)));
}

TEST(Confounders, RejectsRhoOutsideUnitInterval) {
    EXPECT_THROW((void)generate_confounders(3, 1.5, 0.0, 1), Error);
}

TEST(Treatment, LcdEqualsTime) {
    const auto d = assign_treatment(Design::lcd_like, 10, 1);
    EXPECT_EQ(d.treatment[0], std::vector<double>(10, 0.0));
    EXPECT_EQ(d.treatment[1], std::vector<double>(10, 1.0));
    EXPECT_FALSE(d.indicator.has_value());
}

TEST(Treatment, BmiLikeProbabilities) {
    const std::size_t n = 100000;
    const auto d = assign_treatment(Design::bmi_like, n, 7);
    const double p0 = mean(d.treatment[0]), p1 = mean(d.treatment[1]);
    const double se0 = std::sqrt(0.25 / n), se1 = std::sqrt(0.841 * 0.159 / n);
    EXPECT_NEAR(p0, 0.5, 4 * se0);
    EXPECT_NEAR(p1, 0.5 * std::erfc(-1.0 / std::sqrt(2.0)), 4 * se1);
    EXPECT_EQ((*d.indicator)[1], std::vector<double>(n, 1.0));
}

TEST(Outcomes, HandRows) {
    DgpConfig c;
    c.sigma = 0.0;
    const TimePair t{{{1.0}, {1.0}}};
    const TimePair x{{{2.0}, {2.0}}};
    const auto y = generate_outcomes(t, {&x}, c);
    EXPECT_EQ(y[0][0], -1.0);

    DgpConfig b = DgpConfig::bmi_like();
    b.sigma = 0.0;
    b.alpha = 0.5;
    const TimePair bt{{{0.0, 1.0, 1.0}, {1.0, 0.0, 1.0}}};
    const TimePair x1{{{0.3, -1.2, 2.0}, {0.1, 0.0, -0.5}}};
    const TimePair x2{{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}};
    const auto by = generate_outcomes(bt, {&x1, &x2}, b);
    // alpha + delta T - X1 + X2
    EXPECT_DOUBLE_EQ(by[0][0], 0.5 + 0.0 - 0.3 + 0.0);
    EXPECT_DOUBLE_EQ(by[0][1], 0.5 + 1.0 + 1.2 + 0.0);
    EXPECT_DOUBLE_EQ(by[0][2], 0.5 + 1.0 - 2.0 + 0.0);
    EXPECT_DOUBLE_EQ(by[1][0], 0.5 + 1.0 - 0.1 + 1.0);
    EXPECT_DOUBLE_EQ(by[1][1], 0.5 + 0.0 - 0.0 + 1.0);
    EXPECT_DOUBLE_EQ(by[1][2], 0.5 + 1.0 + 0.5 + 1.0);
    EXPECT_THROW((void)generate_outcomes(bt, {&x1}, b), Error);
}

TEST(Outcomes, NoiseHasRequestedSpread) {
    DgpConfig c;
    c.n = 50000;
    c.sigma = 2.0;
    c.seed = 8;
    const auto panel = simulate_panel(c);
    std::vector<double> e(c.n);
    for (std::size_t i = 0; i < c.n; ++i) e[i] = panel.values("Y", 0)[i] + panel.values("X1", 0)[i];
    const double m = mean(e);
    double ss = 0;
    for (double v : e) ss += (v - m) * (v - m);
    EXPECT_NEAR(std::sqrt(ss / double(c.n - 1)), 2.0, 0.03);
    EXPECT_NEAR(m, 0.0, 4 * 2.0 / std::sqrt(double(c.n)));
}

TEST(Outcomes, CenteredConfounderContributionVanishes) {
    DgpConfig c;
    c.n = 40000;
    c.seed = 9;
    const auto panel = simulate_panel(c);
    EXPECT_NEAR(-mean(panel.values("X1", 0)), 0.0, 4 / std::sqrt(double(c.n)));
}

TEST(SimulatePanel, SchemaAndValidation) {
    const auto p = simulate_panel(DgpConfig::bmi_like());
    EXPECT_EQ(p.variables(), (std::vector<std::string>{"T", "X1", "X2", "Y"}));
    EXPECT_EQ(p.schema().kind_of("X2"), VariableKind::binary);
    DgpConfig bad = DgpConfig::bmi_like();
    bad.beta = {-1.0};
    EXPECT_THROW(bad.validate(), Error);
    bad = DgpConfig{};
    bad.sigma = -1;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(SimulatePanel, Deterministic) {
    DgpConfig c = DgpConfig::lcd_drift();
    c.seed = 77;
    EXPECT_TRUE(simulate_panel(c) == simulate_panel(c));
    EXPECT_EQ(panel_fingerprint(simulate_panel(c)), panel_fingerprint(simulate_panel(c)));
    auto d = c;
    d.seed = 78;
    EXPECT_NE(panel_fingerprint(simulate_panel(c)), panel_fingerprint(simulate_panel(d)));
}

TEST(MediationPanel, StructuralEquations) {
    MediationDgpConfig c;
    c.n = 20;
    c.sigma = 0.0;
    c.mediator_sd = 0.0;
    const auto p = simulate_mediation_panel(c);
    for (int t = 0; t < 2; ++t) {
        for (std::size_t i = 0; i < c.n; ++i) {
            const double x = p.values("X", t)[i];
            const double m = c.eta * t + c.zeta * x;
            EXPECT_DOUBLE_EQ(p.values("M", t)[i], m);
            EXPECT_DOUBLE_EQ(p.values("Y", t)[i], c.delta * t + c.gamma * m + c.beta * x);
        }
    }
    EXPECT_EQ(p.schema().mediator_column, std::optional<std::string>("M"));
}

TEST(MseExperiment, DecompositionPairingAndDeterminism) {
    DgpConfig base = DgpConfig::lcd_drift();
    MseOptions o;
    o.grid_n = {30, 60};
    o.grid_sigma = {0.5};
    o.replicates = 6;
    o.irand_subsamples = 5;
    o.seed = 4;
    o.estimators = {Estimator::irand, Estimator::pooled, Estimator::did_regression, Estimator::did_reorganized};
    const auto s = run_mse_experiment(base, o);
    ASSERT_EQ(s.cells.size(), 8u);
    for (const auto& c : s.cells) {
        EXPECT_NEAR(c.mse, c.bias * c.bias + c.variance, 1e-10);
        double sq = 0;
        for (double e : c.estimates) {
            if (!is_missing(e)) sq += (e - base.delta) * (e - base.delta);
        }
        EXPECT_NEAR(c.mse, sq / double(c.replicates), 1e-12);
        EXPECT_EQ(c.replicates + c.failures, 6u);
    }
    ASSERT_EQ(s.panel_fingerprints.size(), 2u);
    for (const auto& cell : s.panel_fingerprints) ASSERT_EQ(cell.size(), 6u);
    // Every estimator of a replicate consumed this exact panel.
    for (std::size_t cell = 0; cell < 2; ++cell) {
        for (std::size_t r = 0; r < 6; ++r) {
            DgpConfig g = base;
            g.n = o.grid_n[cell];
            g.sigma = 0.5;
            g.seed = derive_seed(o.seed, StreamTag::replicate, static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(r));
            EXPECT_EQ(s.panel_fingerprints[cell][r], panel_fingerprint(simulate_panel(g)));
        }
    }
    o.threads = 3;
    const auto again = run_mse_experiment(base, o);
    for (std::size_t k = 0; k < s.cells.size(); ++k) EXPECT_EQ(s.cells[k].estimates, again.cells[k].estimates);
    EXPECT_EQ(s.panel_fingerprints, again.panel_fingerprints);
    EXPECT_DOUBLE_EQ(s.cell(60, 0.5, Estimator::pooled).mse, s.cells[5].mse);
}

TEST(MseExperiment, RejectsSingleReplicate) {
    MseOptions o;
    o.replicates = 1;
    EXPECT_THROW((void)run_mse_experiment(DgpConfig{}, o), Error);
}
