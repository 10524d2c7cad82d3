#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "irand/cli.hpp"
#include "support.hpp"

using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "irand");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = irand::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override { dir_ = irand::test::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::filesystem::path dir_;
};

}  // namespace

TEST_F(Cli, SynthDefaultWrites512Rows) {
    const auto r = run({"synth", "--output", path("p.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(irand::test::read_file(path("p.csv"))), 513u);
    EXPECT_NE(r.out.find("512 rows"), std::string::npos);
    const auto echo = json::parse(irand::test::read_file(path("p.csv.config.json")));
    EXPECT_EQ(echo["n"], 256);
    EXPECT_EQ(echo["design"], "cohort");
}

TEST_F(Cli, SynthSingleIndividual) {
    ASSERT_EQ(run({"synth", "--n", "1", "--output", path("p.csv")}).code, 0);
    EXPECT_EQ(line_count(irand::test::read_file(path("p.csv"))), 3u);
}

TEST_F(Cli, SynthIsDeterministic) {
    ASSERT_EQ(run({"--seed", "9", "synth", "--missing", "--output", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"--seed", "9", "synth", "--missing", "--output", path("b.csv")}).code, 0);
    ASSERT_EQ(run({"--seed", "10", "synth", "--missing", "--output", path("c.csv")}).code, 0);
    EXPECT_EQ(irand::test::read_file(path("a.csv")), irand::test::read_file(path("b.csv")));
    EXPECT_NE(irand::test::read_file(path("a.csv")), irand::test::read_file(path("c.csv")));
}

TEST_F(Cli, SynthFromSummaryFile) {
    const auto summary = path("s.json");
    std::ofstream(summary) << irand::to_json(irand::cohort_summary()).dump();
    ASSERT_EQ(run({"synth", "--summary", summary, "--output", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"synth", "--output", path("b.csv")}).code, 0);
    EXPECT_EQ(irand::test::read_file(path("a.csv")), irand::test::read_file(path("b.csv")));
    std::ofstream(path("bad.json")) << R"({"roles": {"treatment": "T", "outcome": "Y"}, "variables": [{"name": "Y", "kind": "continuous", "baseline": {"mean": 1, "sd": -1, "min": 0, "max": 2}}]})";
    const auto bad = run({"synth", "--summary", path("bad.json"), "--output", path("c.csv")});
    EXPECT_EQ(bad.code, 2);
    EXPECT_EQ(json::parse(bad.err)["error"]["kind"], "InvalidSummary");
}

TEST_F(Cli, EstimateIrandOnSyntheticCohort) {
    ASSERT_EQ(run({"synth", "--output", path("p.csv")}).code, 0);
    const auto r = run({"estimate", "--input", path("p.csv"), "--estimator", "irand", "--treatment", "LCD", "--outcome",
                        "T2D", "--confounders", "Gender,Age", "--ordinal", "T2D", "--tail", "lower", "--m", "20", "--s",
                        "40", "--plan"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_LT(j["result"]["mean_ate"].get<double>(), 0.0);
    EXPECT_LT(j["result"]["mean_p_value"].get<double>(), 0.05);
    EXPECT_EQ(j["result"]["per_subsample"].size(), 20u);
    EXPECT_EQ(j["result"]["plan"]["assignments"].size(), 20u);
    EXPECT_EQ(j["config"]["tail"], "lower");
    EXPECT_EQ(j["config"]["irand"]["m"], 20);
}

TEST_F(Cli, EstimatePooledAndDidVariants) {
    ASSERT_EQ(run({"synth", "--output", path("p.csv")}).code, 0);
    const std::vector<std::string> common{"--input", path("p.csv"), "--treatment", "LCD", "--outcome", "T2D",
                                          "--confounders", "Gender,Age", "--s", "20", "--tail", "lower"};
    auto with = [&](std::string estimator) {
        auto args = std::vector<std::string>{"estimate", "--estimator", estimator};
        args.insert(args.end(), common.begin(), common.end());
        return run(args);
    };
    const auto pooled = with("pooled");
    ASSERT_EQ(pooled.code, 0) << pooled.err;
    EXPECT_TRUE(json::parse(pooled.out)["result"]["permutation"].contains("p_value"));
    const auto reorganized = with("did_reorganized");
    ASSERT_EQ(reorganized.code, 0) << reorganized.err;
    const auto did = with("did_regression");
    ASSERT_EQ(did.code, 0) << did.err;
    // Gender never changes: its difference column is zero.
    EXPECT_TRUE(json::parse(did.out)["result"]["collinear"].get<bool>());
}

TEST_F(Cli, DidRegressionFlagsCollinearLcdDesign) {
    ASSERT_EQ(run({"synth", "--design", "lcd_like", "--n", "50", "--output", path("p.csv")}).code, 0);
    const auto r = run({"estimate", "--estimator", "did_regression", "--input", path("p.csv"), "--treatment", "T",
                        "--outcome", "Y", "--confounders", "X1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(json::parse(r.out)["result"]["collinear"].get<bool>());
}

TEST_F(Cli, ErrorsCarryExitCodes) {
    ASSERT_EQ(run({"synth", "--design", "lcd_like", "--n", "20", "--output", path("p.csv")}).code, 0);
    // Missing tail for a permutation estimator: usage.
    auto r = run({"estimate", "--estimator", "irand", "--input", path("p.csv"), "--treatment", "T", "--outcome", "Y"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "InvalidConfig");
    // Unknown flag: usage.
    EXPECT_EQ(run({"estimate", "--bogus"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    // Missing column: data.
    r = run({"estimate", "--estimator", "did_regression", "--input", path("p.csv"), "--treatment", "T", "--outcome", "Z"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "MissingColumn");
    // Missing file: data.
    r = run({"estimate", "--estimator", "did_regression", "--input", path("none.csv"), "--treatment", "T", "--outcome", "Y"});
    EXPECT_EQ(r.code, 2);
    // Malformed panel: data.
    std::ofstream(path("dup.csv")) << "id,time,T,X,Y\n7,0,0,1,1\n7,0,1,1,1\n7,1,1,1,1\n";
    r = run({"estimate", "--estimator", "did_regression", "--input", path("dup.csv"), "--treatment", "T", "--outcome", "Y"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "DuplicateTimePoint");
    // Non-finite confounder reaches the propensity fit: numeric.
    std::ofstream(path("inf.csv")) << "id,time,T,X,Y\n1,0,0,inf,1\n1,1,1,2,3\n2,0,0,3,1\n2,1,1,4,1\n";
    r = run({"estimate", "--estimator", "pooled", "--input", path("inf.csv"), "--treatment", "T", "--outcome", "Y",
             "--confounders", "X", "--s", "0"});
    EXPECT_EQ(r.code, 3) << r.err;
    // An ordinal treatment restricted to two levels by a contrast.
    std::ofstream(path("levels.csv")) << "id,time,L,X,Y\n1,0,1,1,1\n1,1,1,2,3\n2,0,1,3,1\n2,1,2,4,1\n";
    r = run({"estimate", "--estimator", "pooled", "--input", path("levels.csv"), "--treatment", "L", "--outcome", "Y",
             "--confounders", "X", "--contrast", "1,2", "--s", "0"});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    ASSERT_EQ(run({"synth", "--design", "lcd_like", "--n", "40", "--output", path("p.csv")}).code, 0);
    std::ofstream(path("run.toml")) << "seed = 5\n[estimate]\nestimator = \"irand\"\ninput = \"" << path("p.csv")
                                    << "\"\ntreatment = \"T\"\noutcome = \"Y\"\nconfounders = \"X1\"\ntail = \"upper\"\n"
                                       "m = 4\ns = 5\n";
    const auto a = run({"--config", path("run.toml"), "estimate"});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto ja = json::parse(a.out);
    EXPECT_EQ(ja["config"]["seed"], 5);
    EXPECT_EQ(ja["config"]["irand"]["m"], 4);
    const auto b = run({"--config", path("run.toml"), "estimate", "--m", "3"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(json::parse(b.out)["config"]["irand"]["m"], 3);
}

TEST_F(Cli, OutputDoesNotDependOnThreads) {
    ASSERT_EQ(run({"synth", "--design", "bmi_like", "--n", "60", "--output", path("p.csv")}).code, 0);
    std::string first;
    for (const char* threads : {"1", "2", "4"}) {
        const auto r = run({"--threads", threads, "estimate", "--estimator", "irand", "--input", path("p.csv"),
                            "--treatment", "T", "--outcome", "Y", "--confounders", "X1,X2", "--tail", "upper", "--m",
                            "8", "--s", "10"});
        ASSERT_EQ(r.code, 0) << r.err;
        if (first.empty()) first = r.out;
        EXPECT_EQ(r.out, first);
    }
}

TEST_F(Cli, MediateIdentityAndContrasts) {
    ASSERT_EQ(run({"synth", "--design", "mediation", "--n", "200", "--output", path("m.csv")}).code, 0);
    auto r = run({"mediate", "--input", path("m.csv"), "--treatment", "T", "--outcome", "Y", "--confounders", "X",
                  "--mediator", "M", "--tail", "upper", "--m", "6", "--s", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    ASSERT_EQ(j["reports"].size(), 1u);
    const auto& rep = j["reports"][0];
    EXPECT_EQ(rep["indirect"]["ate"].get<double>(), rep["total"]["ate"].get<double>() - rep["direct"]["ate"].get<double>());
    EXPECT_GT(rep["direct"]["ate"].get<double>(), 0.0);
    EXPECT_GT(rep["indirect"]["ate"].get<double>(), 0.0);

    ASSERT_EQ(run({"synth", "--missing", "--output", path("c.csv")}).code, 0);
    r = run({"mediate", "--input", path("c.csv"), "--treatment", "BMI", "--cuts", "25,30,35", "--outcome", "SBP",
             "--confounders", "Gender,Age", "--mediator", "T2D", "--ordinal", "T2D", "--engine", "pooled", "--tail",
             "upper", "--s", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    j = json::parse(r.out);
    ASSERT_EQ(j["reports"].size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(j["reports"][k]["graph"]["contrast"]["treated_level"], double(k + 1));
    }
}

TEST_F(Cli, BenchShape) {
    const auto r = run({"bench", "--output", path("b.csv"), "--grid-n", "20,30", "--grid-sigma", "0.5,1", "--replicates",
                        "2", "--m", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = irand::test::read_file(path("b.csv"));
    EXPECT_EQ(line_count(csv), 1u + 2 * 2 * 3);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "design,n,sigma,estimator,mse,bias,variance,replicates");
    const auto j = json::parse(irand::test::read_file(path("b.csv.json")));
    EXPECT_EQ(j["result"]["cells"].size(), 12u);
}
