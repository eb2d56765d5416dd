#include "turnpike/io.hpp"
#include "turnpike/model_file.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using turnpike::Json;
using turnpike::read_text;

namespace {

struct Result
{
    int code = -1;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        auto const* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("turnpike-cli-" + std::string(info->name()) + "-" + std::to_string(getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    static std::string model(std::string const& name) { return std::string(TURNPIKE_MODELS_DIR) + "/" + name; }

    /// Runs the CLI with --out and --cache inside the test directory.
    Result run(std::string const& args, std::string const& out = "out")
    {
        std::string const cmd = std::string(TURNPIKE_CLI) + " --out " + (dir_ / out).string() + " --cache " +
                                (dir_ / "cache").string() + " " + args + " > " + (dir_ / "stdout").string() +
                                " 2> " + (dir_ / "stderr").string();
        int const status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = read_text(dir_ / "stdout");
        r.err = read_text(dir_ / "stderr");
        return r;
    }

    /// Column `name` of a CSV file with a header row.
    std::vector<double> column(fs::path const& file, std::string const& name)
    {
        std::istringstream in(read_text(file));
        std::string line;
        std::getline(in, line);
        auto const header = turnpike::detail::split(line, ',');
        auto const k = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
        std::vector<double> out;
        while (std::getline(in, line))
            out.push_back(std::stod(turnpike::detail::split(line, ',').at(k)));
        return out;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, CheckPassesForLinearModel)
{
    Result const r = run("--model " + model("linear.ini") + " check");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(Json::parse(read_text(dir_ / "out/check.json")).at("overall").get<bool>());
}

TEST_F(Cli, CheckFailsForPositiveP)
{
    Result const r = run("--model " + model("linear.ini") + " --p 0.5 check");
    EXPECT_EQ(r.code, 1) << r.err;
    EXPECT_FALSE(Json::parse(read_text(dir_ / "out/check.json")).at("c_decays").get<bool>());
}

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run("--model " + (dir_ / "missing.ini").string() + " check").code, 64);
    EXPECT_EQ(run("").code, 64);
    EXPECT_EQ(run("--bogus 1 eigen").code, 64);
    EXPECT_EQ(run("turnpike --abstract --utility nope").code, 64);
    EXPECT_EQ(run("--model " + model("linear.ini") + " --p 1.5 eigen").code, 64);
}

TEST_F(Cli, EigenPrintsLambdaAndUsesCache)
{
    std::string const args = "--model " + model("linear.ini") + " eigen";
    Result const first = run(args);
    ASSERT_EQ(first.code, 0) << first.err;
    auto const pos = first.out.find("lambda_c = ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_NEAR(std::stod(first.out.substr(pos + 11)), -0.16875, 1e-6);
    EXPECT_NE(first.err.find("eigen solved"), std::string::npos);
    std::string const csv = read_text(dir_ / "out/eigen.csv");

    Result const second = run(args);
    ASSERT_EQ(second.code, 0);
    EXPECT_NE(second.err.find("eigen cache hit"), std::string::npos);
    EXPECT_EQ(second.err.find("eigen solved"), std::string::npos);
    EXPECT_EQ(second.out, first.out);
    EXPECT_EQ(read_text(dir_ / "out/eigen.csv"), csv);
}

TEST_F(Cli, SmallWindowIsNumericalFailure)
{
    Result const r = run("--model " + model("linear.ini") + " --window-lower -2 --window-upper 2 eigen");
    EXPECT_EQ(r.code, 3);
}

TEST_F(Cli, HorizonWritesSlices)
{
    Result const r = run("--model " + model("linear.ini") + " --nodes 400 --T 2 --slices 0,1,2 horizon");
    ASSERT_EQ(r.code, 0) << r.err;
    auto const t = column(dir_ / "out/horizon.csv", "t");
    auto const v = column(dir_ / "out/horizon.csv", "v");
    EXPECT_EQ(t.size(), 3u * 400u);
    for (std::size_t i = 0; i < t.size(); ++i)
    {
        if (t[i] == 2.0)
        {
            EXPECT_DOUBLE_EQ(v[i], 1.0);
        }
    }
}

TEST_F(Cli, ExplicitTurnpikeIndependentFactorHasZeroBrackets)
{
    Result const r = run("--model " + model("linear_rho0.ini") +
                         " --nodes 400 --paths 500 --dt 0.01 --horizons 1,2,4 turnpike --explicit");
    ASSERT_EQ(r.code, 0) << r.err;
    for (double b : column(dir_ / "out/turnpike.csv", "mean_bracket"))
        EXPECT_EQ(b, 0.0);
}

TEST_F(Cli, ExplicitTurnpikeBracketsDecrease)
{
    Result const r =
        run("--model " + model("linear.ini") + " --nodes 400 --paths 500 --dt 0.01 --horizons 1,2,4,8 turnpike");
    ASSERT_EQ(r.code, 0) << r.err;
    auto const b = column(dir_ / "out/turnpike.csv", "mean_bracket");
    ASSERT_EQ(b.size(), 4u);
    for (std::size_t k = 1; k < b.size(); ++k)
        EXPECT_LT(b[k], b[k - 1]);
    EXPECT_EQ(column(dir_ / "out/turnpike_bracket.csv", "y"), b);
}

TEST_F(Cli, AbstractPowerUtilityHasZeroMoments)
{
    Result const r = run("--horizons 5,10,20 turnpike --abstract --utility power:-1");
    ASSERT_EQ(r.code, 0) << r.err;
    for (double m : column(dir_ / "out/duality.csv", "moment"))
        EXPECT_EQ(m, 0.0);
}

TEST_F(Cli, PlannerMasterWeights)
{
    Result const r = run("--capitals 2,1 --gammas 2,3 --weights 1,1 --horizons 5 planner");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("effective p = -1"), std::string::npos);
    auto const w = column(dir_ / "out/planner_weights.csv", "master_weight");
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 1.0);
}

TEST_F(Cli, ManifestReproducesOutputsBitwise)
{
    Result const a = run("--model " + model("ou.ini") + " --nodes 400 --paths 300 --dt 0.01 --seed 7 simulate", "a");
    ASSERT_EQ(a.code, 0) << a.err;
    Json const ma = Json::parse(read_text(dir_ / "a/manifest.json"));
    EXPECT_EQ(ma.at("seed").get<int>(), 7);
    EXPECT_EQ(ma.at("command").get<std::string>(), "simulate");

    Result const b = run("--config " + (dir_ / "a/config.ini").string() + " --threads 3 simulate", "b");
    ASSERT_EQ(b.code, 0) << b.err;
    Json const mb = Json::parse(read_text(dir_ / "b/manifest.json"));
    EXPECT_EQ(ma.at("config_hash"), mb.at("config_hash"));
    EXPECT_EQ(ma.at("outputs"), mb.at("outputs"));
    EXPECT_EQ(read_text(dir_ / "a/simulate.csv"), read_text(dir_ / "b/simulate.csv"));
}
