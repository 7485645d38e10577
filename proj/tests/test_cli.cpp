#include "cdfreg/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Data lines of a CSV artifact: not a comment, not the header.
std::vector<std::string> data_rows(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::vector<std::string> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        rows.push_back(line);
    }
    return rows;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("cdfreg_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Writes the config, runs the binary and returns its exit status.
    int run(const std::string& sub, const json& cfg, const std::string& out, const std::string& extra = "") {
        const fs::path cfg_path = dir_ / (out + ".json");
        std::ofstream(cfg_path) << cfg.dump();
        const std::string cmd = std::string(CDFREG_CLI) + " " + sub + " --config " + cfg_path.string() + " --out " +
                                (dir_ / out).string() + " " + extra + " 2> " + (dir_ / (out + ".err")).string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    json error_of(const std::string& out) { return json::parse(slurp(dir_ / (out + ".err"))); }
    fs::path artifact(const std::string& out, const std::string& name) { return dir_ / out / name; }

    fs::path dir_;
};

json minimal_bernoulli() { return {{"schema_version", 1}, {"d", 2}, {"n_grid", {100}}, {"reps", 1}, {"metrics", {"l2"}}}; }

json minimal_poly() { return {{"schema_version", 1}, {"d", 3}, {"n_grid", {100}}, {"reps", 1}, {"metrics", {"l2"}}}; }

json tiny_real() {
    return {{"csv", std::string(CDFREG_TEST_DATA) + "/tiny_12.csv"}, {"outcome", "y"}, {"seeds", 2}};
}

}  // namespace

TEST_F(CliTest, SynthBernoulliMinimalConfig) {
    ASSERT_EQ(run("synth-bernoulli", minimal_bernoulli(), "a"), 0);
    EXPECT_EQ(data_rows(artifact("a", "records.csv")).size(), 1u);
    EXPECT_EQ(data_rows(artifact("a", "aggregates.csv")).size(), 1u);
    const auto summary = json::parse(slurp(artifact("a", "summary.json")));
    EXPECT_TRUE(summary.contains("version"));
    EXPECT_EQ(summary["config"]["d_grid"], json({2}));
    EXPECT_EQ(slurp(artifact("a", "records.csv")).rfind("# version: ", 0), 0u);
}

TEST_F(CliTest, SynthBernoulliRejectsBadDelta) {
    json cfg = minimal_bernoulli();
    cfg["delta"] = 1.5;
    EXPECT_EQ(run("synth-bernoulli", cfg, "a"), 2);
    EXPECT_EQ(error_of("a")["field"], "delta");
}

TEST_F(CliTest, SynthBernoulliRerunIsByteIdentical) {
    json cfg = minimal_bernoulli();
    cfg["n_grid"] = {100, 200};
    cfg["reps"] = 3;
    cfg["metrics"] = {"l2", "self_normalized", "mu_min_U"};
    ASSERT_EQ(run("synth-bernoulli", cfg, "a", "--seed 5"), 0);
    ASSERT_EQ(run("synth-bernoulli", cfg, "b", "--seed 5"), 0);
    ASSERT_EQ(run("synth-bernoulli", cfg, "c", "--seed 5 --threads 8"), 0);
    for (const char* f : {"records.csv", "aggregates.csv", "summary.json"}) {
        EXPECT_EQ(slurp(artifact("a", f)), slurp(artifact("b", f))) << f;
        EXPECT_EQ(slurp(artifact("a", f)), slurp(artifact("c", f))) << f;
    }
    EXPECT_EQ(data_rows(artifact("a", "records.csv")).size(), 2u * 3u * 3u);
    ASSERT_EQ(run("synth-bernoulli", cfg, "d", "--seed 6"), 0);
    EXPECT_NE(slurp(artifact("a", "records.csv")), slurp(artifact("d", "records.csv")));
}

TEST_F(CliTest, SynthPolyMirrorsContract) {
    ASSERT_EQ(run("synth-poly", minimal_poly(), "a"), 0);
    EXPECT_EQ(data_rows(artifact("a", "records.csv")).size(), 1u);
    json bad = minimal_poly();
    bad["delta"] = 1.5;
    EXPECT_EQ(run("synth-poly", bad, "b"), 2);
    EXPECT_EQ(error_of("b")["field"], "delta");
    ASSERT_EQ(run("synth-poly", minimal_poly(), "c", "--threads 4"), 0);
    EXPECT_EQ(slurp(artifact("a", "records.csv")), slurp(artifact("c", "records.csv")));
}

TEST_F(CliTest, BoundCheckCoverageAndValidation) {
    json cfg{{"delta", 0.1}, {"d", 3}, {"n_grid", {1000}}, {"reps", 30}};
    ASSERT_EQ(run("bound-check", cfg, "a"), 0);
    const auto summary = json::parse(slurp(artifact("a", "summary.json")));
    EXPECT_GE(summary["coverage"].get<double>(), 0.9);

    json missing = cfg;
    missing.erase("delta");
    EXPECT_EQ(run("bound-check", missing, "b"), 2);
    EXPECT_EQ(error_of("b")["field"], "delta");

    json zero = cfg;
    zero["reps"] = 0;
    EXPECT_EQ(run("bound-check", zero, "c"), 2);
    EXPECT_EQ(error_of("c")["field"], "reps");
}

TEST_F(CliTest, RealTinyFixture) {
    ASSERT_EQ(run("real", tiny_real(), "a"), 0);
    const auto rows = data_rows(artifact("a", "records.csv"));
    int ecdf = 0, ridge = 0;
    for (const auto& r : rows) {
        ecdf += r.rfind("ecdf,", 0) == 0;
        ridge += r.rfind("ridge,", 0) == 0;
    }
    EXPECT_EQ(ecdf, 2);
    EXPECT_EQ(ridge, 2 * 3);
    const auto summary = json::parse(slurp(artifact("a", "summary.json")));
    EXPECT_EQ(summary["n_rows"], 12);
    EXPECT_EQ(summary["dropped_rows"], 1);
}

TEST_F(CliTest, RealMissingOutcomeColumn) {
    json cfg = tiny_real();
    cfg["outcome"] = "price";
    EXPECT_EQ(run("real", cfg, "a"), 2);
    EXPECT_EQ(error_of("a")["field"], "outcome");
}

TEST_F(CliTest, UnknownKeyAndSchemaVersionRejected) {
    json cfg = minimal_bernoulli();
    cfg["repz"] = 3;
    EXPECT_EQ(run("synth-bernoulli", cfg, "a"), 2);
    EXPECT_EQ(error_of("a")["field"], "repz");
    cfg = minimal_bernoulli();
    cfg["schema_version"] = 2;
    EXPECT_EQ(run("synth-bernoulli", cfg, "b"), 2);
    EXPECT_EQ(error_of("b")["field"], "schema_version");
}

TEST(CliInProcess, UsageErrorsAndVersion) {
    std::ostringstream err;
    const char* no_sub[] = {"cdfreg"};
    EXPECT_EQ(cdfreg::cli::main(1, const_cast<char**>(no_sub), err), 2);
    const char* bogus[] = {"cdfreg", "frobnicate"};
    EXPECT_EQ(cdfreg::cli::main(2, const_cast<char**>(bogus), err), 2);
    const char* version[] = {"cdfreg", "--version"};
    EXPECT_EQ(cdfreg::cli::main(2, const_cast<char**>(version), err), 0);
}

TEST(CliInProcess, ConfigBuildersApplyDefaults) {
    const auto c = cdfreg::cli::synth_bernoulli_config(json::object(), false);
    EXPECT_EQ(c.n_grid, (std::vector<long>{1000, 10000, 100000}));
    EXPECT_EQ(c.reps, 50);
    const auto l = cdfreg::cli::synth_bernoulli_config(json::object(), true);
    EXPECT_EQ(l.n_grid.back(), 1000000);
    EXPECT_EQ(l.reps, 100);
    EXPECT_EQ(cdfreg::cli::bound_check_config({{"delta", 0.2}}, false).reps, 200);
    EXPECT_THROW(cdfreg::cli::synth_poly_config({{"d", 3}, {"d_grid", {3}}}, false), cdfreg::DomainError);
}
