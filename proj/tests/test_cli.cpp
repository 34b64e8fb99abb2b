#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(IONTRAP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("iontrap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string out(const std::string& sub) const { return "--out " + (dir_ / sub).string(); }
    fs::path path(const std::string& sub, const std::string& file) const { return dir_ / sub / file; }

    fs::path dir_;
};

const std::string config_dir = IONTRAP_CONFIG_DIR;

}  // namespace

TEST_F(Cli, ModesCsvAndJson) {
    ASSERT_EQ(run("modes --n 4 " + out("a")), 0);
    EXPECT_TRUE(fs::exists(path("a", "modes.csv")));
    EXPECT_TRUE(fs::exists(path("a", "equilibrium.csv")));
    ASSERT_EQ(run("modes --n 4 --format json " + out("b")), 0);
    const auto j = read_json(path("b", "modes.json"));
    EXPECT_EQ(j.at("modes").size(), 4u);
}

TEST_F(Cli, CollideFindsStruckIon) {
    ASSERT_EQ(run("collide --n 5 --site 2 " + out("a")), 0);
    EXPECT_EQ(read_json(path("a", "collision_report.json")).at("inferred_site"), 2);
    EXPECT_EQ(slurp(path("a", "spectrum.csv")).substr(0, 34), "frequency_Hz,amplitude_m,phase_rad");
    EXPECT_TRUE(fs::exists(path("a", "trajectory.csv")));
}

TEST_F(Cli, ConfigFileWithOverride) {
    ASSERT_EQ(run("collide --config " + config_dir + "/collide_n5.cfg " + out("a")), 0);
    EXPECT_EQ(read_json(path("a", "collision_report.json")).at("inferred_site"), 2);
    ASSERT_EQ(run("collide --config " + config_dir + "/collide_n5.cfg --site 5 " + out("b")), 0);
    EXPECT_EQ(read_json(path("b", "collision_report.json")).at("inferred_site"), 5);
}

TEST_F(Cli, ZeroVelocityIsANumericalFailure) { EXPECT_EQ(run("collide --n 3 --site 1 --v0 0 " + out("a")), 3); }

TEST_F(Cli, ConfigurationErrors) {
    EXPECT_EQ(run("collide --n 3 --site 1 --noise-sigma 0.01 " + out("a")), 2);
    EXPECT_EQ(run("collide --n 3 --site 7 " + out("a")), 2);
    EXPECT_EQ(run("collide --n 3 " + out("a")), 2);
    EXPECT_EQ(run("modes --n 3 --format xml " + out("a")), 2);
    EXPECT_EQ(run("modes --n 0 " + out("a")), 2);
    EXPECT_EQ(run("modes --no-such-flag"), 2);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("collide --config /nonexistent/file.cfg"), 2);
    EXPECT_EQ(run("collide --n 3 --site 2 --observe-ion 2 " + out("a")), 2);
    EXPECT_EQ(run("collide --n 3 --site 1 --v0 1e3 " + out("a")), 2);
}

TEST_F(Cli, ImpurityKnownSite) {
    ASSERT_EQ(run("impurity --config " + config_dir + "/impurity_n3.cfg " + out("a")), 0);
    const auto j = read_json(path("a", "mass_estimate.json"));
    EXPECT_EQ(j.at("method"), "first-order-inversion");
    EXPECT_NEAR(j.at("estimated_mass_amu").get<double>(), 42.0, 0.003 * 42.0);
    EXPECT_TRUE(fs::exists(path("a", "frequencies.json")));
}

TEST_F(Cli, ImpurityMirrorTieIsAmbiguous) {
    EXPECT_EQ(run("impurity --n 4 --site 2 --impurity-mass-amu 52 --unknown-site " + out("a")), 4);
    const auto j = read_json(path("a", "mass_estimate.json"));
    EXPECT_TRUE(j.at("ambiguous").get<bool>());
    EXPECT_EQ(j.at("tied_sites").size(), 2u);
}

TEST_F(Cli, UniformChainIsDegenerateNotAmbiguous) {
    ASSERT_EQ(run("impurity --n 4 --site 2 --impurity-mass-amu 40 --unknown-site " + out("a")), 0);
    EXPECT_TRUE(read_json(path("a", "mass_estimate.json")).at("degenerate").get<bool>());
}

TEST_F(Cli, ByteIdenticalAcrossRuns) {
    const std::string collide = "collide --config " + config_dir + "/collide_n5.cfg ";
    ASSERT_EQ(run(collide + out("a")), 0);
    ASSERT_EQ(run(collide + out("b")), 0);
    const std::string impurity = "impurity --n 5 --site 2 --impurity-mass-amu 44 --noise-sigma 1e-4 --seed 3 ";
    ASSERT_EQ(run(impurity + out("c")), 0);
    ASSERT_EQ(run(impurity + out("d")), 0);
    for (const auto& [x, y] : {std::pair{"a", "b"}, std::pair{"c", "d"}})
        for (const auto& entry : fs::directory_iterator(dir_ / x)) {
            const auto name = entry.path().filename();
            EXPECT_EQ(slurp(entry.path()), slurp(dir_ / y / name)) << name;
        }
}

TEST_F(Cli, SeedChangesNoisyOutput) {
    const std::string base = "collide --n 3 --site 1 --noise-sigma 0.01 ";
    ASSERT_EQ(run(base + "--seed 1 " + out("a")), 0);
    ASSERT_EQ(run(base + "--seed 2 " + out("b")), 0);
    EXPECT_NE(slurp(path("a", "trajectory.csv")), slurp(path("b", "trajectory.csv")));
}
