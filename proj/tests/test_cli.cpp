// Drives the installed binary end to end through a shell.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string bin = VACSCAN_BIN;
const std::string configs = VACSCAN_CONFIG_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("vacscan_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    // Exit status of `env bin args`, stdout and stderr captured in the scratch dir.
    int run(const std::string& args, const std::string& env = "") {
        const std::string cmd = "cd '" + dir.string() + "' && env -u VACSCAN_OUT_DIR " + env + " '" + bin + "' " +
                                args + " >stdout.txt 2>stderr.txt";
        const int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    }

    std::string read(const fs::path& p) const {
        std::ifstream in(p.is_absolute() ? p : dir / p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(dir / name) << text; }

    fs::path dir;
};

std::string without_timestamp(const std::string& s) {
    std::istringstream in(s);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("# timestamp:", 0) != 0) out << line << '\n';
    return out.str();
}

}  // namespace

TEST_F(Cli, AcceptanceListNamesAllCriteria) {
    ASSERT_EQ(run("acceptance --list"), 0);
    const auto out = read("stdout.txt");
    for (int i = 1; i <= 8; ++i) EXPECT_NE(out.find("C" + std::to_string(i)), std::string::npos) << out;
}

TEST_F(Cli, UnknownFlagIsConfigError) {
    EXPECT_EQ(run("scan " + configs + "/linear.json --bogus"), 2);
    EXPECT_EQ(run("nosuchcommand"), 2);
}

TEST_F(Cli, BadConfigIsConfigError) {
    write("bad.json", R"({"physics": {"wavelength_nm": 791}})");
    EXPECT_EQ(run("steady bad.json"), 2);
    write("broken.json", "{ nope");
    EXPECT_EQ(run("steady broken.json"), 2);
    EXPECT_EQ(run("steady missing.json"), 2);
    EXPECT_NE(read("stderr.txt").find("config error"), std::string::npos);
}

TEST_F(Cli, TruncationExitCode) {
    auto j = nlohmann::json::parse(read(configs + "/n3.json"));
    j["kinetics"] = {{"n_max", 3}, {"n_max_limit", 3}};
    write("tight.json", j.dump());
    EXPECT_EQ(run("steady tight.json"), 3);
    EXPECT_NE(read("stderr.txt").find("truncation"), std::string::npos);
}

TEST_F(Cli, SteadyWritesCsv) {
    ASSERT_EQ(run("steady " + configs + "/linear.json --out-dir out"), 0);
    const auto csv = read("out/steady.csv");
    EXPECT_NE(csv.find("# manifest_hash: "), std::string::npos);
    EXPECT_NE(csv.find("n,p\n"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out/steady_manifest.json"));
}

TEST_F(Cli, ScanIsByteDeterministicApartFromTimestamp) {
    ASSERT_EQ(run("scan " + configs + "/linear.json --seed 5 --out-dir a"), 0);
    ASSERT_EQ(run("scan " + configs + "/linear.json --seed 5 --out-dir b"), 0);
    const auto a = read("a/scan.csv"), b = read("b/scan.csv");
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(without_timestamp(a), without_timestamp(b));
    EXPECT_NE(a.find("x_m,z_m,u,expected_flux_hz,counts,rate_cps"), std::string::npos);
    ASSERT_EQ(run("scan " + configs + "/linear.json --seed 6 --out-dir c"), 0);
    EXPECT_NE(without_timestamp(a), without_timestamp(read("c/scan.csv")));
}

TEST_F(Cli, EnvironmentOverridesOutputDirectoryOnly) {
    ASSERT_EQ(run("map2d " + configs + "/linear.json", "VACSCAN_OUT_DIR=envout"), 0);
    EXPECT_TRUE(fs::exists(dir / "envout/map2d.csv"));
    EXPECT_FALSE(fs::exists(dir / "map2d.csv"));
    // the flag wins over the environment
    ASSERT_EQ(run("map2d " + configs + "/linear.json --out-dir flag", "VACSCAN_OUT_DIR=envout2"), 0);
    EXPECT_TRUE(fs::exists(dir / "flag/map2d.csv"));
    EXPECT_FALSE(fs::exists(dir / "envout2"));
    // same payload whichever way the directory was chosen
    EXPECT_EQ(without_timestamp(read("envout/map2d.csv")), without_timestamp(read("flag/map2d.csv")));
}

TEST_F(Cli, FitRefusesEmptyWindow) {
    write("pts.csv", "u,y\n0.1,1\n0.2,2\n0.3,3\n");
    EXPECT_EQ(run("fit pts.csv --config " + configs + "/linear.json --window 0.5 1.0"), 4);
    EXPECT_NE(read("stderr.txt").find("fit refused"), std::string::npos);
}

TEST_F(Cli, LinearNNeedsFixedScale) {
    write("pts.csv", "u,y\n0.1,1\n0.2,2\n0.3,3\n");
    EXPECT_EQ(run("fit pts.csv --config " + configs + "/linear.json --linear-N"), 2);
}

TEST_F(Cli, ScanDeconvolveFitPipeline) {
    ASSERT_EQ(run("scan " + configs + "/linear.json --out-dir s"), 0);
    ASSERT_EQ(run("deconvolve s/scan.csv s/kernel.csv --out-dir d"), 0);
    const auto deconv = read("d/deconvolved.csv");
    EXPECT_NE(deconv.find("z_m,rate_cps,deconvolved_value,u"), std::string::npos);
    ASSERT_EQ(run("fit d/deconvolved.csv --config " + configs + "/linear.json --fix-scale 270 --linear-N --out-dir f"), 0);
    const auto report = nlohmann::json::parse(read("f/fit.json"));
    EXPECT_NEAR(report["mean_atom_number"].get<double>(), 0.05, 0.0025);
    EXPECT_TRUE(report.contains("manifest"));
}
