#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "vacscan/config.hpp"
#include "vacscan/io.hpp"

using namespace vacscan;

namespace {

json minimal() {
    return json::parse(R"({
      "physics": {"wavelength_nm": 791, "waist_um": 41, "kappa_2pi_khz": 150, "dipole_debye": 0.705,
                  "e_vac0_v_per_cm": 0.86, "gamma_2pi_khz": 50, "rho_ee0": 0.86},
      "pump": {"mean_atom_number": 1.5},
      "velocity": {"kind": "truncated_gaussian", "mean_m_per_s": 550, "spread_m_per_s": 55, "nodes": 9}
    })");
}

}  // namespace

TEST(Config, ParsesAndConvertsUnits) {
    const auto sc = parse_scenario(minimal());
    EXPECT_NEAR(sc.params.wavelength, 791e-9, 1e-20);
    EXPECT_NEAR(sc.params.e_vac0, 86.0, 1e-12);
    EXPECT_NEAR(sc.params.kappa, 2.0 * units::pi * 150e3, 1e-6);
    EXPECT_EQ(sc.mean_atoms, 1.5);
    EXPECT_EQ(sc.velocity.nodes().size(), 9u);
    EXPECT_TRUE(sc.kernel().is_delta());
}

TEST(Config, TotalAtomNumberUsesInversion) {
    auto j = minimal();
    j["pump"] = {{"total_atom_number", 1.0}};
    EXPECT_NEAR(parse_scenario(j).mean_atoms, 0.72, 1e-15);
    j["pump"]["mean_atom_number"] = 1.0;
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Config, RejectsUnknownKeys) {
    auto j = minimal();
    j["physics"]["kapa_2pi_khz"] = 1.0;
    EXPECT_THROW(parse_scenario(j), ConfigError);
    j = minimal();
    j["extra"] = 1;
    EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Config, RejectsMissingAndInvalid) {
    auto j = minimal();
    j.erase("velocity");
    EXPECT_THROW(parse_scenario(j), ConfigError);
    j = minimal();
    j["physics"]["rho_ee0"] = 1.2;
    EXPECT_THROW(parse_scenario(j), ConfigError);
    j = minimal();
    j["physics"]["waist_um"] = "41";
    EXPECT_THROW(parse_scenario(j), ConfigError);
    EXPECT_THROW(parse_scenario_text("{ not json"), ConfigError);
    EXPECT_THROW(load_scenario("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ScanScaleMapsToEfficiency) {
    auto j = minimal();
    j["scan"] = {{"points", 5}, {"detector_scale_kcps", 270}};
    const auto sc = parse_scenario(j);
    EXPECT_NEAR(sc.scan->efficiency * sc.params.kappa, 270e3, 1e-6);
    EXPECT_NEAR(sc.scan->z_stop, 791e-9 / 4.0, 1e-20);
}

TEST(Config, HashIgnoresKeyOrder) {
    const auto a = parse_scenario_text(R"({"pump": {"mean_atom_number": 1.5}, "physics": {"wavelength_nm": 791,
        "waist_um": 41, "kappa_2pi_khz": 150, "dipole_debye": 0.705, "e_vac0_v_per_cm": 0.86,
        "gamma_2pi_khz": 50, "rho_ee0": 0.86}, "velocity": {"kind": "delta", "mean_m_per_s": 550}})");
    auto j = minimal();
    j["velocity"] = {{"kind", "delta"}, {"mean_m_per_s", 550}};
    EXPECT_EQ(a.hash, parse_scenario(j).hash);
    j["pump"]["mean_atom_number"] = 1.6;
    EXPECT_NE(a.hash, parse_scenario(j).hash);
}

TEST(FormatDouble, RoundTripsExactly) {
    for (double v : {0.0, 1.0, -2.5, 1.0 / 3.0, 6.02214076e23, 5e-324, std::numeric_limits<double>::max(),
                     0.1 + 0.2}) {
        const auto s = format_double(v);
        EXPECT_EQ(parse_double(s), v) << s;
        EXPECT_EQ(s.find(','), std::string::npos);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_THROW(parse_double("1,5"), InvalidArgument);
    EXPECT_THROW(parse_double(""), InvalidArgument);
}

TEST(Csv, WriteReadRoundTrip) {
    CsvTable t;
    t.meta = {{"wavelength_m", "7.91e-07"}};
    t.columns = {"a", "b"};
    t.rows = {{1.0 / 3.0, 2.0}, {-1e-300, 4.5}};
    RunManifest m;
    m.command = "scan";
    m.timestamp = "2020-01-01T00:00:00Z";
    std::stringstream ss;
    write_csv(ss, t, m);
    const auto back = read_csv(ss);
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(back.meta_value("wavelength_m"), "7.91e-07");
    EXPECT_EQ(back.meta_value("manifest_hash"), hex64(m.hash()));
}

TEST(Csv, RaggedRowsRejected) {
    std::stringstream ss("a,b\n1,2\n3\n");
    EXPECT_THROW(read_csv(ss), InvalidArgument);
}

TEST(Manifest, HashExcludesTimestampAndOutputs) {
    RunManifest a;
    a.command = "scan";
    a.config_hash = 42;
    a.seed = 7;
    a.timestamp = "2020-01-01T00:00:00Z";
    RunManifest b = a;
    b.timestamp = "2031-06-01T12:00:00Z";
    b.outputs = {"/tmp/elsewhere/scan.csv"};
    EXPECT_EQ(a.hash(), b.hash());
    b.seed = 8;
    EXPECT_NE(a.hash(), b.hash());
}

TEST(Manifest, CsvDiffersOnlyInTimestampLine) {
    CsvTable t;
    t.columns = {"x"};
    t.rows = {{1.0}};
    RunManifest m;
    m.command = "steady";
    m.timestamp = "A";
    std::stringstream s1, s2;
    write_csv(s1, t, m);
    m.timestamp = "B";
    write_csv(s2, t, m);
    auto strip = [](const std::string& s) {
        std::stringstream in(s), out;
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("# timestamp:", 0) != 0) out << line << '\n';
        return out.str();
    };
    EXPECT_NE(s1.str(), s2.str());
    EXPECT_EQ(strip(s1.str()), strip(s2.str()));
}

TEST(KernelTable, RoundTrip) {
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 2e-9);
    std::stringstream ss;
    write_csv(ss, kernel_table(k), RunManifest{});
    const auto back = kernel_from_table(read_csv(ss));
    EXPECT_EQ(back.weights, k.weights);
    EXPECT_NEAR(back.pitch, k.pitch, 1e-21);
}
