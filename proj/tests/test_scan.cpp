#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/scan.hpp"

using namespace vacscan;

namespace {

PhysicalParams weak_params() {
    PhysicalParams p;
    p.e_vac0 = 30.0;
    return p;
}

}  // namespace

TEST(Background, ReferenceNumbers) {
    EXPECT_NEAR(background_flux(1.0, 1.0), 2.8e-6, 1e-20);
    EXPECT_DOUBLE_EQ(background_flux(0.0, 1.0), 0.0);
    EXPECT_THROW(background_flux(1.0, 0.0), InvalidArgument);
}

TEST(ZLine, EndpointsAndCount) {
    const auto line = ScanConfig::z_line(0.0, 1.0, 5, 2.0);
    ASSERT_EQ(line.size(), 5u);
    EXPECT_EQ(line.front().z, 0.0);
    EXPECT_EQ(line.back().z, 1.0);
    EXPECT_EQ(line[2].x, 2.0);
    EXPECT_TRUE(ScanConfig::z_line(0.0, 1.0, 0).empty());
}

TEST(SimulateScan, NodeIsDarkWithoutBackground) {
    const auto p = weak_params();
    ScanConfig sc;
    sc.positions = {{0.0, p.wavelength / 4.0}, {0.0, 0.0}};
    sc.background = false;
    const auto recs = simulate_scan(p, {0.5}, VelocityDistribution::delta(550.0), PositionSpreadKernel::delta(), sc);
    EXPECT_LT(recs[0].expected_flux, 1e-20);
    EXPECT_GT(recs[1].expected_flux, 0.0);
    EXPECT_NEAR(recs[0].u, 0.0, 1e-15);
    EXPECT_NEAR(recs[1].u, 1.0, 1e-15);
}

TEST(SimulateScan, RateIncludesBackgroundAndDark) {
    const auto p = weak_params();
    const auto v = VelocityDistribution::delta(550.0);
    ScanConfig sc;
    sc.positions = {{0.0, p.wavelength / 4.0}};
    sc.efficiency = 0.5;
    sc.dark_rate = 10.0;
    const auto recs = simulate_scan(p, {0.5}, v, PositionSpreadKernel::delta(), sc);
    const double bg = background_flux(0.5, v.mean_transit_time(p));
    EXPECT_NEAR(recs[0].rate, 0.5 * (recs[0].expected_flux + bg) + 10.0, 1e-9);
}

TEST(SimulateScan, PoissonIsSeededPerPoint) {
    const auto p = weak_params();
    ScanConfig sc;
    sc.positions = ScanConfig::z_line(0.0, p.wavelength / 4.0, 11);
    sc.noise = NoiseModel::poisson;
    sc.dwell = 0.1;
    sc.efficiency = 10.0;
    sc.seed = 42;
    const auto v = VelocityDistribution::delta(550.0);
    const auto a = simulate_scan(p, {0.5}, v, PositionSpreadKernel::delta(), sc);
    const auto b = simulate_scan(p, {0.5}, v, PositionSpreadKernel::delta(), sc);
    sc.seed = 43;
    const auto c = simulate_scan(p, {0.5}, v, PositionSpreadKernel::delta(), sc);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].counts, b[i].counts);
        differs = differs || a[i].counts != c[i].counts;
    }
    EXPECT_TRUE(differs);
}

TEST(SimulateScan, RejectsBadConfig) {
    ScanConfig sc;
    sc.dwell = 0.0;
    EXPECT_THROW(simulate_scan(weak_params(), {0.5}, VelocityDistribution::delta(550.0),
                               PositionSpreadKernel::delta(), sc),
                 InvalidArgument);
}

TEST(SurfaceMap, RatioFollowsModeFunctionSquared) {
    const auto p = weak_params();
    const auto v = VelocityDistribution::delta(550.0);
    const auto m = surface_map(p, {0.01}, v, {0.0, 10e-6, 41e-6}, {0.0, 50e-9, 150e-9});
    EXPECT_TRUE(m.linear_regime);
    const double peak = m.at(0, 0);
    for (std::size_t ix = 0; ix < m.x.size(); ++ix)
        for (std::size_t iz = 0; iz < m.z.size(); ++iz) {
            const double psi = mode_function({m.x[ix], m.z[iz]}, p);
            EXPECT_NEAR(m.at(ix, iz) / peak, psi * psi, 1e-12);
        }
}

TEST(SurfaceMap, FlagsNonlinearPump) {
    PhysicalParams p;
    p.e_vac0 = 86.0;
    // <N> (g0 tau)^2 = 3 * 0.254^2 ~ 0.19 is past the 0.1 guard.
    const auto m = surface_map(p, {3.0}, VelocityDistribution::delta(550.0), {0.0}, {0.0});
    EXPECT_FALSE(m.linear_regime);
    EXPECT_TRUE(surface_map(p, {1.0}, VelocityDistribution::delta(550.0), {0.0}, {0.0}).linear_regime);
}
