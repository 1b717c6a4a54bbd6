#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/ensemble.hpp"
#include "vacscan/reference.hpp"

using namespace vacscan;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    const auto [x, w] = detail::gauss_legendre(9);
    double s0 = 0.0, s2 = 0.0, s16 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s0 += w[i];
        s2 += w[i] * x[i] * x[i];
        s16 += w[i] * std::pow(x[i], 16);
    }
    EXPECT_NEAR(s0, 2.0, 1e-14);
    EXPECT_NEAR(s2, 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(s16, 2.0 / 17.0, 1e-14);
}

TEST(VelocityDistribution, DeltaHasSingleNode) {
    const auto d = VelocityDistribution::delta(550.0);
    ASSERT_EQ(d.nodes().size(), 1u);
    EXPECT_EQ(d.nodes()[0].weight, 1.0);
    const PhysicalParams p;
    EXPECT_DOUBLE_EQ(d.mean_transit_time(p), interaction_time(550.0, p));
}

TEST(VelocityDistribution, TruncatedGaussianMoments) {
    const auto d = VelocityDistribution::truncated_gaussian(550.0, 55.0, 9);
    double w = 0.0, m = 0.0, v = 0.0;
    for (const auto& n : d.nodes()) {
        w += n.weight;
        m += n.weight * n.velocity;
    }
    for (const auto& n : d.nodes()) v += n.weight * (n.velocity - m) * (n.velocity - m);
    EXPECT_NEAR(w, 1.0, 1e-14);
    EXPECT_NEAR(m, 550.0, 1e-9);
    // Truncation at 3 sigma removes 0.27% of the mass and shrinks sigma by ~1.3%.
    EXPECT_NEAR(std::sqrt(v), 55.0 * 0.9866, 0.1);
}

TEST(VelocityDistribution, TabulatedIsNormalised) {
    const auto d = VelocityDistribution::tabulated({{500.0, 2.0}, {600.0, 2.0}});
    EXPECT_DOUBLE_EQ(d.mean(), 550.0);
    EXPECT_DOUBLE_EQ(d.spread(), 50.0);
    EXPECT_DOUBLE_EQ(d.nodes()[0].weight, 0.5);
    EXPECT_THROW(VelocityDistribution::tabulated({}), InvalidArgument);
    EXPECT_THROW(VelocityDistribution::tabulated({{-1.0, 1.0}}), InvalidArgument);
}

TEST(SpreadKernel, ZeroWidthIsDelta) {
    EXPECT_TRUE(build_spread_kernel(0.0, 0.0, 0.0, 1e-9).is_delta());
}

TEST(SpreadKernel, MomentsOfReferenceGeometry) {
    const double d = 170e-9, theta = 0.24e-3, l = 300e-6;
    const auto k = build_spread_kernel(d, theta, l, 2e-9);
    EXPECT_NO_THROW(k.validate());
    EXPECT_NEAR(k.mean(), 0.0, 1e-15);
    const double r = d / 2.0, s = theta * l;
    const double expected = r * r / 4.0 + s * s;
    // Binning adds pitch^2 / 12.
    EXPECT_NEAR(k.variance(), expected + 4e-18 / 12.0, 0.01 * expected);
}

TEST(SpreadKernel, DiscOnlyVariance) {
    const auto k = build_spread_kernel(400e-9, 0.0, 0.0, 1e-9);
    const double r = 200e-9;
    EXPECT_NEAR(k.variance(), r * r / 4.0, 0.01 * r * r / 4.0);
}

TEST(SpreadKernel, GaussianOnlyVariance) {
    const auto k = build_spread_kernel(0.0, 1e-3, 100e-6, 5e-9);
    const double s = 100e-9;
    EXPECT_NEAR(k.variance(), s * s, 0.01 * s * s);
}

TEST(SpreadKernel, RejectsCoarsePitch) {
    EXPECT_THROW(build_spread_kernel(10e-9, 0.0, 0.0, 50e-9), InvalidArgument);
    EXPECT_THROW(build_spread_kernel(-1.0, 0.0, 0.0, 1e-9), InvalidArgument);
}

TEST(AveragedGain, DeltaEnsembleReducesToSingleChannel) {
    const PhysicalParams p;
    const AperturePosition pos{0.0, 37e-9};
    const auto v = VelocityDistribution::delta(550.0);
    const auto model = averaged_gain_model(pos, p, 1.3, v, PositionSpreadKernel::delta());
    const double tau = interaction_time(550.0, p);
    const auto single = GainModel::from_pump({1.3, tau, coupling_at(pos, p), p.kappa});
    for (std::size_t n = 0; n < 30; ++n)
        EXPECT_DOUBLE_EQ(model.emission_probability(n), single.emission_probability(n));
    EXPECT_DOUBLE_EQ(model.injection_rate(), single.injection_rate());
}

TEST(AveragedGain, KernelWashesOutTheNode) {
    PhysicalParams p;
    p.e_vac0 = 86.0;
    const auto v = VelocityDistribution::delta(550.0);
    const AperturePosition node{0.0, p.wavelength / 4.0};
    const auto sharp = averaged_steady_state(node, p, 1.5, v, PositionSpreadKernel::delta());
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 2e-9);
    const auto blurred = averaged_steady_state(node, p, 1.5, v, k);
    EXPECT_LT(mean_photon(sharp), 1e-12);
    EXPECT_GT(mean_photon(blurred), 1e-6);
}

TEST(AveragedOutput, EqualsAveragedGainInLinearRegime) {
    PhysicalParams p;
    p.e_vac0 = 10.0;
    const auto v = VelocityDistribution::truncated_gaussian(550.0, 55.0, 9);
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 4e-9);
    const AperturePosition pos{0.0, 80e-9};
    const double a = mean_photon(averaged_steady_state(pos, p, 0.01, v, k));
    const double b = averaged_output(pos, p, 0.01, v, k).mean_photon;
    EXPECT_NEAR(a, b, 1e-3 * b);
}

TEST(ReferenceScenario, ExpectedValues) {
    const auto p = reference::params();
    EXPECT_NEAR(p.kappa, 2.0 * units::pi * 150e3, 1e-6);
    EXPECT_NEAR(p.e_vac0, 86.0, 1e-12);
    EXPECT_NEAR(effective_mean_atom_number(1.0, p.rho_ee0), 0.72, 1e-15);
    EXPECT_NEAR(reference::velocity().mean(), 550.0, 1e-12);
}
