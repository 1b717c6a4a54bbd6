#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/calibration.hpp"

using namespace vacscan;

namespace {

FitModel delta_model() {
    FitModel m;
    m.velocity = VelocityDistribution::delta(550.0);
    return m;
}

std::vector<double> grid_u(std::size_t n) {
    std::vector<double> us;
    for (std::size_t i = 0; i < n; ++i) us.push_back(0.5 + 0.5 * static_cast<double>(i) / static_cast<double>(n - 1));
    return us;
}

FitProblem synthetic(double N, double E, double S, std::size_t n = 11) {
    FitProblem pr;
    pr.model = delta_model();
    const auto us = grid_u(n);
    const auto c = model_curve(N, E, us, pr.model);
    for (std::size_t i = 0; i < us.size(); ++i) pr.points.push_back({us[i], S * c.photons[i]});
    pr.dwell = 1.0;
    return pr;
}

}  // namespace

TEST(ValidityFilter, InclusiveBounds) {
    const std::vector<FitPoint> pts{{0.2, 1}, {0.4, 1}, {0.5, 1}, {0.9, 1}, {1.0, 1}};
    const auto kept = validity_filter(pts, 0.5, 1.0);
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_EQ(kept[0].u, 0.5);
    EXPECT_EQ(kept[2].u, 1.0);
    const auto more = validity_filter({{0.4, 1}, {0.5, 1}, {0.9, 1}, {1.0, 1}});
    EXPECT_EQ(more.size(), 3u);
}

TEST(OptimalScale, ClosedForm) {
    EXPECT_DOUBLE_EQ(optimal_scale({2.0, 4.0}, {1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(optimal_scale({1.0, 0.0}, {1.0, 1.0}), 0.5);
    EXPECT_THROW(optimal_scale({1.0}, {0.0}), FitError);
}

TEST(OptimalScale, PerturbationRaisesChiSquare) {
    const std::vector<double> y{1.3, 2.9, 4.2, 5.0}, n{0.1, 0.3, 0.4, 0.5};
    const double s = optimal_scale(y, n);
    const double c = chi_square(y, n, s);
    EXPECT_GT(chi_square(y, n, s * 1.001), c);
    EXPECT_GT(chi_square(y, n, s * 0.999), c);
}

TEST(ModelCurve, MonotoneAndZeroAtNode) {
    const auto c = model_curve(1.5, 86.0, {0.0, 0.3, 0.6, 1.0}, delta_model());
    EXPECT_EQ(c.photons[0], 0.0);
    EXPECT_LT(c.photons[1], c.photons[2]);
    EXPECT_LT(c.photons[2], c.photons[3]);
    EXPECT_THROW(model_curve(1.5, 86.0, {1.5}, delta_model()), InvalidArgument);
}

TEST(Fit, RecoversNoiselessParameters) {
    const auto pr = synthetic(1.5, 86.0, 2.7e5);
    const auto r = fit(pr);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.mean_atoms, 1.5, 1.5e-3);
    EXPECT_NEAR(r.e_vac0, 86.0, 0.086);
    EXPECT_NEAR(r.scale, 2.7e5, 270.0);
    EXPECT_EQ(r.points_used, 11u);
    EXPECT_EQ(r.dof, 8u);
    EXPECT_FALSE(r.has_warning("poor_fit"));
}

TEST(Fit, RefusesTooFewPoints) {
    auto pr = synthetic(1.5, 86.0, 2.7e5, 3);
    pr.points.pop_back();
    EXPECT_THROW(fit(pr), FitError);
    pr.u_min = 0.99;
    EXPECT_THROW(fit_fixed_scale(pr, 2.7e5), FitError);
}

TEST(FitFixedScale, RecoversParameters) {
    const auto pr = synthetic(1.1, 88.0, 2.7e5);
    const auto r = fit_fixed_scale(pr, 2.7e5, 4.9e4);
    EXPECT_TRUE(r.scale_fixed);
    EXPECT_NEAR(r.mean_atoms, 1.1, 1.1e-3);
    EXPECT_NEAR(r.e_vac0, 88.0, 0.088);
    EXPECT_GE(r.sigma_mean_atoms_with_scale, r.sigma_mean_atoms);
}

TEST(FitFixedScale, WrongScaleFlagsPoorFit) {
    auto pr = synthetic(1.5, 86.0, 2.7e5);
    pr.dwell = 0.1;
    const auto r = fit_fixed_scale(pr, 2.7e6);
    EXPECT_TRUE(r.has_warning("poor_fit"));
}

TEST(FitFixedScale, StrongCouplingGuard) {
    // E so small that g0 sqrt(u) < kappa inside the window.
    auto pr = synthetic(1.5, 86.0, 2.7e5, 5);
    pr.e_vac0_range = {1.0, 3.0};
    const auto r = fit_fixed_scale(pr, 2.7e5);
    EXPECT_TRUE(r.has_warning("strong_coupling"));
}

TEST(LinearRegimeFit, ClosedFormRecoversN) {
    FitProblem pr;
    pr.model = delta_model();
    pr.u_min = 0.0;
    const double E = 30.0, S = 1e5, N = 0.04;
    std::vector<double> us;
    for (int i = 0; i <= 20; ++i) us.push_back(i / 20.0);
    const auto m = linear_regime_photons_per_atom(E, us, pr.model);
    for (std::size_t i = 0; i < us.size(); ++i) pr.points.push_back({us[i], S * N * m[i]});
    const auto r = fit_linear_regime_N(pr, E, S);
    EXPECT_NEAR(r.mean_atoms, N, 1e-6 * N);
    EXPECT_NEAR(r.mean_atoms_numeric, r.mean_atoms, 1e-8);
    EXPECT_NEAR(r.mean_atoms_full_model, N, 0.02 * N);
}

TEST(LinearRegimeFit, ClosedFormAgreesWithNumericOnNoisyData) {
    FitProblem pr;
    pr.model = delta_model();
    pr.u_min = 0.0;
    std::vector<double> us;
    for (int i = 0; i <= 20; ++i) us.push_back(i / 20.0);
    const auto m = linear_regime_photons_per_atom(30.0, us, pr.model);
    for (std::size_t i = 0; i < us.size(); ++i)
        pr.points.push_back({us[i], 1e5 * 0.05 * m[i] * (1.0 + 0.03 * std::sin(7.0 * static_cast<double>(i)))});
    const auto r = fit_linear_regime_N(pr, 30.0, 1e5);
    EXPECT_NEAR(r.mean_atoms_numeric, r.mean_atoms, 1e-8);
    EXPECT_GT(r.sigma_mean_atoms, 0.0);
}
