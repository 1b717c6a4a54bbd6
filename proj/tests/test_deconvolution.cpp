#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/deconvolution.hpp"

using namespace vacscan;

namespace {

constexpr double lambda = 791e-9;

SignalSeries standing_wave(std::size_t n, double pitch, double z0, double amp, double offset) {
    SignalSeries s;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = -0.5 * static_cast<double>(n - 1) * pitch + static_cast<double>(i) * pitch;
        s.z.push_back(z);
        s.values.push_back(amp * relative_intensity(z - z0, lambda) + offset);
    }
    return s;
}

PositionSpreadKernel three_tap() { return {SpreadAxis::z, 1e-9, {0.25, 0.5, 0.25}}; }

}  // namespace

TEST(Blur, DeltaKernelIsIdentity) {
    const std::vector<double> e{1.0, 2.0, 3.0};
    EXPECT_EQ(blur(e, PositionSpreadKernel::delta()), e);
}

TEST(Blur, EdgeRenormalisedConservesFlux) {
    const std::vector<double> e{4.0, 0.0, 0.0, 1.0};
    const auto out = blur(e, three_tap());
    double s = 0.0;
    for (double v : out) s += v;
    EXPECT_NEAR(s, 5.0, 1e-14);
    // first column keeps 0.75 of the kernel; renormalised, 2/3 stays home
    EXPECT_NEAR(out[0], 4.0 * 0.5 / 0.75, 1e-14);
}

TEST(RichardsonLucy, DeltaKernelReturnsData) {
    const auto s = standing_wave(21, 10e-9, 0.0, 5.0, 1.0);
    const auto r = richardson_lucy(s, PositionSpreadKernel::delta(10e-9));
    EXPECT_EQ(r.estimate.values, s.values);
}

TEST(RichardsonLucy, FixedPointOfBlurredTruth) {
    // Data that are an exact blur of some e are a fixed point of the update at e.
    const std::vector<double> truth{1.0, 3.0, 7.0, 2.0, 0.5, 4.0};
    SignalSeries y;
    for (std::size_t i = 0; i < truth.size(); ++i) y.z.push_back(1e-9 * static_cast<double>(i));
    y.values = blur(truth, three_tap());
    const auto next = richardson_lucy_step(y, truth, three_tap(), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_NEAR(next[i], truth[i], 1e-13);
}

TEST(RichardsonLucy, ConvergesTowardsTruth) {
    const std::vector<double> truth{1.0, 3.0, 7.0, 2.0, 0.5, 4.0, 6.0, 1.0};
    SignalSeries y;
    for (std::size_t i = 0; i < truth.size(); ++i) y.z.push_back(1e-9 * static_cast<double>(i));
    y.values = blur(truth, three_tap());
    RichardsonLucyOptions opt;
    opt.iterations = 20000;
    const auto r = richardson_lucy(y, three_tap(), opt);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        before += std::abs(y.values[i] - truth[i]);
        after += std::abs(r.estimate.values[i] - truth[i]);
    }
    EXPECT_LT(after, 0.2 * before);
}

TEST(RichardsonLucy, KeepsNonNegativityAndFlux) {
    const auto s = standing_wave(101, 2e-9, 30e-9, 5.0, 0.0);
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 2e-9);
    const auto r = richardson_lucy(s, k);
    EXPECT_EQ(r.iterations, 50u);
    for (double v : r.estimate.values) EXPECT_GE(v, 0.0);
    EXPECT_NEAR(r.estimate.total(), s.total(), 1e-6 * s.total());
}

TEST(RichardsonLucy, ObserverSeesEveryIterate) {
    const auto s = standing_wave(41, 2e-9, 0.0, 1.0, 0.2);
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 2e-9);
    RichardsonLucyOptions opt;
    opt.iterations = 7;
    std::size_t calls = 0;
    richardson_lucy(s, k, opt, [&](std::size_t it, const std::vector<double>&) { EXPECT_EQ(it, ++calls); });
    EXPECT_EQ(calls, 7u);
}

TEST(RichardsonLucy, RejectsMismatchedPitch) {
    const auto s = standing_wave(41, 2e-9, 0.0, 1.0, 0.2);
    const auto k = build_spread_kernel(170e-9, 0.24e-3, 300e-6, 3e-9);
    EXPECT_THROW(richardson_lucy(s, k), InvalidArgument);
}

TEST(SignalSeries, Validation) {
    SignalSeries s{{0.0, 1.0, 3.0}, {1.0, 1.0, 1.0}};
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = {{0.0, 1.0}, {1.0, -1.0}};
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = {{0.0, 1.0}, {1.0}};
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Antinode, RecoversShift) {
    for (double z0 : {0.0, 17e-9, -63e-9, 150e-9}) {
        const auto s = standing_wave(81, 5e-9, z0, 3.0, 0.7);
        EXPECT_NEAR(estimate_antinode(s, lambda), z0, 1e-12);
    }
}

TEST(Antinode, FlatSeriesIsRejected) {
    const auto s = standing_wave(21, 5e-9, 0.0, 0.0, 1.0);
    EXPECT_THROW(estimate_antinode(s, lambda), InvalidArgument);
}

TEST(IntensityAxis, MapsAntinodeToOne) {
    const auto s = standing_wave(5, lambda / 8.0, 0.0, 1.0, 0.0);
    const auto pts = to_intensity_axis(s, lambda, 0.0);
    EXPECT_NEAR(pts[2].u, 1.0, 1e-15);
    EXPECT_NEAR(pts[0].u, 0.0, 1e-15);
    EXPECT_NEAR(pts[1].u, 0.5, 1e-15);
}
