#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "vacscan/kinetics.hpp"
#include "vacscan/random.hpp"
#include "vacscan/units.hpp"

using namespace vacscan;

namespace {

constexpr double pi = units::pi;

PhotonDistribution random_distribution(std::mt19937_64& rng, std::size_t n_max) {
    PhotonDistribution d;
    d.p.resize(n_max + 1);
    double s = 0.0;
    for (auto& v : d.p) s += (v = std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    for (auto& v : d.p) v /= s;
    return d;
}

}  // namespace

TEST(GainMap, HalfPiTransfersVacuumToOnePhoton) {
    const auto q = gain_map(PhotonDistribution::vacuum(5), 1.0, pi / 2.0);
    EXPECT_NEAR(q.p[0], 0.0, 1e-15);
    EXPECT_NEAR(q.p[1], 1.0, 1e-15);
}

TEST(GainMap, ZeroCouplingIsIdentity) {
    auto rng = stream_engine(3, 0);
    const auto p = random_distribution(rng, 10);
    const auto q = gain_map(p, 0.0, 1e-6);
    for (std::size_t n = 0; n + 1 < p.size(); ++n) EXPECT_DOUBLE_EQ(q.p[n], p.p[n]);
}

TEST(GainMap, QuarterPiSplitsEvenly) {
    const auto q = gain_map(PhotonDistribution::vacuum(5), 2.0, pi / 8.0);
    EXPECT_NEAR(q.p[0], 0.5, 1e-15);
    EXPECT_NEAR(q.p[1], 0.5, 1e-15);
}

TEST(LossRate, VacuumIsDark) {
    for (double v : loss_rate(PhotonDistribution::vacuum(6), 3.0)) EXPECT_EQ(v, 0.0);
}

TEST(LossRate, SinglePhotonDecays) {
    const auto r = loss_rate(PhotonDistribution::fock(1, 6), 3.0);
    EXPECT_DOUBLE_EQ(r[0], 3.0);
    EXPECT_DOUBLE_EQ(r[1], -3.0);
    for (std::size_t n = 2; n < r.size(); ++n) EXPECT_EQ(r[n], 0.0);
}

TEST(LossRate, TraceVanishesForRandomStates) {
    for (std::size_t i = 0; i < 100; ++i) {
        auto rng = stream_engine(17, i);
        const auto p = random_distribution(rng, 5 + i % 50);
        double s = 0.0;
        for (double v : loss_rate(p, 2.5)) s += v;
        EXPECT_NEAR(s, 0.0, 1e-13);
    }
}

TEST(Evolve, PureDecayFollowsExponential) {
    const PumpParams pump{0.0, 1e-6, 0.0, 2.0};
    auto p = PhotonDistribution::fock(1, 8);
    double t = 0.0;
    for (int i = 1; i <= 10; ++i) {
        p = evolve(p, pump, 0.25 - 0.0);
        t += 0.25;
        EXPECT_NEAR(mean_photon(p), std::exp(-2.0 * t), 1e-6 * std::exp(-2.0 * t));
    }
}

TEST(Evolve, TrappingStateKeepsVacuum) {
    const double tau = 1e-7;
    const PumpParams pump{1.5, tau, pi / tau, 1e6};
    const auto p = evolve(PhotonDistribution::vacuum(20), pump, 20e-6);
    EXPECT_NEAR(p.p[0], 1.0, 1e-15);
}

TEST(Evolve, RejectsStepAboveGuard) {
    const PumpParams pump{1.0, 1.0, 0.3, 1.0};
    const auto model = GainModel::from_pump(pump);
    const double guard = max_time_step(model, 10);
    EXPECT_DOUBLE_EQ(guard, 0.1 * std::min(1.0, 1.0 / 10.0));
    EXPECT_THROW(evolve(PhotonDistribution::vacuum(10), pump, 1.0, 2.0 * guard), InvalidArgument);
    EXPECT_NO_THROW(evolve(PhotonDistribution::vacuum(10), pump, 1.0, guard));
}

TEST(Evolve, LongTimeMatchesProduct) {
    const PumpParams pump{1.5, 1.0, 0.8, 1.0};
    const auto product = solve_steady_state(GainModel::from_pump(pump));
    const auto evolved = evolve(PhotonDistribution::vacuum(product.n_max()), pump, 60.0);
    for (std::size_t n = 0; n < product.size(); ++n) EXPECT_NEAR(evolved.p[n], product.p[n], 1e-9);
}

TEST(Stationarity, MatchesProductForStrongPump) {
    const PumpParams pump{2.0, 0.1, 12.0, 1.0};
    const auto model = GainModel::from_pump(pump);
    const auto product = solve_steady_state(model);
    const auto limit = evolve_to_stationarity(model, product.n_max());
    for (std::size_t n = 0; n < product.size(); ++n) EXPECT_NEAR(limit.p[n], product.p[n], 1e-12);
}

TEST(SteadyState, NoPumpIsVacuum) {
    const auto d = steady_state_product(PumpParams{0.0, 1.0, 1.0, 1.0}, 20);
    EXPECT_EQ(d.p[0], 1.0);
    for (std::size_t n = 1; n < d.size(); ++n) EXPECT_EQ(d.p[n], 0.0);
}

TEST(SteadyState, TrappingIsVacuum) {
    const double tau = 1e-7;
    const auto d = steady_state_product(PumpParams{1.5, tau, pi / tau, 1e6}, 20);
    EXPECT_NEAR(d.p[0], 1.0, 1e-12);
    EXPECT_LT(d.p[1], 1e-20);
}

TEST(SteadyState, MatchesLongDoubleProduct) {
    // <N> = 1.5 with g tau chosen so xi_1 / kappa = 0.5.
    const double kappa = 1.0, tau = 1.0, mean_atoms = 1.5;
    const double gt = std::asin(std::sqrt(0.5 * kappa * tau / mean_atoms));
    const PumpParams pump{mean_atoms, tau, gt / tau, kappa};
    const auto d = steady_state_product(pump, 60);
    EXPECT_NEAR(d.p[1] / d.p[0], 0.5, 1e-14);
    std::vector<long double> q(61);
    q[0] = 1.0L;
    long double s = 1.0L;
    for (std::size_t k = 1; k <= 60; ++k) {
        const long double a = std::sin(std::sqrt(static_cast<long double>(k)) * static_cast<long double>(gt));
        q[k] = q[k - 1] * (static_cast<long double>(mean_atoms) / tau) * a * a / (kappa * static_cast<long double>(k));
        s += q[k];
    }
    for (std::size_t n = 0; n <= 60; ++n) EXPECT_NEAR(d.p[n], static_cast<double>(q[n] / s), 1e-14);
}

TEST(SteadyState, TruncationFlagAndEscalation) {
    const PumpParams pump{3.0, 1.0, 0.3, 0.02};  // xi_1 / kappa ~ 13: a broad field
    const auto small = steady_state_product(pump, 10);
    EXPECT_TRUE(small.truncated);
    const auto d = solve_steady_state(GainModel::from_pump(pump));
    EXPECT_GT(d.n_max(), 40u);
    EXPECT_FALSE(d.truncated);
    EXPECT_NEAR(d.norm(), 1.0, 1e-12);
}

TEST(MeanPhoton, SimpleCases) {
    EXPECT_EQ(mean_photon(PhotonDistribution::vacuum(4)), 0.0);
    PhotonDistribution d;
    d.p = {0.5, 0.5};
    EXPECT_DOUBLE_EQ(mean_photon(d), 0.5);
    EXPECT_DOUBLE_EQ(photon_flux(d, 4.0), 2.0);
}

TEST(MeanPhoton, MatchesIndependentSum) {
    auto rng = stream_engine(5, 0);
    const auto p = random_distribution(rng, 30);
    long double m = 0.0L;
    for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<long double>(n) * p.p[n];
    EXPECT_NEAR(mean_photon(p), static_cast<double>(m), 1e-13);
}

TEST(LinearRegime, OutputLaw) {
    EXPECT_EQ(linear_regime_output({1.0, 1e-7, 0.0, 1e6}), 0.0);
    const PumpParams a{0.2, 1e-7, 5e5, 1e6}, b{0.1, 1e-7, 5e5, 1e6};
    EXPECT_NEAR(linear_regime_output(b), 0.5 * linear_regime_output(a), 1e-12 * linear_regime_output(a));
}

TEST(LinearRegime, AgreesWithSteadyStateWithinOnePercent) {
    const double kappa = 1e6, tau = 1.3e-7;
    const PumpParams pump{0.1, tau, 0.05 / tau, kappa};
    const double flux = photon_flux(solve_steady_state(GainModel::from_pump(pump)), kappa);
    const double xi1 = linear_regime_output(pump);
    EXPECT_LT(std::abs(flux - xi1) / xi1, 0.01);
    EXPECT_NEAR(linear_regime_output_quadratic(pump), 0.1 / tau * 0.05 * 0.05, 1e-9);
}
