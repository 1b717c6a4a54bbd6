#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/kinetics.hpp"
#include "vacscan/trajectory.hpp"

using namespace vacscan;

TEST(MultiAtomCondition, Boundaries) {
    EXPECT_DOUBLE_EQ(multi_atom_condition(1.0, units::pi, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(multi_atom_condition(1.0, units::pi, 3.0), 0.5);
    EXPECT_DOUBLE_EQ(multi_atom_condition(-2.0, 0.3 * units::pi / 2.0, 0.0), multi_atom_threshold);
    EXPECT_EQ(multi_atom_condition(0.0, 1.0, 5.0), 0.0);
}

TEST(TrajectoryConfig, Validation) {
    TrajectoryConfig c;
    c.t_final = 1.0;
    c.checkpoints = {0.5, 1.0};
    EXPECT_NO_THROW(c.validate());
    c.checkpoints = {0.5, 0.2};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.checkpoints = {2.0};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.checkpoints = {};
    c.max_atoms = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Trajectories, EmptyCavityDecays) {
    TrajectoryConfig c;
    c.trajectories = 2000;
    c.initial_photons = 1;
    c.t_final = 3.0;
    c.threads = 1;
    for (int i = 1; i <= 6; ++i) c.checkpoints.push_back(0.5 * i);
    c.seed = 11;
    const auto ens = run_trajectories(TrajectoryPump::single(0.0, 0.0, 1.0, 1.0), c);
    std::vector<double> master;
    for (double t : c.checkpoints) master.push_back(std::exp(-t));
    const auto cmp = compare_with_master(ens, master);
    EXPECT_TRUE(cmp.passed) << "max |z| " << cmp.max_abs_z;
    EXPECT_EQ(ens.log.arrivals, 0u);
}

TEST(Trajectories, WeakPumpAgreesWithMaster) {
    TrajectoryConfig c;
    c.trajectories = 2000;
    c.t_final = 12.0;
    c.threads = 1;
    c.seed = 5;
    for (int i = 1; i <= 6; ++i) c.checkpoints.push_back(2.0 * i);
    const PumpParams pump{0.3, 0.2, 0.8 / 0.2, 1.0};
    const auto ens = run_trajectories(TrajectoryPump::single(pump.mean_atoms, pump.g, pump.tau, pump.kappa), c);
    auto p = PhotonDistribution::vacuum(30);
    std::vector<double> master;
    double t = 0.0;
    for (double cp : c.checkpoints) {
        p = evolve(p, pump, cp - t);
        t = cp;
        master.push_back(mean_photon(p));
    }
    const auto cmp = compare_with_master(ens, master);
    EXPECT_TRUE(cmp.passed) << "max |z| " << cmp.max_abs_z;
    EXPECT_FALSE(ens.unreliable);
    EXPECT_LT(ens.max_norm_increase, 1e-9);
}

TEST(Trajectories, SameSeedSameResult) {
    TrajectoryConfig c;
    c.trajectories = 50;
    c.t_final = 5.0;
    c.checkpoints = {1.0, 5.0};
    c.seed = 9;
    const auto pump = TrajectoryPump::single(0.5, 3.0, 0.3, 1.0);
    c.threads = 1;
    const auto a = run_trajectories(pump, c);
    c.threads = 3;
    const auto b = run_trajectories(pump, c);
    EXPECT_EQ(a.photons, b.photons);
    EXPECT_EQ(a.log.arrivals, b.log.arrivals);
}

TEST(CompareWithMaster, ShiftOfTenStandardErrorsFails) {
    TrajectoryEnsemble ens;
    ens.mean = {1.0, 2.0};
    ens.stderr_mean = {0.1, 0.1};
    EXPECT_TRUE(compare_with_master(ens, {1.0, 2.0}).passed);
    EXPECT_TRUE(compare_with_master(ens, {1.29, 2.0}).passed);
    const auto bad = compare_with_master(ens, {1.0, 3.0});
    EXPECT_FALSE(bad.passed);
    EXPECT_NEAR(bad.max_abs_z, 10.0, 1e-9);
    EXPECT_THROW(compare_with_master(ens, {1.0}), InvalidArgument);
}
