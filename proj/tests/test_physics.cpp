#include <cmath>

#include <gtest/gtest.h>

#include "vacscan/physics.hpp"

using namespace vacscan;

TEST(ModeFunction, PeakNodeAndWaist) {
    const PhysicalParams p;
    EXPECT_DOUBLE_EQ(mode_function({0.0, 0.0}, p), 1.0);
    EXPECT_NEAR(mode_function({0.0, p.wavelength / 4.0}, p), 0.0, 1e-15);
    EXPECT_NEAR(mode_function({p.waist, 0.0}, p), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(mode_function({p.waist, 0.0}, p), 0.3679, 5e-5);
}

TEST(ModeFunction, SignFollowsCosine) {
    const PhysicalParams p;
    EXPECT_NEAR(mode_function({0.0, p.wavelength / 2.0}, p), -1.0, 1e-15);
}

TEST(Coupling, ZeroAtNodeAndPeakAtAntinode) {
    PhysicalParams p;
    p.e_vac0 = 86.0;
    EXPECT_NEAR(coupling_at({0.0, p.wavelength / 4.0}, p), 0.0, 1e-9 * p.peak_coupling());
    EXPECT_DOUBLE_EQ(coupling_at({0.0, 0.0}, p), p.dipole * p.e_vac0 / units::hbar);
}

TEST(Coupling, HandUnitConversion) {
    // 0.705 D and 0.86 V/cm, converted by hand: 1 D = 3.33564e-30 C m, 1 V/cm = 100 V/m.
    PhysicalParams p;
    p.dipole = 0.705 * units::debye;
    p.e_vac0 = units::v_per_cm_to_v_per_m(0.86);
    const double by_hand = 0.705 * 3.33564095198152e-30 * 86.0 / 1.054571817e-34;
    EXPECT_NEAR(p.peak_coupling(), by_hand, 1e-12 * by_hand);
    EXPECT_NEAR(p.peak_coupling(), 1.9176e6, 1e3);
}

TEST(InteractionTime, CancellationAndScaling) {
    PhysicalParams p;
    EXPECT_NEAR(interaction_time(std::sqrt(units::pi) * p.waist, p), 1.0, 1e-15);
    const double t1 = interaction_time(500.0, p);
    EXPECT_NEAR(interaction_time(1000.0, p), t1 / 2.0, 1e-15 * t1);
}

TEST(InteractionTime, DeskCalculator) {
    PhysicalParams p;
    p.waist = 20e-6;
    // sqrt(pi) * 20e-6 / 700 = 5.0641...e-8 s
    EXPECT_NEAR(interaction_time(700.0, p), 5.06410e-8, 1e-12);
}

TEST(InteractionTime, RejectsNonPositiveVelocity) {
    const PhysicalParams p;
    EXPECT_THROW(interaction_time(0.0, p), InvalidArgument);
    EXPECT_THROW(interaction_time(-3.0, p), InvalidArgument);
}

TEST(EffectiveAtomNumber, InversionFactor) {
    EXPECT_DOUBLE_EQ(effective_mean_atom_number(2.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(effective_mean_atom_number(2.0, 0.5), 0.0);
    EXPECT_NEAR(effective_mean_atom_number(1.0, 0.86), 0.72, 1e-15);
    EXPECT_THROW(effective_mean_atom_number(-1.0, 0.9), InvalidArgument);
    EXPECT_THROW(effective_mean_atom_number(1.0, 1.1), InvalidArgument);
}

TEST(VirtualBox, DepthIsSqrtPiWaist) {
    const auto box = VirtualBox::for_waist(1e-6, 41e-6, 2e-6);
    EXPECT_EQ(box.y0, std::sqrt(units::pi) * 41e-6);
}

TEST(PhysicalParams, Validation) {
    PhysicalParams p;
    EXPECT_NO_THROW(p.validate());
    p.kappa = 0.0;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.rho_ee0 = 1.5;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.waist = -1.0;
    EXPECT_THROW(p.validate(), InvalidArgument);
}
