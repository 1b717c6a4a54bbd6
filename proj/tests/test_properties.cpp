// Every invariant suite runs its full case count; a failing suite prints the
// first failing case, which replays from its (seed, case) stream.
#include <gtest/gtest.h>

#include "vacscan/properties.hpp"

namespace prop = vacscan::properties;

namespace {

void expect_passes(const prop::Report& r) {
    EXPECT_GE(r.cases, prop::default_cases);
    EXPECT_EQ(r.failures, 0u) << r.module << " / " << r.name << ": " << r.failures << " of " << r.cases
                              << " cases failed; " << r.first_failure << " (worst " << r.worst << ")";
}

}  // namespace

#define PROPERTY(suite) \
    TEST(Properties, suite) { expect_passes(prop::suite()); }

PROPERTY(mode_symmetry)
PROPERTY(axis_intensity)
PROPERTY(transit_product)
PROPERTY(coupling_linearity)
PROPERTY(gain_normalization)
PROPERTY(loss_trace)
PROPERTY(gain_loss_balance)
PROPERTY(linear_regime_distribution)
PROPERTY(rate_scaling)
PROPERTY(delta_average_identity)
PROPERTY(output_average_bounds)
PROPERTY(velocity_narrowing)
PROPERTY(forward_identity)
PROPERTY(poisson_mean)
PROPERTY(linear_monotonicity)
PROPERTY(scan_determinism)
PROPERTY(rl_nonnegativity)
PROPERTY(rl_flux_conservation)
PROPERTY(rl_fixed_point)
PROPERTY(rl_monotone_likelihood)
PROPERTY(profile_scale_optimality)
PROPERTY(rescaling_invariance)
PROPERTY(strong_coupling_guard)
PROPERTY(identifiability)
PROPERTY(norm_contraction)
PROPERTY(excitation_bookkeeping)
PROPERTY(single_atom_limit)
PROPERTY(jump_log_determinism)
