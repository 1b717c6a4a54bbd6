// physics.hpp - atom-cavity parameters, cavity mode geometry and the derived
// coupling, interaction time and effective atom number.
#pragma once

#include <cmath>
#include <string>

#include "vacscan/error.hpp"
#include "vacscan/units.hpp"

namespace vacscan {

/// Fixed physical constants of the atom-cavity system, all SI.
///
/// `kappa` is the cavity photon-number decay rate (d<n>/dt = -kappa <n>),
/// `gamma` the atomic free-space decay rate; both in rad/s.
struct PhysicalParams {
    double wavelength = 791e-9;  // m
    double waist = 41e-6;        // m
    double kappa = units::two_pi_khz(150.0);
    double dipole = 0.705 * units::debye;  // C m
    double e_vac0 = 86.0;                  // V/m
    double gamma = units::two_pi_khz(50.0);
    double rho_ee0 = 0.86;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidArgument(std::string(name) + " must be positive and finite");
        };
        positive(wavelength, "wavelength");
        positive(waist, "waist");
        positive(kappa, "kappa");
        positive(dipole, "dipole");
        positive(e_vac0, "e_vac0");
        positive(gamma, "gamma");
        if (!(rho_ee0 >= 0.0 && rho_ee0 <= 1.0))
            throw InvalidArgument("rho_ee0 must lie in [0, 1]");
    }

    /// Peak vacuum Rabi coupling g0 = mu E_vac(0) / hbar (rad/s).
    double peak_coupling() const { return dipole * e_vac0 / units::hbar; }

    double wavenumber() const { return units::two_pi / wavelength; }
};

/// Centre of the nanohole array in the cavity cross-section; y is the beam axis.
struct AperturePosition {
    double x = 0.0;  // m
    double z = 0.0;  // m
};

/// Box whose mean atom content defines <N_tot>.
struct VirtualBox {
    double x0;
    double y0;
    double z0;

    static VirtualBox for_waist(double x0, double waist, double z0) {
        return {x0, std::sqrt(units::pi) * waist, z0};
    }
};

/// psi(x, z) = exp(-(x/w0)^2) cos(2 pi z / lambda).
inline double mode_function(const AperturePosition& pos, const PhysicalParams& params) {
    const double r = pos.x / params.waist;
    return std::exp(-r * r) * std::cos(params.wavenumber() * pos.z);
}

/// Relative vacuum intensity on the x = 0 slice, cos^2(2 pi z / lambda).
inline double relative_intensity(double z, double wavelength) {
    const double c = std::cos(units::two_pi / wavelength * z);
    return c * c;
}

/// Signed coupling g(r) = mu E_vac(0) psi(r) / hbar. Kinetics only ever use
/// sin^2 / cos^2 of the Rabi angle, so the sign carries no physics.
inline double coupling_at(const AperturePosition& pos, const PhysicalParams& params) {
    return params.peak_coupling() * mode_function(pos, params);
}

/// Top-hat transit time tau = sqrt(pi) w0 / v.
inline double interaction_time(double velocity, const PhysicalParams& params) {
    if (!(velocity > 0.0) || !std::isfinite(velocity))
        throw InvalidArgument("atom velocity must be positive");
    return std::sqrt(units::pi) * params.waist / velocity;
}

/// <N> = <N_tot> (rho_ee - rho_gg) with a closed two-level atom, rho_gg = 1 - rho_ee.
inline double effective_mean_atom_number(double n_tot, double rho_ee0) {
    if (n_tot < 0.0) throw InvalidArgument("total atom number must be non-negative");
    if (!(rho_ee0 >= 0.0 && rho_ee0 <= 1.0))
        throw InvalidArgument("rho_ee0 must lie in [0, 1]");
    return n_tot * (2.0 * rho_ee0 - 1.0);
}

}  // namespace vacscan
