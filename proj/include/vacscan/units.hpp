// units.hpp - physical constants and the unit conversions used at I/O boundaries.
// Everything inside the library is SI.
#pragma once

#include <numbers>

namespace vacscan::units {

inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double debye = 3.33564095198152e-30;  // C m
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double mrad = 1e-3;
inline constexpr double ns = 1e-9;
inline constexpr double us = 1e-6;

constexpr double v_per_cm_to_v_per_m(double v) { return v * 100.0; }
constexpr double v_per_m_to_v_per_cm(double v) { return v / 100.0; }

// Angular rate from a frequency quoted as "2 pi x f kHz".
constexpr double two_pi_khz(double f) { return two_pi * f * 1e3; }
constexpr double to_two_pi_khz(double w) { return w / (two_pi * 1e3); }

constexpr double kcps(double r) { return r * 1e3; }
constexpr double to_kcps(double r) { return r / 1e3; }

}  // namespace vacscan::units
