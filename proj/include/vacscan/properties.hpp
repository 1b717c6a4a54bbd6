// properties.hpp - randomized invariant suites, one per module property.
// Each case draws its inputs from its own (seed, case) stream, so a failure
// report names a case that can be replayed on its own.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vacscan/calibration.hpp"
#include "vacscan/deconvolution.hpp"
#include "vacscan/ensemble.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/physics.hpp"
#include "vacscan/random.hpp"
#include "vacscan/reference.hpp"
#include "vacscan/scan.hpp"
#include "vacscan/trajectory.hpp"

namespace vacscan::properties {

inline constexpr std::size_t default_cases = 100;

struct Report {
    std::string module;
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;
    double worst = 0.0;  // largest observed violation metric, property specific

    bool passed() const { return failures == 0 && cases >= default_cases; }
};

using Rng = std::mt19937_64;

/// Runs `check(rng, index)` for every case; a non-empty return is a failure message.
inline Report for_all(std::string module, std::string name, std::size_t cases, std::uint64_t seed,
                      const std::function<std::string(Rng&, std::size_t)>& check) {
    Report r{std::move(module), std::move(name), 0, 0, {}, 0.0};
    for (std::size_t i = 0; i < cases; ++i) {
        auto rng = stream_engine(seed, i);
        std::string msg;
        try {
            msg = check(rng, i);
        } catch (const std::exception& e) {
            msg = std::string("exception: ") + e.what();
        }
        ++r.cases;
        if (!msg.empty()) {
            if (r.failures == 0) r.first_failure = "case " + std::to_string(i) + ": " + msg;
            ++r.failures;
        }
    }
    return r;
}

namespace gen {

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::size_t integer(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline PhysicalParams params(Rng& rng) {
    PhysicalParams p;
    p.wavelength = uniform(rng, 400e-9, 1500e-9);
    p.waist = uniform(rng, 5e-6, 100e-6);
    p.kappa = log_uniform(rng, 1e5, 1e7);
    p.dipole = uniform(rng, 0.1, 5.0) * units::debye;
    p.e_vac0 = uniform(rng, 10.0, 500.0);
    p.gamma = log_uniform(rng, 1e5, 1e7);
    p.rho_ee0 = uniform(rng, 0.5, 1.0);
    return p;
}

/// Random normalized distribution on 0..n_max with support ending below `support`.
inline PhotonDistribution distribution(Rng& rng, std::size_t n_max, std::size_t support) {
    PhotonDistribution d;
    d.p.assign(n_max + 1, 0.0);
    double s = 0.0;
    for (std::size_t n = 0; n <= std::min(support, n_max); ++n) {
        d.p[n] = std::exponential_distribution<double>(1.0)(rng);
        s += d.p[n];
    }
    for (double& v : d.p) v /= s;
    return d;
}

/// Pump with g tau, <N> and xi_1/kappa drawn from the given boxes (kappa = 1 / s).
inline PumpParams pump(Rng& rng, double gt_lo, double gt_hi, double n_lo, double n_hi, double x_lo, double x_hi) {
    const double gt = uniform(rng, gt_lo, gt_hi);
    const double mean_atoms = uniform(rng, n_lo, n_hi);
    const double x = log_uniform(rng, x_lo, x_hi);
    const double kappa = 1.0;
    const double s = std::sin(gt);
    const double rate = x * kappa / (s * s);
    const double tau = mean_atoms / rate;
    return {mean_atoms, tau, gt / tau, kappa};
}

/// Pitch must stay below 20 nm, twice the smallest drawn spread.
inline PositionSpreadKernel kernel(Rng& rng, double pitch) {
    const double diameter = uniform(rng, 0.0, 250e-9);
    const double sigma = uniform(rng, 10e-9, 100e-9);
    return build_spread_kernel(diameter, sigma / 300e-6, 300e-6, pitch);
}

}  // namespace gen

inline std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------- physics-core

inline Report mode_symmetry(std::size_t cases = default_cases, std::uint64_t seed = 101) {
    return for_all("physics-core", "mode function even in x and lambda-periodic in z", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto p = gen::params(rng);
                       const double x = gen::uniform(rng, -3.0, 3.0) * p.waist;
                       const double z = gen::uniform(rng, -2.0, 2.0) * p.wavelength;
                       const double a = mode_function({x, z}, p);
                       if (a != mode_function({-x, z}, p)) return "psi(x,z) != psi(-x,z)";
                       const double b = mode_function({x, z + p.wavelength}, p);
                       if (std::abs(a - b) > 1e-12) return "psi(x,z+lambda) differs by " + fmt(a - b);
                       return {};
                   });
}

inline Report axis_intensity(std::size_t cases = default_cases, std::uint64_t seed = 102) {
    return for_all("physics-core", "psi(0,z)^2 equals the relative intensity cos^2(2 pi z/lambda)", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto p = gen::params(rng);
                       const double z = gen::uniform(rng, -2.0, 2.0) * p.wavelength;
                       const double psi = mode_function({0.0, z}, p);
                       if (psi * psi != relative_intensity(z, p.wavelength)) return "not bit-identical";
                       const double c = std::cos(units::two_pi * z / p.wavelength);
                       if (std::abs(psi * psi - c * c) > 1e-12) return "differs from cos^2 by " + fmt(psi * psi - c * c);
                       return {};
                   });
}

inline Report transit_product(std::size_t cases = default_cases, std::uint64_t seed = 103) {
    return for_all("physics-core", "interaction_time(v) * v = sqrt(pi) w0", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto p = gen::params(rng);
                       const double v = gen::log_uniform(rng, 1.0, 1e4);
                       const double want = std::sqrt(units::pi) * p.waist;
                       const double rel = std::abs(interaction_time(v, p) * v - want) / want;
                       if (rel > 4e-16) return "relative error " + fmt(rel);
                       return {};
                   });
}

inline Report coupling_linearity(std::size_t cases = default_cases, std::uint64_t seed = 104) {
    return for_all("physics-core", "coupling linear in E_vac0", cases, seed, [](Rng& rng, std::size_t) -> std::string {
        auto p = gen::params(rng);
        const AperturePosition at{gen::uniform(rng, -2.0, 2.0) * p.waist, gen::uniform(rng, -1.0, 1.0) * p.wavelength};
        const double c = gen::uniform(rng, 0.1, 10.0);
        const double g1 = coupling_at(at, p);
        p.e_vac0 *= c;
        const double g2 = coupling_at(at, p);
        if (std::abs(g2 - c * g1) > 1e-14 * std::abs(c * g1) + 1e-300) return "nonlinear by " + fmt(g2 - c * g1);
        return {};
    });
}

// ------------------------------------------------------------- photon-kinetics

inline Report gain_normalization(std::size_t cases = default_cases, std::uint64_t seed = 201) {
    return for_all("photon-kinetics", "gain map keeps normalization and never lowers <n>", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const std::size_t n_max = gen::integer(rng, 5, 80);
                       const auto p = gen::distribution(rng, n_max, n_max - 1);
                       const double g = gen::uniform(rng, 0.0, 1e6), tau = gen::uniform(rng, 1e-8, 1e-5);
                       const auto q = gain_map(p, g, tau);
                       if (std::abs(q.norm() - 1.0) > 1e-12) return "norm drift " + fmt(q.norm() - 1.0);
                       for (double v : q.p)
                           if (v < 0.0) return "negative probability";
                       double expect = 0.0;
                       for (std::size_t n = 0; n <= n_max; ++n) {
                           const double s = std::sin(std::sqrt(n + 1.0) * g * tau);
                           expect += p.p[n] * s * s;
                       }
                       const double dn = mean_photon(q) - mean_photon(p);
                       if (dn < -1e-12) return "<n> decreased by " + fmt(-dn);
                       if (std::abs(dn - expect) > 1e-10 * std::max(1.0, expect)) return "delta <n> off by " + fmt(dn - expect);
                       return {};
                   });
}

inline Report loss_trace(std::size_t cases = default_cases, std::uint64_t seed = 202) {
    return for_all("photon-kinetics", "loss rate components sum to zero", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const std::size_t n_max = gen::integer(rng, 1, 160);
                       const auto p = gen::distribution(rng, n_max, n_max);
                       const double kappa = gen::log_uniform(rng, 1e3, 1e8);
                       const auto r = loss_rate(p, kappa);
                       double s = 0.0, scale = 0.0;
                       for (double v : r) s += v, scale = std::max(scale, std::abs(v));
                       // The top level has nothing above it to feed it, so the sum telescopes.
                       if (std::abs(s) > 1e-13 * scale * static_cast<double>(n_max + 1)) return "sum " + fmt(s);
                       return {};
                   });
}

inline Report gain_loss_balance(std::size_t cases = default_cases, std::uint64_t seed = 203) {
    return for_all("photon-kinetics", "strong pump: product formula equals evolve(t -> infinity) within 1e-7", cases,
                   seed, [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = gen::pump(rng, 0.05, 2.5, 0.1, 3.0, 1.0, 50.0);
                       const auto model = GainModel::from_pump(pump);
                       const auto product = solve_steady_state(model);
                       const auto limit = evolve_to_stationarity(model, product.n_max());
                       double d = 0.0;
                       for (std::size_t n = 0; n < product.size(); ++n) d = std::max(d, std::abs(product.p[n] - limit.p[n]));
                       if (d >= 1e-7) return "max difference " + fmt(d);
                       return {};
                   });
}

/// Linear regime: xi_1/kappa < 0.01 and g tau < 0.1.
inline Report linear_regime_distribution(std::size_t cases = default_cases, std::uint64_t seed = 204) {
    return for_all("photon-kinetics",
                   "linear regime: |p(1) - x/(1+x)| < 1e-4 p(1) and sum_{n>=2} p(n) < 1e-3 p(1), x = xi_1/kappa",
                   cases, seed, [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = gen::pump(rng, 0.001, 0.1, 0.01, 3.0, 1e-6, 0.01);
                       const auto d = solve_steady_state(GainModel::from_pump(pump));
                       const double x = linear_regime_output(pump) / pump.kappa;
                       const double p1 = d.p[1];
                       if (std::abs(p1 - x / (1.0 + x)) >= 1e-4 * p1)
                           return "p(1) off by " + fmt(std::abs(p1 - x / (1.0 + x)) / p1) + " relative (x = " + fmt(x) + ")";
                       double tail = 0.0;
                       for (std::size_t n = 2; n < d.size(); ++n) tail += d.p[n];
                       if (tail >= 1e-3 * p1)
                           return "tail/p(1) = " + fmt(tail / p1) + " at x = " + fmt(x) + " (tail/p(1) tracks x)";
                       return {};
                   });
}

inline Report rate_scaling(std::size_t cases = default_cases, std::uint64_t seed = 205) {
    return for_all("photon-kinetics", "steady state invariant under (<N>/tau, kappa) -> c (<N>/tau, kappa)", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = gen::pump(rng, 0.05, 2.5, 0.1, 3.0, 0.1, 50.0);
                       const double c = gen::log_uniform(rng, 1e-3, 1e3);
                       const auto a = steady_state_product(pump, 80);
                       // Same g tau, rate and kappa both scaled by c: tau -> tau / c at fixed <N>.
                       PumpParams scaled{pump.mean_atoms, pump.tau / c, pump.g * c, pump.kappa * c};
                       const auto b = steady_state_product(scaled, 80);
                       double d = 0.0;
                       for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, std::abs(a.p[n] - b.p[n]));
                       if (d > 1e-12) return "max difference " + fmt(d);
                       return {};
                   });
}

// ---------------------------------------------------------- ensemble-averaging

inline Report delta_average_identity(std::size_t cases = default_cases, std::uint64_t seed = 301) {
    return for_all("ensemble-averaging", "delta velocity and delta kernel average is the identity", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto p = gen::params(rng);
                       const AperturePosition at{gen::uniform(rng, -1.0, 1.0) * p.waist,
                                                 gen::uniform(rng, 0.0, 0.5) * p.wavelength};
                       const double v = gen::uniform(rng, 100.0, 1500.0);
                       const double mean_atoms = gen::uniform(rng, 0.0, 3.0);
                       const auto avg = averaged_steady_state(at, p, mean_atoms, VelocityDistribution::delta(v),
                                                              PositionSpreadKernel::delta());
                       const double tau = interaction_time(v, p);
                       const auto direct =
                           solve_steady_state(GainModel::from_pump({mean_atoms, tau, coupling_at(at, p), p.kappa}));
                       if (avg.p != direct.p) return "averaged result differs from the pointwise solve";
                       return {};
                   });
}

inline Report output_average_bounds(std::size_t cases = default_cases, std::uint64_t seed = 302) {
    return for_all("ensemble-averaging", "linear regime: output average lies within the node extremes", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto p = reference::params();
                       p.e_vac0 = gen::uniform(rng, 5.0, 40.0);
                       const double mean_atoms = gen::uniform(rng, 0.01, 0.1);
                       const auto vdist = VelocityDistribution::truncated_gaussian(gen::uniform(rng, 300.0, 900.0),
                                                                                   gen::uniform(rng, 10.0, 100.0));
                       const auto kernel = gen::kernel(rng, 5e-9);
                       const AperturePosition at{0.0, gen::uniform(rng, 0.0, 0.25) * p.wavelength};
                       const auto avg = averaged_output(at, p, mean_atoms, vdist, kernel);
                       const auto model = averaged_gain_model(at, p, mean_atoms, vdist, kernel);
                       double lo = HUGE_VAL, hi = -HUGE_VAL;
                       for (const auto& c : model.channels()) {
                           const auto d = solve_steady_state(GainModel(model.injection_rate(), {{1.0, c.angle}}, p.kappa));
                           lo = std::min(lo, mean_photon(d));
                           hi = std::max(hi, mean_photon(d));
                       }
                       const double slack = 1e-12 * hi;
                       if (avg.mean_photon < lo - slack || avg.mean_photon > hi + slack)
                           return "average " + fmt(avg.mean_photon) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]";
                       return {};
                   });
}

inline Report velocity_narrowing(std::size_t cases = default_cases, std::uint64_t seed = 303) {
    return for_all("ensemble-averaging", "narrowing sigma_v converges monotonically to the delta-velocity scan", cases,
                   seed, [](Rng& rng, std::size_t) -> std::string {
                       auto p = reference::params();
                       p.e_vac0 = gen::uniform(rng, 20.0, 150.0);
                       const double mean_atoms = gen::uniform(rng, 0.05, 3.0);
                       const double v = gen::uniform(rng, 300.0, 900.0);
                       const std::size_t points = 11;
                       auto scan = [&](const VelocityDistribution& vd) {
                           std::vector<double> out;
                           for (std::size_t i = 0; i < points; ++i) {
                               const AperturePosition at{0.0, p.wavelength / 4.0 * i / (points - 1.0)};
                               out.push_back(photon_flux(
                                   averaged_steady_state(at, p, mean_atoms, vd, PositionSpreadKernel::delta()), p.kappa));
                           }
                           return out;
                       };
                       const auto ref = scan(VelocityDistribution::delta(v));
                       double prev = HUGE_VAL;
                       for (double frac : {0.2, 0.1, 0.05, 0.01}) {
                           const auto s = scan(VelocityDistribution::truncated_gaussian(v, frac * v));
                           double d = 0.0;
                           for (std::size_t i = 0; i < points; ++i) d = std::max(d, std::abs(s[i] - ref[i]));
                           if (!(d < prev) && d > 0.0) return "distance did not shrink at sigma/v = " + fmt(frac);
                           prev = d;
                       }
                       return {};
                   });
}

// -------------------------------------------------------------- scan-synthesis

inline Report forward_identity(std::size_t cases = default_cases, std::uint64_t seed = 401) {
    return for_all("scan-synthesis", "noise none, S = 1, no background: rate equals averaged flux", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto p = reference::params();
                       p.e_vac0 = gen::uniform(rng, 10.0, 150.0);
                       ScanConfig sc;
                       sc.positions = ScanConfig::z_line(0.0, p.wavelength / 4.0, 9);
                       sc.background = false;
                       sc.efficiency = 1.0;
                       const auto kernel = gen::kernel(rng, p.wavelength / 64.0);
                       const auto recs = simulate_scan(p, {gen::uniform(rng, 0.01, 3.0), {}}, reference::velocity(), kernel, sc);
                       for (const auto& r : recs)
                           if (r.rate != r.expected_flux) return "rate " + fmt(r.rate) + " != flux " + fmt(r.expected_flux);
                       return {};
                   });
}

/// One case per draw: 10^4 Poisson draws at mean 100, sample mean within 3 sqrt(100/10^4).
inline Report poisson_mean(std::uint64_t seed = 402) {
    Report r{"scan-synthesis", "Poisson sample mean of 1e4 points at rate*dwell = 100 within 3 sigma", 0, 0, {}, 0.0};
    auto p = reference::params();
    ScanConfig sc;
    sc.positions.assign(10000, AperturePosition{0.0, 0.0});
    sc.noise = NoiseModel::poisson;
    sc.seed = seed;
    sc.background = false;
    sc.dwell = 1.0;
    const auto once = simulate_scan(p, {reference::n3_mean_atoms, {}}, VelocityDistribution::delta(reference::mean_velocity),
                                    PositionSpreadKernel::delta(), {{{0.0, 0.0}}, 1.0, 1.0, 0.0, 0, NoiseModel::none, false});
    sc.efficiency = 100.0 / once.front().expected_flux;
    const auto recs = simulate_scan(p, {reference::n3_mean_atoms, {}}, VelocityDistribution::delta(reference::mean_velocity),
                                    PositionSpreadKernel::delta(), sc);
    double sum = 0.0;
    for (const auto& rec : recs) sum += static_cast<double>(rec.counts);
    const double mean = sum / static_cast<double>(recs.size());
    r.cases = recs.size();
    r.worst = std::abs(mean - 100.0);
    if (r.worst > 3.0 * std::sqrt(100.0 / 1e4)) {
        r.failures = 1;
        r.first_failure = "sample mean " + fmt(mean);
    }
    return r;
}

inline Report linear_monotonicity(std::size_t cases = default_cases, std::uint64_t seed = 403) {
    return for_all("scan-synthesis", "linear regime: rate non-decreasing in u along x = 0 (delta kernel)", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto p = reference::params();
                       p.e_vac0 = gen::uniform(rng, 5.0, 40.0);
                       ScanConfig sc;
                       sc.positions = ScanConfig::z_line(0.0, p.wavelength / 4.0, 41);
                       sc.efficiency = gen::uniform(rng, 0.1, 1.0);
                       sc.dark_rate = gen::uniform(rng, 0.0, 100.0);
                       auto recs = simulate_scan(p, {gen::uniform(rng, 0.005, 0.1), {}}, reference::velocity(),
                                                 PositionSpreadKernel::delta(), sc);
                       std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.u < b.u; });
                       for (std::size_t i = 1; i < recs.size(); ++i)
                           if (recs[i].rate < recs[i - 1].rate) return "rate drops at u = " + fmt(recs[i].u);
                       return {};
                   });
}

inline Report scan_determinism(std::size_t cases = default_cases, std::uint64_t seed = 404) {
    return for_all("scan-synthesis", "fixed seed gives bit-identical records", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto p = reference::params();
                       ScanConfig sc;
                       sc.positions = ScanConfig::z_line(0.0, p.wavelength / 4.0, 11);
                       sc.noise = NoiseModel::poisson;
                       sc.seed = rng();
                       sc.dwell = gen::log_uniform(rng, 1e-3, 1.0);
                       sc.efficiency = 0.3;
                       const PumpBase pump{gen::uniform(rng, 0.1, 3.0), {}};
                       const auto a = simulate_scan(p, pump, reference::velocity(), PositionSpreadKernel::delta(), sc);
                       const auto b = simulate_scan(p, pump, reference::velocity(), PositionSpreadKernel::delta(), sc);
                       for (std::size_t i = 0; i < a.size(); ++i)
                           if (a[i].counts != b[i].counts || a[i].rate != b[i].rate) return "record " + std::to_string(i);
                       // Draws depend on (seed, index) only.
                       const auto engine_draw = [&](std::size_t i) {
                           auto e = stream_engine(sc.seed, i);
                           return e();
                       };
                       if (engine_draw(5) != engine_draw(5)) return "stream not reproducible";
                       return {};
                   });
}

// --------------------------------------------------------------- deconvolution

namespace detail {

struct RlCase {
    SignalSeries truth;
    SignalSeries observed;
    PositionSpreadKernel kernel;
};

/// Random non-negative series; `interior` keeps a kernel-width margin of zeros at both ends.
inline RlCase rl_case(Rng& rng, bool interior) {
    RlCase c;
    const double pitch = gen::uniform(rng, 3e-9, 10e-9);
    c.kernel = gen::kernel(rng, pitch);
    const std::size_t margin = interior ? c.kernel.half_width() : 0;
    const std::size_t core = gen::integer(rng, 20, 80);
    const std::size_t size = core + 2 * margin;
    c.truth.z.resize(size);
    c.truth.values.assign(size, 0.0);
    const double lambda = gen::uniform(rng, 400e-9, 1000e-9);
    const double phase = gen::uniform(rng, 0.0, 6.3);
    const double floor = gen::uniform(rng, 0.0, 0.2);
    for (std::size_t i = 0; i < size; ++i) {
        c.truth.z[i] = static_cast<double>(i) * pitch;
        if (i < margin || i >= size - margin) continue;
        const double s = std::cos(units::two_pi * c.truth.z[i] / lambda + phase);
        c.truth.values[i] = 1000.0 * (floor + s * s) * gen::uniform(rng, 0.5, 1.5);
    }
    c.observed = blur(c.truth, c.kernel);
    return c;
}

}  // namespace detail

inline Report rl_nonnegativity(std::size_t cases = default_cases, std::uint64_t seed = 501) {
    return for_all("deconvolution", "Richardson-Lucy iterates stay non-negative", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto c = detail::rl_case(rng, false);
                       // Poisson-like perturbation so the data are not an exact blur.
                       for (double& v : c.observed.values) v = std::max(0.0, v + gen::uniform(rng, -30.0, 30.0));
                       std::string err;
                       richardson_lucy(c.observed, c.kernel, {}, [&](std::size_t it, const std::vector<double>& e) {
                           for (double v : e)
                               if (!(v >= 0.0) && err.empty()) err = "negative value at iteration " + std::to_string(it);
                       });
                       return err;
                   });
}

inline Report rl_flux_conservation(std::size_t cases = default_cases, std::uint64_t seed = 502) {
    return for_all("deconvolution", "interior support: total signal conserved within 0.1% at every iteration", cases,
                   seed, [](Rng& rng, std::size_t) -> std::string {
                       const auto c = detail::rl_case(rng, true);
                       const double total = c.observed.total();
                       std::string err;
                       richardson_lucy(c.observed, c.kernel, {}, [&](std::size_t it, const std::vector<double>& e) {
                           double s = 0.0;
                           for (double v : e) s += v;
                           if (std::abs(s - total) > 1e-3 * total && err.empty())
                               err = "drift " + fmt((s - total) / total) + " at iteration " + std::to_string(it);
                       });
                       return err;
                   });
}

inline Report rl_fixed_point(std::size_t cases = default_cases, std::uint64_t seed = 503) {
    return for_all("deconvolution", "one update from the exact source of the data changes it by < 1e-10", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto c = detail::rl_case(rng, false);
                       for (double& v : c.truth.values) v += 1.0;  // strictly positive source
                       c.observed = blur(c.truth, c.kernel);
                       const double peak = *std::max_element(c.observed.values.begin(), c.observed.values.end());
                       const auto next = richardson_lucy_step(c.observed, c.truth.values, c.kernel, 1e-12 * peak);
                       double d = 0.0;
                       for (std::size_t i = 0; i < next.size(); ++i)
                           d = std::max(d, std::abs(next[i] - c.truth.values[i]) / c.truth.values[i]);
                       if (d >= 1e-10) return "relative change " + fmt(d);
                       return {};
                   });
}

inline Report rl_monotone_likelihood(std::size_t cases = default_cases, std::uint64_t seed = 504) {
    return for_all("deconvolution", "Poisson likelihood non-decreasing across iterations (noiseless data)", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto c = detail::rl_case(rng, false);
                       double prev = poisson_log_likelihood(c.observed.values, blur(c.observed.values, c.kernel));
                       std::string err;
                       richardson_lucy(c.observed, c.kernel, {}, [&](std::size_t it, const std::vector<double>& e) {
                           const double l = poisson_log_likelihood(c.observed.values, blur(e, c.kernel));
                           if (l < prev - 1e-12 * std::abs(prev) && err.empty())
                               err = "likelihood fell by " + fmt(prev - l) + " at iteration " + std::to_string(it);
                           prev = l;
                       });
                       return err;
                   });
}

// ------------------------------------------------------------- calibration-fit

inline Report profile_scale_optimality(std::size_t cases = default_cases, std::uint64_t seed = 601) {
    return for_all("calibration-fit", "chi^2 at the analytic scale S* is <= chi^2 at any S", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const std::size_t m = gen::integer(rng, 3, 40);
                       std::vector<double> y(m), n(m);
                       for (std::size_t i = 0; i < m; ++i) y[i] = gen::uniform(rng, 0.0, 1e5), n[i] = gen::uniform(rng, 0.0, 5.0);
                       const double best = optimal_scale(y, n);
                       const double c0 = chi_square(y, n, best);
                       for (int k = 0; k < 20; ++k) {
                           const double s = best * gen::uniform(rng, -1.0, 3.0) + gen::uniform(rng, -1.0, 1.0);
                           if (chi_square(y, n, s) < c0 * (1.0 - 1e-12)) return "S = " + fmt(s) + " beats S*";
                       }
                       return {};
                   });
}

namespace detail {

inline FitProblem noisy_problem(Rng& rng) {
    const double mean_atoms = gen::uniform(rng, 0.8, 2.5);
    const double e = gen::uniform(rng, 0.6, 1.1);
    auto pts = reference::synthetic_points(mean_atoms, e, 270.0);
    const double dwell = 0.05;
    for (auto& pt : pts) {
        const double mu = pt.y * dwell;
        pt.y = static_cast<double>(std::poisson_distribution<std::int64_t>(mu)(rng)) / dwell;
    }
    FitProblem p;
    p.points = std::move(pts);
    p.model = reference::fit_model();
    p.dwell = dwell;
    return p;
}

}  // namespace detail

inline Report rescaling_invariance(std::size_t cases = default_cases, std::uint64_t seed = 602) {
    return for_all("calibration-fit", "y -> c y leaves (<N>, E_vac0) unchanged and maps S -> c S exactly", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       auto p = detail::noisy_problem(rng);
                       const int k = static_cast<int>(gen::integer(rng, 0, 20)) - 10;
                       const double c = std::ldexp(1.0, k);
                       const auto a = fit(p);
                       for (auto& pt : p.points) pt.y *= c;
                       const auto b = fit(p);
                       if (a.mean_atoms != b.mean_atoms || a.e_vac0 != b.e_vac0) return "argmin moved";
                       if (b.scale != c * a.scale) return "scale " + fmt(b.scale) + " != c S " + fmt(c * a.scale);
                       return {};
                   });
}

inline Report strong_coupling_guard(std::size_t cases = default_cases, std::uint64_t seed = 603) {
    return for_all("calibration-fit", "strong-coupling warning raised iff some used point has g0 sqrt(u) <= max(kappa, gamma)",
                   cases, seed, [](Rng& rng, std::size_t) -> std::string {
                       FitProblem p;
                       p.model = reference::fit_model();
                       p.model.params.kappa = gen::log_uniform(rng, 1e5, 1e7);
                       p.model.params.gamma = gen::log_uniform(rng, 1e5, 1e7);
                       for (int i = 0; i < 8; ++i) p.points.push_back({gen::uniform(rng, 0.5, 1.0), 1.0});
                       const auto prep = vacscan::detail::prepare(p, 3);
                       FitResult r;
                       r.mean_atoms = 1.0;
                       r.e_vac0 = gen::log_uniform(rng, 11.0, 900.0);
                       r.converged = true;
                       r.scale = 1.0;
                       r.model_photons.assign(prep.u.size(), 1.0);
                       r.dof = 0;
                       vacscan::detail::post_checks(p, prep, r, false);
                       PhysicalParams q = p.model.params;
                       q.e_vac0 = r.e_vac0;
                       bool violated = false;
                       for (double u : prep.u) violated = violated || !(q.peak_coupling() * std::sqrt(u) > std::max(q.kappa, q.gamma));
                       if (violated != r.has_warning("strong_coupling")) return "guard disagrees with the predicate";
                       return {};
                   });
}

/// Profile chi^2 on the default 21 x 21 log grid has exactly one local minimum, away from the border.
inline Report identifiability(std::size_t cases = default_cases, std::uint64_t seed = 604) {
    return for_all("calibration-fit", "noiseless data: unique interior minimum of chi^2 on the search grid", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const double mean_atoms = gen::uniform(rng, 0.5, 3.0);
                       const double e = gen::uniform(rng, 0.5, 1.2);
                       FitProblem p;
                       p.points = reference::synthetic_points(mean_atoms, e, 270.0);
                       p.model = reference::fit_model();
                       const auto prep = vacscan::detail::prepare(p, 3);
                       const std::size_t g = p.grid;
                       std::vector<double> chi(g * g);
                       for (std::size_t i = 0; i < g; ++i)
                           for (std::size_t j = 0; j < g; ++j) {
                               const double N = std::exp(std::log(p.mean_atoms_range[0]) +
                                                         (std::log(p.mean_atoms_range[1] / p.mean_atoms_range[0])) * i / (g - 1.0));
                               const double E = std::exp(std::log(p.e_vac0_range[0]) +
                                                         (std::log(p.e_vac0_range[1] / p.e_vac0_range[0])) * j / (g - 1.0));
                               const auto n = model_curve(N, E, prep.u, p.model).photons;
                               double nn = 0.0;
                               for (double v : n) nn += v * v;
                               chi[i * g + j] = nn > 0.0 ? chi_square(prep.y, n, optimal_scale(prep.y, n)) : chi_square(prep.y, n, 0.0);
                           }
                       std::size_t minima = 0, border = 0;
                       for (std::size_t i = 0; i < g; ++i)
                           for (std::size_t j = 0; j < g; ++j) {
                               bool is_min = true;
                               for (int di = -1; di <= 1 && is_min; ++di)
                                   for (int dj = -1; dj <= 1; ++dj) {
                                       if (!di && !dj) continue;
                                       const auto a = static_cast<std::ptrdiff_t>(i) + di, b = static_cast<std::ptrdiff_t>(j) + dj;
                                       if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(g) || b >= static_cast<std::ptrdiff_t>(g)) continue;
                                       if (chi[static_cast<std::size_t>(a) * g + static_cast<std::size_t>(b)] <= chi[i * g + j]) {
                                           is_min = false;
                                           break;
                                       }
                                   }
                               if (!is_min) continue;
                               ++minima;
                               if (i == 0 || j == 0 || i == g - 1 || j == g - 1) ++border;
                           }
                       if (minima != 1 || border != 0)
                           return std::to_string(minima) + " grid minima (" + std::to_string(border) + " on the border)";
                       return {};
                   });
}

// ------------------------------------------------------------ trajectory-oracle

namespace detail {

inline TrajectoryPump small_pump(Rng& rng) {
    const double kappa = 1e6;
    const double kt = gen::uniform(rng, 0.05, 0.3);
    const double gt = gen::uniform(rng, 0.2, 2.0);
    const double tau = kt / kappa;
    return TrajectoryPump::single(gen::uniform(rng, 0.2, 2.0), gt / tau, tau, kappa);
}

inline TrajectoryConfig small_config(Rng& rng, double kappa) {
    TrajectoryConfig c;
    c.trajectories = 4;
    c.t_final = 5.0 / kappa;
    c.checkpoints = {2.5 / kappa, 5.0 / kappa};
    c.seed = rng();
    c.threads = 1;
    c.record_events = true;
    c.initial_photons = gen::integer(rng, 0, 3);
    return c;
}

}  // namespace detail

inline Report norm_contraction(std::size_t cases = default_cases, std::uint64_t seed = 701) {
    return for_all("trajectory-oracle", "unnormalised norm never grows between jumps", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = detail::small_pump(rng);
                       const auto ens = run_trajectories(pump, detail::small_config(rng, pump.kappa));
                       if (ens.max_norm_increase > 1e-13) return "norm grew by " + fmt(ens.max_norm_increase);
                       return {};
                   });
}

inline Report excitation_bookkeeping(std::size_t cases = default_cases, std::uint64_t seed = 702) {
    return for_all("trajectory-oracle",
                   "photons + excited atoms: -1 per cavity jump, +1 per injection, never up otherwise", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = detail::small_pump(rng);
                       auto cfg = detail::small_config(rng, pump.kappa);
                       const auto ens = run_trajectories(pump, cfg);
                       for (const auto& log : ens.events) {
                           std::size_t m = cfg.initial_photons;
                           for (const auto& ev : log) {
                               const long d = static_cast<long>(ev.excitations) - static_cast<long>(m);
                               long want = 0;
                               switch (ev.kind) {
                                   case TrajectoryEventKind::arrival: want = 1; break;
                                   case TrajectoryEventKind::cavity_jump: want = -1; break;
                                   case TrajectoryEventKind::exit_excited: want = -1; break;
                                   case TrajectoryEventKind::exit_ground: want = 0; break;
                                   case TrajectoryEventKind::queued: want = 0; break;
                               }
                               if (d != want) return "excitation change " + std::to_string(d) + " at t = " + fmt(ev.time);
                               m = ev.excitations;
                           }
                       }
                       return {};
                   });
}

/// A_max = 1, low rate: steady <n> from trajectories matches the product formula.
/// Each case uses |z| <= 3.9, the two-sided 1e-4 level, so the family of 100
/// cases keeps a 1% false-alarm rate.
inline Report single_atom_limit(std::size_t cases = default_cases, std::uint64_t seed = 703) {
    return for_all("trajectory-oracle", "single-atom limit agrees with the product formula", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const double kappa = 1e6;
                       const double kt = gen::uniform(rng, 0.02, 0.2);
                       const double gt = gen::uniform(rng, 0.3, 1.5);
                       const double mean_atoms = gen::uniform(rng, 0.02, 0.1);
                       const double tau = kt / kappa;
                       const auto pump = TrajectoryPump::single(mean_atoms, gt / tau, tau, kappa);
                       TrajectoryConfig cfg;
                       cfg.trajectories = 300;
                       cfg.max_atoms = 1;
                       cfg.seed = rng();
                       cfg.threads = 1;
                       cfg.t_final = 30.0 / kappa;
                       for (int i = 1; i <= 10; ++i) cfg.checkpoints.push_back((10.0 + 2.0 * i) / kappa);
                       const auto ens = run_trajectories(pump, cfg);
                       // Per-trajectory time average, then mean and standard error across trajectories.
                       double s = 0.0, s2 = 0.0;
                       for (const auto& row : ens.photons) {
                           double a = 0.0;
                           for (double v : row) a += v;
                           a /= static_cast<double>(row.size());
                           s += a, s2 += a * a;
                       }
                       const double n = static_cast<double>(ens.photons.size());
                       const double mean = s / n;
                       const double se = std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1.0)) / n);
                       const double master =
                           mean_photon(solve_steady_state(GainModel::from_pump({mean_atoms, tau, gt / tau, kappa})));
                       const double z = se > 0.0 ? (mean - master) / se : (mean == master ? 0.0 : HUGE_VAL);
                       if (std::abs(z) > 3.9) return "z = " + fmt(z) + " (trajectories " + fmt(mean) + ", master " + fmt(master) + ")";
                       return {};
                   });
}

inline Report jump_log_determinism(std::size_t cases = default_cases, std::uint64_t seed = 704) {
    return for_all("trajectory-oracle", "fixed seed gives a bit-identical jump log", cases, seed,
                   [](Rng& rng, std::size_t) -> std::string {
                       const auto pump = detail::small_pump(rng);
                       auto cfg = detail::small_config(rng, pump.kappa);
                       const auto a = run_trajectories(pump, cfg);
                       cfg.threads = 2;  // thread layout must not matter
                       const auto b = run_trajectories(pump, cfg);
                       if (a.events.size() != b.events.size()) return "different trajectory count";
                       for (std::size_t i = 0; i < a.events.size(); ++i) {
                           if (a.events[i].size() != b.events[i].size()) return "different event count";
                           for (std::size_t k = 0; k < a.events[i].size(); ++k)
                               if (a.events[i][k].time != b.events[i][k].time || a.events[i][k].kind != b.events[i][k].kind)
                                   return "event " + std::to_string(k) + " differs";
                       }
                       if (a.mean != b.mean) return "ensemble means differ";
                       return {};
                   });
}

/// Every suite, in module order.
inline std::vector<std::function<Report()>> all_suites() {
    return {
        [] { return mode_symmetry(); },          [] { return axis_intensity(); },
        [] { return transit_product(); },        [] { return coupling_linearity(); },
        [] { return gain_normalization(); },     [] { return loss_trace(); },
        [] { return gain_loss_balance(); },      [] { return linear_regime_distribution(); },
        [] { return rate_scaling(); },           [] { return delta_average_identity(); },
        [] { return output_average_bounds(); },  [] { return velocity_narrowing(); },
        [] { return forward_identity(); },       [] { return poisson_mean(); },
        [] { return linear_monotonicity(); },    [] { return scan_determinism(); },
        [] { return rl_nonnegativity(); },       [] { return rl_flux_conservation(); },
        [] { return rl_fixed_point(); },         [] { return rl_monotone_likelihood(); },
        [] { return profile_scale_optimality(); }, [] { return rescaling_invariance(); },
        [] { return strong_coupling_guard(); },  [] { return identifiability(); },
        [] { return norm_contraction(); },       [] { return excitation_bookkeeping(); },
        [] { return single_atom_limit(); },      [] { return jump_log_determinism(); },
    };
}

}  // namespace vacscan::properties
