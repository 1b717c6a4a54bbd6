// scan.hpp - forward model of an aperture scan: positions -> cavity output ->
// detector counts, plus the linear-regime xz surface map.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vacscan/ensemble.hpp"
#include "vacscan/error.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/physics.hpp"
#include "vacscan/random.hpp"

namespace vacscan {

// Population change during transit and solid angle of the cavity mode used
// for the free-space spontaneous-emission background.
inline constexpr double free_space_population_change = 0.028;
inline constexpr double mode_solid_angle_fraction = 1e-4;

/// Cavity output attributable to free-space decay of the transiting atoms.
inline double background_flux(double mean_atoms, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("interaction time must be positive");
    return (mean_atoms / tau) * free_space_population_change * mode_solid_angle_fraction;
}

enum class NoiseModel { none, poisson };

struct ScanConfig {
    std::vector<AperturePosition> positions;
    double dwell = 1.0;            // s per point
    double efficiency = 1.0;       // detected counts per cavity output photon
    double dark_rate = 0.0;        // counts/s
    std::uint64_t seed = 0;
    NoiseModel noise = NoiseModel::none;
    bool background = true;

    void validate() const {
        if (!(dwell > 0.0)) throw InvalidArgument("dwell time must be positive");
        if (!(efficiency >= 0.0)) throw InvalidArgument("detector efficiency must be non-negative");
        if (!(dark_rate >= 0.0)) throw InvalidArgument("dark rate must be non-negative");
        for (const auto& p : positions)
            if (!std::isfinite(p.x) || !std::isfinite(p.z)) throw InvalidArgument("scan positions must be finite");
    }

    /// Node-to-antinode scan on the x = 0 line.
    static std::vector<AperturePosition> z_line(double z_start, double z_stop, std::size_t points, double x = 0.0) {
        std::vector<AperturePosition> out;
        if (points == 0) return out;
        for (std::size_t i = 0; i < points; ++i) {
            const double f = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
            out.push_back({x, z_start + f * (z_stop - z_start)});
        }
        return out;
    }
};

struct ScanRecord {
    AperturePosition position;
    double u = 0.0;              // cos^2(2 pi z / lambda)
    double expected_flux = 0.0;  // kappa <n>, photons/s
    std::int64_t counts = 0;
    double rate = 0.0;           // counts/s
    bool truncated = false;
};

/// Pump description shared by the forward-model operations.
struct PumpBase {
    double mean_atoms = 1.0;
    TruncationOptions truncation{};
};

/// Expected detector rate S (kappa <n> + background) + dark, then counts drawn
/// from stream `index` of the seed (Poisson) or rounded (noise = none).
/// With noise = none the reported rate is the expected rate itself.
inline std::vector<ScanRecord> simulate_scan(const PhysicalParams& params, const PumpBase& pump,
                                             const VelocityDistribution& vdist, const PositionSpreadKernel& kernel,
                                             const ScanConfig& scan) {
    params.validate();
    scan.validate();
    const double tau_mean = vdist.mean_transit_time(params);
    const double bg = scan.background ? background_flux(pump.mean_atoms, tau_mean) : 0.0;
    std::vector<ScanRecord> out;
    out.reserve(scan.positions.size());
    for (std::size_t i = 0; i < scan.positions.size(); ++i) {
        const auto& pos = scan.positions[i];
        const auto dist = averaged_steady_state(pos, params, pump.mean_atoms, vdist, kernel, pump.truncation);
        ScanRecord r;
        r.position = pos;
        r.u = relative_intensity(pos.z, params.wavelength);
        r.expected_flux = photon_flux(dist, params.kappa);
        r.truncated = dist.truncated;
        const double expected_rate = scan.efficiency * (r.expected_flux + bg) + scan.dark_rate;
        const double mean_counts = expected_rate * scan.dwell;
        if (scan.noise == NoiseModel::poisson) {
            auto engine = stream_engine(scan.seed, i);
            r.counts = mean_counts > 0.0 ? std::poisson_distribution<std::int64_t>(mean_counts)(engine) : 0;
            r.rate = static_cast<double>(r.counts) / scan.dwell;
        } else {
            r.counts = std::llround(mean_counts);
            r.rate = expected_rate;
        }
        out.push_back(r);
    }
    return out;
}

struct SurfaceMap {
    std::vector<double> x;
    std::vector<double> z;
    std::vector<double> flux;  // row-major, flux[ix * z.size() + iz]
    bool linear_regime = true;

    double at(std::size_t ix, std::size_t iz) const { return flux[ix * z.size() + iz]; }
};

/// Linear-regime surface (<N>/tau)(g0 tau)^2 psi(x, z)^2 at the mean transit time.
inline SurfaceMap surface_map(const PhysicalParams& params, const PumpBase& pump, const VelocityDistribution& vdist,
                              std::vector<double> x_grid, std::vector<double> z_grid) {
    params.validate();
    const double tau = vdist.mean_transit_time(params);
    const double angle = params.peak_coupling() * tau;
    SurfaceMap m;
    m.x = std::move(x_grid);
    m.z = std::move(z_grid);
    m.linear_regime = pump.mean_atoms * angle * angle < 0.1;
    const double peak = (pump.mean_atoms / tau) * angle * angle;
    m.flux.reserve(m.x.size() * m.z.size());
    for (double x : m.x)
        for (double z : m.z) {
            const double psi = mode_function({x, z}, params);
            m.flux.push_back(peak * psi * psi);
        }
    return m;
}

}  // namespace vacscan
