// ensemble.hpp - averaging of the atomic gain over the beam velocity
// distribution and over the transverse position spread behind the nanoholes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vacscan/error.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/physics.hpp"

namespace vacscan {

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n) {
    std::vector<double> x(n), w(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(units::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * static_cast<double>(j) - 1.0) * z * p1 - (static_cast<double>(j) - 1.0) * p2) /
                     static_cast<double>(j);
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace detail

enum class VelocityKind { delta, truncated_gaussian, tabulated };

inline std::string to_string(VelocityKind k) {
    switch (k) {
        case VelocityKind::delta: return "delta";
        case VelocityKind::truncated_gaussian: return "truncated-gaussian";
        case VelocityKind::tabulated: return "tabulated";
    }
    return "unknown";
}

struct VelocityNode {
    double velocity;  // m/s
    double weight;
};

/// Flux-weighted velocity distribution of the atoms crossing the mode,
/// discretised into quadrature nodes.
class VelocityDistribution {
public:
    static VelocityDistribution delta(double velocity) {
        return VelocityDistribution(VelocityKind::delta, velocity, 0.0, {{velocity, 1.0}});
    }

    /// Gaussian restricted to [mean - 3 spread, mean + 3 spread] (and v > 0),
    /// integrated with an n-point Gauss-Legendre rule.
    static VelocityDistribution truncated_gaussian(double mean, double spread, std::size_t nodes = 9) {
        if (!(mean > 0.0)) throw InvalidArgument("mean velocity must be positive");
        if (!(spread >= 0.0)) throw InvalidArgument("velocity spread must be non-negative");
        if (spread == 0.0 || nodes <= 1) {
            auto d = delta(mean);
            d.kind_ = VelocityKind::truncated_gaussian;
            return d;
        }
        const double lo = std::max(mean - 3.0 * spread, 1e-3 * mean);
        const double hi = mean + 3.0 * spread;
        const auto [x, w] = detail::gauss_legendre(nodes);
        std::vector<VelocityNode> out;
        for (std::size_t i = 0; i < nodes; ++i) {
            const double v = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x[i];
            const double u = (v - mean) / spread;
            out.push_back({v, w[i] * std::exp(-0.5 * u * u)});
        }
        return VelocityDistribution(VelocityKind::truncated_gaussian, mean, spread, std::move(out));
    }

    static VelocityDistribution tabulated(std::vector<VelocityNode> nodes) {
        if (nodes.empty()) throw InvalidArgument("tabulated velocity distribution is empty");
        double sum = 0.0, first = 0.0;
        for (const auto& n : nodes) {
            sum += n.weight;
            first += n.weight * n.velocity;
        }
        if (!(sum > 0.0)) throw InvalidArgument("tabulated weights must have positive sum");
        const double mean = first / sum;
        double second = 0.0;
        for (const auto& n : nodes) second += n.weight * (n.velocity - mean) * (n.velocity - mean);
        return VelocityDistribution(VelocityKind::tabulated, mean, std::sqrt(second / sum), std::move(nodes));
    }

    VelocityKind kind() const { return kind_; }
    double mean() const { return mean_; }
    double spread() const { return spread_; }
    const std::vector<VelocityNode>& nodes() const { return nodes_; }

    /// Flux-weighted mean transit time <tau>.
    double mean_transit_time(const PhysicalParams& params) const {
        double t = 0.0;
        for (const auto& n : nodes_) t += n.weight * interaction_time(n.velocity, params);
        return t;
    }

    /// Atom injection rate <N> / <tau>.
    double injection_rate(double mean_atoms, const PhysicalParams& params) const {
        return mean_atoms / mean_transit_time(params);
    }

private:
    VelocityDistribution(VelocityKind kind, double mean, double spread, std::vector<VelocityNode> nodes)
        : kind_(kind), mean_(mean), spread_(spread), nodes_(std::move(nodes)) {
        double sum = 0.0;
        for (const auto& n : nodes_) {
            if (!(n.velocity > 0.0)) throw InvalidArgument("node velocities must be positive");
            if (!(n.weight >= 0.0)) throw InvalidArgument("velocity weights must be non-negative");
            sum += n.weight;
        }
        for (auto& n : nodes_) n.weight /= sum;
    }

    VelocityKind kind_;
    double mean_;
    double spread_;
    std::vector<VelocityNode> nodes_;
};

enum class SpreadAxis { z, xz };

/// Symmetric discrete distribution of atom offsets around the aperture centre,
/// on the grid offset_i = (i - half) * pitch.
struct PositionSpreadKernel {
    SpreadAxis axis = SpreadAxis::z;
    double pitch = 1e-9;  // m
    std::vector<double> weights{1.0};

    static PositionSpreadKernel delta(double pitch = 1e-9, SpreadAxis axis = SpreadAxis::z) {
        return {axis, pitch, {1.0}};
    }

    std::size_t half_width() const { return weights.size() / 2; }
    double offset(std::size_t i) const {
        return (static_cast<double>(i) - static_cast<double>(half_width())) * pitch;
    }
    bool is_delta() const { return weights.size() == 1; }

    void validate() const {
        if (weights.empty() || weights.size() % 2 == 0)
            throw InvalidArgument("kernel needs an odd number of weights centred on zero");
        if (!(pitch > 0.0)) throw InvalidArgument("kernel pitch must be positive");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw InvalidArgument("kernel weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("kernel weights must sum to 1");
    }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) m += weights[i] * offset(i);
        return m;
    }
    double variance() const {
        const double m = mean();
        double v = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) v += weights[i] * (offset(i) - m) * (offset(i) - m);
        return v;
    }
};

/// Offsets of atoms leaving a uniformly filled hole of the given diameter and
/// drifting over `standoff` with Gaussian angular divergence: the projected
/// disc profile convolved with N(0, (divergence * standoff)^2), binned at `pitch`.
inline PositionSpreadKernel build_spread_kernel(double hole_diameter, double divergence, double standoff,
                                                double pitch, SpreadAxis axis = SpreadAxis::z) {
    if (hole_diameter < 0.0 || divergence < 0.0 || standoff < 0.0)
        throw InvalidArgument("kernel geometry must be non-negative");
    if (!(pitch > 0.0)) throw InvalidArgument("kernel pitch must be positive");
    const double radius = 0.5 * hole_diameter;
    const double sigma = divergence * standoff;
    const double std_total = std::sqrt(radius * radius / 4.0 + sigma * sigma);
    if (std_total == 0.0) return PositionSpreadKernel::delta(pitch, axis);
    if (pitch > 2.0 * std_total)
        throw InvalidArgument("kernel pitch " + std::to_string(pitch) + " m exceeds kernel width " +
                              std::to_string(2.0 * std_total) + " m");

    const auto half = static_cast<std::size_t>(std::ceil((radius + 6.0 * sigma) / pitch));
    // Disc projection: s = R sin(t), density (2/pi) cos^2(t) dt on [-pi/2, pi/2].
    constexpr int disc_samples = 512;
    auto bin_mass = [&](double a, double b) {
        if (radius == 0.0) return detail::normal_cdf(b / sigma) - detail::normal_cdf(a / sigma);
        if (sigma == 0.0) {
            auto cdf = [&](double s) {
                s = std::clamp(s, -radius, radius);
                return 0.5 + (s * std::sqrt(radius * radius - s * s) + radius * radius * std::asin(s / radius)) /
                                 (units::pi * radius * radius);
            };
            return cdf(b) - cdf(a);
        }
        double m = 0.0;
        for (int j = 0; j < disc_samples; ++j) {
            const double t = -0.5 * units::pi + units::pi * (j + 0.5) / disc_samples;
            const double s = radius * std::sin(t);
            const double c = std::cos(t);
            m += c * c * (detail::normal_cdf((b - s) / sigma) - detail::normal_cdf((a - s) / sigma));
        }
        return m * 2.0 / disc_samples;
    };

    PositionSpreadKernel k;
    k.axis = axis;
    k.pitch = pitch;
    k.weights.resize(2 * half + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < k.weights.size(); ++i) {
        const double c = k.offset(i);
        k.weights[i] = bin_mass(c - 0.5 * pitch, c + 0.5 * pitch);
    }
    // Symmetrise exactly, then renormalise.
    for (std::size_t i = 0; i < half; ++i) {
        const double avg = 0.5 * (k.weights[i] + k.weights[k.weights.size() - 1 - i]);
        k.weights[i] = k.weights[k.weights.size() - 1 - i] = avg;
    }
    for (double w : k.weights) total += w;
    for (double& w : k.weights) w /= total;
    return k;
}

/// Gain of the atom ensemble hitting the cavity at `pos`: one Rabi channel per
/// (velocity node, position offset), all sharing the injection rate <N>/<tau>.
inline GainModel averaged_gain_model(const AperturePosition& pos, const PhysicalParams& params, double mean_atoms,
                                     const VelocityDistribution& vdist, const PositionSpreadKernel& kernel) {
    kernel.validate();
    std::vector<RabiChannel> channels;
    const auto& w = kernel.weights;
    const bool spread_x = kernel.axis == SpreadAxis::xz;
    for (const auto& node : vdist.nodes()) {
        const double tau = interaction_time(node.velocity, params);
        for (std::size_t iz = 0; iz < w.size(); ++iz) {
            if (w[iz] == 0.0) continue;
            const std::size_t nx = spread_x ? w.size() : 1;
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const double wx = spread_x ? w[ix] : 1.0;
                if (wx == 0.0) continue;
                const AperturePosition at{pos.x + (spread_x ? kernel.offset(ix) : 0.0), pos.z + kernel.offset(iz)};
                channels.push_back({node.weight * w[iz] * wx, coupling_at(at, params) * tau});
            }
        }
    }
    return GainModel(vdist.injection_rate(mean_atoms, params), std::move(channels), params.kappa);
}

/// Steady state with the gain averaged before solving. The averaged gain still
/// only couples n to n+1, so detailed balance with the averaged xi_k is the
/// exact stationary solution of the master equation.
inline PhotonDistribution averaged_steady_state(const AperturePosition& pos, const PhysicalParams& params,
                                                double mean_atoms, const VelocityDistribution& vdist,
                                                const PositionSpreadKernel& kernel,
                                                const TruncationOptions& opt = {}) {
    return solve_steady_state(averaged_gain_model(pos, params, mean_atoms, vdist, kernel), opt);
}

/// Diagnostic variant: solve every channel on its own and average <n>.
/// Coincides with averaged_steady_state only in the linear regime.
struct OutputAverage {
    double mean_photon = 0.0;
    bool truncated = false;
};

inline OutputAverage averaged_output(const AperturePosition& pos, const PhysicalParams& params, double mean_atoms,
                                     const VelocityDistribution& vdist, const PositionSpreadKernel& kernel,
                                     const TruncationOptions& opt = {}) {
    const auto model = averaged_gain_model(pos, params, mean_atoms, vdist, kernel);
    OutputAverage out;
    for (const auto& c : model.channels()) {
        const GainModel single(model.injection_rate(), {{1.0, c.angle}}, model.kappa());
        const auto d = solve_steady_state(single, opt);
        out.mean_photon += c.weight * mean_photon(d);
        out.truncated = out.truncated || d.truncated;
    }
    return out;
}

}  // namespace vacscan
