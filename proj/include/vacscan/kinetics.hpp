// kinetics.hpp - diagonal photon kinetics of a cavity pumped by excited atoms:
// the one-atom gain map, cavity loss, master-equation evolution and the
// detailed-balance steady state.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vacscan/error.hpp"

namespace vacscan {

/// Truncated diagonal field state p(0..n_max).
struct PhotonDistribution {
    std::vector<double> p;
    // Probability that tried to climb above n_max (gain map / evolution) or,
    // for steady states, the weight left in p(n_max).
    double overflow = 0.0;
    bool truncated = false;

    static PhotonDistribution fock(std::size_t n, std::size_t n_max) {
        if (n > n_max) throw InvalidArgument("Fock index exceeds truncation");
        PhotonDistribution d;
        d.p.assign(n_max + 1, 0.0);
        d.p[n] = 1.0;
        return d;
    }
    static PhotonDistribution vacuum(std::size_t n_max) { return fock(0, n_max); }

    std::size_t n_max() const { return p.size() - 1; }
    std::size_t size() const { return p.size(); }
    double operator[](std::size_t n) const { return p[n]; }
    double norm() const { return std::accumulate(p.begin(), p.end(), 0.0); }
};

inline constexpr double default_truncation_tol = 1e-10;

/// One-channel pump: <N> atoms in the mode volume, transit time tau, coupling g.
struct PumpParams {
    double mean_atoms = 0.0;
    double tau = 1.0;   // s
    double g = 0.0;     // rad/s
    double kappa = 1.0; // rad/s

    void validate() const {
        if (!(tau > 0.0)) throw InvalidArgument("interaction time must be positive");
        if (!(kappa > 0.0)) throw InvalidArgument("kappa must be positive");
        if (!(mean_atoms >= 0.0)) throw InvalidArgument("<N> must be non-negative");
    }
    double injection_rate() const { return mean_atoms / tau; }
    double rabi_angle() const { return g * tau; }
};

/// A population of atoms sharing one injection rate but differing in Rabi
/// angle g*tau (velocity classes, position offsets). weight sums to 1.
struct RabiChannel {
    double weight;
    double angle;
};

/// Gain averaged over Rabi channels. With a single channel this is exactly the
/// Jaynes-Cummings gain of one fully excited atom.
class GainModel {
public:
    GainModel(double injection_rate, std::vector<RabiChannel> channels, double kappa)
        : rate_(injection_rate), kappa_(kappa), channels_(std::move(channels)) {
        if (!(rate_ >= 0.0)) throw InvalidArgument("injection rate must be non-negative");
        if (!(kappa_ > 0.0)) throw InvalidArgument("kappa must be positive");
        if (channels_.empty()) throw InvalidArgument("gain model needs at least one channel");
        double total = 0.0;
        for (const auto& c : channels_) {
            if (!(c.weight >= 0.0)) throw InvalidArgument("channel weights must be non-negative");
            total += c.weight;
        }
        if (!(std::abs(total - 1.0) < 1e-9)) throw InvalidArgument("channel weights must sum to 1");
    }

    static GainModel from_pump(const PumpParams& pump) {
        pump.validate();
        return GainModel(pump.injection_rate(), {{1.0, pump.rabi_angle()}}, pump.kappa);
    }

    double injection_rate() const { return rate_; }
    double kappa() const { return kappa_; }
    const std::vector<RabiChannel>& channels() const { return channels_; }

    /// Probability that one atom entering with n photons present leaves a photon behind.
    double emission_probability(std::size_t n) const {
        const double root = std::sqrt(static_cast<double>(n) + 1.0);
        double s = 0.0;
        for (const auto& c : channels_) {
            const double v = std::sin(root * c.angle);
            s += c.weight * v * v;
        }
        return s;
    }

    /// xi_k = R <sin^2(sqrt(k) g tau)>, the upward rate from k-1 to k photons.
    double xi(std::size_t k) const { return rate_ * emission_probability(k - 1); }

private:
    double rate_;
    double kappa_;
    std::vector<RabiChannel> channels_;
};

namespace detail {

inline std::vector<double> emission_table(const GainModel& model, std::size_t n_max) {
    std::vector<double> s(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) s[n] = model.emission_probability(n);
    return s;
}

}  // namespace detail

/// Field after one fully excited atom transit:
/// p'(n) = p(n) [1 - s_n] + p(n-1) s_{n-1} with s_n the emission probability.
/// Weight that would climb past n_max stays at n_max and is tallied in `overflow`.
inline PhotonDistribution gain_map(const PhotonDistribution& in, const GainModel& model) {
    const std::size_t top = in.n_max();
    const auto s = detail::emission_table(model, top);
    PhotonDistribution out;
    out.p.assign(in.size(), 0.0);
    out.overflow = in.overflow;
    for (std::size_t n = 0; n <= top; ++n) {
        const double up = in.p[n] * s[n];
        if (n < top) {
            out.p[n] += in.p[n] - up;
            out.p[n + 1] += up;
        } else {
            out.p[n] += in.p[n];
            out.overflow += up;
        }
    }
    out.truncated = in.truncated;
    return out;
}

inline PhotonDistribution gain_map(const PhotonDistribution& in, double g, double tau) {
    return gain_map(in, GainModel(0.0, {{1.0, g * tau}}, 1.0));
}

/// Diagonal cavity loss dp(n)/dt = kappa [(n+1) p(n+1) - n p(n)].
inline std::vector<double> loss_rate(std::span<const double> p, double kappa) {
    std::vector<double> d(p.size(), 0.0);
    for (std::size_t n = 0; n < p.size(); ++n) {
        const double out = kappa * static_cast<double>(n) * p[n];
        d[n] -= out;
        if (n > 0) d[n - 1] += out;
    }
    return d;
}

inline std::vector<double> loss_rate(const PhotonDistribution& p, double kappa) {
    return loss_rate(std::span<const double>(p.p), kappa);
}

inline double mean_photon(std::span<const double> p) {
    double m = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<double>(n) * p[n];
    return m;
}
inline double mean_photon(const PhotonDistribution& p) { return mean_photon(std::span<const double>(p.p)); }

/// Cavity output in photons per second, kappa <n>.
inline double photon_flux(const PhotonDistribution& p, double kappa) { return kappa * mean_photon(p); }

/// Steady state of the master equation from the detailed-balance product
/// p(n) = p(0) prod_{k<=n} xi_k / (kappa k), accumulated as log-sums.
inline PhotonDistribution steady_state_product(const GainModel& model, std::size_t n_max,
                                               double truncation_tol = default_truncation_tol) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(n_max + 1, neg_inf);
    logp[0] = 0.0;
    double peak = 0.0;
    for (std::size_t k = 1; k <= n_max; ++k) {
        const double ratio = model.xi(k) / (model.kappa() * static_cast<double>(k));
        if (!(ratio > 0.0)) break;  // a vanishing xi_k blocks every higher level
        logp[k] = logp[k - 1] + std::log(ratio);
        peak = std::max(peak, logp[k]);
    }
    PhotonDistribution d;
    d.p.resize(n_max + 1);
    double total = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        d.p[n] = std::exp(logp[n] - peak);
        total += d.p[n];
    }
    for (auto& v : d.p) v /= total;
    d.overflow = d.p.back();
    d.truncated = d.p.back() >= truncation_tol;
    return d;
}

inline PhotonDistribution steady_state_product(const PumpParams& pump, std::size_t n_max,
                                               double truncation_tol = default_truncation_tol) {
    return steady_state_product(GainModel::from_pump(pump), n_max, truncation_tol);
}

struct TruncationOptions {
    std::size_t n_max = 40;
    std::size_t n_max_limit = 160;
    double tol = default_truncation_tol;
};

/// Steady state with the Fock cutoff doubled until p(n_max) < tol or the limit
/// is reached; in the latter case the result carries `truncated`.
inline PhotonDistribution solve_steady_state(const GainModel& model, const TruncationOptions& opt = {}) {
    std::size_t n_max = std::max<std::size_t>(opt.n_max, 1);
    for (;;) {
        auto d = steady_state_product(model, n_max, opt.tol);
        if (!d.truncated || n_max >= opt.n_max_limit) return d;
        n_max = std::min(2 * n_max, opt.n_max_limit);
    }
}

/// Right-hand side of the master equation dp/dt = R [F - I] p + L p.
/// Returns the rate of probability lost through the truncation ceiling.
inline double master_rhs(std::span<const double> p, std::span<const double> emission, double rate,
                         double kappa, std::span<double> out) {
    const std::size_t top = p.size() - 1;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t n = 0; n <= top; ++n) {
        if (n < top) {
            const double up = rate * emission[n] * p[n];
            out[n] -= up;
            out[n + 1] += up;
        }
        const double down = kappa * static_cast<double>(n) * p[n];
        out[n] -= down;
        if (n > 0) out[n - 1] += down;
    }
    return rate * emission[top] * p[top];
}

/// Largest step the explicit integrator accepts:
/// 0.1 min(tau/<N>, 1/(kappa n_max)), with tau/<N> = 1/R.
inline double max_time_step(const GainModel& model, std::size_t n_max) {
    double bound = 1.0 / (model.kappa() * static_cast<double>(std::max<std::size_t>(n_max, 1)));
    if (model.injection_rate() > 0.0) bound = std::min(bound, 1.0 / model.injection_rate());
    return 0.1 * bound;
}

/// Classical RK4 integration of the master equation up to t_final.
/// `dt` <= 0 selects max_time_step(); larger steps are rejected.
inline PhotonDistribution evolve(const PhotonDistribution& p0, const GainModel& model, double t_final,
                                 double dt = 0.0) {
    if (!(t_final >= 0.0)) throw InvalidArgument("t_final must be non-negative");
    const std::size_t size = p0.size();
    const double limit = max_time_step(model, p0.n_max());
    if (dt <= 0.0) dt = limit;
    if (dt > limit * (1.0 + 1e-12))
        throw InvalidArgument("time step " + std::to_string(dt) + " exceeds stability guard " +
                              std::to_string(limit));

    const auto emission = detail::emission_table(model, p0.n_max());
    const double rate = model.injection_rate();
    const double kappa = model.kappa();

    PhotonDistribution state = p0;
    if (t_final == 0.0) return state;
    const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
    const double h = t_final / static_cast<double>(steps);

    std::vector<double> k1(size), k2(size), k3(size), k4(size), tmp(size);
    auto& p = state.p;
    for (std::size_t step = 0; step < steps; ++step) {
        const double o1 = master_rhs(p, emission, rate, kappa, k1);
        for (std::size_t i = 0; i < size; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
        const double o2 = master_rhs(tmp, emission, rate, kappa, k2);
        for (std::size_t i = 0; i < size; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
        const double o3 = master_rhs(tmp, emission, rate, kappa, k3);
        for (std::size_t i = 0; i < size; ++i) tmp[i] = p[i] + h * k3[i];
        const double o4 = master_rhs(tmp, emission, rate, kappa, k4);
        double norm = 0.0;
        double lowest = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            norm += p[i];
            lowest = std::min(lowest, p[i]);
        }
        state.overflow += h / 6.0 * (o1 + 2.0 * o2 + 2.0 * o3 + o4);
        if (lowest < -1e-9 || std::abs(norm - 1.0) > 1e-6 || !std::isfinite(norm))
            throw InstabilityError("master-equation integration unstable at t = " +
                                   std::to_string(h * static_cast<double>(step + 1)) +
                                   " (min p = " + std::to_string(lowest) +
                                   ", norm = " + std::to_string(norm) + ")");
    }
    state.truncated = state.truncated || p.back() >= default_truncation_tol;
    return state;
}

inline PhotonDistribution evolve(const PhotonDistribution& p0, const PumpParams& pump, double t_final,
                                 double dt = 0.0) {
    return evolve(p0, GainModel::from_pump(pump), t_final, dt);
}

/// The t -> infinity limit of evolve() from the vacuum. The one-step RK4
/// propagator P = I + hG + (hG)^2/2 + (hG)^3/6 + (hG)^4/24 of the linear master
/// equation is squared until all its columns agree, so the elapsed time
/// doubles each round (2^k h) and slow near-trapping modes still relax.
/// Columns are renormalised after each squaring to discount the truncation leak.
inline PhotonDistribution evolve_to_stationarity(const GainModel& model, std::size_t n_max, double tol = 1e-14,
                                                 std::size_t max_doublings = 400) {
    const std::size_t n = n_max + 1;
    const double h = max_time_step(model, n_max);
    const auto emission = detail::emission_table(model, n_max);
    using Matrix = std::vector<double>;  // row-major n x n
    Matrix hg(n * n, 0.0);
    std::vector<double> basis(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        basis[j] = 1.0;
        master_rhs(basis, emission, model.injection_rate(), model.kappa(), col);
        basis[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) hg[i * n + j] = h * col[i];
    }
    auto multiply = [n](const Matrix& a, const Matrix& b) {
        Matrix c(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const double aik = a[i * n + k];
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
            }
        return c;
    };
    // Horner form: I + A (I + A/2 (I + A/3 (I + A/4))).
    Matrix prop(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) prop[i * n + i] = 1.0;
    for (int order = 4; order >= 1; --order) {
        Matrix t = multiply(hg, prop);
        for (std::size_t i = 0; i < n * n; ++i) prop[i] = t[i] / order;
        for (std::size_t i = 0; i < n; ++i) prop[i * n + i] += 1.0;
    }
    for (std::size_t round = 0; round < max_doublings; ++round) {
        prop = multiply(prop, prop);
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += prop[i * n + j];
            for (std::size_t i = 0; i < n; ++i) prop[i * n + j] /= sum;
        }
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = prop.begin() + static_cast<std::ptrdiff_t>(i * n);
            const auto [lo, hi] = std::minmax_element(row, row + static_cast<std::ptrdiff_t>(n));
            spread = std::max(spread, *hi - *lo);
        }
        if (spread < tol) {
            PhotonDistribution out;
            out.p.resize(n);
            for (std::size_t i = 0; i < n; ++i) out.p[i] = prop[i * n];
            out.truncated = out.p.back() >= default_truncation_tol;
            return out;
        }
    }
    throw InstabilityError("master-equation propagator did not converge to a stationary state");
}

/// Linear-regime output xi_1 = (<N>/tau) sin^2(g tau), valid for <n> << 1.
inline double linear_regime_output(const PumpParams& pump) {
    pump.validate();
    const double s = std::sin(pump.rabi_angle());
    return pump.injection_rate() * s * s;
}

/// Small-angle form (<N>/tau) (g tau)^2; proportional to the local vacuum intensity.
inline double linear_regime_output_quadratic(const PumpParams& pump) {
    pump.validate();
    const double a = pump.rabi_angle();
    return pump.injection_rate() * a * a;
}

}  // namespace vacscan
