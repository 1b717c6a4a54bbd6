// trajectory.hpp - Monte Carlo wavefunction simulation of a cavity crossed by
// Poisson-distributed excited atoms, with overlapping transits. Independent
// check on the coarse-grained master equation.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "vacscan/ensemble.hpp"
#include "vacscan/error.hpp"
#include "vacscan/physics.hpp"
#include "vacscan/random.hpp"

namespace vacscan {

struct TrajectoryConfig {
    std::size_t trajectories = 1000;
    double t_final = 0.0;              // s
    std::vector<double> checkpoints;   // s, ascending, within (0, t_final]
    std::uint64_t seed = 1;
    std::size_t max_atoms = 6;
    std::size_t n_max = 200;           // excitation ceiling; exceeding it is an error
    double dt = 0.0;                   // RK4 step cap (s); 0 lets the integrator choose
    std::size_t initial_photons = 0;
    std::size_t threads = 0;           // 0: hardware concurrency
    bool record_events = false;

    void validate() const {
        if (trajectories < 1) throw InvalidArgument("need at least one trajectory");
        if (max_atoms < 1 || max_atoms > 12) throw InvalidArgument("max_atoms must lie in [1, 12]");
        if (!(t_final > 0.0)) throw InvalidArgument("t_final must be positive");
        if (initial_photons > n_max) throw InvalidArgument("initial photons exceed n_max");
        double prev = 0.0;
        for (double c : checkpoints) {
            if (!(c >= prev) || c > t_final) throw InvalidArgument("checkpoints must be ascending within [0, t_final]");
            prev = c;
        }
    }
};

/// Class of atoms with coupling g and transit time tau.
struct AtomClass {
    double weight;
    double g;
    double tau;
};

/// Atoms reaching the cavity at `pos`: a Poisson stream of rate <N>/<tau>,
/// each atom drawn from the velocity ensemble and position-spread kernel.
struct TrajectoryPump {
    double injection_rate = 0.0;
    double kappa = 1.0;
    std::vector<AtomClass> classes;

    static TrajectoryPump from(const AperturePosition& pos, const PhysicalParams& params, double mean_atoms,
                               const VelocityDistribution& vdist,
                               const PositionSpreadKernel& kernel = PositionSpreadKernel::delta()) {
        kernel.validate();
        TrajectoryPump p;
        p.injection_rate = vdist.injection_rate(mean_atoms, params);
        p.kappa = params.kappa;
        for (const auto& node : vdist.nodes()) {
            const double tau = interaction_time(node.velocity, params);
            for (std::size_t i = 0; i < kernel.weights.size(); ++i) {
                if (kernel.weights[i] == 0.0) continue;
                const AperturePosition at{pos.x, pos.z + kernel.offset(i)};
                p.classes.push_back({node.weight * kernel.weights[i], coupling_at(at, params), tau});
            }
        }
        return p;
    }

    static TrajectoryPump single(double mean_atoms, double g, double tau, double kappa) {
        return {mean_atoms / tau, kappa, {{1.0, g, tau}}};
    }
};

// arrival: an atom enters the mode (possibly after waiting in the queue).
enum class TrajectoryEventKind { arrival, cavity_jump, exit_excited, exit_ground, queued };

struct TrajectoryEvent {
    double time;
    TrajectoryEventKind kind;
    std::size_t excitations;  // photons + excited atoms in the mode, after the event
    std::size_t atoms;        // atoms in the mode, after the event
};

struct JumpLogSummary {
    std::uint64_t arrivals = 0;
    std::uint64_t cavity_jumps = 0;
    std::uint64_t emissions = 0;  // atoms that left in the ground state
    std::uint64_t queued = 0;     // arrivals delayed because max_atoms were present
    std::size_t max_simultaneous = 0;
};

struct TrajectoryEnsemble {
    std::vector<double> checkpoints;
    std::vector<std::vector<double>> photons;  // [trajectory][checkpoint]
    std::vector<double> mean;
    std::vector<double> stderr_mean;
    JumpLogSummary log;
    std::vector<std::vector<TrajectoryEvent>> events;  // filled when record_events
    double max_norm_increase = 0.0;  // between jumps; should stay at rounding level
    bool unreliable = false;
};

/// g tau / (pi sqrt(<n> + 1)); atoms act independently when this is small.
inline double multi_atom_condition(double g, double tau, double mean_photons) {
    return std::abs(g) * tau / (units::pi * std::sqrt(mean_photons + 1.0));
}

inline constexpr double multi_atom_threshold = 0.3;

namespace detail {

/// Pure state with a definite excitation number m = photons + excited atoms,
/// stored as amplitudes over the excitation pattern of the atoms in the mode;
/// the photon number of pattern b is m - popcount(b).
class JointState {
public:
    using cplx = std::complex<double>;

    explicit JointState(std::size_t photons) : m_(photons), amp_{cplx(1.0, 0.0)} {}

    std::size_t atoms() const { return g_.size(); }
    std::size_t excitations() const { return m_; }
    const std::vector<double>& couplings() const { return g_; }

    long photons(std::size_t b) const {
        return static_cast<long>(m_) - std::popcount(static_cast<unsigned>(b));
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& a : amp_) s += std::norm(a);
        return s;
    }

    double mean_photons() const {
        double s = 0.0, t = 0.0;
        for (std::size_t b = 0; b < amp_.size(); ++b) {
            const double w = std::norm(amp_[b]);
            if (w == 0.0) continue;
            s += w * static_cast<double>(photons(b));
            t += w;
        }
        return t > 0.0 ? s / t : 0.0;
    }

    void add_excited_atom(double g) {
        const std::size_t bit = std::size_t{1} << g_.size();
        amp_.resize(2 * amp_.size(), cplx(0.0, 0.0));
        for (std::size_t b = 0; b < bit; ++b) {
            amp_[b | bit] = amp_[b];
            amp_[b] = 0.0;
        }
        g_.push_back(g);
        ++m_;
    }

    /// Projective measurement of atom `a` as it leaves; the surviving norm is kept.
    /// Returns true if the atom left excited.
    bool remove_atom(std::size_t a, double uniform) {
        const std::size_t bit = std::size_t{1} << a;
        double pe = 0.0, total = 0.0;
        for (std::size_t b = 0; b < amp_.size(); ++b) {
            const double w = std::norm(amp_[b]);
            total += w;
            if (b & bit) pe += w;
        }
        const bool excited = uniform < pe / total;
        const double kept = excited ? pe : total - pe;
        const double rescale = std::sqrt(total / kept);
        std::vector<cplx> next(amp_.size() / 2);
        const std::size_t low = bit - 1;
        for (std::size_t b = 0; b < amp_.size(); ++b) {
            if (static_cast<bool>(b & bit) != excited) continue;
            next[(b & low) | ((b >> (a + 1)) << a)] = amp_[b] * rescale;
        }
        amp_ = std::move(next);
        g_.erase(g_.begin() + static_cast<std::ptrdiff_t>(a));
        if (excited) --m_;
        return excited;
    }

    /// Cavity photon escapes: psi <- a psi / |a psi|.
    void cavity_jump() {
        double s = 0.0;
        for (std::size_t b = 0; b < amp_.size(); ++b) {
            const long n = photons(b);
            amp_[b] *= n > 0 ? std::sqrt(static_cast<double>(n)) : 0.0;
            s += std::norm(amp_[b]);
        }
        if (!(s > 0.0)) throw InstabilityError("cavity jump from a state without photons");
        --m_;
        const double inv = 1.0 / std::sqrt(s);
        for (auto& a : amp_) a *= inv;
    }

    void normalize() {
        const double inv = 1.0 / std::sqrt(norm2());
        for (auto& a : amp_) a *= inv;
    }

    /// d psi / dt = -i H psi - (kappa / 2) n psi with H = sum_a g_a (sigma+_a a + a^dag sigma-_a).
    void derivative(const std::vector<cplx>& psi, double kappa, std::vector<cplx>& out) const {
        out.assign(psi.size(), cplx(0.0, 0.0));
        for (std::size_t b = 0; b < psi.size(); ++b) {
            const cplx v = psi[b];
            if (v == cplx(0.0, 0.0)) continue;
            const long n = photons(b);
            if (n < 0) continue;
            out[b] -= 0.5 * kappa * static_cast<double>(n) * v;
            const cplx iv(v.imag(), -v.real());  // -i v
            const double up = std::sqrt(static_cast<double>(n + 1));
            const double down = std::sqrt(static_cast<double>(n));
            for (std::size_t a = 0; a < g_.size(); ++a) {
                const std::size_t bit = std::size_t{1} << a;
                if (b & bit) out[b ^ bit] += (g_[a] * up) * iv;
                else if (n > 0) out[b | bit] += (g_[a] * down) * iv;
            }
        }
    }

    /// One classical RK4 step of length h from `psi` into `out`.
    void rk4(const std::vector<cplx>& psi, double kappa, double h, std::vector<cplx>& out) const {
        const std::size_t size = psi.size();
        tmp_.resize(size);
        derivative(psi, kappa, k1_);
        for (std::size_t i = 0; i < size; ++i) tmp_[i] = psi[i] + 0.5 * h * k1_[i];
        derivative(tmp_, kappa, k2_);
        for (std::size_t i = 0; i < size; ++i) tmp_[i] = psi[i] + 0.5 * h * k2_[i];
        derivative(tmp_, kappa, k3_);
        for (std::size_t i = 0; i < size; ++i) tmp_[i] = psi[i] + h * k3_[i];
        derivative(tmp_, kappa, k4_);
        out.resize(size);
        for (std::size_t i = 0; i < size; ++i)
            out[i] = psi[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

    std::vector<cplx>& amplitudes() { return amp_; }
    const std::vector<cplx>& amplitudes() const { return amp_; }

private:
    std::size_t m_;
    std::vector<cplx> amp_;
    std::vector<double> g_;
    mutable std::vector<cplx> k1_, k2_, k3_, k4_, tmp_;
};

// RK4 step length in units of the inverse fastest rate (Rabi + decay).
inline constexpr double rk_step_scale = 0.05;

inline double norm2_of(const std::vector<std::complex<double>>& v) {
    double s = 0.0;
    for (const auto& a : v) s += std::norm(a);
    return s;
}

struct TrajectoryOutput {
    std::vector<double> photons;
    JumpLogSummary log;
    std::vector<TrajectoryEvent> events;
    double max_norm_increase = 0.0;
};

/// Waiting-time unravelling: the unnormalised state decays under the
/// effective Hamiltonian until |psi|^2 reaches a uniform draw r, then jumps.
inline TrajectoryOutput run_single_trajectory(const TrajectoryPump& pump, const TrajectoryConfig& cfg,
                                              std::uint64_t index) {
    auto rng = stream_engine(cfg.seed, index);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> gap(pump.injection_rate > 0.0 ? pump.injection_rate : 1.0);
    std::vector<double> class_weights;
    for (const auto& c : pump.classes) class_weights.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(class_weights.begin(), class_weights.end());
    const double kappa = pump.kappa;
    constexpr double inf = std::numeric_limits<double>::infinity();

    TrajectoryOutput out;
    JointState state(cfg.initial_photons);
    auto log_event = [&](double t, TrajectoryEventKind k) {
        if (cfg.record_events) out.events.push_back({t, k, state.excitations(), state.atoms()});
    };

    std::vector<double> exits;            // exit time per atom slot, parallel to couplings
    std::vector<double> queue;            // pending arrival couplings/taus when slots are full
    std::vector<double> queue_tau;
    std::vector<std::complex<double>> next;
    double threshold = uni(rng);
    double t = 0.0;
    double next_arrival = pump.injection_rate > 0.0 ? gap(rng) : inf;
    std::size_t next_checkpoint = 0;

    auto admit = [&](double g, double tau) {
        state.add_excited_atom(g);
        exits.push_back(t + tau);
        out.log.max_simultaneous = std::max(out.log.max_simultaneous, state.atoms());
        if (state.excitations() > cfg.n_max)
            throw InstabilityError("trajectory excitation number exceeded n_max = " + std::to_string(cfg.n_max));
    };

    while (true) {
        while (next_checkpoint < cfg.checkpoints.size() && cfg.checkpoints[next_checkpoint] <= t) {
            out.photons.push_back(state.mean_photons());
            ++next_checkpoint;
        }
        if (t >= cfg.t_final) break;

        double t_event = std::min(cfg.t_final, next_arrival);
        if (next_checkpoint < cfg.checkpoints.size()) t_event = std::min(t_event, cfg.checkpoints[next_checkpoint]);
        std::size_t exiting = exits.size();
        for (std::size_t a = 0; a < exits.size(); ++a)
            if (exits[a] <= t_event) t_event = exits[a], exiting = a;

        // Free evolution until t_event or a cavity jump.
        bool jumped = false;
        if (state.atoms() == 0) {
            const double decay = kappa * static_cast<double>(state.excitations());
            const double n2 = state.norm2();
            const double t_jump = decay > 0.0 ? t + std::log(n2 / threshold) / decay : inf;
            const double stop = std::min(t_event, t_jump);
            const double f = std::exp(-0.5 * decay * (stop - t));
            for (auto& a : state.amplitudes()) a *= f;
            t = stop;
            if (t_jump <= t_event) jumped = true;
        } else {
            double omega = 0.5 * kappa * static_cast<double>(state.excitations());
            const double root = std::sqrt(static_cast<double>(state.excitations()) + 1.0);
            for (double g : state.couplings()) omega += std::abs(g) * root;
            double h_max = rk_step_scale / omega;
            if (cfg.dt > 0.0) h_max = std::min(h_max, cfg.dt);
            while (t < t_event) {
                const double h = std::min(h_max, t_event - t);
                const double before = state.norm2();
                state.rk4(state.amplitudes(), kappa, h, next);
                const double after = norm2_of(next);
                out.max_norm_increase = std::max(out.max_norm_increase, after - before);
                if (after <= threshold) {
                    // Bisection on the step length for |psi(t + s)|^2 = r.
                    double lo = 0.0, hi = h;
                    for (int it = 0; it < 200; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        state.rk4(state.amplitudes(), kappa, mid, next);
                        const double nm = norm2_of(next);
                        if (std::abs(nm - threshold) < 1e-10) {
                            lo = hi = mid;
                            break;
                        }
                        if (nm > threshold) lo = mid;
                        else hi = mid;
                    }
                    const double s = 0.5 * (lo + hi);
                    state.rk4(state.amplitudes(), kappa, s, next);
                    state.amplitudes().swap(next);
                    t += s;
                    jumped = true;
                    break;
                }
                state.amplitudes().swap(next);
                t += h;
            }
        }

        if (jumped) {
            state.cavity_jump();
            ++out.log.cavity_jumps;
            log_event(t, TrajectoryEventKind::cavity_jump);
            threshold = uni(rng);
            continue;
        }
        t = t_event;
        if (exiting < exits.size()) {
            const bool excited = state.remove_atom(exiting, uni(rng));
            exits.erase(exits.begin() + static_cast<std::ptrdiff_t>(exiting));
            if (!excited) ++out.log.emissions;
            log_event(t, excited ? TrajectoryEventKind::exit_excited : TrajectoryEventKind::exit_ground);
            if (!queue.empty()) {
                admit(queue.front(), queue_tau.front());
                queue.erase(queue.begin());
                queue_tau.erase(queue_tau.begin());
                log_event(t, TrajectoryEventKind::arrival);
            }
        } else if (t >= next_arrival) {
            const auto& c = pump.classes[pick(rng)];
            ++out.log.arrivals;
            if (state.atoms() < cfg.max_atoms) {
                admit(c.g, c.tau);
                log_event(t, TrajectoryEventKind::arrival);
            } else {
                ++out.log.queued;
                queue.push_back(c.g);
                queue_tau.push_back(c.tau);
                log_event(t, TrajectoryEventKind::queued);
            }
            next_arrival = t + gap(rng);
        }
    }
    return out;
}

}  // namespace detail

/// Ensemble of independent trajectories started from the Fock state
/// `cfg.initial_photons`; <n> is recorded at every checkpoint.
inline TrajectoryEnsemble run_trajectories(const TrajectoryPump& pump, const TrajectoryConfig& cfg) {
    cfg.validate();
    if (pump.classes.empty()) throw InvalidArgument("trajectory pump has no atom classes");
    TrajectoryEnsemble ens;
    ens.checkpoints = cfg.checkpoints;
    std::vector<detail::TrajectoryOutput> outs(cfg.trajectories);
    std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, cfg.trajectories);
    {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < cfg.trajectories; i += workers)
                        outs[i] = detail::run_single_trajectory(pump, cfg, i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        pool.clear();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    const std::size_t nc = cfg.checkpoints.size();
    ens.mean.assign(nc, 0.0);
    ens.stderr_mean.assign(nc, 0.0);
    for (auto& o : outs) {
        ens.log.arrivals += o.log.arrivals;
        ens.log.cavity_jumps += o.log.cavity_jumps;
        ens.log.emissions += o.log.emissions;
        ens.log.queued += o.log.queued;
        ens.log.max_simultaneous = std::max(ens.log.max_simultaneous, o.log.max_simultaneous);
        ens.max_norm_increase = std::max(ens.max_norm_increase, o.max_norm_increase);
        for (std::size_t c = 0; c < nc; ++c) ens.mean[c] += o.photons[c];
        ens.photons.push_back(std::move(o.photons));
        if (cfg.record_events) ens.events.push_back(std::move(o.events));
    }
    const double count = static_cast<double>(cfg.trajectories);
    for (std::size_t c = 0; c < nc; ++c) {
        ens.mean[c] /= count;
        double var = 0.0;
        for (const auto& p : ens.photons) var += (p[c] - ens.mean[c]) * (p[c] - ens.mean[c]);
        var = cfg.trajectories > 1 ? var / (count - 1.0) : 0.0;
        ens.stderr_mean[c] = std::sqrt(var / count);
    }
    ens.unreliable = ens.log.arrivals > 0 &&
                     static_cast<double>(ens.log.queued) > 0.01 * static_cast<double>(ens.log.arrivals);
    return ens;
}

struct MasterComparison {
    std::vector<double> z;
    double max_abs_z = 0.0;
    bool passed = false;
};

/// z = (trajectory mean - master <n>) / standard error per checkpoint; passes iff all |z| <= 3.
inline MasterComparison compare_with_master(const TrajectoryEnsemble& ens, const std::vector<double>& master) {
    if (master.size() != ens.mean.size()) throw InvalidArgument("master curve and checkpoints differ in length");
    MasterComparison r;
    for (std::size_t c = 0; c < master.size(); ++c) {
        const double diff = ens.mean[c] - master[c];
        double z = 0.0;
        if (ens.stderr_mean[c] > 0.0) z = diff / ens.stderr_mean[c];
        else if (diff != 0.0) z = std::copysign(std::numeric_limits<double>::infinity(), diff);
        r.z.push_back(z);
        r.max_abs_z = std::max(r.max_abs_z, std::abs(z));
    }
    r.passed = r.max_abs_z <= 3.0;
    return r;
}

}  // namespace vacscan
