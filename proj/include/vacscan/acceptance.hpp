// acceptance.hpp - the end-to-end acceptance criteria, one function each.
// Every criterion prints a single PASS/FAIL line followed by indented detail.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "vacscan/calibration.hpp"
#include "vacscan/commands.hpp"
#include "vacscan/deconvolution.hpp"
#include "vacscan/io.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/properties.hpp"
#include "vacscan/reference.hpp"
#include "vacscan/scan.hpp"
#include "vacscan/trajectory.hpp"

namespace vacscan::acceptance {

struct Outcome {
    bool passed = false;
    std::string summary;
    std::vector<std::string> details;
};

struct Criterion {
    std::string id;
    std::string title;
    double budget_s = 0.0;  // wall-clock limit counted in the verdict; 0 for none
    std::function<Outcome()> run;
};

namespace detail {

inline std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

/// Scratch directory removed on scope exit.
struct ScratchDir {
    std::filesystem::path path;
    ScratchDir() {
        path = std::filesystem::temp_directory_path() / ("vacscan_acceptance_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
};

/// Reference scenario document, as the shipped configs spell it.
inline nlohmann::json reference_config(double mean_atoms, double e_vac0_v_per_cm) {
    return {{"physics",
             {{"wavelength_nm", 791.0},
              {"waist_um", 41.0},
              {"kappa_2pi_khz", reference::kappa_2pi_khz},
              {"dipole_debye", reference::dipole_debye},
              {"e_vac0_v_per_cm", e_vac0_v_per_cm},
              {"gamma_2pi_khz", reference::gamma_2pi_khz},
              {"rho_ee0", reference::rho_ee0}}},
            {"pump", {{"mean_atom_number", mean_atoms}}},
            {"velocity",
             {{"kind", "truncated_gaussian"},
              {"mean_m_per_s", reference::mean_velocity},
              {"spread_m_per_s", reference::velocity_spread},
              {"nodes", 9}}}};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace detail

// 1. Product formula against RK4 evolution from the vacuum to t = 30/kappa.
inline Outcome steady_state_equivalence() {
    Outcome o;
    constexpr std::size_t cases = 50;
    std::size_t failures = 0;
    double worst = 0.0;
    std::size_t worst_case = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        auto rng = stream_engine(1, i);
        const auto pump = properties::gen::pump(rng, 0.05, 2.5, 0.1, 3.0, 0.1, 50.0);
        const auto model = GainModel::from_pump(pump);
        const auto product = solve_steady_state(model);
        const auto evolved = evolve(PhotonDistribution::vacuum(product.n_max()), model, 30.0 / pump.kappa);
        double d = 0.0;
        for (std::size_t n = 0; n < product.size(); ++n) d = std::max(d, std::abs(product.p[n] - evolved.p[n]));
        if (d >= 1e-7) {
            ++failures;
            const double s = std::sin(pump.rabi_angle());
            o.details.push_back("case " + std::to_string(i) + ": |dp| = " + detail::num(d, 3) + " (g tau " +
                                detail::num(pump.rabi_angle()) + ", <N> " + detail::num(pump.mean_atoms) +
                                ", xi1/kappa " + detail::num(pump.injection_rate() * s * s / pump.kappa) + ")");
        }
        if (d > worst) worst = d, worst_case = i;
    }
    o.passed = failures == 0;
    o.summary = std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases below 1e-7, worst " +
                detail::num(worst, 3) + " (case " + std::to_string(worst_case) + ")";
    return o;
}

// 2. Linear-regime law and the cos^2 structure of an x = 0 scan.
inline Outcome linear_regime_law() {
    Outcome o;
    const double mean_atoms = 0.05;
    const auto params = reference::params(0.30);
    const auto vdist = VelocityDistribution::delta(reference::mean_velocity);
    const double tau = interaction_time(reference::mean_velocity, params);
    const double peak_angle = params.peak_coupling() * tau;

    const auto positions = ScanConfig::z_line(0.0, params.wavelength / 4.0, reference::scan_points);
    double worst_law = 0.0;
    for (const auto& at : positions) {
        const PumpParams pump{mean_atoms, tau, coupling_at(at, params), params.kappa};
        const double xi1 = linear_regime_output(pump);
        if (!(xi1 > 0.0)) continue;  // the node itself: both sides vanish
        const double flux = photon_flux(solve_steady_state(GainModel::from_pump(pump)), params.kappa);
        worst_law = std::max(worst_law, std::abs(flux - xi1) / xi1);
    }

    ScanConfig sc;
    sc.positions = positions;
    sc.background = false;
    const auto recs = simulate_scan(params, {mean_atoms, {}}, vdist, PositionSpreadKernel::delta(), sc);
    double su = 0.0, sy = 0.0;
    for (const auto& r : recs) su += r.u * r.u, sy += r.u * r.rate;
    const double amp = sy / su;
    double worst_fit = 0.0;
    for (const auto& r : recs)
        if (amp * r.u > 0.0) worst_fit = std::max(worst_fit, std::abs(r.rate - amp * r.u) / (amp * r.u));

    o.passed = peak_angle <= 0.1 && worst_law < 0.01 && worst_fit < 0.01;
    o.summary = "max |kappa<n> - xi1|/xi1 = " + detail::num(worst_law, 3) + ", max cos^2 residual = " +
                detail::num(worst_fit, 3) + " (g0 tau = " + detail::num(peak_angle, 3) + ")";
    o.details.push_back("E_vac0 0.30 V/cm, <N> 0.05, delta velocity 550 m/s, 41 points node to antinode");
    o.details.push_back("cos^2 model A u with A = " + detail::num(amp, 6) + " counts/s; background off");
    return o;
}

// 3. Noiseless round trip of the published fit rows through the fit command.
inline Outcome table_round_trip() {
    Outcome o;
    detail::ScratchDir dir;
    auto run_row = [&](const std::string& tag, double mean_atoms, double e_v_per_cm, std::optional<double> fixed) {
        const auto cfg = dir.path / (tag + ".json");
        detail::write_text(cfg, detail::reference_config(mean_atoms, e_v_per_cm).dump(2));
        CsvTable t;
        t.columns = {"u", "y"};
        for (const auto& pt : reference::synthetic_points(mean_atoms, e_v_per_cm, reference::n3_scale_kcps))
            t.rows.push_back({pt.u, pt.y});
        RunManifest m;
        m.command = "synthetic";
        write_csv_file((dir.path / (tag + ".csv")).string(), t, m);
        std::ostringstream sink;
        cli::Context ctx;
        ctx.out_dir = (dir.path / tag).string();
        ctx.out = &sink;
        ctx.err = &sink;
        cli::FitOptions opt;
        opt.fix_scale_kcps = fixed;
        const int code = cli::cmd_fit((dir.path / (tag + ".csv")).string(), cfg.string(), opt, ctx);
        if (code != cli::exit_ok) {
            o.details.push_back(tag + ": fit exited " + std::to_string(code) + ": " + sink.str());
            return false;
        }
        std::ifstream in(dir.path / tag / "fit.json");
        const auto j = nlohmann::json::parse(in);
        const double n = j["mean_atom_number"], e = j["e_vac0_v_per_cm"], s = j["scale_kcps"];
        const double dn = std::abs(n / mean_atoms - 1.0), de = std::abs(e / e_v_per_cm - 1.0);
        const double ds = std::abs(s / reference::n3_scale_kcps - 1.0);
        o.details.push_back(tag + ": <N> " + detail::num(n, 6) + " (" + detail::num(100 * dn, 2) + "%), E " +
                            detail::num(e, 6) + " V/cm (" + detail::num(100 * de, 2) + "%), S " + detail::num(s, 6) +
                            " kcps (" + (fixed ? std::string("held") : detail::num(100 * ds, 2) + "%") + ")");
        return dn < 0.005 && de < 0.005 && ds < 0.005;
    };
    const bool n3 = run_row("N3", reference::n3_mean_atoms, reference::n3_e_vac0_v_per_cm, std::nullopt);
    const bool n2 = run_row("N2", reference::n2_mean_atoms, reference::n2_e_vac0_v_per_cm, reference::n3_scale_kcps);
    o.passed = n3 && n2;
    o.summary = std::string("N3 row ") + (n3 ? "recovered" : "missed") + ", N2 row (S held at 270 kcps) " +
                (n2 ? "recovered" : "missed") + " within 0.5%";
    return o;
}

// 4. Spread of 100 Poisson replicas against the published uncertainties.
inline constexpr double replica_dwell_s = 0.014;
inline constexpr std::uint64_t replica_seed_base = 1000;

inline Outcome table_statistics() {
    Outcome o;
    const auto truth = reference::synthetic_points(reference::n3_mean_atoms, reference::n3_e_vac0_v_per_cm,
                                                   reference::n3_scale_kcps);
    constexpr int replicas = 100;
    std::vector<double> ns, es, ss;
    double rn = 0.0, re = 0.0, rs = 0.0;
    int warned = 0;
    for (int rep = 0; rep < replicas; ++rep) {
        FitProblem p;
        p.model = reference::fit_model();
        p.dwell = replica_dwell_s;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            auto engine = stream_engine(replica_seed_base + static_cast<std::uint64_t>(rep), i);
            const auto c = std::poisson_distribution<std::int64_t>(truth[i].y * replica_dwell_s)(engine);
            p.points.push_back({truth[i].u, static_cast<double>(c) / replica_dwell_s});
        }
        const auto r = fit(p);
        if (!r.warnings.empty()) ++warned;
        ns.push_back(r.mean_atoms);
        es.push_back(units::v_per_m_to_v_per_cm(r.e_vac0));
        ss.push_back(units::to_kcps(r.scale));
        rn += r.sigma_mean_atoms;
        re += units::v_per_m_to_v_per_cm(r.sigma_e_vac0);
        rs += units::to_kcps(r.sigma_scale);
    }
    auto sd = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    const double sn = sd(ns), se = sd(es), sk = sd(ss);
    const double fn = sn / reference::n3_sigma_mean_atoms, fe = se / reference::n3_sigma_e_vac0_v_per_cm,
                 fs = sk / reference::n3_sigma_scale_kcps;
    auto within = [](double f) { return f >= 0.5 && f <= 2.0; };
    o.passed = within(fn) && within(fe) && within(fs);
    o.summary = "replica spread / published sigma: <N> " + detail::num(fn, 3) + ", E " + detail::num(fe, 3) + ", S " +
                detail::num(fs, 3) + " (band [0.5, 2])";
    o.details.push_back("dwell " + detail::num(replica_dwell_s) + " s per point, seeds " +
                        std::to_string(replica_seed_base) + ".." + std::to_string(replica_seed_base + replicas - 1));
    o.details.push_back("spread: <N> " + detail::num(sn, 3) + ", E " + detail::num(se, 3) + " V/cm, S " +
                        detail::num(sk, 3) + " kcps");
    o.details.push_back("mean reported sigma: <N> " + detail::num(rn / replicas, 3) + ", E " + detail::num(re / replicas, 3) +
                        " V/cm, S " + detail::num(rs / replicas, 3) + " kcps; " + std::to_string(warned) +
                        " fits carried warnings");
    return o;
}

// 5. Richardson-Lucy round trip through the nanohole kernel.
inline Outcome deconvolution_round_trip() {
    Outcome o;
    const double lambda = reference::wavelength;
    const double pitch = lambda / 4.0 / static_cast<double>(reference::scan_points - 1);
    const auto kernel = build_spread_kernel(reference::hole_diameter, reference::divergence, reference::standoff, pitch);
    // Four standing-wave periods, so the kernel (about 0.5 um half-width) fits inside.
    const std::size_t size = 4 * 160 + 1;
    SignalSeries truth;
    for (std::size_t i = 0; i < size; ++i) {
        const double z = -2.0 * lambda + static_cast<double>(i) * pitch;
        truth.z.push_back(z);
        truth.values.push_back(relative_intensity(z, lambda));
    }
    const auto observed = blur(truth, kernel);
    const double total = observed.total();
    bool negative = false;
    double drift = 0.0;
    const auto res = richardson_lucy(observed, kernel, {}, [&](std::size_t, const std::vector<double>& e) {
        double s = 0.0;
        for (double v : e) {
            s += v;
            negative = negative || v < 0.0;
        }
        drift = std::max(drift, std::abs(s - total) / total);
    });
    double worst = 0.0, worst_u = 0.0, blurred = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double u = truth.values[i];
        if (u < 0.2) continue;
        const double err = std::abs(res.estimate.values[i] - u) / u;
        if (err > worst) worst = err, worst_u = u;
        blurred = std::max(blurred, std::abs(observed.values[i] - u) / u);
    }
    o.passed = worst < 0.05 && !negative && drift < 1e-3;
    o.summary = "max relative error (u >= 0.2) " + detail::num(worst, 3) + " at u = " + detail::num(worst_u, 3) +
                "; non-negative " + (negative ? "no" : "yes") + "; flux drift " + detail::num(drift, 3);
    o.details.push_back("kernel: 170 nm disc, 72 nm Gaussian, pitch " + detail::num(pitch * 1e9, 4) + " nm, " +
                        std::to_string(kernel.weights.size()) + " taps; " + std::to_string(res.iterations) +
                        " iterations");
    o.details.push_back("error of the blurred data before deconvolution: " + detail::num(blurred, 3));
    return o;
}

// 6. Trajectory ensemble against the master equation, plus pure cavity decay.
inline constexpr std::size_t trajectory_count = 10000;

inline Outcome trajectory_oracle() {
    Outcome o;
    const double kappa = 1.0e6;
    const double mean_atoms = 1.5, angle = 0.07, xi_over_kappa = 0.5;
    const double s = std::sin(angle);
    const double tau = mean_atoms * s * s / (xi_over_kappa * kappa);
    const double g = angle / tau;
    const auto steady = solve_steady_state(GainModel::from_pump({mean_atoms, tau, g, kappa}));
    const double master = mean_photon(steady);
    const double margin = multi_atom_condition(g, tau, master);

    TrajectoryConfig cfg;
    cfg.trajectories = trajectory_count;
    cfg.t_final = 24.0 / kappa;
    for (int i = 1; i <= 10; ++i) cfg.checkpoints.push_back((14.0 + i) / kappa);
    cfg.seed = 6001;
    const auto ens = run_trajectories(TrajectoryPump::single(mean_atoms, g, tau, kappa), cfg);
    const auto cmp = compare_with_master(ens, std::vector<double>(cfg.checkpoints.size(), master));

    TrajectoryConfig decay;
    decay.trajectories = trajectory_count;
    decay.initial_photons = 1;
    decay.t_final = 3.0 / kappa;
    for (int i = 1; i <= 10; ++i) decay.checkpoints.push_back(0.3 * i / kappa);
    decay.seed = 6002;
    const auto dens = run_trajectories(TrajectoryPump::single(0.0, g, tau, kappa), decay);
    std::vector<double> analytic;
    for (double t : decay.checkpoints) analytic.push_back(std::exp(-kappa * t));
    const auto dcmp = compare_with_master(dens, analytic);

    o.passed = margin <= multi_atom_threshold && cmp.passed && dcmp.passed && !ens.unreliable;
    o.summary = "master max|z| = " + detail::num(cmp.max_abs_z, 3) + ", decay max|z| = " + detail::num(dcmp.max_abs_z, 3) +
                ", multi-atom margin " + detail::num(margin, 3);
    double mean = 0.0;
    for (double v : ens.mean) mean += v / static_cast<double>(ens.mean.size());
    o.details.push_back("<N> 1.5, g tau 0.07, kappa tau " + detail::num(kappa * tau, 4) + ", xi1/kappa 0.5; " +
                        std::to_string(trajectory_count) + " trajectories, checkpoints 15..24 /kappa");
    o.details.push_back("master <n> " + detail::num(master, 6) + ", trajectory mean " + detail::num(mean, 6) +
                        ", arrivals " + std::to_string(ens.log.arrivals) + ", queued " + std::to_string(ens.log.queued) +
                        ", max simultaneous " + std::to_string(ens.log.max_simultaneous));
    std::string zs = "z:";
    for (double z : cmp.z) zs += " " + detail::num(z, 3);
    o.details.push_back(zs);
    zs = "decay z:";
    for (double z : dcmp.z) zs += " " + detail::num(z, 3);
    o.details.push_back(zs);
    return o;
}

// 7. Free-space background against the antinode signal at the criterion-3 pump.
inline Outcome background_negligibility() {
    Outcome o;
    const auto params = reference::params();
    const auto vdist = reference::velocity();
    const double bg = background_flux(reference::n3_mean_atoms, vdist.mean_transit_time(params));
    const auto dist = averaged_steady_state({0.0, 0.0}, params, reference::n3_mean_atoms, vdist,
                                            PositionSpreadKernel::delta());
    const double signal = photon_flux(dist, params.kappa);
    const double ratio = bg / signal;
    o.passed = ratio < 1e-3;
    o.summary = "background/antinode flux = " + detail::num(ratio, 3) + " (" + detail::num(bg, 4) + " vs " +
                detail::num(signal, 6) + " photons/s)";
    return o;
}

// 8. Every module property under the randomized harness.
inline Outcome invariant_suites() {
    Outcome o;
    std::size_t failed = 0, total = 0;
    for (const auto& suite : properties::all_suites()) {
        const auto r = suite();
        ++total;
        if (!r.passed()) ++failed;
        std::string line = std::string(r.passed() ? "ok   " : "FAIL ") + r.module + ": " + r.name + " (" +
                           std::to_string(r.cases - r.failures) + "/" + std::to_string(r.cases) + ")";
        if (!r.passed()) line += " -- " + r.first_failure;
        o.details.push_back(line);
    }
    o.passed = failed == 0;
    o.summary = std::to_string(total - failed) + "/" + std::to_string(total) + " property suites green";
    return o;
}

inline std::vector<Criterion> criteria() {
    return {
        {"C1", "steady-state equivalence (product vs evolve at 30/kappa)", 10.0, steady_state_equivalence},
        {"C2", "linear-regime law and cos^2 scan", 0.0, linear_regime_law},
        {"C3", "published fit rows, noiseless round trip", 120.0, table_round_trip},
        {"C4", "published fit rows, replica spread", 1800.0, table_statistics},
        {"C5", "deconvolution round trip", 0.0, deconvolution_round_trip},
        {"C6", "trajectories vs master equation", 600.0, trajectory_oracle},
        {"C7", "background negligibility", 0.0, background_negligibility},
        {"C8", "invariant suites", 300.0, invariant_suites},
    };
}

/// Runs the selected criteria (all when `only` is empty); returns 0 iff all pass.
inline int run(std::ostream& out, const std::vector<std::string>& only = {}) {
    const auto all = criteria();
    for (const auto& id : only)
        if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; }))
            throw ConfigError("unknown criterion '" + id + "'");
    std::size_t failed = 0, ran = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.passed = false;
            o.summary = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = o.passed;
        std::string timing = detail::num(secs, 3) + " s";
        if (c.budget_s > 0.0) {
            timing += " of " + detail::num(c.budget_s) + " s";
            ok = ok && secs < c.budget_s;
        }
        ++ran;
        if (!ok) ++failed;
        out << (ok ? "PASS " : "FAIL ") << c.id << "  " << c.title << "  [" << timing << "]  " << o.summary << '\n';
        for (const auto& d : o.details) out << "       " << d << '\n';
        out.flush();
    }
    if (failed == 0) out << "ALL PASS: " << ran << " criteria\n";
    else out << "FAILED: " << failed << " of " << ran << " criteria\n";
    return failed == 0 ? 0 : 1;
}

inline void list(std::ostream& out) {
    for (const auto& c : criteria()) out << c.id << "  " << c.title << '\n';
}

}  // namespace vacscan::acceptance
