// calibration.hpp - chi^2 calibration of <N>, E_vac(0) and the detector scale S
// against deconvolved scan data, chi^2 = sum_i (y_i - S n_i)^2.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "vacscan/ensemble.hpp"
#include "vacscan/error.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/physics.hpp"

namespace vacscan {

struct FitPoint {
    double u;  // relative vacuum intensity
    double y;  // count rate, counts/s
};

/// Everything held fixed while fitting: geometry, kappa, mu, velocity ensemble.
struct FitModel {
    PhysicalParams params{};
    VelocityDistribution velocity = VelocityDistribution::delta(550.0);
    TruncationOptions truncation{};
};

enum class Weighting { none, poisson };

struct FitProblem {
    std::vector<FitPoint> points;
    FitModel model{};
    double u_min = 0.5;
    double u_max = 1.0;
    std::array<double, 2> mean_atoms_range{0.01, 10.0};
    std::array<double, 2> e_vac0_range{10.0, 1000.0};  // V/m (0.1 .. 10 V/cm)
    std::size_t grid = 21;
    std::size_t max_evaluations = 4000;
    double tolerance = 1e-6;
    Weighting weighting = Weighting::none;
    // Integration time behind each y_i; sets the Poisson scale of the
    // goodness-of-fit statistic (chi^2 per dof in units of counting noise).
    double dwell = 1.0;
    double poor_fit_threshold = 10.0;
};

struct FitResult {
    double mean_atoms = 0.0;
    double sigma_mean_atoms = 0.0;
    double e_vac0 = 0.0;  // V/m
    double sigma_e_vac0 = 0.0;
    double scale = 0.0;   // counts/s per unit <n>
    double sigma_scale = 0.0;
    // Fixed-scale fits: uncertainties with the held scale's own error folded in.
    double sigma_mean_atoms_with_scale = 0.0;
    double sigma_e_vac0_with_scale = 0.0;
    double chi2 = 0.0;
    double noise_chi2_per_dof = 0.0;
    std::size_t points_used = 0;
    std::size_t dof = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    bool scale_fixed = false;
    std::vector<std::string> warnings;
    std::vector<FitPoint> used;
    std::vector<double> model_photons;  // n_i at the optimum

    bool has_warning(const std::string& w) const {
        return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
    }
};

/// Keeps points with u in [u_min, u_max], bounds inclusive.
inline std::vector<FitPoint> validity_filter(const std::vector<FitPoint>& points, double u_min = 0.5,
                                             double u_max = 1.0) {
    std::vector<FitPoint> out;
    std::copy_if(points.begin(), points.end(), std::back_inserter(out),
                 [&](const FitPoint& p) { return p.u >= u_min && p.u <= u_max; });
    return out;
}

struct ModelCurve {
    std::vector<double> photons;
    bool truncated = false;
};

/// Steady-state <n> on the x = 0 line at each relative intensity u, with
/// g = g0 sqrt(u) and the gain averaged over the velocity ensemble only.
inline ModelCurve model_curve(double mean_atoms, double e_vac0, const std::vector<double>& us, const FitModel& fixed) {
    PhysicalParams p = fixed.params;
    p.e_vac0 = e_vac0;
    const double g0 = p.peak_coupling();
    const double rate = fixed.velocity.injection_rate(mean_atoms, p);
    std::vector<double> taus;
    for (const auto& node : fixed.velocity.nodes()) taus.push_back(interaction_time(node.velocity, p));
    ModelCurve out;
    out.photons.reserve(us.size());
    for (double u : us) {
        if (!(u >= 0.0 && u <= 1.0 + 1e-12)) throw InvalidArgument("relative intensity must lie in [0, 1]");
        const double g = g0 * std::sqrt(std::max(u, 0.0));
        std::vector<RabiChannel> ch;
        ch.reserve(taus.size());
        for (std::size_t j = 0; j < taus.size(); ++j) ch.push_back({fixed.velocity.nodes()[j].weight, g * taus[j]});
        const auto d = solve_steady_state(GainModel(rate, std::move(ch), p.kappa), fixed.truncation);
        out.photons.push_back(mean_photon(d));
        out.truncated = out.truncated || d.truncated;
    }
    return out;
}

/// Closed-form minimiser of sum (y - S n)^2 over S.
inline double optimal_scale(const std::vector<double>& y, const std::vector<double>& n,
                            const std::vector<double>& weights = {}) {
    double yn = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        yn += w * y[i] * n[i];
        nn += w * n[i] * n[i];
    }
    if (!(nn > 0.0)) throw FitError("model curve is identically zero; scale undefined");
    return yn / nn;
}

inline double chi_square(const std::vector<double>& y, const std::vector<double>& n, double scale,
                         const std::vector<double>& weights = {}) {
    double c = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - scale * n[i];
        c += (weights.empty() ? 1.0 : weights[i]) * r * r;
    }
    return c;
}

namespace detail {

struct SimplexResult {
    std::array<double, 2> x;
    double f;
    std::size_t evaluations;
    bool converged;
};

/// Nelder-Mead on a 2-D box; points outside are clamped before evaluation.
inline SimplexResult nelder_mead_2d(const std::function<double(std::array<double, 2>)>& f, std::array<double, 2> start,
                                    std::array<double, 2> step, std::array<double, 2> lo, std::array<double, 2> hi,
                                    double tol, std::size_t max_eval) {
    using P = std::array<double, 2>;
    auto clamp = [&](P p) {
        for (int d = 0; d < 2; ++d) p[d] = std::clamp(p[d], lo[d], hi[d]);
        return p;
    };
    std::size_t evals = 0;
    auto eval = [&](const P& p) {
        ++evals;
        return f(p);
    };
    std::array<P, 3> s{clamp(start), clamp({start[0] + step[0], start[1]}), clamp({start[0], start[1] + step[1]})};
    // A vertex clamped back onto the start would collapse the simplex.
    for (int d = 0; d < 2; ++d)
        if (s[d + 1] == s[0]) s[d + 1][d] = std::clamp(start[d] - step[d], lo[d], hi[d]);
    std::array<double, 3> fv{eval(s[0]), eval(s[1]), eval(s[2])};
    bool converged = false;
    while (evals < max_eval) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        std::array<P, 3> ss{s[idx[0]], s[idx[1]], s[idx[2]]};
        std::array<double, 3> ff{fv[idx[0]], fv[idx[1]], fv[idx[2]]};
        s = ss;
        fv = ff;
        double diam = 0.0;
        for (int v = 1; v < 3; ++v)
            for (int d = 0; d < 2; ++d) diam = std::max(diam, std::abs(s[v][d] - s[0][d]));
        if (diam < tol) {
            converged = true;
            break;
        }
        const P c{0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])};
        auto along = [&](double t) { return clamp({c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])}); };
        const P xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            const P xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) s[2] = xe, fv[2] = fe;
            else s[2] = xr, fv[2] = fr;
        } else if (fr < fv[1]) {
            s[2] = xr, fv[2] = fr;
        } else {
            const bool outside = fr < fv[2];
            const P xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[2])) {
                s[2] = xc, fv[2] = fc;
            } else {
                for (int v = 1; v < 3; ++v) {
                    s[v] = {0.5 * (s[0][0] + s[v][0]), 0.5 * (s[0][1] + s[v][1])};
                    fv[v] = eval(s[v]);
                }
            }
        }
    }
    const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
    return {s[best], fv[best], evals, converged};
}

/// Small symmetric positive-definite inverse by Gauss-Jordan.
inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const double d = a[c][c];
        if (std::abs(d) < 1e-300) throw FitError("singular curvature matrix");
        for (std::size_t k = 0; k < n; ++k) a[c][k] /= d, inv[c][k] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            for (std::size_t k = 0; k < n; ++k) a[r][k] -= f * a[c][k], inv[r][k] -= f * inv[c][k];
        }
    }
    return inv;
}

struct Prepared {
    std::vector<FitPoint> used;
    std::vector<double> u;
    std::vector<double> y;
    std::vector<double> weights;  // empty for unweighted
};

inline Prepared prepare(const FitProblem& problem, std::size_t min_points) {
    Prepared p;
    p.used = validity_filter(problem.points, problem.u_min, problem.u_max);
    if (p.used.size() < min_points)
        throw FitError("fit refused: " + std::to_string(p.used.size()) + " points inside the validity window [" +
                       std::to_string(problem.u_min) + ", " + std::to_string(problem.u_max) + "], need " +
                       std::to_string(min_points));
    for (const auto& pt : p.used) {
        p.u.push_back(pt.u);
        p.y.push_back(pt.y);
        if (problem.weighting == Weighting::poisson)
            p.weights.push_back(problem.dwell / std::max(pt.y, 1.0 / problem.dwell));
    }
    return p;
}

inline double noise_chi2(const Prepared& p, const std::vector<double>& n, double scale, double dwell) {
    double c = 0.0;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        const double var = std::max(p.y[i], 1.0 / dwell) / dwell;
        const double r = p.y[i] - scale * n[i];
        c += r * r / var;
    }
    return c;
}

inline void post_checks(const FitProblem& problem, const Prepared& prep, FitResult& r, bool truncated) {
    const double lo_n = std::log(problem.mean_atoms_range[0]), hi_n = std::log(problem.mean_atoms_range[1]);
    const double lo_e = std::log(problem.e_vac0_range[0]), hi_e = std::log(problem.e_vac0_range[1]);
    const double ln = std::log(r.mean_atoms), le = std::log(r.e_vac0);
    constexpr double edge = 1e-3;
    if (ln - lo_n < edge || hi_n - ln < edge || le - lo_e < edge || hi_e - le < edge) r.warnings.push_back("edge");
    if (!r.converged) r.warnings.push_back("not_converged");
    if (truncated) r.warnings.push_back("truncated");
    if (r.dof > 0) {
        r.noise_chi2_per_dof = noise_chi2(prep, r.model_photons, r.scale, problem.dwell) / static_cast<double>(r.dof);
        if (r.noise_chi2_per_dof > problem.poor_fit_threshold) r.warnings.push_back("poor_fit");
    }
    PhysicalParams p = problem.model.params;
    p.e_vac0 = r.e_vac0;
    const double floor = std::max(p.kappa, p.gamma);
    for (double u : prep.u)
        if (!(p.peak_coupling() * std::sqrt(u) > floor)) {
            r.warnings.push_back("strong_coupling");
            break;
        }
}

/// Profile search over (log <N>, log E_vac0): coarse grid, then simplex.
/// `objective(N, E, n)` returns chi^2 and fills the model photon numbers.
inline FitResult search(const FitProblem& problem, const Prepared& prep,
                        const std::function<double(double, double, std::vector<double>&, bool&)>& objective) {
    const std::array<double, 2> lo{std::log(problem.mean_atoms_range[0]), std::log(problem.e_vac0_range[0])};
    const std::array<double, 2> hi{std::log(problem.mean_atoms_range[1]), std::log(problem.e_vac0_range[1])};
    if (!(lo[0] < hi[0]) || !(lo[1] < hi[1])) throw InvalidArgument("search ranges must be increasing and positive");
    std::vector<double> n;
    bool trunc = false;
    auto f = [&](std::array<double, 2> x) { return objective(std::exp(x[0]), std::exp(x[1]), n, trunc); };

    const std::size_t g = std::max<std::size_t>(problem.grid, 2);
    std::array<double, 2> best{lo[0], lo[1]};
    double best_f = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            const std::array<double, 2> x{lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / static_cast<double>(g - 1),
                                          lo[1] + (hi[1] - lo[1]) * static_cast<double>(j) / static_cast<double>(g - 1)};
            const double v = f(x);
            ++evals;
            if (v < best_f) best_f = v, best = x;
        }
    const std::array<double, 2> step{(hi[0] - lo[0]) / static_cast<double>(g - 1),
                                     (hi[1] - lo[1]) / static_cast<double>(g - 1)};
    const auto budget = problem.max_evaluations > evals ? problem.max_evaluations - evals : 1;
    auto nm = nelder_mead_2d(f, best, step, lo, hi, problem.tolerance, budget);
    // One restart from the optimum guards against a prematurely collapsed simplex.
    if (nm.converged) {
        const std::array<double, 2> small{0.05 * step[0], 0.05 * step[1]};
        auto again = nelder_mead_2d(f, nm.x, small, lo, hi, problem.tolerance, budget);
        again.evaluations += nm.evaluations;
        if (again.f <= nm.f) nm = again;
        else nm.evaluations = again.evaluations;
    }

    FitResult r;
    r.mean_atoms = std::exp(nm.x[0]);
    r.e_vac0 = std::exp(nm.x[1]);
    r.evaluations = evals + nm.evaluations;
    r.converged = nm.converged;
    r.chi2 = objective(r.mean_atoms, r.e_vac0, n, trunc);
    r.model_photons = n;
    r.used = prep.used;
    r.points_used = prep.used.size();
    r.dof = 0;
    (void)trunc;
    return r;
}

}  // namespace detail

/// Three-parameter fit; S is eliminated analytically at every (N, E).
/// Uncertainties: covariance s^2 (J^T W J)^-1 with s^2 = chi^2_min / (M - 3),
/// i.e. the projection of the chi^2 = chi^2_min + s^2 contour.
inline FitResult fit(const FitProblem& problem) {
    const auto prep = detail::prepare(problem, 3);
    bool any_trunc = false;
    auto objective = [&](double N, double E, std::vector<double>& n, bool& trunc) {
        const auto c = model_curve(N, E, prep.u, problem.model);
        n = c.photons;
        trunc = c.truncated;
        double nn = 0.0;
        for (double v : n) nn += v * v;
        if (!(nn > 0.0)) return std::numeric_limits<double>::max();
        const double s = std::max(0.0, optimal_scale(prep.y, n, prep.weights));
        return chi_square(prep.y, n, s, prep.weights);
    };
    auto r = detail::search(problem, prep, objective);
    {
        const auto c = model_curve(r.mean_atoms, r.e_vac0, prep.u, problem.model);
        any_trunc = c.truncated;
        r.model_photons = c.photons;
    }
    r.scale = optimal_scale(prep.y, r.model_photons, prep.weights);
    r.chi2 = chi_square(prep.y, r.model_photons, r.scale, prep.weights);
    r.dof = r.points_used - 3;

    // Jacobian of S n_i w.r.t. (N, E, S).
    const std::size_t m = prep.u.size();
    std::vector<std::array<double, 3>> jac(m);
    for (int k = 0; k < 2; ++k) {
        const double h = 1e-5 * (k == 0 ? r.mean_atoms : r.e_vac0);
        const auto up = model_curve(r.mean_atoms + (k == 0 ? h : 0.0), r.e_vac0 + (k == 1 ? h : 0.0), prep.u, problem.model);
        const auto dn = model_curve(r.mean_atoms - (k == 0 ? h : 0.0), r.e_vac0 - (k == 1 ? h : 0.0), prep.u, problem.model);
        for (std::size_t i = 0; i < m; ++i) jac[i][k] = r.scale * (up.photons[i] - dn.photons[i]) / (2.0 * h);
    }
    for (std::size_t i = 0; i < m; ++i) jac[i][2] = r.model_photons[i];
    std::vector<std::vector<double>> jtj(3, std::vector<double>(3, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        const double w = prep.weights.empty() ? 1.0 : prep.weights[i];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) jtj[a][b] += w * jac[i][a] * jac[i][b];
    }
    if (r.dof > 0) {
        const double s2 = r.chi2 / static_cast<double>(r.dof);
        try {
            const auto cov = detail::invert(jtj);
            r.sigma_mean_atoms = std::sqrt(std::max(0.0, s2 * cov[0][0]));
            r.sigma_e_vac0 = std::sqrt(std::max(0.0, s2 * cov[1][1]));
            r.sigma_scale = std::sqrt(std::max(0.0, s2 * cov[2][2]));
        } catch (const FitError&) {
            r.warnings.push_back("singular_curvature");
        }
    }
    detail::post_checks(problem, prep, r, any_trunc);
    return r;
}

/// Two-parameter fit with S held. With `scale_sigma` > 0 the held scale's
/// uncertainty is also propagated (refits at S +- scale_sigma) into the
/// *_with_scale fields; the plain sigmas treat S as exact.
inline FitResult fit_fixed_scale(const FitProblem& problem, double scale, double scale_sigma = 0.0) {
    if (!(scale > 0.0)) throw InvalidArgument("fixed scale must be positive");
    const auto prep = detail::prepare(problem, 3);
    auto objective = [&](double N, double E, std::vector<double>& n, bool& trunc) {
        const auto c = model_curve(N, E, prep.u, problem.model);
        n = c.photons;
        trunc = c.truncated;
        return chi_square(prep.y, n, scale, prep.weights);
    };
    auto r = detail::search(problem, prep, objective);
    const auto best = model_curve(r.mean_atoms, r.e_vac0, prep.u, problem.model);
    r.model_photons = best.photons;
    r.scale = scale;
    r.scale_fixed = true;
    r.chi2 = chi_square(prep.y, r.model_photons, scale, prep.weights);
    r.dof = r.points_used - 2;

    const std::size_t m = prep.u.size();
    std::vector<std::vector<double>> jtj(2, std::vector<double>(2, 0.0));
    std::vector<std::array<double, 2>> jac(m);
    for (int k = 0; k < 2; ++k) {
        const double h = 1e-5 * (k == 0 ? r.mean_atoms : r.e_vac0);
        const auto up = model_curve(r.mean_atoms + (k == 0 ? h : 0.0), r.e_vac0 + (k == 1 ? h : 0.0), prep.u, problem.model);
        const auto dn = model_curve(r.mean_atoms - (k == 0 ? h : 0.0), r.e_vac0 - (k == 1 ? h : 0.0), prep.u, problem.model);
        for (std::size_t i = 0; i < m; ++i) jac[i][k] = scale * (up.photons[i] - dn.photons[i]) / (2.0 * h);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double w = prep.weights.empty() ? 1.0 : prep.weights[i];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) jtj[a][b] += w * jac[i][a] * jac[i][b];
    }
    if (r.dof > 0) {
        const double s2 = r.chi2 / static_cast<double>(r.dof);
        try {
            const auto cov = detail::invert(jtj);
            r.sigma_mean_atoms = std::sqrt(std::max(0.0, s2 * cov[0][0]));
            r.sigma_e_vac0 = std::sqrt(std::max(0.0, s2 * cov[1][1]));
        } catch (const FitError&) {
            r.warnings.push_back("singular_curvature");
        }
    }
    r.sigma_mean_atoms_with_scale = r.sigma_mean_atoms;
    r.sigma_e_vac0_with_scale = r.sigma_e_vac0;
    if (scale_sigma > 0.0) {
        auto refit = [&](double s) {
            auto objective_s = [&](double N, double E, std::vector<double>& n, bool& trunc) {
                const auto c = model_curve(N, E, prep.u, problem.model);
                n = c.photons;
                trunc = c.truncated;
                return chi_square(prep.y, n, s, prep.weights);
            };
            return detail::search(problem, prep, objective_s);
        };
        const auto hi = refit(scale + scale_sigma);
        const auto lo = refit(std::max(scale - scale_sigma, 1e-12 * scale));
        const double dn = 0.5 * (hi.mean_atoms - lo.mean_atoms);
        const double de = 0.5 * (hi.e_vac0 - lo.e_vac0);
        r.sigma_mean_atoms_with_scale = std::hypot(r.sigma_mean_atoms, dn);
        r.sigma_e_vac0_with_scale = std::hypot(r.sigma_e_vac0, de);
    }
    detail::post_checks(problem, prep, r, best.truncated);
    return r;
}

struct LinearRegimeResult {
    double mean_atoms = 0.0;        // closed form
    double sigma_mean_atoms = 0.0;
    double mean_atoms_numeric = 0.0;  // root of d chi^2 / dN
    double mean_atoms_full_model = 0.0;  // 1-D fit with the full steady-state model
    double chi2 = 0.0;
    std::size_t points_used = 0;
    std::vector<FitPoint> used;
    std::vector<double> model_photons;  // per unit <N>, linear model
};

/// Per-unit-<N> linear-regime photon number xi_1 / kappa at each u, averaged
/// over the velocity ensemble.
inline std::vector<double> linear_regime_photons_per_atom(double e_vac0, const std::vector<double>& us,
                                                          const FitModel& fixed) {
    PhysicalParams p = fixed.params;
    p.e_vac0 = e_vac0;
    const double rate = fixed.velocity.injection_rate(1.0, p);
    std::vector<double> out;
    for (double u : us) {
        const double g = p.peak_coupling() * std::sqrt(std::max(u, 0.0));
        double s = 0.0;
        for (const auto& node : fixed.velocity.nodes()) {
            const double v = std::sin(g * interaction_time(node.velocity, p));
            s += node.weight * v * v;
        }
        out.push_back(rate * s / p.kappa);
    }
    return out;
}

/// One-parameter fit of <N> with E_vac0 and S held. In the linear regime
/// y_i = S <N> m_i, so the minimiser is sum(y m) / (S sum(m^2)); it is also found
/// numerically as the root of the finite-difference slope of chi^2.
inline LinearRegimeResult fit_linear_regime_N(const FitProblem& problem, double e_vac0, double scale) {
    if (!(scale > 0.0)) throw InvalidArgument("fixed scale must be positive");
    const auto prep = detail::prepare(problem, 2);
    LinearRegimeResult r;
    r.used = prep.used;
    r.points_used = prep.used.size();
    r.model_photons = linear_regime_photons_per_atom(e_vac0, prep.u, problem.model);
    std::vector<double> sm(r.model_photons.size());
    for (std::size_t i = 0; i < sm.size(); ++i) sm[i] = scale * r.model_photons[i];
    r.mean_atoms = optimal_scale(prep.y, sm, prep.weights);
    r.chi2 = chi_square(prep.y, sm, r.mean_atoms, prep.weights);
    double smm = 0.0;
    for (std::size_t i = 0; i < sm.size(); ++i) smm += (prep.weights.empty() ? 1.0 : prep.weights[i]) * sm[i] * sm[i];
    if (r.points_used > 1)
        r.sigma_mean_atoms = std::sqrt(r.chi2 / static_cast<double>(r.points_used - 1) / smm);

    auto chi2_of = [&](double N) { return chi_square(prep.y, sm, N, prep.weights); };
    auto slope = [&](double N) {
        const double h = 1e-3 * std::max(std::abs(N), problem.mean_atoms_range[0]);
        return (chi2_of(N + h) - chi2_of(N - h)) / (2.0 * h);
    };
    {
        double lo = 0.0, hi = problem.mean_atoms_range[1];
        while (slope(hi) < 0.0 && hi < 1e12) hi *= 10.0;
        if (slope(lo) > 0.0) {
            r.mean_atoms_numeric = 0.0;
        } else {
            boost::uintmax_t iters = 200;
            const auto root = boost::math::tools::toms748_solve(
                slope, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
            r.mean_atoms_numeric = 0.5 * (root.first + root.second);
        }
    }
    {
        auto full = [&](double N) {
            const auto c = model_curve(N, e_vac0, prep.u, problem.model);
            return chi_square(prep.y, c.photons, scale, prep.weights);
        };
        auto full_slope = [&](double N) {
            const double h = 1e-6 * N;
            return (full(N + h) - full(N - h)) / (2.0 * h);
        };
        double lo = problem.mean_atoms_range[0], hi = problem.mean_atoms_range[1];
        if (full_slope(lo) >= 0.0) r.mean_atoms_full_model = lo;
        else if (full_slope(hi) <= 0.0) r.mean_atoms_full_model = hi;
        else {
            boost::uintmax_t iters = 200;
            const auto root = boost::math::tools::toms748_solve(
                full_slope, lo, hi, boost::math::tools::eps_tolerance<double>(45), iters);
            r.mean_atoms_full_model = 0.5 * (root.first + root.second);
        }
    }
    return r;
}

}  // namespace vacscan
