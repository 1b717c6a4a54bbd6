// deconvolution.hpp - Richardson-Lucy deconvolution of z-scan data against the
// atom position-spread kernel, and registration onto the relative-intensity axis.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "vacscan/ensemble.hpp"
#include "vacscan/error.hpp"
#include "vacscan/physics.hpp"

namespace vacscan {

/// Non-negative samples on a uniform z grid.
struct SignalSeries {
    std::vector<double> z;       // m
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    double pitch() const { return z.size() > 1 ? (z.back() - z.front()) / static_cast<double>(z.size() - 1) : 0.0; }

    void validate() const {
        if (z.size() != values.size()) throw InvalidArgument("series grid and values differ in length");
        for (double v : values)
            if (!(v >= 0.0)) throw InvalidArgument("series values must be non-negative");
        if (z.size() < 2) return;
        const double h = pitch();
        if (!(h > 0.0)) throw InvalidArgument("series grid must be increasing");
        for (std::size_t i = 1; i < z.size(); ++i)
            if (std::abs((z[i] - z[i - 1]) - h) > 1e-6 * h) throw InvalidArgument("series grid must be uniform");
    }

    double total() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

namespace detail {

inline void check_kernel_against(const SignalSeries& s, const PositionSpreadKernel& k) {
    k.validate();
    s.validate();
    if (k.is_delta() || s.size() < 2) return;
    if (std::abs(k.pitch - s.pitch()) > 1e-6 * s.pitch())
        throw InvalidArgument("kernel pitch does not match the signal pitch");
}

/// For each source j, the kernel mass that lands inside the window; the blur
/// divides by it so every source deposits exactly its own weight.
inline std::vector<double> column_mass(std::size_t n, const PositionSpreadKernel& k) {
    const auto half = static_cast<std::ptrdiff_t>(k.half_width());
    const auto size = static_cast<std::ptrdiff_t>(n);
    std::vector<double> mass(n, 0.0);
    for (std::ptrdiff_t j = 0; j < size; ++j)
        for (std::ptrdiff_t d = -half; d <= half; ++d) {
            const auto i = j + d;
            if (i >= 0 && i < size) mass[static_cast<std::size_t>(j)] += k.weights[static_cast<std::size_t>(d + half)];
        }
    return mass;
}

}  // namespace detail

/// Forward blur (K e)_i = sum_j k(i - j) e_j / m_j with edge-renormalised columns.
inline std::vector<double> blur(const std::vector<double>& e, const PositionSpreadKernel& k) {
    const auto half = static_cast<std::ptrdiff_t>(k.half_width());
    const auto size = static_cast<std::ptrdiff_t>(e.size());
    const auto mass = detail::column_mass(e.size(), k);
    std::vector<double> out(e.size(), 0.0);
    for (std::ptrdiff_t j = 0; j < size; ++j) {
        const double src = e[static_cast<std::size_t>(j)] / mass[static_cast<std::size_t>(j)];
        if (src == 0.0) continue;
        for (std::ptrdiff_t d = -half; d <= half; ++d) {
            const auto i = j + d;
            if (i >= 0 && i < size)
                out[static_cast<std::size_t>(i)] += k.weights[static_cast<std::size_t>(d + half)] * src;
        }
    }
    return out;
}

inline SignalSeries blur(const SignalSeries& s, const PositionSpreadKernel& k) {
    detail::check_kernel_against(s, k);
    return {s.z, blur(s.values, k)};
}

/// Poisson log-likelihood (up to constants) of data y under model m.
inline double poisson_log_likelihood(const std::vector<double>& y, const std::vector<double>& m) {
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (m[i] > 0.0) l += y[i] * std::log(m[i]) - m[i];
        else if (y[i] > 0.0) return -HUGE_VAL;
    }
    return l;
}

struct RichardsonLucyOptions {
    std::size_t iterations = 50;
    double epsilon_rel = 1e-12;     // floor, relative to the series maximum
    double early_stop_tol = 0.0;    // stop when max relative update falls below; 0 disables
};

struct RichardsonLucyResult {
    SignalSeries estimate;
    std::size_t iterations = 0;
    double epsilon = 0.0;
};

namespace detail {

/// e <- e * K^T (y / (K e + eps)) in place; returns max |factor - 1|.
inline double rl_update(const std::vector<double>& y, std::vector<double>& e, const PositionSpreadKernel& k,
                        const std::vector<double>& mass, double epsilon) {
    const auto half = static_cast<std::ptrdiff_t>(k.half_width());
    const auto size = static_cast<std::ptrdiff_t>(y.size());
    const auto model = blur(e, k);
    std::vector<double> ratio(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ratio[i] = y[i] / (model[i] + epsilon);
    double max_update = 0.0;
    for (std::ptrdiff_t j = 0; j < size; ++j) {
        double back = 0.0;
        for (std::ptrdiff_t d = -half; d <= half; ++d) {
            const auto i = j + d;
            if (i >= 0 && i < size)
                back += k.weights[static_cast<std::size_t>(d + half)] * ratio[static_cast<std::size_t>(i)];
        }
        back /= mass[static_cast<std::size_t>(j)];
        max_update = std::max(max_update, std::abs(back - 1.0));
        e[static_cast<std::size_t>(j)] *= back;
    }
    return max_update;
}

}  // namespace detail

/// Multiplicative update e <- e * K^T (y / (K e + eps)), starting from e = y.
/// `observer(iteration, estimate)` sees every iterate.
inline RichardsonLucyResult richardson_lucy(
    const SignalSeries& observed, const PositionSpreadKernel& kernel, const RichardsonLucyOptions& opt = {},
    const std::function<void(std::size_t, const std::vector<double>&)>& observer = {}) {
    detail::check_kernel_against(observed, kernel);
    RichardsonLucyResult res;
    res.estimate = observed;
    const auto& y = observed.values;
    const double peak = y.empty() ? 0.0 : *std::max_element(y.begin(), y.end());
    res.epsilon = opt.epsilon_rel * peak;
    if (kernel.is_delta() || peak == 0.0) {
        res.iterations = opt.iterations;
        return res;
    }
    const auto mass = detail::column_mass(y.size(), kernel);
    for (std::size_t it = 0; it < opt.iterations; ++it) {
        const double max_update = detail::rl_update(y, res.estimate.values, kernel, mass, res.epsilon);
        res.iterations = it + 1;
        if (observer) observer(res.iterations, res.estimate.values);
        if (opt.early_stop_tol > 0.0 && max_update < opt.early_stop_tol) break;
    }
    return res;
}

/// One update applied to an arbitrary current estimate.
inline std::vector<double> richardson_lucy_step(const SignalSeries& observed, std::vector<double> estimate,
                                                const PositionSpreadKernel& kernel, double epsilon) {
    detail::check_kernel_against(observed, kernel);
    if (estimate.size() != observed.size()) throw InvalidArgument("estimate and series differ in length");
    if (kernel.is_delta()) return estimate;
    detail::rl_update(observed.values, estimate, kernel, detail::column_mass(observed.size(), kernel), epsilon);
    return estimate;
}

struct IntensityPoint {
    double u;
    double value;
};

/// u = cos^2(2 pi (z - z_antinode) / lambda) for every sample, order kept.
inline std::vector<IntensityPoint> to_intensity_axis(const SignalSeries& s, double wavelength, double z_antinode) {
    std::vector<IntensityPoint> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        out.push_back({relative_intensity(s.z[i] - z_antinode, wavelength), s.values[i]});
    return out;
}

/// Least-squares registration of A cos^2(k (z - z0)) + B. Written as
/// a + b cos(2kz) + c sin(2kz) the problem is linear; z0 = atan2(c, b) / 2k,
/// returned in (-lambda/4, lambda/4].
inline double estimate_antinode(const SignalSeries& s, double wavelength) {
    if (s.size() < 3) throw InvalidArgument("antinode registration needs at least 3 samples");
    const double k2 = 2.0 * units::two_pi / wavelength;
    double m[3][4] = {};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f[3] = {1.0, std::cos(k2 * s.z[i]), std::sin(k2 * s.z[i])};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += f[r] * f[c];
            m[r][3] += f[r] * s.values[i];
        }
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[piv][c]);
        if (std::abs(m[col][col]) < 1e-300) throw InvalidArgument("antinode registration is singular");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    const double b = m[1][3] / m[1][1];
    const double c = m[2][3] / m[2][2];
    if (b == 0.0 && c == 0.0) throw InvalidArgument("series has no standing-wave modulation");
    return std::atan2(c, b) / k2;
}

}  // namespace vacscan
