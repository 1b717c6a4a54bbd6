// config.hpp - scenario documents. One JSON file per physical scenario with
// unit-suffixed keys; unknown keys are rejected. Everything is converted to SI
// here and nowhere else.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "vacscan/calibration.hpp"
#include "vacscan/deconvolution.hpp"
#include "vacscan/ensemble.hpp"
#include "vacscan/error.hpp"
#include "vacscan/kinetics.hpp"
#include "vacscan/physics.hpp"
#include "vacscan/scan.hpp"
#include "vacscan/trajectory.hpp"
#include "vacscan/units.hpp"

namespace vacscan {

using json = nlohmann::json;

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

/// Hash of the canonical (key-sorted, compact) serialisation.
inline std::uint64_t canonical_hash(const json& j) { return fnv1a64(j.dump()); }

struct SpreadSpec {
    double hole_diameter = 0.0;  // m
    double divergence = 0.0;     // rad
    double standoff = 0.0;       // m
    std::optional<double> pitch; // m; defaults to the scan pitch
    SpreadAxis axis = SpreadAxis::z;
};

struct ScanSettings {
    double x = 0.0;
    double z_start = 0.0;
    double z_stop = 0.0;
    std::size_t points = 41;
    double dwell = 1.0;
    double efficiency = 1.0;
    double dark_rate = 0.0;
    std::uint64_t seed = 0;
    NoiseModel noise = NoiseModel::none;
    bool background = true;

    double pitch() const { return points > 1 ? (z_stop - z_start) / static_cast<double>(points - 1) : 0.0; }

    ScanConfig to_scan_config() const {
        ScanConfig c;
        c.positions = ScanConfig::z_line(z_start, z_stop, points, x);
        c.dwell = dwell;
        c.efficiency = efficiency;
        c.dark_rate = dark_rate;
        c.seed = seed;
        c.noise = noise;
        c.background = background;
        return c;
    }
};

struct Map2dSettings {
    double x_start = 0.0, x_stop = 0.0;
    std::size_t x_points = 1;
    double z_start = 0.0, z_stop = 0.0;
    std::size_t z_points = 1;
};

struct FitSettings {
    double u_min = 0.5;
    double u_max = 1.0;
    std::array<double, 2> mean_atoms_range{0.01, 10.0};
    std::array<double, 2> e_vac0_range{10.0, 1000.0};  // V/m
    std::size_t grid = 21;
    std::size_t max_evaluations = 4000;
    double tolerance = 1e-6;
    Weighting weighting = Weighting::none;
    std::optional<double> dwell;  // defaults to the scan dwell
    double poor_fit_threshold = 10.0;
};

struct TrajectorySettings {
    TrajectoryConfig config{};
};

struct Scenario {
    PhysicalParams params{};
    double mean_atoms = 0.0;
    AperturePosition point{};
    VelocityDistribution velocity = VelocityDistribution::delta(1.0);
    std::optional<SpreadSpec> spread;
    TruncationOptions truncation{};
    std::optional<ScanSettings> scan;
    std::optional<Map2dSettings> map2d;
    FitSettings fit{};
    RichardsonLucyOptions deconvolution{};
    std::optional<TrajectorySettings> trajectories;
    json document;
    std::uint64_t hash = 0;

    PumpBase pump_base() const { return {mean_atoms, truncation}; }

    /// Kernel at the configured pitch (scan pitch when not given); delta without a spread section.
    PositionSpreadKernel kernel() const {
        if (!spread) return PositionSpreadKernel::delta();
        double pitch = 0.0;
        if (spread->pitch) pitch = *spread->pitch;
        else if (scan && scan->points > 1) pitch = scan->pitch();
        else throw ConfigError("spread.pitch_nm is required when there is no multi-point scan section");
        return build_spread_kernel(spread->hole_diameter, spread->divergence, spread->standoff, pitch, spread->axis);
    }

    FitModel fit_model() const { return {params, velocity, truncation}; }

    FitProblem fit_problem(std::vector<FitPoint> points) const {
        FitProblem p;
        p.points = std::move(points);
        p.model = fit_model();
        p.u_min = fit.u_min;
        p.u_max = fit.u_max;
        p.mean_atoms_range = fit.mean_atoms_range;
        p.e_vac0_range = fit.e_vac0_range;
        p.grid = fit.grid;
        p.max_evaluations = fit.max_evaluations;
        p.tolerance = fit.tolerance;
        p.weighting = fit.weighting;
        p.dwell = fit.dwell ? *fit.dwell : (scan ? scan->dwell : 1.0);
        p.poor_fit_threshold = fit.poor_fit_threshold;
        return p;
    }
};

namespace detail {

class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double number(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing key '" + path(key) + "'");
        return as_number(j_.at(key), key);
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    double positive(const std::string& key) {
        const double v = number(key);
        if (!(v > 0.0)) throw ConfigError("'" + path(key) + "' must be positive");
        return v;
    }

    double positive(const std::string& key, double fallback) { return has(key) ? positive(key) : fallback; }

    std::size_t count(const std::string& key, std::size_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError("'" + path(key) + "' must be a non-negative integer");
        return v.get<std::size_t>();
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError("'" + path(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw ConfigError("'" + path(key) + "' must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) throw ConfigError("'" + path(key) + "' must be a string");
        return j_.at(key).get<std::string>();
    }

    std::array<double, 2> range(const std::string& key, std::array<double, 2> fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.size() != 2) throw ConfigError("'" + path(key) + "' must be [low, high]");
        std::array<double, 2> r{as_number(v[0], key), as_number(v[1], key)};
        if (!(r[0] > 0.0 && r[1] > r[0])) throw ConfigError("'" + path(key) + "' must satisfy 0 < low < high");
        return r;
    }

    std::vector<double> numbers(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || !j_.at(key).is_array()) throw ConfigError("'" + path(key) + "' must be an array");
        std::vector<double> out;
        for (const auto& v : j_.at(key)) out.push_back(as_number(v, key));
        return out;
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    /// Rejects keys that were never asked for.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + path(it.key()) + "'");
    }

private:
    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number()) throw ConfigError("'" + path(key) + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError("'" + path(key) + "' must be finite");
        return d;
    }

    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

inline PhysicalParams parse_physics(Section s) {
    PhysicalParams p;
    p.wavelength = s.positive("wavelength_nm") * units::nm;
    p.waist = s.positive("waist_um") * units::um;
    p.kappa = units::two_pi_khz(s.positive("kappa_2pi_khz"));
    p.dipole = s.positive("dipole_debye") * units::debye;
    p.e_vac0 = units::v_per_cm_to_v_per_m(s.positive("e_vac0_v_per_cm"));
    p.gamma = units::two_pi_khz(s.positive("gamma_2pi_khz"));
    p.rho_ee0 = s.number("rho_ee0");
    s.finish();
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("physics: ") + e.what());
    }
    return p;
}

inline VelocityDistribution parse_velocity(Section s) {
    const auto kind = s.text("kind", "truncated_gaussian");
    VelocityDistribution v = VelocityDistribution::delta(1.0);
    if (kind == "delta") {
        v = VelocityDistribution::delta(s.positive("mean_m_per_s"));
    } else if (kind == "truncated_gaussian") {
        const double mean = s.positive("mean_m_per_s");
        const double spread = s.number("spread_m_per_s");
        const std::size_t nodes = s.count("nodes", 9);
        v = VelocityDistribution::truncated_gaussian(mean, spread, nodes);
    } else if (kind == "tabulated") {
        const auto& table = s.raw("table");
        if (!table.is_array() || table.empty()) throw ConfigError("velocity.table must be a non-empty array");
        std::vector<VelocityNode> nodes;
        for (const auto& row : table) {
            Section r(row, "velocity.table[]");
            const double vel = r.positive("velocity_m_per_s");
            const double w = r.number("weight");
            r.finish();
            nodes.push_back({vel, w});
        }
        v = VelocityDistribution::tabulated(std::move(nodes));
    } else {
        throw ConfigError("velocity.kind must be delta, truncated_gaussian or tabulated");
    }
    s.finish();
    return v;
}

inline SpreadSpec parse_spread(Section s) {
    SpreadSpec sp;
    sp.hole_diameter = s.number("hole_diameter_nm") * units::nm;
    sp.divergence = s.number("divergence_mrad") * units::mrad;
    sp.standoff = s.number("standoff_um") * units::um;
    if (sp.hole_diameter < 0.0 || sp.divergence < 0.0 || sp.standoff < 0.0)
        throw ConfigError("spread parameters must be non-negative");
    if (s.has("pitch_nm")) sp.pitch = s.positive("pitch_nm") * units::nm;
    const auto axis = s.text("axis", "z");
    if (axis == "z") sp.axis = SpreadAxis::z;
    else if (axis == "xz") sp.axis = SpreadAxis::xz;
    else throw ConfigError("spread.axis must be z or xz");
    s.finish();
    return sp;
}

inline ScanSettings parse_scan(Section s, const PhysicalParams& params) {
    ScanSettings sc;
    sc.x = s.number("x_um", 0.0) * units::um;
    sc.z_start = s.number("z_start_nm", 0.0) * units::nm;
    sc.z_stop = s.has("z_stop_nm") ? s.number("z_stop_nm") * units::nm : params.wavelength / 4.0;
    sc.points = s.count("points", 41);
    if (sc.points < 1) throw ConfigError("scan.points must be at least 1");
    sc.dwell = s.positive("dwell_s", 1.0);
    const bool has_eff = s.has("detector_efficiency");
    const bool has_scale = s.has("detector_scale_kcps");
    if (has_eff && has_scale) throw ConfigError("give either scan.detector_efficiency or scan.detector_scale_kcps");
    if (has_eff) sc.efficiency = s.number("detector_efficiency");
    // The fit's scale S multiplies <n>; the detector sees kappa <n>.
    if (has_scale) sc.efficiency = units::kcps(s.number("detector_scale_kcps")) / params.kappa;
    if (sc.efficiency < 0.0) throw ConfigError("detector efficiency must be non-negative");
    sc.dark_rate = s.number("dark_cps", 0.0);
    if (sc.dark_rate < 0.0) throw ConfigError("scan.dark_cps must be non-negative");
    const auto noise = s.text("noise", "none");
    if (noise == "none") sc.noise = NoiseModel::none;
    else if (noise == "poisson") sc.noise = NoiseModel::poisson;
    else throw ConfigError("scan.noise must be none or poisson");
    sc.seed = s.seed("seed", 0);
    sc.background = s.flag("background", true);
    s.finish();
    return sc;
}

inline Map2dSettings parse_map2d(Section s) {
    Map2dSettings m;
    m.x_start = s.number("x_start_um") * units::um;
    m.x_stop = s.number("x_stop_um") * units::um;
    m.x_points = s.count("x_points", 41);
    m.z_start = s.number("z_start_nm") * units::nm;
    m.z_stop = s.number("z_stop_nm") * units::nm;
    m.z_points = s.count("z_points", 41);
    if (m.x_points < 1 || m.z_points < 1) throw ConfigError("map2d grids need at least one point");
    s.finish();
    return m;
}

inline FitSettings parse_fit(Section s) {
    FitSettings f;
    f.u_min = s.number("u_min", 0.5);
    f.u_max = s.number("u_max", 1.0);
    if (!(f.u_min >= 0.0 && f.u_max <= 1.0 && f.u_min < f.u_max))
        throw ConfigError("fit window must satisfy 0 <= u_min < u_max <= 1");
    f.mean_atoms_range = s.range("mean_atom_range", f.mean_atoms_range);
    const auto ev = s.range("e_vac0_range_v_per_cm", {0.1, 10.0});
    f.e_vac0_range = {units::v_per_cm_to_v_per_m(ev[0]), units::v_per_cm_to_v_per_m(ev[1])};
    f.grid = s.count("grid", 21);
    if (f.grid < 3) throw ConfigError("fit.grid must be at least 3");
    f.max_evaluations = s.count("max_evaluations", 4000);
    f.tolerance = s.positive("tolerance", 1e-6);
    const auto w = s.text("weighting", "none");
    if (w == "none") f.weighting = Weighting::none;
    else if (w == "poisson") f.weighting = Weighting::poisson;
    else throw ConfigError("fit.weighting must be none or poisson");
    if (s.has("dwell_s")) f.dwell = s.positive("dwell_s");
    f.poor_fit_threshold = s.positive("poor_fit_threshold", 10.0);
    s.finish();
    return f;
}

inline RichardsonLucyOptions parse_deconvolution(Section s) {
    RichardsonLucyOptions o;
    o.iterations = s.count("iterations", 50);
    o.epsilon_rel = s.positive("epsilon_rel", 1e-12);
    o.early_stop_tol = s.number("early_stop_tol", 0.0);
    if (o.early_stop_tol < 0.0) throw ConfigError("deconvolution.early_stop_tol must be non-negative");
    s.finish();
    return o;
}

inline TrajectorySettings parse_trajectories(Section s) {
    TrajectorySettings t;
    auto& c = t.config;
    c.trajectories = s.count("count", 1000);
    c.t_final = s.positive("t_final_us") * units::us;
    if (s.has("checkpoints_us")) {
        for (double v : s.numbers("checkpoints_us")) c.checkpoints.push_back(v * units::us);
    } else {
        const std::size_t n = s.count("checkpoint_count", 10);
        const double start = s.number("checkpoint_start_us", 0.0) * units::us;
        for (std::size_t i = 1; i <= n; ++i)
            c.checkpoints.push_back(start + (c.t_final - start) * static_cast<double>(i) / static_cast<double>(n));
    }
    c.seed = s.seed("seed", 1);
    c.max_atoms = s.count("max_atoms", 6);
    c.n_max = s.count("n_max", 200);
    c.dt = s.number("dt_ns", 0.0) * units::ns;
    c.initial_photons = s.count("initial_photons", 0);
    c.threads = s.count("threads", 0);
    c.record_events = s.flag("record_events", false);
    s.finish();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("trajectories: ") + e.what());
    }
    return t;
}

}  // namespace detail

inline Scenario parse_scenario(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
    detail::Section top(doc, "");
    Scenario sc;
    sc.document = doc;
    sc.hash = canonical_hash(doc);
    if (!top.has("physics")) throw ConfigError("missing section 'physics'");
    sc.params = detail::parse_physics({top.raw("physics"), "physics"});

    if (!top.has("pump")) throw ConfigError("missing section 'pump'");
    {
        detail::Section p(top.raw("pump"), "pump");
        const bool has_mean = p.has("mean_atom_number");
        const bool has_total = p.has("total_atom_number");
        if (has_mean == has_total) throw ConfigError("pump needs exactly one of mean_atom_number, total_atom_number");
        if (has_mean) sc.mean_atoms = p.number("mean_atom_number");
        else sc.mean_atoms = effective_mean_atom_number(p.number("total_atom_number"), sc.params.rho_ee0);
        if (!(sc.mean_atoms >= 0.0)) throw ConfigError("mean atom number must be non-negative");
        sc.point.x = p.number("x_um", 0.0) * units::um;
        sc.point.z = p.number("z_nm", 0.0) * units::nm;
        p.finish();
    }

    if (!top.has("velocity")) throw ConfigError("missing section 'velocity'");
    sc.velocity = detail::parse_velocity({top.raw("velocity"), "velocity"});
    if (top.has("spread")) sc.spread = detail::parse_spread({top.raw("spread"), "spread"});
    if (top.has("kinetics")) {
        detail::Section k(top.raw("kinetics"), "kinetics");
        sc.truncation.n_max = k.count("n_max", 40);
        sc.truncation.n_max_limit = k.count("n_max_limit", 160);
        sc.truncation.tol = k.positive("truncation_tol", default_truncation_tol);
        if (sc.truncation.n_max < 1 || sc.truncation.n_max_limit < sc.truncation.n_max)
            throw ConfigError("kinetics: need 1 <= n_max <= n_max_limit");
        k.finish();
    }
    if (top.has("scan")) sc.scan = detail::parse_scan({top.raw("scan"), "scan"}, sc.params);
    if (top.has("map2d")) sc.map2d = detail::parse_map2d({top.raw("map2d"), "map2d"});
    if (top.has("fit")) sc.fit = detail::parse_fit({top.raw("fit"), "fit"});
    if (top.has("deconvolution"))
        sc.deconvolution = detail::parse_deconvolution({top.raw("deconvolution"), "deconvolution"});
    if (top.has("trajectories"))
        sc.trajectories = detail::parse_trajectories({top.raw("trajectories"), "trajectories"});
    top.has("description");  // free text, ignored
    top.finish();
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    try {
        return parse_scenario(doc);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

}  // namespace vacscan
