// vacscan - command-line front end. Subcommand bodies live in commands.hpp.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vacscan/acceptance.hpp"
#include "vacscan/commands.hpp"

namespace cli = vacscan::cli;

int main(int argc, char** argv) {
    CLI::App app{"vacscan: vacuum-field scanning with a micromaser-type atom beam"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vacscan::tool_version);

    cli::Context ctx;
    auto add_out_dir = [&](CLI::App* sub) {
        sub->add_option("--out-dir", ctx.out_dir, "output directory (overrides VACSCAN_OUT_DIR)");
    };

    std::string config;
    auto* steady = app.add_subcommand("steady", "steady-state photon statistics at the configured position");
    steady->add_option("config", config, "scenario JSON")->required();
    add_out_dir(steady);

    std::optional<std::uint64_t> seed;
    auto* scan = app.add_subcommand("scan", "forward node-to-antinode scan");
    scan->add_option("config", config, "scenario JSON")->required();
    scan->add_option("--seed", seed, "override the scan seed");
    add_out_dir(scan);

    auto* map2d = app.add_subcommand("map2d", "linear-regime xz surface map");
    map2d->add_option("config", config, "scenario JSON")->required();
    add_out_dir(map2d);

    std::string scan_csv, kernel_csv;
    cli::DeconvolveOptions dopt;
    auto* deconv = app.add_subcommand("deconvolve", "Richardson-Lucy deconvolution of a scan");
    deconv->add_option("scan", scan_csv, "scan CSV")->required();
    deconv->add_option("kernel", kernel_csv, "kernel CSV")->required();
    deconv->add_option("--iters", dopt.iterations, "iterations (default 50)");
    deconv->add_option("--epsilon", dopt.epsilon_rel, "denominator floor relative to the data maximum");
    deconv->add_option("--antinode", dopt.antinode_nm, "antinode position in nm (default: least-squares registration)");
    add_out_dir(deconv);

    std::string data_csv;
    cli::FitOptions fopt;
    std::vector<double> window;
    auto* fitc = app.add_subcommand("fit", "calibration fit of deconvolved data");
    fitc->add_option("data", data_csv, "deconvolved CSV (columns u and deconvolved_value, or u and y)")->required();
    fitc->add_option("--config", config, "scenario JSON with the fixed physics")->required();
    fitc->add_option("--fix-scale", fopt.fix_scale_kcps, "hold the scale S at this value (kcps)");
    fitc->add_flag("--linear-N", fopt.linear_n, "one-parameter linear-regime fit of <N> (needs --fix-scale)");
    fitc->add_option("--window", window, "validity window u_min u_max")->expected(2);
    add_out_dir(fitc);

    auto* traj = app.add_subcommand("trajectories", "quantum-trajectory cross-check of the master equation");
    traj->add_option("config", config, "scenario JSON with a trajectories section")->required();
    add_out_dir(traj);

    bool list = false;
    std::vector<std::string> only;
    auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
    acc->add_flag("--list", list, "print criterion IDs without running");
    acc->add_option("--only", only, "run only these criteria (e.g. C3 C7)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::exit_config;
    }

    if (*steady) return cli::cmd_steady(config, ctx);
    if (*scan) return cli::cmd_scan(config, ctx, seed);
    if (*map2d) return cli::cmd_map2d(config, ctx);
    if (*deconv) return cli::cmd_deconvolve(scan_csv, kernel_csv, dopt, ctx);
    if (*fitc) {
        if (!window.empty()) fopt.window = std::array<double, 2>{window[0], window[1]};
        return cli::cmd_fit(data_csv, config, fopt, ctx);
    }
    if (*traj) return cli::cmd_trajectories(config, ctx);
    if (*acc) {
        if (list) {
            vacscan::acceptance::list(std::cout);
            return cli::exit_ok;
        }
        try {
            return vacscan::acceptance::run(std::cout, only);
        } catch (const vacscan::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return cli::exit_config;
        }
    }
    return cli::exit_config;
}
