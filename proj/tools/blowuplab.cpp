#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blowuplab/cli.hpp"

namespace bl = blowuplab;

int main(int argc, char** argv)
{
    CLI::App app{"blowuplab: radial blowup simulations of u_t = Δu + e^u and certification of profile estimates"};
    app.require_subcommand(1);

    std::string spec_path, sweep_path, trace_dir, out_dir;
    std::vector<std::string> tol_overrides;
    unsigned workers = 0;

    auto* run = app.add_subcommand("run", "integrate one experiment and write its trace directory");
    run->add_option("--spec", spec_path, "experiment file (.ini or .json)")->required();
    run->add_option("--out", out_dir, "trace directory (default: [output] dir of the spec)");

    auto* verify = app.add_subcommand("verify", "run the enabled checks on a trace directory");
    verify->add_option("trace", trace_dir, "trace directory")->required();
    verify->add_option("--spec", spec_path, "experiment file")->required();
    verify->add_option("--out", out_dir, "report directory (default: the trace directory)");
    verify->add_option("--tol-override", tol_overrides, "NAME=VALUE tolerance for one check");

    auto* sweep = app.add_subcommand("sweep", "run and verify every cell of a parameter grid");
    sweep->add_option("--spec", spec_path, "base experiment file")->required();
    sweep->add_option("--sweep", sweep_path, "sweep file with a [sweep] section")->required();
    sweep->add_option("--out", out_dir, "sweep directory (default: [output] dir of the spec)");
    sweep->add_option("--workers", workers, "concurrent cells (default: $BLOWUPLAB_WORKERS or all cores)");
    sweep->add_option("--tol-override", tol_overrides, "NAME=VALUE tolerance for one check");

    auto* plot = app.add_subcommand("plotdata", "emit CSV plot data for a trace directory");
    plot->add_option("trace", trace_dir, "trace directory")->required();
    plot->add_option("--out", out_dir, "output directory (default: <trace>/plotdata)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bl::exit_bad_input;
    }

    const auto out = out_dir.empty() ? std::optional<std::filesystem::path>{} : std::filesystem::path(out_dir);
    std::map<std::string, double> tols;
    try {
        tols = bl::parse_tol_overrides(tol_overrides);
    } catch (const bl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bl::exit_bad_input;
    }

    if (*run) return bl::cmd_run(spec_path, out);
    if (*verify) return bl::cmd_verify(trace_dir, spec_path, tols, out);
    if (*sweep)
        return bl::cmd_sweep(spec_path, sweep_path, workers ? std::optional<unsigned>(workers) : std::nullopt, out,
                             tols);
    return bl::cmd_plotdata(trace_dir, out);
}
