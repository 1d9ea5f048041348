#pragma once

// Subcommands of the experiment runner. Each returns the process exit status:
// 0 all enabled checks pass, 1 a check failed, 2 bad input, 3 a run or sweep cell errored.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "blowuplab/bounds.hpp"
#include "blowuplab/config.hpp"
#include "blowuplab/errors.hpp"
#include "blowuplab/integrate.hpp"
#include "blowuplab/persist.hpp"
#include "blowuplab/verify.hpp"

namespace blowuplab {

enum ExitStatus : int { exit_ok = 0, exit_check_failed = 1, exit_bad_input = 2, exit_run_error = 3 };

/// Parses NAME=VALUE pairs into per-check tolerances.
inline std::map<std::string, double> parse_tol_overrides(const std::vector<std::string>& items)
{
    std::map<std::string, double> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--tol-override '" + item + "': expected NAME=VALUE");
        const std::string name = item.substr(0, eq);
        if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
            throw ConfigError("--tol-override: unknown check '" + name + "'");
        out[name] = detail::parse_real("--tol-override " + name, item.substr(eq + 1));
    }
    return out;
}

inline std::string file_id(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return std::to_string(std::hash<std::string>{}(os.str()));
}

namespace detail {

inline CheckRecord failed_record(const std::string& name, const std::string& message)
{
    CheckRecord rec;
    rec.name = name;
    rec.region = "not evaluated";
    rec.max_violation = std::numeric_limits<double>::quiet_NaN();
    rec.error = message;
    rec.pass = false;
    return rec;
}

inline CheckRecord run_check(const std::string& name, const Trace& tr, const ExperimentSpec& spec)
{
    const double tol = spec.tolerance(name);
    const auto& p = spec.bounds;
    const auto& o = spec.options;
    if (name == "j_nonpositive") return check_j_nonpositive(tr, p, tol, o.A_scan);
    if (name == "integr0") return check_integr0(tr, p, tol, o.A_scan);
    if (name == "hopf") {
        auto rec = check_hopf(tr);
        rec.tolerance = tol;
        finalize(rec);
        return rec;
    }
    if (name == "eta_lower_bound") {
        auto rec = check_eta_lower_bound(tr);
        rec.tolerance = tol;
        finalize(rec);
        return rec;
    }
    if (name == "global_estimate") return check_global_estimate(tr, p, tol);
    if (name == "refined_profile") return check_refined_profile(tr, o.K, tol);
    if (name == "final_profile")
        return check_final_profile(extract_final_profile(tr, o.err_threshold, o.window), o.rho, tol);
    if (name == "phi_variants") return check_phi_variants(tr, p, tol, o.A_scan);
    if (name == "lemma_suite") return fold_records("lemma_suite", check_lemma_suite(p, tol));
    throw ConfigError("unknown check '" + name + "'");
}

} // namespace detail

/// Runs every enabled check (concurrently) and returns the canonical report.
inline VerificationReport verify_trace(const Trace& tr, const ExperimentSpec& spec)
{
    spec.bounds.validate();
    std::vector<std::future<CheckRecord>> jobs;
    for (const auto& name : spec.checks) {
        jobs.push_back(std::async(std::launch::async, [&tr, &spec, name] {
            try {
                return detail::run_check(name, tr, spec);
            } catch (const Error& e) {
                return detail::failed_record(name, e.what());
            }
        }));
    }
    VerificationReport rep;
    for (auto& j : jobs) rep.records.push_back(j.get());
    rep.canonicalize();
    rep.provenance.emplace_back("spec_id", spec.source_id);
    rep.provenance.emplace_back("bounds", to_json(spec.bounds).dump());
    return rep;
}

inline void write_report(const VerificationReport& rep, const fs::path& dir)
{
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out) throw IoError("cannot write " + (dir / "report.json").string());
        out << to_json(rep).dump(2) << '\n';
    }
    std::ofstream out(dir / "report.txt");
    if (!out) throw IoError("cannot write " + (dir / "report.txt").string());
    out << to_text(rep);
}

/// Fields of the solver configuration that define the problem (not the numerics).
inline void require_compatible(const SolverConfig& trace_cfg, const SolverConfig& spec_cfg)
{
    const auto a = to_json(trace_cfg);
    const auto b = to_json(spec_cfg);
    for (const char* key : {"n", "domain", "R", "boundary", "reaction", "u0"}) {
        if (a.at(key) != b.at(key)) {
            throw ConfigError(std::string("solver.") + key + ": trace has " + a.at(key).dump() + ", spec has " +
                              b.at(key).dump());
        }
    }
}

inline std::string run_summary(const Trace& tr)
{
    std::ostringstream os;
    os.precision(17);
    os << "t_stop=" << tr.final_t() << " m=" << tr.final_m() << " stop=" << to_string(tr.stop_reason)
       << " steps=" << tr.samples.size() - 1 << " T_est=";
    try {
        os << estimate_blowup_time(tr).T_est;
    } catch (const Error&) {
        os << "n/a";
    }
    return os.str();
}

inline int report_error(std::ostream& err, const std::exception& e)
{
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return exit_bad_input;
    return exit_run_error;
}

inline int cmd_run(const fs::path& spec_path, const std::optional<fs::path>& out_dir,
                   std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const auto spec = load_spec(spec_path);
        const fs::path dir = out_dir.value_or(spec.output_dir);
        const auto tr = run(spec.solver);
        write_trace(tr, dir, &spec.bounds);
        out << run_summary(tr) << '\n';
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

inline int cmd_verify(const fs::path& trace_dir, const fs::path& spec_path,
                      const std::map<std::string, double>& tol_overrides = {},
                      const std::optional<fs::path>& out_dir = std::nullopt, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr)
{
    try {
        auto spec = load_spec(spec_path);
        for (const auto& [k, v] : tol_overrides) spec.tolerances[k] = v;
        const auto loaded = read_trace(trace_dir);
        require_compatible(loaded.trace.config, spec.solver);
        auto rep = verify_trace(loaded.trace, spec);
        rep.provenance.emplace_back("trace_id", file_id(trace_dir / "samples.csv"));
        write_report(rep, out_dir.value_or(trace_dir));
        out << to_text(rep);
        return rep.all_pass() ? exit_ok : exit_check_failed;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

/// Worker count: explicit value, else BLOWUPLAB_WORKERS, else the hardware concurrency.
inline unsigned resolve_workers(std::optional<unsigned> requested)
{
    if (requested && *requested > 0) return *requested;
    if (const char* env = std::getenv("BLOWUPLAB_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("BLOWUPLAB_WORKERS: '") + env + "' is not a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepCell {
    std::size_t index = 0;
    std::vector<std::string> values; // one per axis
    std::string status = "error";    // pass, fail or error
    std::string message;
    std::optional<double> T_est;
    double final_m = std::numeric_limits<double>::quiet_NaN();
    VerificationReport report;
};

inline std::vector<SweepCell> sweep_cells(const std::vector<SweepAxis>& axes)
{
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    std::vector<SweepCell> cells(total);
    for (std::size_t i = 0; i < total; ++i) {
        cells[i].index = i;
        std::size_t rest = i;
        std::vector<std::string> vals(axes.size());
        for (std::size_t k = axes.size(); k-- > 0;) {
            vals[k] = axes[k].values[rest % axes[k].values.size()];
            rest /= axes[k].values.size();
        }
        cells[i].values = std::move(vals);
    }
    return cells;
}

inline void run_sweep_cell(SweepCell& cell, const std::vector<SweepAxis>& axes, const ExperimentSpec& base,
                           const fs::path& dir, const std::map<std::string, double>& tol_overrides)
{
    try {
        auto tree = base.tree;
        for (std::size_t k = 0; k < axes.size(); ++k) tree.put(axes[k].key, cell.values[k]);
        auto spec = spec_from_tree(tree);
        for (const auto& [k, v] : tol_overrides) spec.tolerances[k] = v;
        const auto tr = run(spec.solver);
        write_trace(tr, dir, &spec.bounds);
        cell.final_m = tr.final_m();
        try {
            cell.T_est = estimate_blowup_time(tr).T_est;
        } catch (const Error&) {
        }
        cell.report = verify_trace(tr, spec);
        cell.report.provenance.emplace_back("trace_id", file_id(dir / "samples.csv"));
        write_report(cell.report, dir);
        cell.status = cell.report.all_pass() ? "pass" : "fail";
    } catch (const std::exception& e) {
        cell.status = "error";
        cell.message = e.what();
    }
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells, const std::vector<SweepAxis>& axes,
                            const std::vector<std::string>& checks, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "cell";
    for (const auto& a : axes) out << ',' << a.key;
    out << ",status,final_m,T_est";
    for (const auto& c : checks) out << ',' << c << ".pass," << c << ".fitted," << c << ".max_violation";
    out << '\n';
    auto num = [](std::optional<double> v) {
        return v && std::isfinite(*v) ? format_real(*v) : std::string();
    };
    for (const auto& cell : cells) {
        out << cell.index;
        for (const auto& v : cell.values) out << ',' << v;
        out << ',' << cell.status << ',' << num(cell.final_m) << ',' << num(cell.T_est);
        for (const auto& c : checks) {
            const CheckRecord* rec = nullptr;
            for (const auto& r : cell.report.records)
                if (r.name == c) rec = &r;
            if (!rec) {
                out << ",,,";
                continue;
            }
            out << ',' << (rec->pass ? 1 : 0) << ',' << num(rec->fitted_constant) << ',' << num(rec->max_violation);
        }
        out << '\n';
    }
    if (!out) throw IoError("write to " + path.string() + " failed");
}

inline int cmd_sweep(const fs::path& spec_path, const fs::path& sweep_path, std::optional<unsigned> workers,
                     const std::optional<fs::path>& out_dir, const std::map<std::string, double>& tol_overrides = {},
                     std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const auto base = load_spec(spec_path);
        const auto axes = load_sweep(sweep_path);
        const fs::path dir = out_dir.value_or(base.output_dir);
        auto cells = sweep_cells(axes);
        const unsigned n_workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(cells.size()));

        auto cell_dir = [&](std::size_t i) {
            char name[32];
            std::snprintf(name, sizeof name, "cell_%03zu", i);
            return dir / "cells" / name;
        };
        std::atomic<std::size_t> next{0};
        std::mutex log;
        auto worker = [&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) {
                run_sweep_cell(cells[i], axes, base, cell_dir(i), tol_overrides);
                std::lock_guard lock(log);
                err << "cell " << i << ": " << cells[i].status
                    << (cells[i].message.empty() ? "" : " (" + cells[i].message + ")") << '\n';
            }
        };
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        // rows are already in cell-key order; the CSV is written once, after every cell finished
        write_sweep_csv(cells, axes, base.checks, dir / "sweep.csv");
        const bool errored = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.status == "error"; });
        const bool failed = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.status != "pass"; });
        out << cells.size() << " cells written to " << (dir / "sweep.csv").string() << '\n';
        if (errored) return exit_run_error;
        return failed ? exit_check_failed : exit_ok;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

/// Plot data: rate.csv, final_profile.csv, rescaled.csv, j_profile.csv.
inline int cmd_plotdata(const fs::path& trace_dir, const std::optional<fs::path>& out_dir,
                        std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const auto loaded = read_trace(trace_dir);
        const auto& tr = loaded.trace;
        const BoundParams p = loaded.bounds.value_or(make_bound_params(3.0));
        const fs::path dir = out_dir.value_or(trace_dir / "plotdata");
        fs::create_directories(dir);
        int written = 0;

        std::optional<BlowupEstimate> est;
        try {
            est = estimate_blowup_time(tr);
        } catch (const Error& e) {
            err << "warning: rate.csv and final_profile.csv skipped: " << e.what() << '\n';
        }
        if (est) {
            CsvWriter w(dir / "rate.csv", {"t", "m", "minus_log_T_minus_t"});
            for (const auto& s : tr.samples)
                if (s.t < est->T_est) w.row({s.t, s.m, -std::log(est->T_est - s.t)});
            w.close();
            ++written;
            try {
                const auto prof = extract_final_profile(tr);
                const double rho = std::min(0.5, prof.r.back());
                const auto rec = check_final_profile(prof, rho);
                const double C = rec.fitted_constant.value_or(0.0);
                CsvWriter f(dir / "final_profile.csv", {"r", "u", "err", "bound"});
                for (std::size_t i = 0; i < prof.r.size() && prof.r[i] <= rho; ++i)
                    f.row({prof.r[i], prof.u[i], prof.err[i], final_profile_bound(prof.r[i], C)});
                f.close();
                ++written;
            } catch (const Error& e) {
                err << "warning: final_profile.csv skipped: " << e.what() << '\n';
            }
        }
        {
            CsvWriter w(dir / "rescaled.csv", {"m", "xi", "rescaled", "sharp"});
            for (const auto& s : tr.snapshots) {
                if (s.m < 1.0) continue;
                const double ell = core_scale(s.m);
                const FieldInterpolant u(s.field);
                for (int k = 0; k <= 80; ++k) {
                    const double xi = 0.1 * k;
                    w.row({s.m, xi, u(xi * ell) - s.m, -std::log1p(0.25 * xi * xi)});
                }
            }
            w.close();
            ++written;
        }
        {
            CsvWriter w(dir / "j_profile.csv", {"m", "r", "J"});
            for (const auto& s : tr.snapshots) {
                const auto& g = *s.field.grid;
                const auto ur = radial_derivative(g, s.field.values);
                for (std::size_t i = 1; i < g.size() && g.nodes[i] <= 0.5 * g.R; ++i)
                    w.row({s.m, g.nodes[i], j_value(s.field.values[i], ur[i], g.nodes[i], p)});
            }
            w.close();
            ++written;
        }
        out << written << " plot files written to " << dir.string() << '\n';
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

} // namespace blowuplab
