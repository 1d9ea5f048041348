#pragma once

// Trace directories: samples.csv, snapshots/snapshot_NNN.csv, snapshots.bin, meta.json.
// Every number is written with 17 significant digits so a reload is exact.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blowuplab/bounds.hpp"
#include "blowuplab/errors.hpp"
#include "blowuplab/integrate.hpp"

namespace blowuplab {

namespace fs = std::filesystem;

inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes rows of doubles under a fixed header.
class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path)
    {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(std::initializer_list<double> values)
    {
        bool first = true;
        for (double v : values) {
            out_ << (first ? "" : ",") << format_real(v);
            first = false;
        }
        out_ << '\n';
    }

    void close()
    {
        out_.close();
        if (!out_) throw IoError("write to " + path_.string() + " failed");
    }

private:
    fs::path path_;
    std::ofstream out_;
};

/// Reads a numeric CSV, checking the header matches exactly.
inline std::vector<std::vector<double>> read_csv(const fs::path& path, const std::vector<std::string>& header)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::string expected;
    for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
    if (line != expected) throw IoError(path.string() + ": expected header '" + expected + "'");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path.string() + ": malformed number '" + cell + "'");
            }
        }
        if (row.size() != header.size()) throw IoError(path.string() + ": wrong column count");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_field_csv(const Field& f, const fs::path& path)
{
    CsvWriter w(path, {"r", "u"});
    for (std::size_t i = 0; i < f.size(); ++i) w.row({f.grid->nodes[i], f.values[i]});
    w.close();
}

// snapshots.bin: "BLWSNAP1", uint64 count, then per snapshot
// t, m, dt_used (f64), uint64 N, N f64 radii, N f64 values; native byte order.
inline constexpr char snapshot_magic[8] = {'B', 'L', 'W', 'S', 'N', 'A', 'P', '1'};

inline void write_snapshot_container(const std::vector<Snapshot>& snaps, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    out.write(snapshot_magic, sizeof snapshot_magic);
    put(static_cast<std::uint64_t>(snaps.size()));
    for (const auto& s : snaps) {
        put(s.t);
        put(s.m);
        put(s.dt_used);
        put(static_cast<std::uint64_t>(s.field.size()));
        out.write(reinterpret_cast<const char*>(s.field.grid->nodes.data()),
                  static_cast<std::streamsize>(s.field.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(s.field.values.data()),
                  static_cast<std::streamsize>(s.field.size() * sizeof(double)));
    }
    if (!out) throw IoError("write to " + path.string() + " failed");
}

struct RawSnapshot {
    double t, m, dt_used;
    std::vector<double> r, u;
};

inline std::vector<RawSnapshot> read_snapshot_container(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto get = [&](auto& v) {
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw IoError(path.string() + ": truncated snapshot container");
    };
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, snapshot_magic)) throw IoError(path.string() + ": not a snapshot container");
    std::uint64_t count = 0;
    get(count);
    std::vector<RawSnapshot> out(count);
    for (auto& s : out) {
        get(s.t);
        get(s.m);
        get(s.dt_used);
        std::uint64_t N = 0;
        get(N);
        if (N > (1u << 26)) throw IoError(path.string() + ": implausible node count");
        s.r.resize(N);
        s.u.resize(N);
        in.read(reinterpret_cast<char*>(s.r.data()), static_cast<std::streamsize>(N * sizeof(double)));
        in.read(reinterpret_cast<char*>(s.u.data()), static_cast<std::streamsize>(N * sizeof(double)));
        if (!in) throw IoError(path.string() + ": truncated snapshot container");
    }
    return out;
}

inline nlohmann::json to_json(const SolverConfig& c)
{
    nlohmann::json j;
    j["n"] = c.n;
    j["domain"] = to_string(c.domain);
    j["R"] = c.R;
    j["boundary"] = to_string(c.boundary);
    j["reaction"] = to_string(c.reaction);
    j["u0"] = {{"family", to_string(c.u0.family)}, {"a", c.u0.a}, {"width", c.u0.width}};
    j["delta_m"] = c.delta_m;
    j["m_stop"] = c.m_stop;
    j["t_max"] = c.t_max;
    j["h_min"] = c.grading.h_min;
    j["q"] = c.grading.q;
    j["h_cap"] = std::isfinite(c.grading.h_cap) ? nlohmann::json(c.grading.h_cap) : nlohmann::json();
    j["N_cap"] = c.grading.N_cap;
    j["regrid_trigger"] = c.regrid_trigger;
    j["snapshots"] = c.snapshot_schedule;
    j["fixed_dt"] = c.fixed_dt ? nlohmann::json(*c.fixed_dt) : nlohmann::json();
    j["dt_min"] = c.dt_min;
    j["dt_cap"] = c.dt_cap;
    return j;
}

inline nlohmann::json to_json(const BoundParams& p)
{
    return {{"A", p.A},           {"variant", to_string(p.variant)}, {"C_lemma", p.C_lemma},
            {"C_global", p.C_global}, {"C_refined", p.C_refined},      {"s0", p.s0}};
}

inline DomainKind domain_from_string(const std::string& s)
{
    if (s == "ball") return DomainKind::Ball;
    if (s == "whole_space") return DomainKind::TruncatedWholeSpace;
    throw ConfigError("unknown domain '" + s + "' (expected ball or whole_space)");
}

inline Boundary boundary_from_string(const std::string& s)
{
    if (s == "dirichlet") return Boundary::Dirichlet;
    if (s == "neumann") return Boundary::Neumann;
    throw ConfigError("unknown boundary '" + s + "' (expected dirichlet or neumann)");
}

inline ReactionTreatment reaction_from_string(const std::string& s)
{
    if (s == "exact_flow") return ReactionTreatment::ExactFlow;
    if (s == "forward_euler") return ReactionTreatment::ForwardEuler;
    if (s == "off") return ReactionTreatment::Off;
    throw ConfigError("unknown reaction '" + s + "' (expected exact_flow, forward_euler or off)");
}

inline InitialFamily family_from_string(const std::string& s)
{
    if (s == "parabola") return InitialFamily::Parabola;
    if (s == "gaussian") return InitialFamily::Gaussian;
    if (s == "constant") return InitialFamily::Constant;
    if (s == "cosine") return InitialFamily::Cosine;
    throw ConfigError("unknown initial family '" + s + "'");
}

inline SolverConfig solver_config_from_json(const nlohmann::json& j)
{
    SolverConfig c;
    c.n = j.at("n").get<int>();
    c.domain = domain_from_string(j.at("domain").get<std::string>());
    c.R = j.at("R").get<double>();
    c.boundary = boundary_from_string(j.at("boundary").get<std::string>());
    c.reaction = reaction_from_string(j.at("reaction").get<std::string>());
    const auto& u0 = j.at("u0");
    c.u0 = {family_from_string(u0.at("family").get<std::string>()), u0.at("a").get<double>(),
            u0.at("width").get<double>()};
    c.delta_m = j.at("delta_m").get<double>();
    c.m_stop = j.at("m_stop").get<double>();
    c.t_max = j.at("t_max").get<double>();
    c.grading.h_min = j.at("h_min").get<double>();
    c.grading.q = j.at("q").get<double>();
    c.grading.h_cap = j.at("h_cap").is_null() ? std::numeric_limits<double>::infinity() : j.at("h_cap").get<double>();
    c.grading.N_cap = j.at("N_cap").get<std::size_t>();
    c.regrid_trigger = j.at("regrid_trigger").get<std::size_t>();
    c.snapshot_schedule = j.at("snapshots").get<std::vector<double>>();
    if (!j.at("fixed_dt").is_null()) c.fixed_dt = j.at("fixed_dt").get<double>();
    c.dt_min = j.at("dt_min").get<double>();
    c.dt_cap = j.at("dt_cap").get<double>();
    return c;
}

inline BoundParams bound_params_from_json(const nlohmann::json& j)
{
    auto p = make_bound_params(j.at("A").get<double>(), phi_variant_from_string(j.at("variant").get<std::string>()));
    p.C_lemma = j.at("C_lemma").get<double>();
    p.C_global = j.at("C_global").get<double>();
    p.C_refined = j.at("C_refined").get<double>();
    p.s0 = j.at("s0").get<double>();
    return p;
}

/// Writes the trace directory; bounds, when given, are echoed into meta.json for later verification.
inline void write_trace(const Trace& tr, const fs::path& dir, const BoundParams* bounds = nullptr)
{
    std::error_code ec;
    fs::create_directories(dir / "snapshots", ec);
    if (ec) throw IoError("cannot create " + (dir / "snapshots").string() + ": " + ec.message());

    CsvWriter samples(dir / "samples.csv", {"t", "m", "dt"});
    for (const auto& s : tr.samples) samples.row({s.t, s.m, s.dt});
    samples.close();

    nlohmann::json snaps = nlohmann::json::array();
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
        const auto& s = tr.snapshots[k];
        write_field_csv(s.field, dir / "snapshots" / name);
        snaps.push_back({{"file", std::string("snapshots/") + name},
                         {"t", s.t},
                         {"m", s.m},
                         {"dt_used", s.dt_used},
                         {"nodes", s.field.size()}});
    }
    write_snapshot_container(tr.snapshots, dir / "snapshots.bin");

    nlohmann::json meta;
    meta["format"] = "blowuplab-trace-1";
    meta["solver"] = to_json(tr.config);
    if (bounds) meta["bounds"] = to_json(*bounds);
    meta["stop_reason"] = to_string(tr.stop_reason);
    meta["final"] = {{"t", tr.final_t()}, {"m", tr.final_m()}, {"steps", tr.samples.size() - 1}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : tr.grid_history)
        hist.push_back({{"t", e.t}, {"m", e.m}, {"h_min_old", e.h_min_old}, {"h_min_new", e.h_min_new}, {"nodes", e.nodes}});
    meta["grid_history"] = hist;
    meta["snapshots"] = snaps;
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
}

struct LoadedTrace {
    Trace trace;
    std::optional<BoundParams> bounds;
    nlohmann::json meta;
};

inline LoadedTrace read_trace(const fs::path& dir)
{
    LoadedTrace out;
    {
        std::ifstream in(dir / "meta.json");
        if (!in) throw IoError("trace directory " + dir.string() + " has no meta.json");
        try {
            out.meta = nlohmann::json::parse(in);
            out.trace.config = solver_config_from_json(out.meta.at("solver"));
            if (out.meta.contains("bounds")) out.bounds = bound_params_from_json(out.meta.at("bounds"));
        } catch (const nlohmann::json::exception& e) {
            throw IoError((dir / "meta.json").string() + ": " + e.what());
        }
    }
    const std::string stop = out.meta.value("stop_reason", "");
    if (stop == "m_stop_reached") out.trace.stop_reason = StopReason::MStopReached;
    else if (stop == "t_max_reached") out.trace.stop_reason = StopReason::TMaxReached;
    else if (stop == "step_underflow") out.trace.stop_reason = StopReason::StepUnderflow;
    else throw IoError("meta.json: unknown stop_reason '" + stop + "'");
    for (const auto& e : out.meta.at("grid_history")) {
        out.trace.grid_history.push_back({e.at("t").get<double>(), e.at("m").get<double>(), e.at("h_min_old").get<double>(),
                                          e.at("h_min_new").get<double>(), e.at("nodes").get<std::size_t>()});
    }

    for (const auto& row : read_csv(dir / "samples.csv", {"t", "m", "dt"}))
        out.trace.samples.push_back({row[0], row[1], row[2]});
    if (out.trace.samples.empty()) throw IoError(dir.string() + ": samples.csv holds no rows");

    // snapshots sharing a node vector share one grid object
    const auto& cfg = out.trace.config;
    std::map<std::vector<double>, GridPtr> grids;
    for (auto& raw : read_snapshot_container(dir / "snapshots.bin")) {
        auto it = grids.find(raw.r);
        if (it == grids.end()) {
            auto g = std::make_shared<RadialGrid>();
            g->n = cfg.n;
            g->R = cfg.R;
            g->truncated = cfg.domain == DomainKind::TruncatedWholeSpace;
            g->grading = cfg.grading;
            g->grading.h_min = raw.r.size() > 1 ? raw.r[1] : cfg.grading.h_min;
            g->nodes = raw.r;
            it = grids.emplace(raw.r, std::move(g)).first;
        }
        out.trace.snapshots.push_back(Snapshot{Field{it->second, std::move(raw.u), raw.t}, raw.t, raw.m, raw.dt_used});
    }
    return out;
}

} // namespace blowuplab
