#pragma once

// Experiment files: INI sections [solver] [initial] [bounds] [checks] [tolerances] [output],
// or the same tree as a JSON object. Unknown sections and keys are rejected.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/json_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "blowuplab/bounds.hpp"
#include "blowuplab/errors.hpp"
#include "blowuplab/integrate.hpp"
#include "blowuplab/persist.hpp"
#include "blowuplab/verify.hpp"

namespace blowuplab {

namespace pt = boost::property_tree;

inline const std::vector<std::string>& known_checks()
{
    static const std::vector<std::string> names{"eta_lower_bound", "final_profile", "global_estimate",
                                                "hopf",            "integr0",       "j_nonpositive",
                                                "lemma_suite",     "phi_variants",  "refined_profile"};
    return names;
}

inline double default_tolerance(const std::string& check)
{
    if (check == "lemma_suite") return default_sweep_tolerance;
    if (check == "hopf" || check == "eta_lower_bound") return strict_tolerance;
    return default_trace_tolerance;
}

struct CheckOptions {
    double K = 4.0;             // refined profile ξ range
    double rho = 0.1;           // final profile outer radius
    double err_threshold = 0.05; // final profile convergence threshold
    double window = 5.0;        // blowup-time fit window in m
    std::vector<double> A_scan = default_A_scan();
};

struct ExperimentSpec {
    SolverConfig solver;
    BoundParams bounds;
    std::vector<std::string> checks;       // enabled, sorted
    std::map<std::string, double> tolerances;
    CheckOptions options;
    fs::path output_dir = "out";
    pt::ptree tree;        // parsed source, used for sweep overrides
    std::string source_id; // hash of the parsed tree, for report provenance

    double tolerance(const std::string& check) const
    {
        auto it = tolerances.find(check);
        return it == tolerances.end() ? default_tolerance(check) : it->second;
    }
};

namespace detail {

inline double parse_real(const std::string& field, const std::string& text)
{
    const std::string s = boost::algorithm::trim_copy(text);
    if (s == "e") return std::numbers::e;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError(field + ": '" + text + "' is not a number");
    return v;
}

inline long long parse_integer(const std::string& field, const std::string& text)
{
    const double v = parse_real(field, text);
    if (v != std::floor(v) || std::abs(v) > 1e15) throw ConfigError(field + ": '" + text + "' is not an integer");
    return static_cast<long long>(v);
}

inline std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        boost::algorithm::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Scalar or list value; JSON arrays arrive as children with empty keys.
inline std::vector<std::string> list_value(const pt::ptree& node)
{
    if (!node.empty()) {
        std::vector<std::string> out;
        for (const auto& [k, child] : node) out.push_back(child.data());
        return out;
    }
    return split_list(node.data());
}

class Section {
public:
    Section(const pt::ptree* node, std::string name) : node_(node), name_(std::move(name)) {}

    std::optional<std::string> text(const std::string& key)
    {
        seen_.insert(key);
        if (!node_) return std::nullopt;
        auto c = node_->get_child_optional(pt::ptree::path_type(key, '\0'));
        if (!c) return std::nullopt;
        return c->data();
    }

    const pt::ptree* child(const std::string& key)
    {
        seen_.insert(key);
        if (!node_) return nullptr;
        auto c = node_->get_child_optional(pt::ptree::path_type(key, '\0'));
        return c ? &*c : nullptr;
    }

    std::string field(const std::string& key) const { return name_ + "." + key; }

    void real(const std::string& key, double& out)
    {
        if (auto t = text(key)) out = parse_real(field(key), *t);
    }

    template <class Int>
    void integer(const std::string& key, Int& out)
    {
        if (auto t = text(key)) {
            const auto v = parse_integer(field(key), *t);
            if (v < 0 && std::is_unsigned_v<Int>) throw ConfigError(field(key) + ": must be nonnegative");
            out = static_cast<Int>(v);
        }
    }

    void reject_unknown(const std::set<std::string>& free_keys = {}) const
    {
        if (!node_) return;
        for (const auto& [k, v] : *node_) {
            if (!seen_.count(k) && !free_keys.count(k)) throw ConfigError(field(k) + ": unknown key");
        }
    }

private:
    const pt::ptree* node_;
    std::string name_;
    std::set<std::string> seen_;
};

inline std::string canonical_text(const pt::ptree& tree)
{
    std::ostringstream os;
    pt::write_json(os, tree, false);
    return os.str();
}

} // namespace detail

/// Builds the experiment from an already parsed tree (the form sweep overrides act on).
inline ExperimentSpec spec_from_tree(const pt::ptree& tree)
{
    static const std::set<std::string> sections{"solver", "initial", "bounds", "checks", "tolerances", "output"};
    for (const auto& [k, v] : tree)
        if (!sections.count(k)) throw ConfigError(k + ": unknown section");
    auto section = [&](const char* name) {
        auto c = tree.get_child_optional(name);
        return detail::Section(c ? &*c : nullptr, name);
    };

    ExperimentSpec spec;
    spec.tree = tree;
    spec.source_id = std::to_string(std::hash<std::string>{}(detail::canonical_text(tree)));

    auto& c = spec.solver;
    {
        auto s = section("solver");
        s.integer("n", c.n);
        if (auto t = s.text("domain")) c.domain = domain_from_string(*t);
        s.real("R", c.R);
        if (auto t = s.text("boundary")) c.boundary = boundary_from_string(*t);
        if (auto t = s.text("reaction")) c.reaction = reaction_from_string(*t);
        s.real("delta_m", c.delta_m);
        s.real("m_stop", c.m_stop);
        s.real("t_max", c.t_max);
        s.real("h_min", c.grading.h_min);
        s.real("q", c.grading.q);
        s.real("h_cap", c.grading.h_cap);
        s.integer("N_cap", c.grading.N_cap);
        s.integer("regrid_trigger", c.regrid_trigger);
        if (const auto* node = s.child("snapshots")) {
            c.snapshot_schedule.clear();
            for (const auto& item : detail::list_value(*node))
                c.snapshot_schedule.push_back(detail::parse_real(s.field("snapshots"), item));
        }
        if (auto t = s.text("fixed_dt")) c.fixed_dt = detail::parse_real(s.field("fixed_dt"), *t);
        s.real("dt_min", c.dt_min);
        s.real("dt_cap", c.dt_cap);
        s.reject_unknown();
    }
    {
        auto s = section("initial");
        if (auto t = s.text("family")) c.u0.family = family_from_string(*t);
        s.real("a", c.u0.a);
        s.real("width", c.u0.width);
        s.reject_unknown();
    }
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }

    {
        auto s = section("bounds");
        double A = 3.0;
        s.real("A", A);
        PhiVariant variant = PhiVariant::LogRefined;
        if (auto t = s.text("variant")) {
            try {
                variant = phi_variant_from_string(*t);
            } catch (const Error& e) {
                throw ConfigError(s.field("variant") + ": " + e.what());
            }
        }
        // ParameterError propagates as is: it reports an invalid bound family, not a malformed file
        spec.bounds = make_bound_params(A, variant);
        s.real("C_lemma", spec.bounds.C_lemma);
        s.real("C_global", spec.bounds.C_global);
        s.real("C_refined", spec.bounds.C_refined);
        s.real("s0", spec.bounds.s0);
        s.reject_unknown();
        spec.bounds.validate();
    }
    {
        auto s = section("checks");
        spec.checks = known_checks();
        if (const auto* node = s.child("enabled")) {
            auto names = detail::list_value(*node);
            if (!(names.size() == 1 && names[0] == "all")) {
                for (const auto& n : names) {
                    if (std::find(known_checks().begin(), known_checks().end(), n) == known_checks().end())
                        throw ConfigError(s.field("enabled") + ": unknown check '" + n + "'");
                }
                std::sort(names.begin(), names.end());
                names.erase(std::unique(names.begin(), names.end()), names.end());
                spec.checks = names;
            }
        }
        s.real("K", spec.options.K);
        s.real("rho", spec.options.rho);
        s.real("err_threshold", spec.options.err_threshold);
        s.real("window", spec.options.window);
        if (const auto* node = s.child("A_scan")) {
            spec.options.A_scan.clear();
            for (const auto& item : detail::list_value(*node))
                spec.options.A_scan.push_back(detail::parse_real(s.field("A_scan"), item));
        }
        s.reject_unknown();
    }
    {
        if (auto node = tree.get_child_optional("tolerances")) {
            for (const auto& [k, v] : *node) {
                if (std::find(known_checks().begin(), known_checks().end(), k) == known_checks().end())
                    throw ConfigError("tolerances." + k + ": unknown check");
                spec.tolerances[k] = detail::parse_real("tolerances." + k, v.data());
            }
        }
    }
    {
        auto s = section("output");
        if (auto t = s.text("dir")) spec.output_dir = *t;
        s.reject_unknown();
    }
    return spec;
}

inline pt::ptree read_tree(const fs::path& path)
{
    if (!fs::exists(path)) throw ConfigError(path.string() + ": no such file");
    pt::ptree tree;
    try {
        if (path.extension() == ".json") pt::read_json(path.string(), tree);
        else pt::read_ini(path.string(), tree);
    } catch (const pt::file_parser_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return tree;
}

inline ExperimentSpec load_spec(const fs::path& path)
{
    try {
        return spec_from_tree(read_tree(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// One sweep axis: a dotted key such as bounds.A and its values.
struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

/// [sweep] section: each key is a dotted spec key, each value a comma-separated list.
inline std::vector<SweepAxis> load_sweep(const fs::path& path)
{
    const auto tree = read_tree(path);
    std::vector<SweepAxis> axes;
    for (const auto& [k, v] : tree) {
        if (k != "sweep") throw ConfigError(path.string() + ": " + k + ": unknown section (expected [sweep])");
        for (const auto& [key, node] : v) {
            if (key.find('.') == std::string::npos)
                throw ConfigError(path.string() + ": sweep." + key + ": key must name section.key");
            auto values = detail::list_value(node);
            if (values.empty()) throw ConfigError(path.string() + ": sweep." + key + ": no values");
            axes.push_back({key, std::move(values)});
        }
    }
    if (axes.empty()) throw ConfigError(path.string() + ": [sweep] lists no axes");
    return axes;
}

} // namespace blowuplab
