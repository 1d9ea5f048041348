#pragma once

// Certification of the upper estimates against numerical traces: each check
// scans a region, fits the free constant and reports the worst violation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blowuplab/bounds.hpp"
#include "blowuplab/errors.hpp"
#include "blowuplab/integrate.hpp"
#include "blowuplab/mesh.hpp"

namespace blowuplab {

struct CheckRecord {
    std::string name;
    std::string region;
    double max_violation = 0.0; // positive: the bound failed by that margin
    std::optional<double> fitted_constant;
    std::size_t sample_count = 0;
    double tolerance = 0.0;
    bool pass = false;
    std::vector<std::pair<std::string, double>> details;
    std::string error; // set when the check could not run; pass is then false

    std::optional<double> detail(const std::string& key) const
    {
        for (const auto& [k, v] : details)
            if (k == key) return v;
        return std::nullopt;
    }
};

struct VerificationReport {
    std::vector<CheckRecord> records;
    std::vector<std::pair<std::string, std::string>> provenance;

    bool all_pass() const
    {
        return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
    }

    /// Records sorted by name so concurrent evaluation yields a canonical report.
    void canonicalize()
    {
        std::stable_sort(records.begin(), records.end(),
                         [](const auto& a, const auto& b) { return a.name < b.name; });
    }
};

inline constexpr double default_trace_tolerance = 1e-2;
inline constexpr double default_sweep_tolerance = 1e-10;

inline std::vector<double> default_A_scan()
{
    return {std::numbers::e, 3.0, 4.0, 6.0, 10.0, 20.0};
}

// strict-positivity checks (Hopf constant, η) fail at exactly zero
inline constexpr double strict_tolerance = -std::numeric_limits<double>::denorm_min();

namespace detail {

inline void finalize(CheckRecord& rec)
{
    rec.pass = std::isfinite(rec.max_violation) && rec.max_violation <= rec.tolerance;
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

struct Region {
    std::vector<const Snapshot*> snapshots;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double r_hi = 0.0;
    bool truncated = false;
    std::optional<double> T_est;
};

/// Late-time window [max(T_est/2, first snapshot), t_stop] and radii up to R/2.
inline Region select_region(const Trace& tr, double m_min)
{
    if (tr.snapshots.empty()) throw PreconditionError("trace holds no snapshots");
    Region reg;
    try {
        reg.T_est = estimate_blowup_time(tr).T_est;
    } catch (const Error&) {
        reg.T_est.reset();
    }
    reg.t_lo = tr.snapshots.front().t;
    if (reg.T_est) reg.t_lo = std::max(reg.t_lo, 0.5 * *reg.T_est);
    reg.t_hi = tr.snapshots.back().t;
    const auto& g = *tr.snapshots.back().field.grid;
    reg.r_hi = 0.5 * g.R;
    reg.truncated = g.truncated;
    for (const auto& s : tr.snapshots)
        if (s.t >= reg.t_lo && s.m >= m_min) reg.snapshots.push_back(&s);
    if (reg.snapshots.empty())
        throw PreconditionError("no snapshots with m >= " + fmt(m_min) + " in the late-time window");
    return reg;
}

inline std::string describe(const Region& reg, const std::string& radii)
{
    std::string s = radii + " x t in [" + fmt(reg.t_lo) + ", " + fmt(reg.t_hi) + "], " +
                    std::to_string(reg.snapshots.size()) + " snapshots";
    if (reg.truncated) s += " (R/2 of the truncation radius; whole-space region uses R = 1)";
    return s;
}

struct Extremum {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
};

/// Max of f(u, u_r, r) over nodes 0 < r <= r_hi of every region snapshot.
template <class F>
Extremum scan_max(const Region& reg, F&& f)
{
    Extremum e;
    for (const Snapshot* s : reg.snapshots) {
        const auto& g = *s->field.grid;
        const auto ur = radial_derivative(g, s->field.values);
        for (std::size_t i = 1; i < g.size() && g.nodes[i] <= reg.r_hi; ++i) {
            e.value = std::max(e.value, f(s->field.values[i], ur[i], g.nodes[i], *s));
            ++e.count;
        }
    }
    return e;
}

/// Smallest A making J <= 0 at a node, for the closed-form variants.
inline double required_A(double u, double u_r, double r, PhiVariant variant)
{
    if (!(u_r < 0.0)) return std::numeric_limits<double>::infinity();
    const double X = r * std::exp(u) / (-2.0 * u_r); // need 1/φ(u) >= X
    if (variant == PhiVariant::Simple) return X - u;
    if (variant != PhiVariant::LogRefined) return std::numeric_limits<double>::quiet_NaN();
    if (X <= 1.0) return 1.0 - u;
    // z - log z = X on z >= 1
    double z = X + std::log(X);
    for (int it = 0; it < 50; ++it) {
        const double dz = (z - std::log(z) - X) / (1.0 - 1.0 / z);
        z -= dz;
        if (std::abs(dz) <= 1e-15 * z) break;
    }
    return z - u;
}

inline BoundParams with_A(const BoundParams& p, double A)
{
    if (p.variant == PhiVariant::OdeOptimal && A == p.A) return p;
    BoundParams q = make_bound_params(A, p.variant);
    q.C_global = p.C_global;
    q.C_refined = p.C_refined;
    q.s0 = p.s0;
    return q;
}

template <class Eval>
CheckRecord sign_check(const std::string& name, const Trace& tr, const BoundParams& p, double tol,
                       const std::vector<double>& A_scan, Eval&& eval)
{
    p.validate();
    const auto reg = select_region(tr, 10.0);
    CheckRecord rec;
    rec.name = name;
    rec.region = describe(reg, "r in (0, " + fmt(reg.r_hi) + "]");
    rec.tolerance = tol;
    const auto ext = scan_max(reg, [&](double u, double ur, double r, const Snapshot&) {
        return eval(u, ur, r, p);
    });
    if (ext.count == 0) throw PreconditionError(name + ": no grid nodes in the region");
    rec.max_violation = ext.value;
    rec.sample_count = ext.count;
    for (double A : A_scan) {
        if (A < BoundParams::min_A(p.variant)) continue;
        const auto pa = with_A(p, A);
        const auto e = scan_max(reg, [&](double u, double ur, double r, const Snapshot&) {
            return eval(u, ur, r, pa);
        });
        rec.details.emplace_back("max_at_A=" + fmt(A), e.value);
        if (!rec.fitted_constant && e.value <= tol) rec.fitted_constant = A;
    }
    const auto need = scan_max(reg, [&](double u, double ur, double r, const Snapshot&) {
        return required_A(u, ur, r, p.variant);
    });
    rec.details.emplace_back("A_required", need.value);
    finalize(rec);
    return rec;
}

} // namespace detail

/// max of J = u_r + r e^u φ(u)/2 over (0, R/2] x late times; fitted constant is the smallest passing A of the scan.
inline CheckRecord check_j_nonpositive(const Trace& tr, const BoundParams& p,
                                       double tol = default_trace_tolerance,
                                       const std::vector<double>& A_scan = default_A_scan())
{
    return detail::sign_check("j_nonpositive", tr, p, tol, A_scan,
                              [](double u, double ur, double r, const BoundParams& q) {
                                  return j_value(u, ur, r, q);
                              });
}

/// max of r/2 + e^{-u}(A + u - log(A + u)) u_r, the integrated form of J <= 0.
inline CheckRecord check_integr0(const Trace& tr, const BoundParams& p, double tol = default_trace_tolerance,
                                 const std::vector<double>& A_scan = default_A_scan())
{
    auto rec = detail::sign_check("integr0", tr, p, tol, A_scan,
                                  [](double u, double ur, double r, const BoundParams& q) {
                                      return integr0_residual(u, ur, r, q);
                                  });
    // the two forms differ by a positive factor; count nodes where the signs disagree
    const auto reg = detail::select_region(tr, 10.0);
    double disagreements = 0.0;
    for (const Snapshot* s : reg.snapshots) {
        const auto& g = *s->field.grid;
        const auto ur = radial_derivative(g, s->field.values);
        for (std::size_t i = 1; i < g.size() && g.nodes[i] <= reg.r_hi; ++i) {
            const double j = j_value(s->field.values[i], ur[i], g.nodes[i], p);
            const double w = integr0_residual(s->field.values[i], ur[i], g.nodes[i], p);
            if ((j > 0.0) != (w > 0.0)) disagreements += 1.0;
        }
    }
    rec.details.emplace_back("sign_disagreements", disagreements);
    return rec;
}

/// Largest k with u_r <= -k r on (0, R/2] x late times.
inline CheckRecord check_hopf(const Trace& tr)
{
    const auto reg = detail::select_region(tr, 10.0);
    CheckRecord rec;
    rec.name = "hopf";
    rec.region = detail::describe(reg, "r in (0, " + detail::fmt(reg.r_hi) + "]");
    rec.tolerance = strict_tolerance;
    const auto ext = detail::scan_max(reg, [](double, double ur, double r, const Snapshot&) {
        return ur / r; // = -(-u_r / r)
    });
    if (ext.count == 0) throw PreconditionError("hopf: no grid nodes in the region");
    rec.fitted_constant = -ext.value;
    rec.max_violation = ext.value;
    rec.sample_count = ext.count;
    detail::finalize(rec);
    return rec;
}

/// η = min u on [0, R/2] x late times, with an optional radius fraction for the boundary illustration.
inline CheckRecord check_eta_lower_bound(const Trace& tr, double radius_fraction = 0.5)
{
    auto reg = detail::select_region(tr, 10.0);
    reg.r_hi = radius_fraction * tr.snapshots.back().field.grid->R;
    CheckRecord rec;
    rec.name = "eta_lower_bound";
    rec.region = detail::describe(reg, "r in [0, " + detail::fmt(reg.r_hi) + "]");
    rec.tolerance = strict_tolerance;
    double eta = std::numeric_limits<double>::infinity();
    for (const Snapshot* s : reg.snapshots) {
        const auto& g = *s->field.grid;
        for (std::size_t i = 0; i < g.size() && g.nodes[i] <= reg.r_hi; ++i) {
            eta = std::min(eta, s->field.values[i]);
            ++rec.sample_count;
        }
    }
    rec.fitted_constant = eta;
    rec.max_violation = -eta;
    detail::finalize(rec);
    return rec;
}

namespace detail {

/// Minimal C >= 0 with u <= main + C shape over the global-estimate region.
struct LinearFit {
    double C = 0.0;
    double residual = -std::numeric_limits<double>::infinity(); // max(u - main - C shape)
    double max_cfree = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
};

template <class Shape>
LinearFit fit_global(const Region& reg, double rho, Shape&& shape)
{
    LinearFit fit;
    struct Node {
        double defect, shape;
    };
    std::vector<Node> nodes;
    for (const Snapshot* s : reg.snapshots) {
        const auto& g = *s->field.grid;
        for (std::size_t i = 0; i < g.size() && g.nodes[i] <= rho; ++i) {
            const double r = g.nodes[i];
            const double d = s->field.values[i] - global_bound_main(r, s->m);
            const double w = shape(r, s->m);
            nodes.push_back({d, w});
            fit.max_cfree = std::max(fit.max_cfree, d);
            fit.C = std::max(fit.C, d / w);
        }
    }
    fit.count = nodes.size();
    for (const auto& n : nodes) fit.residual = std::max(fit.residual, n.defect - fit.C * n.shape);
    return fit;
}

inline double global_rho(const Region& reg, const BoundParams& p)
{
    const double m = reg.snapshots.back()->m;
    const double room = p.s0 - m * std::exp(-m);
    if (!(room > 0.0)) return 0.0;
    return 2.0 * std::sqrt(room);
}

} // namespace detail

/// Minimal C_global with u <= log(|log q|/q) + C (1/|log q| + log m/(m + e^m r²/4)) for q < s0.
inline CheckRecord check_global_estimate(const Trace& tr, const BoundParams& p,
                                         double tol = default_trace_tolerance)
{
    p.validate();
    const auto reg = detail::select_region(tr, 15.0);
    const double rho = detail::global_rho(reg, p);
    const auto fit = detail::fit_global(reg, rho, global_remainder_shape);
    if (fit.count == 0) throw PreconditionError("global_estimate: region is empty");
    CheckRecord rec;
    rec.name = "global_estimate";
    rec.region = detail::describe(reg, "r in [0, " + detail::fmt(rho) + "] (q < s0)");
    rec.tolerance = tol;
    rec.fitted_constant = fit.C;
    rec.max_violation = fit.residual;
    rec.sample_count = fit.count;
    rec.details.emplace_back("rho", rho);
    rec.details.emplace_back("max_cfree_defect", fit.max_cfree);
    const auto& last = *reg.snapshots.back();
    rec.details.emplace_back("cfree_defect_r0_final", last.m - global_bound_main(0.0, last.m));
    double at_configured = -std::numeric_limits<double>::infinity();
    for (const Snapshot* s : reg.snapshots) {
        const auto& g = *s->field.grid;
        for (std::size_t i = 0; i < g.size() && g.nodes[i] <= rho; ++i)
            at_configured = std::max(at_configured, s->field.values[i] - global_bound(g.nodes[i], s->m, p));
    }
    rec.details.emplace_back("violation_at_configured_C", at_configured);
    detail::finalize(rec);
    return rec;
}

/// Refined profile: defect u(ξ sqrt(m e^{-m})) - (m - log(1 + ξ²/4)) against C log m / m on ξ in [0, K].
inline CheckRecord check_refined_profile(const Trace& tr, double K = 4.0, double tol = default_trace_tolerance,
                                         std::size_t xi_points = 41)
{
    if (!(K > 0.0)) throw DomainError("K must be positive");
    const auto reg = detail::select_region(tr, 15.0);
    CheckRecord rec;
    rec.name = "refined_profile";
    rec.region = detail::describe(reg, "xi in [0, " + detail::fmt(K) + "]");
    rec.tolerance = tol;

    struct Sample {
        double m, defect;
    };
    std::vector<Sample> samples;
    std::vector<double> sharp_xi0; // m + log(T - t), the ξ = 0 value in (T - t) scaling
    double literal_xi0 = 0.0;
    std::size_t xi_increases = 0;
    for (const Snapshot* s : reg.snapshots) {
        const double ell = core_scale(s->m);
        const auto& g = *s->field.grid;
        if (g.count_within(K * ell) < 16) {
            throw ResolutionError("refined_profile: fewer than 16 nodes inside r <= K sqrt(m e^{-m}) at m = " +
                                  detail::fmt(s->m));
        }
        const FieldInterpolant u(s->field);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < xi_points; ++k) {
            const double xi = K * static_cast<double>(k) / static_cast<double>(xi_points - 1);
            const double d = u(xi * ell) - (s->m - std::log1p(0.25 * xi * xi));
            samples.push_back({s->m, d});
            if (k == 0) literal_xi0 = std::max(literal_xi0, std::abs(d));
            if (d > prev) ++xi_increases;
            prev = d;
        }
        if (reg.T_est && *reg.T_est > s->t) sharp_xi0.push_back(s->m + std::log(*reg.T_est - s->t));
    }

    double C = 0.0;
    std::vector<double> ratio;
    for (const auto& smp : samples) {
        const double scaled = smp.defect * smp.m / std::log(smp.m);
        C = std::max(C, scaled);
        ratio.push_back(std::abs(scaled));
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& smp : samples) worst = std::max(worst, smp.defect - C * std::log(smp.m) / smp.m);
    const double ratio_max = *std::max_element(ratio.begin(), ratio.end());
    std::nth_element(ratio.begin(), ratio.begin() + ratio.size() / 2, ratio.end());
    const double ratio_median = ratio[ratio.size() / 2];

    rec.fitted_constant = C;
    rec.max_violation = worst;
    rec.sample_count = samples.size();
    rec.details.emplace_back("scaled_defect_max_abs", ratio_max);
    rec.details.emplace_back("scaled_defect_median_abs", ratio_median);
    rec.details.emplace_back("xi0_defect_max_abs", literal_xi0);
    rec.details.emplace_back("xi_increase_count", static_cast<double>(xi_increases));
    if (!sharp_xi0.empty()) {
        rec.details.emplace_back("xi0_sharp_defect_first", sharp_xi0.front());
        rec.details.emplace_back("xi0_sharp_defect_last", sharp_xi0.back());
    }
    detail::finalize(rec);
    return rec;
}

/// Final profile: minimal C with u_T + err <= 2|log r| + log|log r| + log 8 + C/|log r| on [r_floor, rho].
inline CheckRecord check_final_profile(const FinalProfile& profile, double rho = 0.1,
                                       double tol = default_trace_tolerance)
{
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("final profile radius must lie in (0, 1)");
    if (profile.r.empty()) throw PreconditionError("final_profile: empty profile");
    if (!(rho >= 10.0 * profile.r_floor)) {
        throw PreconditionError("final_profile: range [" + detail::fmt(profile.r_floor) + ", " +
                                detail::fmt(rho) + "] is shorter than one decade");
    }
    CheckRecord rec;
    rec.name = "final_profile";
    rec.region = "r in [" + detail::fmt(profile.r_floor) + ", " + detail::fmt(rho) + "] at t = " +
                 detail::fmt(profile.t_stop) + " (T_est = " + detail::fmt(profile.T_est) + ")";
    rec.tolerance = tol;
    const double log8 = std::log(8.0);
    double C = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < profile.r.size(); ++i) {
        const double r = profile.r[i];
        if (r > rho) break;
        const double L = -std::log(r);
        const double defect = profile.u[i] - 2.0 * L - std::log(L) - log8;
        C = std::max(C, (defect + profile.err[i]) * L);
        lo = std::min(lo, defect * L);
        hi = std::max(hi, defect * L);
        idx.push_back(i);
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i : idx) {
        worst = std::max(worst, profile.u[i] + profile.err[i] - final_profile_bound(profile.r[i], C));
    }
    rec.fitted_constant = C;
    rec.max_violation = worst;
    rec.sample_count = idx.size();
    rec.details.emplace_back("r_floor", profile.r_floor);
    rec.details.emplace_back("rho", rho);
    rec.details.emplace_back("decades", std::log10(rho / profile.r_floor));
    rec.details.emplace_back("scaled_defect_min", lo);
    rec.details.emplace_back("scaled_defect_max", hi);
    detail::finalize(rec);
    return rec;
}

/// Lemma sweeps over the pure closed forms: (a) bijection, (b) inversion H(G(u)) >= u,
/// (c) residual rate u (H(G(u)) - u) -> C_lemma - (A + 1), (d) validity threshold s0.
inline std::vector<CheckRecord> check_lemma_suite(const BoundParams& p, double tol = default_sweep_tolerance)
{
    std::vector<CheckRecord> out;
    const double D = g_sup(p);
    const double B = p.A + 1.0;

    {
        CheckRecord rec;
        rec.name = "lemma_bijection";
        rec.region = "u in [0, 300] step 0.01; round trip on [0, 100]";
        rec.tolerance = tol;
        double worst_increase = -std::numeric_limits<double>::infinity();
        double prev = g_value(0.0, p);
        for (int i = 1; i <= 30000; ++i) {
            const double g = g_value(0.01 * i, p);
            worst_increase = std::max(worst_increase, g - prev);
            prev = g;
        }
        double roundtrip = 0.0;
        for (int i = 0; i <= 10000; ++i) {
            const double u = 0.01 * i;
            const double s = g_value(u, p);
            if (s >= D) continue;
            roundtrip = std::max(roundtrip, std::abs(g_inverse(s, p) - u) / std::max(u, 1.0));
        }
        const double g0 = std::abs(g_value(0.0, p) - D);
        rec.fitted_constant = D;
        rec.max_violation = std::max({worst_increase, roundtrip - 1e-12, g0});
        rec.sample_count = 40001;
        rec.details.emplace_back("max_increment", worst_increase);
        rec.details.emplace_back("roundtrip_rel_error", roundtrip);
        rec.details.emplace_back("G0_minus_D", g0);
        detail::finalize(rec);
        out.push_back(rec);
    }

    // H(G(u)) - u on u in [0, 200] step 0.01 where G(u) < 1/2
    std::vector<std::pair<double, double>> residual;
    for (int i = 0; i <= 20000; ++i) {
        const double u = 0.01 * i;
        const double s = g_value(u, p);
        if (s >= 0.5) continue;
        residual.emplace_back(u, h_value(s, p).value - u);
    }
    {
        CheckRecord rec;
        rec.name = "lemma_inversion";
        rec.tolerance = tol;
        // u*: start of the trailing run with H(G(u)) >= u
        std::optional<double> u_star;
        for (std::size_t k = residual.size(); k-- > 0;) {
            if (residual[k].second < 0.0) break;
            u_star = residual[k].first;
        }
        const double u_tail = g_inverse(p.s0, p);
        double worst = -std::numeric_limits<double>::infinity();
        std::size_t count = 0;
        for (const auto& [u, res] : residual) {
            if (u < u_tail) continue;
            worst = std::max(worst, -res);
            ++count;
        }
        rec.region = "u in [G^-1(s0) = " + detail::fmt(u_tail) + ", 200] step 0.01, C = " + detail::fmt(p.C_lemma);
        rec.fitted_constant = u_star;
        rec.max_violation = worst;
        rec.sample_count = count;
        rec.details.emplace_back("u_star", u_star.value_or(std::numeric_limits<double>::quiet_NaN()));
        rec.details.emplace_back("u_tail", u_tail);
        detail::finalize(rec);
        out.push_back(rec);
    }
    {
        CheckRecord rec;
        rec.name = "lemma_residual_rate";
        rec.region = "u in [20, 200] step 0.01";
        const double lead = p.C_lemma - B;
        rec.tolerance = 0.1 * std::max(std::abs(lead), 1.0);
        double sup = 0.0;
        double at_end = 0.0;
        std::size_t count = 0;
        for (const auto& [u, res] : residual) {
            if (u < 20.0) continue;
            sup = std::max(sup, std::abs(u * res));
            at_end = u * res;
            ++count;
        }
        rec.fitted_constant = at_end;
        rec.max_violation = std::abs(at_end - lead);
        rec.sample_count = count;
        rec.details.emplace_back("leading_coefficient", lead);
        rec.details.emplace_back("scaled_residual_sup", sup);
        detail::finalize(rec);
        out.push_back(rec);
    }
    {
        CheckRecord rec;
        rec.name = "lemma_s0";
        rec.tolerance = 0.0;
        // log grid from G(300) up to 1/2; s0 is the last point before the first failure
        const double s_min = g_value(300.0, p);
        const int points = 4000;
        double s_found = 0.0;
        std::size_t count = 0;
        for (int k = 0; k < points; ++k) {
            const double s = std::exp(std::log(s_min) + (std::log(0.5) - std::log(s_min)) * k / points);
            ++count;
            if (s >= D) break;
            if (g_inverse(s, p) > h_value(s, p).value) break;
            s_found = s;
        }
        rec.region = "s on a log grid of [G(300), 1/2), " + std::to_string(points) + " points";
        rec.fitted_constant = s_found;
        rec.max_violation = p.s0 - s_found; // the configured s0 must lie inside the valid range
        rec.sample_count = count;
        detail::finalize(rec);
        out.push_back(rec);
    }
    return out;
}

/// Side-by-side remainder fits of the three φ choices: log_refined and ode_optimal share the
/// 1/|log q| remainder, simple uses log|log q| / |log q|; also the smallest passing A per variant.
inline CheckRecord check_phi_variants(const Trace& tr, const BoundParams& p, double tol = default_trace_tolerance,
                                      const std::vector<double>& A_scan = default_A_scan())
{
    const auto reg = detail::select_region(tr, 15.0);
    const double rho = detail::global_rho(reg, p);
    const auto log_fit = detail::fit_global(reg, rho, global_remainder_shape);
    const auto simple_fit = detail::fit_global(reg, rho, simple_remainder_shape);
    if (log_fit.count == 0) throw PreconditionError("phi_variants: region is empty");

    CheckRecord rec;
    rec.name = "phi_variants";
    rec.region = detail::describe(reg, "r in [0, " + detail::fmt(rho) + "]");
    rec.tolerance = tol;
    rec.fitted_constant = log_fit.C;
    rec.max_violation = std::max(log_fit.residual, simple_fit.residual);
    rec.sample_count = log_fit.count;
    rec.details.emplace_back("C_log_refined", log_fit.C);
    rec.details.emplace_back("C_ode_optimal", log_fit.C);
    rec.details.emplace_back("C_simple", simple_fit.C);
    for (PhiVariant v : {PhiVariant::LogRefined, PhiVariant::Simple, PhiVariant::OdeOptimal}) {
        std::optional<double> A_fit;
        for (double A : A_scan) {
            if (A < BoundParams::min_A(v) || (v == PhiVariant::OdeOptimal && A <= 1.0)) continue;
            const auto pa = make_bound_params(A, v);
            const auto e = detail::scan_max(detail::select_region(tr, 10.0),
                                            [&](double u, double ur, double r, const Snapshot&) {
                                                return j_value(u, ur, r, pa);
                                            });
            if (e.value <= tol) {
                A_fit = A;
                break;
            }
        }
        rec.details.emplace_back("A_fit_" + std::string(to_string(v)),
                                 A_fit.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    detail::finalize(rec);
    return rec;
}

/// Folds several records into one: violations are taken relative to each part's tolerance.
inline CheckRecord fold_records(const std::string& name, const std::vector<CheckRecord>& parts)
{
    CheckRecord rec;
    rec.name = name;
    rec.region = "closed-form sweeps";
    rec.pass = true;
    rec.max_violation = -std::numeric_limits<double>::infinity();
    rec.tolerance = 0.0;
    for (const auto& p : parts) {
        rec.pass = rec.pass && p.pass;
        rec.max_violation = std::max(rec.max_violation, p.max_violation - p.tolerance);
        rec.sample_count += p.sample_count;
        rec.details.emplace_back(p.name + ".max_violation", p.max_violation);
        rec.details.emplace_back(p.name + ".tolerance", p.tolerance);
        if (p.fitted_constant) rec.details.emplace_back(p.name + ".fitted", *p.fitted_constant);
        rec.details.emplace_back(p.name + ".pass", p.pass ? 1.0 : 0.0);
    }
    rec.pass = rec.pass && std::isfinite(rec.max_violation) && rec.max_violation <= rec.tolerance;
    return rec;
}

inline nlohmann::json to_json(const CheckRecord& r)
{
    nlohmann::json j;
    j["name"] = r.name;
    j["region"] = r.region;
    j["max_violation"] = r.max_violation;
    j["fitted_constant"] = r.fitted_constant ? nlohmann::json(*r.fitted_constant) : nlohmann::json();
    j["sample_count"] = r.sample_count;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    if (!r.error.empty()) j["error"] = r.error;
    nlohmann::json d = nlohmann::json::object();
    for (const auto& [k, v] : r.details) d[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
    j["details"] = d;
    return j;
}

inline nlohmann::json to_json(const VerificationReport& rep)
{
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : rep.records) j["records"].push_back(to_json(r));
    nlohmann::json prov = nlohmann::json::object();
    for (const auto& [k, v] : rep.provenance) prov[k] = v;
    j["provenance"] = prov;
    j["all_pass"] = rep.all_pass();
    return j;
}

inline std::string to_text(const VerificationReport& rep)
{
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %-6s %14s %14s %12s %10s\n", "check", "result", "max_violation",
                  "fitted", "tolerance", "samples");
    os << line;
    for (const auto& r : rep.records) {
        std::snprintf(line, sizeof line, "%-20s %-6s %14.6g %14s %12.3g %10zu\n", r.name.c_str(),
                      r.pass ? "PASS" : "FAIL", r.max_violation,
                      r.fitted_constant ? detail::fmt(*r.fitted_constant).c_str() : "-", r.tolerance,
                      r.sample_count);
        os << line;
    }
    for (const auto& [k, v] : rep.provenance) os << k << ": " << v << '\n';
    return os.str();
}

} // namespace blowuplab
