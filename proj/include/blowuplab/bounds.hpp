#pragma once

// Closed-form functions and inequalities of the upper blowup estimates for
// u_t - Δu = e^u, evaluated independently of any discretization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "blowuplab/errors.hpp"

namespace blowuplab {

/// Choice of the weight function φ inside the auxiliary functional J.
enum class PhiVariant {
    LogRefined, ///< 1 / (A + s - log(A + s))
    Simple,     ///< 1 / (A + s)
    OdeOptimal  ///< solution of φ' = -φ² / (1 + φ), φ(0) = 1/(A - log A)
};

inline std::string_view to_string(PhiVariant v)
{
    switch (v) {
    case PhiVariant::LogRefined: return "log_refined";
    case PhiVariant::Simple: return "simple";
    case PhiVariant::OdeOptimal: return "ode_optimal";
    }
    return "unknown";
}

inline PhiVariant phi_variant_from_string(std::string_view name)
{
    if (name == "log_refined") return PhiVariant::LogRefined;
    if (name == "simple") return PhiVariant::Simple;
    if (name == "ode_optimal") return PhiVariant::OdeOptimal;
    throw ParameterError("unknown phi variant '" + std::string(name) + "'");
}

namespace detail {

// ψ = 1/φ for the OdeOptimal variant satisfies ψ' = ψ / (1 + ψ).
// Checkpoints every `stride` steps of RK4 at `step`; evaluation resumes the
// same RK4 walk from the nearest checkpoint below s.
class PsiTable {
public:
    static constexpr double step = 1e-4;
    static constexpr int stride = 100;
    static constexpr double table_end = 256.0;
    // past the table ψ'' ~ ψ^-2, so RK4 with a unit step is still exact to rounding
    static constexpr double far_step = 1.0;

    explicit PsiTable(double psi0)
    {
        const auto count = static_cast<std::size_t>(table_end / (step * stride)) + 1;
        checkpoints_.reserve(count);
        double psi = psi0;
        checkpoints_.push_back(psi);
        for (std::size_t k = 1; k < count; ++k) {
            for (int j = 0; j < stride; ++j) psi = rk4(psi, step);
            checkpoints_.push_back(psi);
        }
    }

    double operator()(double s) const
    {
        const double span = step * stride;
        const double last_s = span * static_cast<double>(checkpoints_.size() - 1);
        if (s >= last_s) {
            double psi = checkpoints_.back();
            double at = last_s;
            while (at < s) {
                const double h = std::min(far_step, s - at);
                psi = rk4(psi, h);
                at += h;
            }
            return psi;
        }
        const auto k = static_cast<std::size_t>(s / span);
        double psi = checkpoints_[k];
        double at = span * static_cast<double>(k);
        while (s - at > step) {
            psi = rk4(psi, step);
            at += step;
        }
        if (s > at) psi = rk4(psi, s - at);
        return psi;
    }

    static double rhs(double psi) { return psi / (1.0 + psi); }

    static double rk4(double psi, double h)
    {
        const double k1 = rhs(psi);
        const double k2 = rhs(psi + 0.5 * h * k1);
        const double k3 = rhs(psi + 0.5 * h * k2);
        const double k4 = rhs(psi + h * k3);
        return psi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

private:
    std::vector<double> checkpoints_;
};

} // namespace detail

/// Constants parameterizing every closed-form bound.
struct BoundParams {
    double A = 3.0;
    double C_lemma = 8.0;  // 2(A + 1)
    double C_global = 1.0;
    double C_refined = 1.0;
    double s0 = 1e-3;
    PhiVariant variant = PhiVariant::LogRefined;
    std::shared_ptr<const detail::PsiTable> psi_table; // OdeOptimal only

    /// Smallest admissible A for the variant.
    static double min_A(PhiVariant v)
    {
        switch (v) {
        case PhiVariant::LogRefined: return std::numbers::e;
        case PhiVariant::Simple: return 1.0;
        case PhiVariant::OdeOptimal: return 1.0;
        }
        return 1.0;
    }

    void validate() const
    {
        if (!std::isfinite(A) || A < min_A(variant) ||
            (variant == PhiVariant::OdeOptimal && A <= 1.0)) {
            throw ParameterError("A = " + std::to_string(A) + " is below the threshold " +
                                 std::to_string(min_A(variant)) + " of the " +
                                 std::string(to_string(variant)) + " variant");
        }
        if (!(C_lemma > 0.0) || !(C_global >= 0.0) || !(C_refined >= 0.0))
            throw ParameterError("bound constants must be positive");
        if (!(s0 > 0.0 && s0 < 0.5))
            throw ParameterError("s0 must lie in (0, 1/2)");
    }
};

/// BoundParams with C_lemma = 2(A + 1) and, for OdeOptimal, the integrated φ table.
inline BoundParams make_bound_params(double A, PhiVariant variant = PhiVariant::LogRefined)
{
    BoundParams p;
    p.A = A;
    p.variant = variant;
    p.C_lemma = 2.0 * (A + 1.0);
    p.validate();
    if (variant == PhiVariant::OdeOptimal)
        p.psi_table = std::make_shared<const detail::PsiTable>(A - std::log(A));
    return p;
}

/// φ together with its first two derivatives.
struct PhiJet {
    double value;
    double d1;
    double d2;
};

namespace detail {

inline double ode_optimal_psi(double s, const BoundParams& p)
{
    if (p.psi_table) return (*p.psi_table)(s);
    // no cached table: walk from the origin
    return PsiTable(p.A - std::log(p.A))(s);
}

// Unvalidated evaluation; the threshold search probes A below the variant minimum.
inline PhiJet phi_jet_raw(double s, double A, PhiVariant variant, const BoundParams* p = nullptr)
{
    switch (variant) {
    case PhiVariant::LogRefined: {
        const double z = A + s;
        const double D = z - std::log(z);
        const double D1 = 1.0 - 1.0 / z;
        const double D2 = 1.0 / (z * z);
        return {1.0 / D, -D1 / (D * D), -D2 / (D * D) + 2.0 * D1 * D1 / (D * D * D)};
    }
    case PhiVariant::Simple: {
        const double z = A + s;
        return {1.0 / z, -1.0 / (z * z), 2.0 / (z * z * z)};
    }
    case PhiVariant::OdeOptimal: {
        const double psi = p ? ode_optimal_psi(s, *p) : PsiTable(A - std::log(A))(s);
        const double phi = 1.0 / psi;
        const double d1 = -phi * phi / (1.0 + phi);
        const double g1 = -(phi * phi + 2.0 * phi) / ((1.0 + phi) * (1.0 + phi));
        return {phi, d1, g1 * d1};
    }
    }
    return {std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
}

inline void require_nonnegative(double s, const char* what)
{
    if (!(s >= 0.0)) throw DomainError(std::string(what) + " requires a nonnegative argument");
}

} // namespace detail

inline PhiJet phi_jet(double s, const BoundParams& p)
{
    detail::require_nonnegative(s, "phi");
    p.validate();
    return detail::phi_jet_raw(s, p.A, p.variant, &p);
}

inline double phi(double s, const BoundParams& p) { return phi_jet(s, p).value; }

/// φ' + φ(φ + φ') for the LogRefined choice, in the factored closed form.
inline double ode_defect(double s, const BoundParams& p)
{
    detail::require_nonnegative(s, "ode_defect");
    p.validate();
    if (p.variant != PhiVariant::LogRefined)
        throw ParameterError("ode_defect is defined for the log_refined variant");
    const double z = p.A + s;
    const double D = z - std::log(z);
    return (1.0 - std::log(z)) / (z * D * D * D);
}

/// (e^s φ(s))'' from the differentiated closed form.
inline double convexity_defect(double s, const BoundParams& p)
{
    const auto j = phi_jet(s, p);
    return std::exp(s) * (j.value + 2.0 * j.d1 + j.d2);
}

/// Smallest A (to bisection precision) with (e^s φ)'' >= -tol on a uniform s-grid of [0, s_max].
inline double convexity_threshold(PhiVariant variant, double s_max = 200.0, double ds = 0.01,
                                  double tol = 1e-12)
{
    const auto steps = static_cast<std::size_t>(std::llround(s_max / ds));
    auto convex = [&](double A) {
        const BoundParams* table_owner = nullptr;
        BoundParams tmp;
        if (variant == PhiVariant::OdeOptimal) {
            tmp.A = A;
            tmp.variant = variant;
            tmp.psi_table = std::make_shared<const detail::PsiTable>(A - std::log(A));
            table_owner = &tmp;
        }
        for (std::size_t i = 0; i <= steps; ++i) {
            const double s = ds * static_cast<double>(i);
            const auto j = detail::phi_jet_raw(s, A, variant, table_owner);
            // the positive factor e^s does not change the sign; scale tol accordingly
            if (j.value + 2.0 * j.d1 + j.d2 < -tol * std::exp(-s)) return false;
        }
        return true;
    };
    double lo = 1e-3;
    double hi = 1.0;
    while (!convex(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw Error("convexity threshold search did not bracket");
    }
    if (convex(lo)) return lo;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (convex(mid) ? hi : lo) = mid;
    }
    return hi;
}

/// J = u_r + r e^u φ(u) / 2.
inline double j_value(double u, double u_r, double r, const BoundParams& p)
{
    detail::require_nonnegative(u, "j_value");
    return u_r + 0.5 * r * std::exp(u) * phi(u, p);
}

/// r/2 + e^{-u} u_r / φ(u); same sign as J (they differ by the factor e^u φ(u) > 0).
inline double integr0_residual(double u, double u_r, double r, const BoundParams& p)
{
    detail::require_nonnegative(u, "integr0_residual");
    return 0.5 * r + std::exp(-u) * u_r / phi(u, p);
}

/// G(u) = e^{-u}(A + 1 + u - log(A + u)), a decreasing bijection [0, ∞) -> (0, D].
inline double g_value(double u, const BoundParams& p)
{
    detail::require_nonnegative(u, "g_value");
    if (!(p.A > 1.0)) throw ParameterError("g_value requires A > 1");
    return std::exp(-u) * (p.A + 1.0 + u - std::log(p.A + u));
}

/// D = G(0) = A + 1 - log A.
inline double g_sup(const BoundParams& p) { return p.A + 1.0 - std::log(p.A); }

inline double g_inverse(double s, const BoundParams& p)
{
    const double D = g_sup(p);
    if (!(s > 0.0 && s < D))
        throw DomainError("g_inverse requires s in (0, D) with D = " + std::to_string(D));
    double hi = 1.0;
    while (g_value(hi, p) >= s) hi *= 2.0;
    auto f = [&](double u) { return g_value(u, p) - s; };
    auto converged = [](double a, double b) {
        return b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(b), 1e-300);
    };
    std::uintmax_t max_iter = 4000;
    const auto [lo, up] = boost::math::tools::bisect(f, 0.0, hi, converged, max_iter);
    return std::abs(f(lo)) <= std::abs(f(up)) ? lo : up;
}

/// H(s) together with the flag for s in [s0, 1/2), where the inequality G^{-1} <= H is not claimed.
struct LemmaBound {
    double value;
    bool beyond_s0;
};

/// H(s) = -log s + log|log s| + C_lemma / |log s| on 0 < s < 1/2.
inline LemmaBound h_value(double s, const BoundParams& p)
{
    if (!(s > 0.0 && s < 0.5)) throw DomainError("h_value requires 0 < s < 1/2");
    const double L = std::abs(std::log(s));
    return {L + std::log(L) + p.C_lemma / L, s >= p.s0};
}

/// s(r, t) = e^{-m}(m - log(A + m)) + r²/4.
inline double s_of(double r, double m, const BoundParams& p)
{
    detail::require_nonnegative(r, "s_of");
    const double lead = m - std::log(p.A + m);
    if (!(lead >= 0.0)) {
        throw PreconditionError("s_of requires m >= log(A + m); m = " + std::to_string(m) +
                                " is below the threshold for A = " + std::to_string(p.A));
    }
    return std::exp(-m) * lead + 0.25 * r * r;
}

namespace detail {

inline double global_q(double r, double m)
{
    const double q = m * std::exp(-m) + 0.25 * r * r;
    if (!(q > 0.0 && q < 0.5))
        throw DomainError("global bound outside the asymptotic regime: q = " + std::to_string(q));
    return q;
}

} // namespace detail

/// C-free part log(|log q| / q), q = m e^{-m} + r²/4.
inline double global_bound_main(double r, double m)
{
    const double q = detail::global_q(r, m);
    return std::log(std::abs(std::log(q)) / q);
}

/// Coefficient of C in the global remainder: 1/|log q| + log m / (m + e^m r²/4).
inline double global_remainder_shape(double r, double m)
{
    const double q = detail::global_q(r, m);
    return 1.0 / std::abs(std::log(q)) + std::log(m) / (m + 0.25 * std::exp(m) * r * r);
}

/// Remainder shape log|log q| / |log q| produced by the simple φ.
inline double simple_remainder_shape(double r, double m)
{
    const double L = std::abs(std::log(detail::global_q(r, m)));
    return std::log(L) / L;
}

inline double global_bound(double r, double m, const BoundParams& p)
{
    detail::require_nonnegative(r, "global_bound");
    return global_bound_main(r, m) + p.C_global * global_remainder_shape(r, m);
}

/// 2|log r| + log|log r| + log 8 + C/|log r| for 0 < r < 1.
inline double final_profile_bound(double r, double C)
{
    if (!(r > 0.0 && r < 1.0)) throw DomainError("final_profile_bound requires 0 < r < 1");
    const double L = -std::log(r);
    return 2.0 * L + std::log(L) + std::log(8.0) + C / L;
}

/// m - log(1 + ξ²/4) + C log m / m.
inline double refined_bound(double xi, double m, double C)
{
    if (!(xi >= 0.0)) throw DomainError("refined_bound requires xi >= 0");
    if (!(m > 1.0)) throw DomainError("refined_bound requires m > 1");
    return m - std::log1p(0.25 * xi * xi) + C * std::log(m) / m;
}

} // namespace blowuplab
