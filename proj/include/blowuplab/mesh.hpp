#pragma once

// Graded radial grids on [0, R] and the conservative radial Laplacian
// r^{1-n} (r^{n-1} u_r)_r with symmetry at r = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Boost 1.74's pchip calls isnan unqualified.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "blowuplab/errors.hpp"

namespace blowuplab {

enum class Boundary { Dirichlet, Neumann };

struct Grading {
    double h_min = 1e-8;
    double q = 1.05;
    double h_cap = std::numeric_limits<double>::infinity();
    std::size_t N_cap = 20000;
};

/// Strictly increasing nodes 0 = r_0 < ... < r_N = R in space dimension n.
struct RadialGrid {
    int n = 1;
    double R = 1.0;
    bool truncated = false; // R is a truncation radius of the whole space
    std::vector<double> nodes;
    Grading grading;

    std::size_t size() const { return nodes.size(); }
    double spacing(std::size_t i) const { return nodes[i + 1] - nodes[i]; }

    /// Number of nodes with r <= radius.
    std::size_t count_within(double radius) const
    {
        return static_cast<std::size_t>(
            std::upper_bound(nodes.begin(), nodes.end(), radius) - nodes.begin());
    }
};

using GridPtr = std::shared_ptr<const RadialGrid>;

inline constexpr double default_q_max = 1.08;

/// Geometric grading from the origin: spacing_k = min(h_min q^k, h_cap), last node snapped to R.
inline RadialGrid build_grid(int n, double R, double h_min, double q, std::size_t N_cap,
                             double h_cap = std::numeric_limits<double>::infinity(),
                             double q_max = default_q_max)
{
    if (n < 1) throw ParameterError("space dimension must be >= 1");
    if (!(R > 0.0)) throw ParameterError("domain radius must be positive");
    if (!(h_min > 0.0 && h_min < R)) throw ParameterError("h_min must lie in (0, R)");
    if (!(q > 1.0 && q <= q_max))
        throw ParameterError("growth ratio q must lie in (1, " + std::to_string(q_max) + "]");
    if (!(h_cap >= h_min)) throw ParameterError("h_cap must be >= h_min");

    RadialGrid g;
    g.n = n;
    g.R = R;
    g.grading = {h_min, q, h_cap, N_cap};
    g.nodes.push_back(0.0);
    double h = h_min;
    for (;;) {
        const double r = g.nodes.back();
        if (r + h >= R) {
            const double tail = R - r;
            const double prev = g.nodes.size() > 1 ? r - g.nodes[g.nodes.size() - 2] : h;
            if (tail < 0.5 * prev && g.nodes.size() > 1) {
                // a sliver cell: share the last two cells evenly instead
                g.nodes.back() = 0.5 * (g.nodes[g.nodes.size() - 2] + R);
            }
            g.nodes.push_back(R);
            break;
        }
        g.nodes.push_back(r + h);
        if (g.nodes.size() >= N_cap) {
            throw GridError("grid exceeds N_cap = " + std::to_string(N_cap) +
                            " nodes; use a larger h_min or growth ratio");
        }
        h = std::min(h * q, h_cap);
    }
    if (g.nodes.size() > N_cap)
        throw GridError("grid exceeds N_cap = " + std::to_string(N_cap) + " nodes");
    return g;
}

/// Grid values u_i ≈ u(r_i) at time t.
struct Field {
    GridPtr grid;
    std::vector<double> values;
    double t = 0.0;

    std::size_t size() const { return values.size(); }
    double at_origin() const { return values.front(); }

    /// True when u_0 >= u_1 >= ... up to tol.
    bool nonincreasing(double tol = 0.0) const
    {
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[i - 1] + tol) return false;
        return true;
    }
};

/// Coefficients of the flux-form radial Laplacian:
/// (L u)_i = up_i (u_{i+1} - u_i) - down_i (u_i - u_{i-1}).
struct LaplacianStencil {
    std::vector<double> up;
    std::vector<double> down;
    Boundary boundary = Boundary::Dirichlet;
};

inline LaplacianStencil laplacian_stencil(const RadialGrid& g, Boundary boundary)
{
    const std::size_t N = g.size() - 1;
    if (g.size() < 3) throw GridError("the Laplacian needs at least 3 nodes");
    const auto& r = g.nodes;
    const int n = g.n;
    auto area = [n](double x) { return n == 1 ? 1.0 : std::pow(x, n - 1); };
    auto vol = [n](double x) { return std::pow(x, n) / n; };

    LaplacianStencil st;
    st.boundary = boundary;
    st.up.assign(N + 1, 0.0);
    st.down.assign(N + 1, 0.0);
    const std::size_t last = boundary == Boundary::Dirichlet ? N - 1 : N;
    for (std::size_t i = 0; i <= last; ++i) {
        const double left = i == 0 ? 0.0 : 0.5 * (r[i - 1] + r[i]);
        const double right = i == N ? r[N] : 0.5 * (r[i] + r[i + 1]);
        const double V = vol(right) - vol(left);
        if (i < N) st.up[i] = area(right) / (r[i + 1] - r[i]) / V;
        if (i > 0) st.down[i] = area(left) / (r[i] - r[i - 1]) / V;
    }
    return st;
}

inline std::vector<double> apply_stencil(const LaplacianStencil& st, std::span<const double> u)
{
    const std::size_t N = u.size() - 1;
    std::vector<double> out(u.size(), 0.0);
    for (std::size_t i = 0; i <= N; ++i) {
        double v = 0.0;
        if (i < N) v += st.up[i] * (u[i + 1] - u[i]);
        if (i > 0) v -= st.down[i] * (u[i] - u[i - 1]);
        out[i] = v;
    }
    return out;
}

/// Discrete Δu; the Dirichlet row at r_N is returned as 0.
inline Field apply_laplacian(const Field& f, Boundary boundary = Boundary::Dirichlet)
{
    const auto st = laplacian_stencil(*f.grid, boundary);
    return Field{f.grid, apply_stencil(st, f.values), f.t};
}

/// Tridiagonal matrix rows (lower_i, diag_i, upper_i).
struct TridiagonalSystem {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    std::size_t size() const { return diag.size(); }

    /// Thomas algorithm; stable without pivoting for diagonally dominant rows.
    std::vector<double> solve(std::span<const double> rhs) const
    {
        const std::size_t N = diag.size();
        std::vector<double> c(N), x(rhs.begin(), rhs.end());
        double beta = diag[0];
        c[0] = upper[0] / beta;
        x[0] /= beta;
        for (std::size_t i = 1; i < N; ++i) {
            beta = diag[i] - lower[i] * c[i - 1];
            c[i] = upper[i] / beta;
            x[i] = (x[i] - lower[i] * x[i - 1]) / beta;
        }
        for (std::size_t i = N - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
        return x;
    }

    std::vector<double> multiply(std::span<const double> x) const
    {
        const std::size_t N = diag.size();
        std::vector<double> y(N);
        for (std::size_t i = 0; i < N; ++i) {
            y[i] = diag[i] * x[i];
            if (i > 0) y[i] += lower[i] * x[i - 1];
            if (i + 1 < N) y[i] += upper[i] * x[i + 1];
        }
        return y;
    }
};

inline TridiagonalSystem assemble_diffusion_system(const LaplacianStencil& st, double dt)
{
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    const std::size_t M = st.up.size();
    TridiagonalSystem sys;
    sys.lower.assign(M, 0.0);
    sys.diag.assign(M, 1.0);
    sys.upper.assign(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        sys.lower[i] = -dt * st.down[i];
        sys.upper[i] = -dt * st.up[i];
        sys.diag[i] = 1.0 + dt * (st.up[i] + st.down[i]);
    }
    return sys;
}

/// Rows of (I - dt L) with the stated boundary closure.
inline TridiagonalSystem assemble_diffusion_system(const RadialGrid& g, double dt,
                                                   Boundary boundary = Boundary::Dirichlet)
{
    return assemble_diffusion_system(laplacian_stencil(g, boundary), dt);
}

/// Monotone piecewise cubic (Fritsch-Carlson) interpolation of f onto new_grid.
inline Field regrid(const Field& f, GridPtr new_grid)
{
    const auto& src = f.grid->nodes;
    const auto& dst = new_grid->nodes;
    if (dst.front() != 0.0 || std::abs(dst.back() - src.back()) > 1e-12 * src.back())
        throw GridError("regrid target must cover the same interval [0, R]");
    std::vector<double> out(dst.size());
    if (src.size() < 4) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            const auto it = std::upper_bound(src.begin(), src.end(), dst[i]);
            const std::size_t k = std::clamp<std::size_t>(it - src.begin(), 1, src.size() - 1);
            const double w = (dst[i] - src[k - 1]) / (src[k] - src[k - 1]);
            out[i] = (1.0 - w) * f.values[k - 1] + w * f.values[k];
        }
    } else {
        boost::math::interpolators::pchip<std::vector<double>> spline(
            std::vector<double>(src), std::vector<double>(f.values));
        for (std::size_t i = 0; i < dst.size(); ++i)
            out[i] = spline(std::clamp(dst[i], src.front(), src.back()));
    }
    out.front() = f.values.front();
    out.back() = f.values.back();
    return Field{std::move(new_grid), std::move(out), f.t};
}

/// u_r by centered 3-point differences on the nonuniform grid; one-sided second order at both ends.
inline std::vector<double> radial_derivative(const RadialGrid& g, std::span<const double> u)
{
    const auto& r = g.nodes;
    const std::size_t N = r.size() - 1;
    std::vector<double> d(r.size());
    for (std::size_t i = 1; i < N; ++i) {
        const double hm = r[i] - r[i - 1];
        const double hp = r[i + 1] - r[i];
        d[i] = (hm * hm * (u[i + 1] - u[i]) + hp * hp * (u[i] - u[i - 1])) / (hm * hp * (hm + hp));
    }
    {
        const double h1 = r[1] - r[0];
        const double h2 = r[2] - r[1];
        d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1] -
               h1 / (h2 * (h1 + h2)) * u[2];
    }
    {
        const double h1 = r[N] - r[N - 1];
        const double h2 = r[N - 1] - r[N - 2];
        d[N] = (2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[N] - (h1 + h2) / (h1 * h2) * u[N - 1] +
               h1 / (h2 * (h1 + h2)) * u[N - 2];
    }
    return d;
}

/// Monotone interpolant of a field; evaluation at arbitrary r in [0, R].
class FieldInterpolant {
public:
    explicit FieldInterpolant(const Field& f)
        : spline_(std::vector<double>(f.grid->nodes), std::vector<double>(f.values)),
          lo_(f.grid->nodes.front()), hi_(f.grid->nodes.back())
    {
    }

    double operator()(double r) const { return spline_(std::clamp(r, lo_, hi_)); }

private:
    boost::math::interpolators::pchip<std::vector<double>> spline_;
    double lo_;
    double hi_;
};

} // namespace blowuplab
