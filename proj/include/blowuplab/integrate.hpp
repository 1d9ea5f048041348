#pragma once

// Adaptive linearly implicit integration of u_t = Δu + e^u on a radial grid,
// and the extrapolations that stand in for "at the blowup time".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blowuplab/errors.hpp"
#include "blowuplab/mesh.hpp"

namespace blowuplab {

enum class DomainKind { Ball, TruncatedWholeSpace };

/// How the reaction e^u enters the step.
enum class ReactionTreatment {
    ExactFlow,    ///< frozen pointwise ODE solved exactly: u - log(1 - dt e^u)
    ForwardEuler, ///< u + dt e^u
    Off           ///< pure heat equation (test mode)
};

enum class InitialFamily {
    Parabola, ///< a (1 - r²/w²)_+
    Gaussian, ///< a exp(-r²/w²)
    Constant, ///< a (spatially uniform test mode)
    Cosine    ///< a cos(π r / (2 w)) on r <= w, 0 beyond (linear heat test mode)
};

inline std::string_view to_string(DomainKind d)
{
    return d == DomainKind::Ball ? "ball" : "whole_space";
}
inline std::string_view to_string(Boundary b)
{
    return b == Boundary::Dirichlet ? "dirichlet" : "neumann";
}
inline std::string_view to_string(ReactionTreatment r)
{
    switch (r) {
    case ReactionTreatment::ExactFlow: return "exact_flow";
    case ReactionTreatment::ForwardEuler: return "forward_euler";
    case ReactionTreatment::Off: return "off";
    }
    return "unknown";
}
inline std::string_view to_string(InitialFamily f)
{
    switch (f) {
    case InitialFamily::Parabola: return "parabola";
    case InitialFamily::Gaussian: return "gaussian";
    case InitialFamily::Constant: return "constant";
    case InitialFamily::Cosine: return "cosine";
    }
    return "unknown";
}

struct InitialData {
    InitialFamily family = InitialFamily::Parabola;
    double a = 10.0;
    double width = 1.0;

    double operator()(double r) const
    {
        const double x = r / width;
        switch (family) {
        case InitialFamily::Parabola: return a * std::max(0.0, 1.0 - x * x);
        case InitialFamily::Gaussian: return a * std::exp(-x * x);
        case InitialFamily::Constant: return a;
        case InitialFamily::Cosine: return x >= 1.0 ? 0.0 : a * std::cos(0.5 * std::numbers::pi * x);
        }
        return 0.0;
    }
};

struct SolverConfig {
    int n = 1;
    DomainKind domain = DomainKind::Ball;
    double R = 1.0;
    Boundary boundary = Boundary::Dirichlet;
    InitialData u0;
    ReactionTreatment reaction = ReactionTreatment::ExactFlow;
    double delta_m = 0.005;
    double m_stop = 25.0;
    double t_max = 1.0;
    Grading grading{1e-8, 1.05, 0.01, 20000};
    std::size_t regrid_trigger = 64;
    std::vector<double> snapshot_schedule{10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25};
    std::optional<double> fixed_dt;
    double dt_min = 1e-300;
    double dt_cap = 1e-2;

    void validate() const
    {
        if (n < 1) throw ConfigError("solver.n: space dimension must be >= 1");
        if (!(R > 0.0)) throw ConfigError("solver.R: must be positive");
        if (!(delta_m > 0.0 && delta_m <= 0.1)) throw ConfigError("solver.delta_m: must lie in (0, 0.1]");
        if (!(m_stop >= 10.0)) throw ConfigError("solver.m_stop: must be >= 10");
        if (!(t_max > 0.0)) throw ConfigError("solver.t_max: must be positive");
        if (fixed_dt && !(*fixed_dt > 0.0)) throw ConfigError("solver.fixed_dt: must be positive");
        if (!(dt_cap > 0.0 && dt_min > 0.0 && dt_min < dt_cap))
            throw ConfigError("solver.dt_min/dt_cap: need 0 < dt_min < dt_cap");
        if (!(u0.width > 0.0)) throw ConfigError("solver.u0.width: must be positive");
        // sample u0 for the radially nonincreasing, nonnegative, nonconstant hypothesis
        constexpr int samples = 1000;
        double prev = u0(0.0);
        bool constant = true;
        for (int i = 0; i <= samples; ++i) {
            const double v = u0(R * i / samples);
            if (v < 0.0) throw ConfigError("solver.u0: initial data must be nonnegative");
            if (v > prev + 1e-12 * std::max(1.0, std::abs(prev)))
                throw ConfigError("solver.u0: initial data must be nonincreasing in r");
            if (v != prev) constant = false;
            prev = v;
        }
        // constants are admitted only by the spatially uniform (Neumann) harness
        if (constant && boundary != Boundary::Neumann)
            throw ConfigError("solver.u0: initial data must be nonconstant");
    }
};

struct Snapshot {
    Field field;
    double t = 0.0;
    double m = 0.0;
    double dt_used = 0.0;
};

struct Sample {
    double t;
    double m;
    double dt;
};

enum class StopReason { MStopReached, TMaxReached, StepUnderflow };

inline std::string_view to_string(StopReason s)
{
    switch (s) {
    case StopReason::MStopReached: return "m_stop_reached";
    case StopReason::TMaxReached: return "t_max_reached";
    case StopReason::StepUnderflow: return "step_underflow";
    }
    return "unknown";
}

struct RegridEvent {
    double t;
    double m;
    double h_min_old;
    double h_min_new;
    std::size_t nodes;
};

struct Trace {
    SolverConfig config;
    std::vector<Sample> samples;
    std::vector<Snapshot> snapshots;
    StopReason stop_reason = StopReason::TMaxReached;
    std::vector<RegridEvent> grid_history;

    double final_m() const { return samples.back().m; }
    double final_t() const { return samples.back().t; }
};

namespace detail {

inline constexpr double exp_limit = 700.0;

inline std::vector<double> reaction_update(std::span<const double> u, double dt, ReactionTreatment reaction)
{
    std::vector<double> out(u.begin(), u.end());
    if (reaction == ReactionTreatment::Off) return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (u[i] > exp_limit)
            throw StepOverflowError("e^u overflows (u = " + std::to_string(u[i]) + ")");
        const double growth = dt * std::exp(u[i]);
        if (reaction == ReactionTreatment::ForwardEuler) {
            out[i] += growth;
        } else {
            if (!(growth < 1.0))
                throw StepOverflowError("reaction blows up inside the step (dt e^u = " +
                                        std::to_string(growth) + ")");
            out[i] -= std::log1p(-growth);
        }
    }
    return out;
}

} // namespace detail

/// Reusable stepping state for one grid: caches the Laplacian coefficients.
class Stepper {
public:
    Stepper(GridPtr grid, Boundary boundary, ReactionTreatment reaction)
        : grid_(std::move(grid)), stencil_(laplacian_stencil(*grid_, boundary)), reaction_(reaction)
    {
    }

    /// Solve (I - dt L) u_new = R_dt(u_old), R_dt the reaction update.
    Field step(const Field& f, double dt) const
    {
        if (!(dt > 0.0)) throw DomainError("time step must be positive");
        auto rhs = detail::reaction_update(f.values, dt, reaction_);
        if (stencil_.boundary == Boundary::Dirichlet) rhs.back() = 0.0;
        const auto sys = assemble_diffusion_system(stencil_, dt);
        auto u = sys.solve(rhs);
        if (stencil_.boundary == Boundary::Dirichlet) u.back() = 0.0;
        return Field{grid_, std::move(u), f.t + dt};
    }

    const GridPtr& grid() const { return grid_; }
    const LaplacianStencil& stencil() const { return stencil_; }

private:
    GridPtr grid_;
    LaplacianStencil stencil_;
    ReactionTreatment reaction_;
};

inline Field step(const Field& f, double dt, Boundary boundary = Boundary::Dirichlet,
                  ReactionTreatment reaction = ReactionTreatment::ExactFlow)
{
    return Stepper(f.grid, boundary, reaction).step(f, dt);
}

struct StepLimits {
    double dt_min = 1e-300;
    double dt_cap = 1e-2;
};

/// dt = delta_m e^{-m}, capped at dt_cap; a value below dt_min signals step underflow to the caller.
inline double choose_dt(const Field& f, double delta_m, StepLimits limits = {})
{
    if (!(delta_m > 0.0)) throw DomainError("delta_m must be positive");
    const double m = *std::max_element(f.values.begin(), f.values.end());
    return std::min(delta_m * std::exp(-m), limits.dt_cap);
}

/// Core length scale sqrt(m e^{-m}).
inline double core_scale(double m) { return std::sqrt(m * std::exp(-m)); }

inline RadialGrid initial_grid(const SolverConfig& cfg)
{
    auto g = build_grid(cfg.n, cfg.R, cfg.grading.h_min, cfg.grading.q, cfg.grading.N_cap,
                        cfg.grading.h_cap);
    g.truncated = cfg.domain == DomainKind::TruncatedWholeSpace;
    return g;
}

inline Trace run(const SolverConfig& cfg)
{
    cfg.validate();
    Trace tr;
    tr.config = cfg;

    auto grid = std::make_shared<const RadialGrid>(initial_grid(cfg));
    Field u{grid, {}, 0.0};
    u.values.reserve(grid->size());
    for (double r : grid->nodes) u.values.push_back(cfg.u0(r));
    if (cfg.boundary == Boundary::Dirichlet) u.values.back() = 0.0;

    auto stepper = std::make_unique<Stepper>(grid, cfg.boundary, cfg.reaction);
    auto schedule = cfg.snapshot_schedule;
    std::sort(schedule.begin(), schedule.end());
    std::size_t next_snapshot = 0;
    auto retain = [&](double dt_used) {
        tr.snapshots.push_back(Snapshot{u, u.t, u.at_origin(), dt_used});
    };
    auto catch_up_schedule = [&](double dt_used) {
        bool taken = false;
        while (next_snapshot < schedule.size() && u.at_origin() >= schedule[next_snapshot]) {
            if (!taken) retain(dt_used);
            taken = true;
            ++next_snapshot;
        }
    };

    tr.samples.push_back({0.0, u.at_origin(), 0.0});
    catch_up_schedule(0.0);

    const StepLimits limits{cfg.dt_min, cfg.dt_cap};
    for (;;) {
        if (u.at_origin() >= cfg.m_stop) {
            tr.stop_reason = StopReason::MStopReached;
            break;
        }
        if (u.t >= cfg.t_max) {
            tr.stop_reason = StopReason::TMaxReached;
            break;
        }
        double dt = cfg.fixed_dt ? *cfg.fixed_dt : choose_dt(u, cfg.delta_m, limits);
        if (dt < cfg.dt_min) {
            tr.stop_reason = StopReason::StepUnderflow;
            break;
        }
        dt = std::min(dt, cfg.t_max - u.t);

        try {
            u = stepper->step(u, dt);
        } catch (const Error& e) {
            throw std::runtime_error("step failed at t = " + std::to_string(u.t) + ", m = " +
                                     std::to_string(u.at_origin()) + ": " + e.what());
        }
        tr.samples.push_back({u.t, u.at_origin(), dt});
        catch_up_schedule(dt);

        const double m = u.at_origin();
        if (m >= 1.0 && cfg.regrid_trigger > 0 &&
            u.grid->count_within(core_scale(m)) < cfg.regrid_trigger) {
            const double old_h = u.grid->grading.h_min;
            double h = old_h;
            std::shared_ptr<RadialGrid> fresh;
            do {
                h *= 0.5;
                try {
                    fresh = std::make_shared<RadialGrid>(build_grid(
                        cfg.n, cfg.R, h, cfg.grading.q, cfg.grading.N_cap, cfg.grading.h_cap));
                } catch (const Error& e) {
                    throw GridError("regrid at t = " + std::to_string(u.t) + ", m = " +
                                    std::to_string(m) + " failed: " + e.what());
                }
                fresh->truncated = u.grid->truncated;
            } while (fresh->count_within(core_scale(m)) < cfg.regrid_trigger);
            u = regrid(u, fresh);
            stepper = std::make_unique<Stepper>(u.grid, cfg.boundary, cfg.reaction);
            tr.grid_history.push_back({u.t, m, old_h, h, fresh->size()});
        }
    }
    if (tr.snapshots.empty() || tr.snapshots.back().t != u.t)
        retain(tr.samples.back().dt);
    return tr;
}

struct BlowupEstimate {
    double T_est = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double residual = 0.0;     // max relative deviation of e^{-m} from the fitted line
    double type1_defect = 0.0; // sup |m + log(T_est - t)| over the window
    std::size_t samples = 0;
};

/// Fit e^{-m} = a + b t over the samples with m in [m_end - window, m_end]; T_est is the root.
/// The fit is weighted by e^{2m} (relative least squares) so each sample counts by its relative error.
inline BlowupEstimate estimate_blowup_time(const Trace& tr, double window_decades = 5.0)
{
    if (tr.samples.empty()) throw PreconditionError("empty trace");
    const double m_end = tr.final_m();
    if (!(m_end >= 15.0))
        throw PreconditionError("blowup-time extrapolation needs a trace reaching m >= 15");
    if (!(window_decades > 0.0)) throw DomainError("window must be positive");
    const double m_lo = m_end - window_decades;

    std::size_t first = tr.samples.size() - 1;
    while (first > 0 && tr.samples[first - 1].m >= m_lo) --first;
    const std::size_t count = tr.samples.size() - first;
    if (count < 3) throw FitError("fewer than three samples in the fit window");
    for (std::size_t i = first + 1; i < tr.samples.size(); ++i) {
        if (!(tr.samples[i].m > tr.samples[i - 1].m))
            throw FitError("m is not increasing inside the fit window");
    }

    // center and scale for conditioning: x = t - t_hi, y = e^{-(m - m_end)}
    const double t_hi = tr.samples.back().t;
    double Sw = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (std::size_t i = first; i < tr.samples.size(); ++i) {
        const double x = tr.samples[i].t - t_hi;
        const double y = std::exp(m_end - tr.samples[i].m);
        const double w = 1.0 / (y * y);
        Sw += w;
        Sx += w * x;
        Sy += w * y;
        Sxx += w * x * x;
        Sxy += w * x * y;
    }
    const double xbar = Sx / Sw;
    const double ybar = Sy / Sw;
    const double sxx = Sxx - Sw * xbar * xbar;
    const double sxy = Sxy - Sw * xbar * ybar;
    if (!(sxx > 0.0)) throw FitError("degenerate fit window");
    const double slope = sxy / sxx;
    const double icpt = ybar - slope * xbar;
    if (!(slope < 0.0)) throw FitError("fitted e^{-m} is not decreasing");
    const double root = -icpt / slope; // relative to t_hi

    BlowupEstimate est;
    est.T_est = t_hi + root;
    est.t_lo = tr.samples[first].t;
    est.t_hi = t_hi;
    est.samples = count;
    if (!(root > 0.0)) throw FitError("extrapolated blowup time precedes the last sample");
    for (std::size_t i = first; i < tr.samples.size(); ++i) {
        const double x = tr.samples[i].t - t_hi;
        const double y = std::exp(m_end - tr.samples[i].m);
        est.residual = std::max(est.residual, std::abs(icpt + slope * x - y) / y);
        est.type1_defect =
            std::max(est.type1_defect, std::abs(tr.samples[i].m + std::log(root - x)));
    }
    return est;
}

struct FinalProfile {
    std::vector<double> r;
    std::vector<double> u;
    std::vector<double> err;
    double r_floor = 0.0;
    double T_est = 0.0;
    double t_stop = 0.0;
};

/// u(r, t_stop) as the proxy for u(r, T) with err = |u_last - u_prev| + u_t (T_est - t_stop).
inline FinalProfile extract_final_profile(const Trace& tr, double err_threshold = 0.05,
                                          double window_decades = 5.0)
{
    std::vector<const Snapshot*> late;
    for (const auto& s : tr.snapshots)
        if (s.m >= 15.0) late.push_back(&s);
    if (late.size() < 2)
        throw PreconditionError("final profile needs at least two snapshots with m >= 15");
    const Snapshot& last = *late.back();
    const Snapshot& prev = *late[late.size() - 2];

    const auto est = estimate_blowup_time(tr, window_decades);
    const Field prev_on_last = prev.field.grid == last.field.grid ? prev.field : regrid(prev.field, last.field.grid);
    auto ut = apply_laplacian(last.field, tr.config.boundary).values;
    for (std::size_t i = 0; i < ut.size(); ++i) ut[i] += std::exp(last.field.values[i]);

    const std::size_t N = last.field.size();
    std::vector<double> err(N);
    const double tail = std::max(0.0, est.T_est - last.t);
    for (std::size_t i = 0; i < N; ++i)
        err[i] = std::abs(last.field.values[i] - prev_on_last.values[i]) + std::max(0.0, ut[i]) * tail;

    // r_floor: smallest node beyond which err stays within the threshold
    std::size_t k = N;
    while (k > 1 && err[k - 1] <= err_threshold) --k;
    if (k == N) throw PreconditionError("no radius with a converged final profile");

    FinalProfile out;
    out.T_est = est.T_est;
    out.t_stop = last.t;
    out.r_floor = last.field.grid->nodes[k];
    for (std::size_t i = k; i < N; ++i) {
        out.r.push_back(last.field.grid->nodes[i]);
        out.u.push_back(last.field.values[i]);
        out.err.push_back(err[i]);
    }
    return out;
}

} // namespace blowuplab
