#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "blowuplab/integrate.hpp"

using namespace blowuplab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SolverConfig uniform_mode()
{
    SolverConfig c;
    c.boundary = Boundary::Neumann;
    c.u0 = {InitialFamily::Constant, 0.0, 1.0};
    c.m_stop = 20.0;
    c.grading = {1e-2, 1.05, 0.1, 1000};
    c.regrid_trigger = 0;
    return c;
}

} // namespace

TEST_CASE("choose_dt follows e^{-m}")
{
    auto g = std::make_shared<const RadialGrid>(build_grid(1, 1.0, 0.1, 1.05, 100));
    Field f{g, std::vector<double>(g->size(), 20.0), 0.0};
    CHECK_THAT(choose_dt(f, 0.005), WithinRel(1.0305768112192789e-11, 1e-14));
    Field cold{g, std::vector<double>(g->size(), 0.0), 0.0};
    CHECK(choose_dt(cold, 0.005, {1e-300, 1e-3}) == 1e-3);
    CHECK_THROWS_AS(choose_dt(f, 0.0), DomainError);
}

TEST_CASE("uniform mode follows the ODE solution")
{
    const auto tr = run(uniform_mode());
    REQUIRE(tr.stop_reason == StopReason::MStopReached);
    for (const auto& s : tr.samples) {
        if (s.t > 0.99) break;
        REQUIRE_THAT(s.m, WithinAbs(-std::log1p(-s.t), 1e-9 * (1 - std::log1p(-s.t))));
    }
    const auto est = estimate_blowup_time(tr);
    CHECK_THAT(est.T_est, WithinRel(1.0, 1e-9));
    CHECK(est.type1_defect < 1e-6);
}

TEST_CASE("forward Euler reaction is first order")
{
    auto c = uniform_mode();
    c.reaction = ReactionTreatment::ForwardEuler;
    c.m_stop = 10.0;
    const auto tr = run(c);
    // the explicit update lags the exact flow, so m(t) sits below -log(1 - t)
    const auto& mid = tr.samples[tr.samples.size() / 2];
    CHECK(mid.m < -std::log1p(-mid.t));
    CHECK(mid.m > -std::log1p(-mid.t) - 0.05);
}

TEST_CASE("linear heat decay with the reaction disabled")
{
    SolverConfig c;
    c.reaction = ReactionTreatment::Off;
    c.u0 = {InitialFamily::Cosine, 1.0, 1.0};
    c.t_max = 0.5;
    c.fixed_dt = 1e-4;
    c.grading = {1e-4, 1.05, 0.01, 20000};
    const auto tr = run(c);
    CHECK(tr.stop_reason == StopReason::TMaxReached);
    CHECK_THAT(tr.final_t(), WithinRel(0.5, 1e-12));
    const double lambda = std::numbers::pi * std::numbers::pi / 4;
    // implicit Euler damps by 1/(1 + λ dt) per step
    const double expected = std::pow(1.0 + lambda * 1e-4, -5000.0);
    CHECK_THAT(tr.final_m(), WithinRel(expected, 1e-3));
}

TEST_CASE("configuration validation")
{
    SolverConfig c;
    c.delta_m = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.m_stop = 5.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.u0 = {InitialFamily::Constant, 2.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError); // constants only in the uniform harness
    c.boundary = Boundary::Neumann;
    CHECK_NOTHROW(c.validate());
    c = SolverConfig{};
    c.u0 = {InitialFamily::Gaussian, -1.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("step overflow is reported")
{
    auto g = std::make_shared<const RadialGrid>(build_grid(1, 1.0, 0.1, 1.05, 100));
    Field f{g, std::vector<double>(g->size(), 10.0), 0.0};
    CHECK_THROWS_AS(step(f, 1.0), StepOverflowError);
    f.values.assign(g->size(), 800.0);
    CHECK_THROWS_AS(step(f, 1e-300, Boundary::Dirichlet, ReactionTreatment::ForwardEuler), StepOverflowError);
}

TEST_CASE("blowup run: snapshots, regrids and monotone profiles")
{
    SolverConfig c;
    c.m_stop = 20.0;
    c.grading.h_min = 1e-6; // coarse enough that the core falls below 64 nodes before m = 20
    const auto tr = run(c);
    REQUIRE(tr.stop_reason == StopReason::MStopReached);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) REQUIRE(tr.samples[i].t > tr.samples[i - 1].t);
    CHECK(tr.snapshots.size() == 11); // m = 10 .. 20
    for (const auto& s : tr.snapshots) {
        REQUIRE(s.field.nonincreasing(1e-9));
        REQUIRE(s.field.values.back() == 0.0);
    }
    CHECK_FALSE(tr.grid_history.empty());
    for (const auto& e : tr.grid_history) CHECK(e.h_min_new < e.h_min_old);
    CHECK(tr.snapshots.back().field.grid->count_within(core_scale(tr.final_m())) >= 64);

    const auto est = estimate_blowup_time(tr);
    CHECK(est.T_est > tr.final_t());
    CHECK(est.type1_defect < 1.0);
    CHECK_THROWS_AS(estimate_blowup_time(tr, 0.0), DomainError);
}

TEST_CASE("blowup-time estimate needs a late trace")
{
    SolverConfig c;
    c.m_stop = 12.0;
    const auto tr = run(c);
    CHECK_THROWS_AS(estimate_blowup_time(tr), PreconditionError);
    CHECK_THROWS_AS(extract_final_profile(tr), PreconditionError);
}

TEST_CASE("blowup-time fit on a synthetic type-I history")
{
    Trace tr;
    const double T = 1e-4;
    for (int k = 0; k <= 100; ++k) {
        const double m = 10.0 + 0.1 * k;
        tr.samples.push_back({T - std::exp(-m), m, 0.0});
    }
    const auto est = estimate_blowup_time(tr, 3.0);
    CHECK_THAT(est.T_est, WithinRel(T, 1e-12));
    CHECK(est.residual < 1e-8);
    CHECK(est.type1_defect < 1e-8);
}

TEST_CASE("step underflow stops the run")
{
    SolverConfig c;
    c.dt_min = 1e-3;
    const auto tr = run(c);
    CHECK(tr.stop_reason == StopReason::StepUnderflow);
}
