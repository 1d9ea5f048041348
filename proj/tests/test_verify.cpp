#include <catch_amalgamated.hpp>

#include <cmath>
#include <algorithm>
#include <functional>
#include <numbers>

#include "blowuplab/verify.hpp"

using namespace blowuplab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Trace whose snapshots are u(r; m) at m = m_lo..m_hi and whose history is exactly type I with T = 1e-4.
Trace synthetic(const std::function<double(double, double)>& u, double h_min = 1e-9, int m_lo = 10, int m_hi = 25)
{
    const double T = 1e-4;
    Trace tr;
    auto grid = std::make_shared<const RadialGrid>(build_grid(1, 1.0, h_min, 1.05, 20000, 0.01));
    for (int k = 0; k <= 300; ++k) {
        const double m = 10.0 + 0.05 * k;
        tr.samples.push_back({T - std::exp(-m), m, 0.0});
    }
    for (int m = m_lo; m <= m_hi; ++m) {
        Field f{grid, {}, T - std::exp(-m)};
        for (double r : grid->nodes) f.values.push_back(u(r, m));
        tr.snapshots.push_back({f, f.t, static_cast<double>(m), 0.0});
    }
    tr.stop_reason = StopReason::MStopReached;
    return tr;
}

double refined_shape(double r, double m)
{
    return m - std::log1p(std::exp(m) * r * r / (4.0 * m));
}

} // namespace

TEST_CASE("J check on the refined-shape field")
{
    // oracle: at m = 20 the field needs A >= 17.3733 on r in (0, 1/2]; A = 3 leaves J > 0
    const auto tr = synthetic(refined_shape, 1e-9, 20, 20);
    const auto rec = check_j_nonpositive(tr, make_bound_params(3.0));
    CHECK_FALSE(rec.pass);
    CHECK(rec.max_violation > 0.0);
    REQUIRE(rec.fitted_constant.has_value());
    CHECK(*rec.fitted_constant == 20.0);
    CHECK(rec.detail("max_at_A=10").value() > 0.0);
    const double need = rec.detail("A_required").value();
    CHECK_THAT(need, WithinRel(17.373313, 5e-3));
    CHECK(check_j_nonpositive(tr, make_bound_params(need * (1 + 1e-9)), 0.0).pass);
    CHECK_FALSE(check_j_nonpositive(tr, make_bound_params(need * (1 - 1e-3)), 0.0).pass);

    // later snapshots need more: the requirement grows with m
    const auto all = synthetic(refined_shape);
    const auto wide = check_j_nonpositive(all, make_bound_params(3.0), 1e-2, {3.0, 10.0, 20.0, 40.0, 80.0});
    CHECK(wide.detail("A_required").value() > need);
    CHECK(wide.fitted_constant.value() == 40.0);
}

TEST_CASE("J check detects flat data")
{
    const auto tr = synthetic([](double r, double m) { return r < 0.3 ? m : m * (1.3 - r); });
    const auto rec = check_j_nonpositive(tr, make_bound_params(20.0));
    CHECK_FALSE(rec.pass);
    CHECK_FALSE(rec.fitted_constant.has_value());
    const auto w = check_integr0(tr, make_bound_params(20.0));
    CHECK_FALSE(w.pass);
    CHECK(w.max_violation >= 0.1); // u_r = 0 at r near 0.25: residual r/2
}

TEST_CASE("J and integr0 agree node by node")
{
    for (auto field : {std::function<double(double, double)>(refined_shape),
                       std::function<double(double, double)>([](double r, double m) { return m * (1 - r * r); })}) {
        const auto tr = synthetic(field);
        for (double A : default_A_scan()) {
            const auto p = make_bound_params(A);
            const auto j = check_j_nonpositive(tr, p, 0.0);
            const auto w = check_integr0(tr, p, 0.0);
            INFO("A=" << A);
            CHECK(j.pass == w.pass);
            CHECK(w.detail("sign_disagreements").value() == 0.0);
        }
    }
}

TEST_CASE("Hopf constant and lower bound")
{
    // h_min = 1e-4 keeps m r² above roundoff at the first node
    const auto tr = synthetic([](double r, double m) { return m * (1 - r * r); }, 1e-4);
    const auto h = check_hopf(tr);
    CHECK(h.pass);
    // -u_r / r = 2m, smallest at m = 10
    CHECK_THAT(*h.fitted_constant, WithinRel(20.0, 1e-6)); // differences exact up to roundoff

    const auto flat = synthetic([](double r, double m) { return r < 0.2 ? m : m * (1.2 - r); }, 1e-4);
    const auto hf = check_hopf(flat);
    CHECK_FALSE(hf.pass);
    CHECK(*hf.fitted_constant == 0.0);

    const auto eta = check_eta_lower_bound(tr);
    CHECK(eta.pass);
    // 10 (1 - r²) at the last node inside r <= 1/2
    const auto& nodes = tr.snapshots.front().field.grid->nodes;
    const double r_last = *(std::upper_bound(nodes.begin(), nodes.end(), 0.5) - 1);
    CHECK_THAT(*eta.fitted_constant, WithinRel(10.0 * (1 - r_last * r_last), 1e-14));
    const auto edge = check_eta_lower_bound(tr, 1.0);
    CHECK_FALSE(edge.pass);
    CHECK(*edge.fitted_constant == 0.0);
}

TEST_CASE("global estimate: equality field fits C = 0")
{
    // u equal to the C-free bound wherever q < 1/2
    const auto tr = synthetic([](double r, double m) {
        const double q = m * std::exp(-m) + 0.25 * r * r;
        return q < 0.4 ? global_bound_main(r, m) : 0.0;
    });
    const auto rec = check_global_estimate(tr, make_bound_params(3.0));
    CHECK(rec.pass);
    CHECK(*rec.fitted_constant == 0.0);
    CHECK(rec.max_violation <= 0.0);
    CHECK(rec.max_violation > -1e-12);
}

TEST_CASE("global estimate: fitted constant is minimal")
{
    const auto tr = synthetic(refined_shape);
    auto p = make_bound_params(3.0);
    const auto rec = check_global_estimate(tr, p);
    REQUIRE(rec.fitted_constant.has_value());
    p.C_global = *rec.fitted_constant;
    CHECK(check_global_estimate(tr, p).detail("violation_at_configured_C").value() <= 1e-12);
    p.C_global = 0.99 * *rec.fitted_constant;
    CHECK(check_global_estimate(tr, p).detail("violation_at_configured_C").value() > 0.0);
}

TEST_CASE("refined profile: sharp profile has zero defect")
{
    const auto tr = synthetic([](double r, double m) { return m - std::log1p(0.25 * r * r / (m * std::exp(-m))); });
    const auto rec = check_refined_profile(tr, 4.0);
    CHECK(rec.pass);
    // only the monotone-cubic interpolation error remains
    CHECK_THAT(*rec.fitted_constant, WithinAbs(0.0, 1e-4));
    CHECK(rec.detail("xi0_defect_max_abs").value() == 0.0);
    // exact type-I history: m + log(T - t) = 0
    CHECK_THAT(rec.detail("xi0_sharp_defect_last").value(), WithinAbs(0.0, 1e-9));
}

TEST_CASE("refined profile: under-resolved core")
{
    Trace tr = synthetic(refined_shape);
    auto coarse = std::make_shared<const RadialGrid>(build_grid(1, 1.0, 1e-3, 1.05, 20000, 0.01));
    for (auto& s : tr.snapshots) s.field = regrid(s.field, coarse);
    CHECK_THROWS_AS(check_refined_profile(tr, 4.0), ResolutionError);
}

TEST_CASE("final profile: equality, minimal C and range errors")
{
    FinalProfile prof;
    for (int k = 0; k <= 300; ++k) {
        const double r = std::pow(10.0, -3.0 + 0.01 * k * 0.9);
        prof.r.push_back(r);
        prof.u.push_back(final_profile_bound(r, 0.0));
        prof.err.push_back(0.0);
    }
    prof.r_floor = prof.r.front();
    const auto rec = check_final_profile(prof, 0.1);
    CHECK(rec.pass);
    CHECK_THAT(*rec.fitted_constant, WithinAbs(0.0, 1e-12));

    for (std::size_t i = 0; i < prof.r.size(); ++i) prof.u[i] = final_profile_bound(prof.r[i], 3.0);
    CHECK_THAT(*check_final_profile(prof, 0.1).fitted_constant, WithinRel(3.0, 1e-12));
    // error bars raise the constant
    for (auto& e : prof.err) e = 0.01;
    CHECK(*check_final_profile(prof, 0.1).fitted_constant > 3.0);

    prof.r_floor = 0.02;
    CHECK_THROWS_AS(check_final_profile(prof, 0.1), PreconditionError);
    CHECK_THROWS_AS(check_final_profile(prof, 1.5), DomainError);
}

TEST_CASE("lemma suite at A = 3")
{
    const auto recs = check_lemma_suite(make_bound_params(3.0));
    REQUIRE(recs.size() == 4);
    for (const auto& r : recs) {
        INFO(r.name);
        CHECK(r.pass);
    }
    CHECK(recs[0].fitted_constant.value() == g_sup(make_bound_params(3.0)));
    const double u_star = recs[1].fitted_constant.value();
    CHECK(u_star >= 0.0);
    CHECK(u_star < 10.0);
    CHECK_THAT(recs[2].fitted_constant.value(), WithinRel(4.0, 0.1));
}

TEST_CASE("lemma suite: the C = 0 counter-sweep fails")
{
    auto p = make_bound_params(3.0);
    p.C_lemma = 0.0;
    const auto recs = check_lemma_suite(p);
    CHECK_FALSE(recs[1].pass);
    // worst violation -(H(G(u)) - u) sits at the smallest tail u, residual ~ -(A+1)/u beyond
    CHECK(recs[1].max_violation > 0.0);
    CHECK_THAT(recs[2].fitted_constant.value(), WithinRel(-4.0, 0.02));
}

TEST_CASE("phi variants side by side")
{
    const auto tr = synthetic(refined_shape);
    const auto rec = check_phi_variants(tr, make_bound_params(3.0), 1e-2, {3.0, 10.0, 20.0, 40.0, 80.0});
    CHECK(rec.pass);
    const double c_log = rec.detail("C_log_refined").value();
    const double c_ode = rec.detail("C_ode_optimal").value();
    CHECK(c_ode <= 2.0 * c_log);
    CHECK(c_log <= 2.0 * c_ode);
    CHECK(rec.detail("A_fit_log_refined").value() == 40.0);
    CHECK(rec.detail("A_fit_ode_optimal").value() == 40.0);
    // the simple φ = 1/(A+s) is smaller than the log-refined one, so it needs at most the same A
    CHECK(rec.detail("A_fit_simple").value() <= 40.0);
    // Simple remainder shape is larger at small q, so its fitted constant is not larger
    CHECK(rec.detail("C_simple").value() <= c_log);
}

TEST_CASE("checks are deterministic")
{
    const auto tr = synthetic(refined_shape);
    const auto p = make_bound_params(3.0);
    VerificationReport a, b;
    a.records = {check_global_estimate(tr, p), check_refined_profile(tr, 4.0), check_j_nonpositive(tr, p)};
    b.records = {check_j_nonpositive(tr, p), check_refined_profile(tr, 4.0), check_global_estimate(tr, p)};
    a.canonicalize();
    b.canonicalize();
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.records.front().name == "global_estimate");
}

TEST_CASE("shrinking the region never raises a fitted constant")
{
    const auto full = synthetic(refined_shape);
    Trace part = full;
    part.snapshots.erase(part.snapshots.begin() + 3, part.snapshots.end() - 3);
    const auto p = make_bound_params(3.0);
    CHECK(*check_refined_profile(part, 4.0).fitted_constant <= *check_refined_profile(full, 4.0).fitted_constant);
    CHECK(*check_refined_profile(full, 2.0).fitted_constant <= *check_refined_profile(full, 4.0).fitted_constant);
}

TEST_CASE("empty traces are rejected")
{
    Trace tr;
    tr.samples.push_back({0.0, 1.0, 0.0});
    CHECK_THROWS_AS(check_hopf(tr), PreconditionError);
}
