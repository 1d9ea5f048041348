// Randomized invariants with a fixed seed.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "blowuplab/bounds.hpp"
#include "blowuplab/integrate.hpp"
#include "blowuplab/mesh.hpp"

using namespace blowuplab;

namespace {
std::mt19937_64 rng(20240611);

double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
} // namespace

TEST_CASE("phi is positive and decreasing for every admissible A")
{
    for (int trial = 0; trial < 50; ++trial) {
        const double A = uniform(std::numbers::e, 40.0);
        for (auto v : {PhiVariant::LogRefined, PhiVariant::Simple}) {
            const auto p = make_bound_params(A, v);
            double prev = phi(0.0, p);
            for (double s = 0.5; s < 500.0; s *= 1.7) {
                const double cur = phi(s, p);
                REQUIRE(cur > 0.0);
                REQUIRE(cur < prev);
                prev = cur;
            }
        }
        const auto p = make_bound_params(A);
        for (double s = 1e-3; s < 1e6; s *= 3.1) REQUIRE(ode_defect(s, p) <= 0.0);
    }
}

TEST_CASE("G is a decreasing bijection and g_inverse round-trips")
{
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = make_bound_params(uniform(std::numbers::e, 30.0));
        for (int k = 0; k < 20; ++k) {
            const double u = uniform(0.0, 100.0);
            REQUIRE(g_value(u + 0.01, p) < g_value(u, p));
            const double back = g_inverse(g_value(u, p), p);
            REQUIRE(std::abs(back - u) <= 1e-12 * std::max(u, 1.0));
        }
    }
}

TEST_CASE("graded grids respect their grading for random parameters")
{
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + trial % 4;
        const double R = uniform(0.5, 5.0);
        const double h = std::pow(10.0, uniform(-9.0, -3.0));
        const double q = uniform(1.01, 1.08);
        const auto g = build_grid(n, R, h, q, 20000, uniform(0.005, 0.05));
        REQUIRE(g.nodes.front() == 0.0);
        REQUIRE(g.nodes.back() == R);
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            REQUIRE(g.spacing(i) > 0.0);
            REQUIRE(g.spacing(i) >= h * (1 - 1e-12));
        }
    }
}

TEST_CASE("one step keeps data nonnegative and radially nonincreasing")
{
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 3;
        auto g = std::make_shared<const RadialGrid>(build_grid(n, 1.0, 1e-6, 1.05, 20000, 0.02));
        Field f{g, {}, 0.0};
        const double a = uniform(0.5, 15.0);
        const double w = uniform(0.2, 1.0);
        for (double r : g->nodes) f.values.push_back(a * std::max(0.0, 1.0 - r * r / (w * w)));
        f.values.back() = 0.0;
        const double dt = uniform(0.01, 0.9) * std::exp(-a);
        const auto next = step(f, dt);
        for (double v : next.values) REQUIRE(v >= 0.0);
        REQUIRE(next.nonincreasing(1e-10 * a));
        REQUIRE(next.at_origin() > 0.0);
    }
}

TEST_CASE("Thomas solve inverts random diagonally dominant systems")
{
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t N = 5 + static_cast<std::size_t>(uniform(0.0, 300.0));
        TridiagonalSystem sys;
        sys.lower.resize(N);
        sys.diag.resize(N);
        sys.upper.resize(N);
        std::vector<double> x(N);
        for (std::size_t i = 0; i < N; ++i) {
            sys.lower[i] = i ? -uniform(0.0, 1.0) : 0.0;
            sys.upper[i] = i + 1 < N ? -uniform(0.0, 1.0) : 0.0;
            sys.diag[i] = std::abs(sys.lower[i]) + std::abs(sys.upper[i]) + uniform(0.01, 1.0);
            x[i] = uniform(-1.0, 1.0);
        }
        const auto y = sys.solve(sys.multiply(x));
        for (std::size_t i = 0; i < N; ++i) REQUIRE(std::abs(y[i] - x[i]) < 1e-9);
    }
}
