#include <catch_amalgamated.hpp>

#include "bdsde/oracle.hpp"
#include "bdsde/solver.hpp"

using namespace bdsde;
using Catch::Approx;

namespace {

ProblemSpec martingale() {
    ProblemSpec s;
    s.h = [](double x) { return x; };
    return s;
}

}  // namespace

TEST_CASE("martingale terminal reproduces identity field") {
    const TimeGrid g(1.0, 8);
    SolverConfig c;
    c.M = 20000;
    c.degree = 3;
    const auto F = solve_lipschitz_bdsde(martingale(), std::vector<double>(8, 0.0), g, c, 0.0);
    for (int i = 1; i < g.N; ++i)
        for (double x : {-0.5, 0.0, 0.3, 0.5}) {
            const auto v = evaluate_field(F, i, x);
            CHECK(v.y == Approx(x).margin(0.02));
            CHECK(v.z == Approx(1.0).margin(0.05));
        }
    CHECK(evaluate_field(F, 4, 0.3).y == Approx(0.3).margin(0.02));
    CHECK(field_y0(F) == Approx(0.0).margin(0.02));
}

TEST_CASE("unit driver gives T - t with zero Z") {
    ProblemSpec s;
    s.f = [](double, double, double, double) { return 1.0; };
    const TimeGrid g(1.0, 5);
    const auto F = solve_lipschitz_bdsde(s, std::vector<double>(5, 0.1), g, SolverConfig{}, 0.0);
    for (int i = 0; i < g.N; ++i) {
        const auto v = evaluate_field(F, i, 0.2);
        CHECK(v.y == Approx(1.0 - g.t(i)).epsilon(1e-10));
        CHECK(v.z == Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("constant field evaluates to the constant everywhere") {
    ProblemSpec s;
    s.h = [](double) { return -1.25; };
    const TimeGrid g(1.0, 4);
    const auto F = solve_lipschitz_bdsde(s, std::vector<double>(4, 0.3), g, SolverConfig{}, 0.0);
    for (double x : {-50.0, 0.0, 3.0, 50.0}) {
        CHECK(evaluate_field(F, 1, x).y == Approx(-1.25).epsilon(1e-12));
        CHECK(std::abs(evaluate_field(F, 1, x).z) < 1e-10);
    }
}

TEST_CASE("terminal node returns h and sigma h'") {
    auto s = martingale();
    s.h = [](double x) { return std::sin(x); };
    s.sigma = [](double) { return 2.0; };
    const TimeGrid g(1.0, 4);
    const auto F = solve_lipschitz_bdsde(s, std::vector<double>(4, 0.0), g, SolverConfig{}, 0.0);
    const auto v = evaluate_field(F, 4, 0.4);
    CHECK(v.y == std::sin(0.4));
    CHECK(v.z == Approx(2.0 * std::cos(0.4)).epsilon(1e-8));
    CHECK(F.terminal_residual == 0.0);
}

TEST_CASE("out-of-domain evaluation is clamped and flagged") {
    const TimeGrid g(1.0, 4);
    SolverConfig c;
    c.M = 2000;
    const auto F = solve_lipschitz_bdsde(martingale(), std::vector<double>(4, 0.0), g, c, 0.0);
    const auto far = evaluate_field(F, 2, 100.0);
    CHECK(far.clamped);
    CHECK(far.y == Approx(evaluate_field(F, 2, F.basis[2].hi).y));
    CHECK_FALSE(evaluate_field(F, 2, 0.0).clamped);
}

TEST_CASE("linear noise matches the tree on the same backward scenario") {
    ProblemSpec s = martingale();
    s.T = 0.5;
    s.g = [](double, double, double, double z) { return 0.5 * z; };
    const TimeGrid g(0.5, 6);
    const std::uint64_t b = 37;
    const auto dB = tree_b_path(g, b);
    const double ref = solve_tree_for_b(s, g, dB, TreeOptions{}).Y0;
    std::vector<double> y0;
    for (int seed = 1; seed <= 20; ++seed) {
        SolverConfig c;
        c.M = 10000;
        c.seed = seed;
        c.degree = 2;
        y0.push_back(field_y0(solve_lipschitz_bdsde(s, dB, g, c, 0.0, b)));
    }
    const auto ms = mean_se(y0);
    INFO("mean " << ms.mean << " se " << ms.se << " tree " << ref);
    CHECK(std::abs(ms.mean - ref) <= 3.0 * ms.se + 1e-9);
}

TEST_CASE("two-point W with a lattice basis reproduces the tree") {
    ProblemSpec s;
    s.T = 0.5;
    s.h = [](double x) { return std::cos(x); };
    s.f = [](double, double, double y, double z) { return -0.5 * y + 0.3 * std::sin(z); };
    s.g = [](double, double, double y, double z) { return 0.2 * std::sin(y) + 0.25 * z; };
    const TimeGrid g(0.5, 5);
    const auto dB = tree_b_path(g, 11);
    const double ref = solve_tree_for_b(s, g, dB, TreeOptions{}).Y0;
    std::vector<double> y0;
    for (int seed = 1; seed <= 20; ++seed) {
        SolverConfig c;
        c.M = 4000;
        c.seed = seed;
        c.family = BasisFamily::pwlinear;
        c.w_mode = PathMode::two_point;
        y0.push_back(field_y0(solve_lipschitz_bdsde(s, dB, g, c, 0.0, 11)));
    }
    const auto ms = mean_se(y0);
    CHECK(std::abs(ms.mean - ref) <= 3.0 * ms.se + 1e-9 * (1 + std::abs(ref)));
}

TEST_CASE("comparison monotonicity on ordered terminals") {
    auto lo = martingale(), hi = martingale();
    hi.h = [](double x) { return x + 0.2; };
    lo.f = hi.f = [](double, double, double y, double) { return -0.3 * y; };
    const TimeGrid g(1.0, 6);
    const std::vector<double> dB(6, 0.05);
    for (int seed = 1; seed <= 5; ++seed) {
        SolverConfig c;
        c.seed = seed;
        c.M = 5000;
        const auto A = solve_lipschitz_bdsde(lo, dB, g, c, 0.0), B = solve_lipschitz_bdsde(hi, dB, g, c, 0.0);
        for (double x : {-1.0, 0.0, 1.0}) CHECK(evaluate_field(A, 2, x).y <= evaluate_field(B, 2, x).y);
    }
}

TEST_CASE("solver is deterministic in the seed") {
    ProblemSpec s = martingale();
    s.h = [](double x) { return std::tanh(x); };
    const TimeGrid g(1.0, 4);
    SolverConfig c;
    c.M = 3000;
    const std::vector<double> dB{0.1, -0.2, 0.0, 0.3};
    CHECK(field_y0(solve_lipschitz_bdsde(s, dB, g, c, 0.0)) == field_y0(solve_lipschitz_bdsde(s, dB, g, c, 0.0)));
}

TEST_CASE("solver refusals") {
    const TimeGrid g(1.0, 4);
    CHECK_THROWS_AS(solve_lipschitz_bdsde(martingale(), std::vector<double>(3, 0.0), g, SolverConfig{}, 0.0), Error);

    ProblemSpec steep = martingale();
    steep.f = [](double, double, double y, double) { return std::exp(5.0 * y); };
    CHECK_THROWS_AS(solve_lipschitz_bdsde(steep, std::vector<double>(4, 0.0), g, SolverConfig{}, 0.0), IllPosed);

    SolverConfig tiny;
    tiny.M = 3;
    tiny.degree = 6;
    CHECK_THROWS_AS(solve_lipschitz_bdsde(martingale(), std::vector<double>(4, 0.0), g, tiny, 0.0), Error);

    ProblemSpec nan = martingale();
    nan.f = [](double, double, double, double) { return std::nan(""); };
    SolverConfig nocheck;
    nocheck.check_lipschitz = false;
    CHECK_THROWS_AS(solve_lipschitz_bdsde(nan, std::vector<double>(4, 0.0), g, nocheck, 0.0), BlowUp);
}

TEST_CASE("regression basis knots and evaluation") {
    RegressionBasis b;
    b.family = BasisFamily::pwlinear;
    const std::vector<double> x{0.0, 1.0, 1.0, 2.0};
    b.fit_domain(x.data(), 4);
    CHECK(b.knots == std::vector<double>{0.0, 1.0, 2.0});
    std::vector<double> phi(3);
    b.eval(1.5, phi.data());
    CHECK(phi == std::vector<double>{0.0, 0.5, 0.5});
    CHECK(b.eval(-1.0, phi.data()));
}
