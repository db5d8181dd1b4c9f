#include <catch_amalgamated.hpp>

#include "bdsde/spde.hpp"

using namespace bdsde;
using Catch::Approx;

namespace {

ProblemSpec heat(double sigma, double drift = 0.0) {
    ProblemSpec s;
    s.sigma = [sigma](double) { return sigma; };
    s.b = [drift](double) { return drift; };
    return s;
}

std::vector<double> apply_to(const ProblemSpec& s, const SpatialGrid& g, const Fx& u) {
    std::vector<double> v;
    for (double x : g.nodes()) v.push_back(u(x));
    return assemble_L(s, g).apply(v, u(g.x_lo), u(g.x_hi));
}

}  // namespace

TEST_CASE("discrete generator on polynomials") {
    const SpatialGrid g(-2.0, 2.0, 39);
    for (double v : apply_to(heat(std::sqrt(2.0)), g, [](double x) { return x * x; })) CHECK(v == Approx(2.0).epsilon(1e-10));
    for (double v : apply_to(heat(0.0, 1.0), g, [](double x) { return x; })) CHECK(v == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discrete generator is second order on sin") {
    double prev = 0.0;
    std::vector<double> ratios;
    for (int J : {19, 39, 79, 159}) {
        const SpatialGrid g(-3.0, 3.0, J);
        const auto Lu = apply_to(heat(std::sqrt(2.0)), g, [](double x) { return std::sin(x); });
        double e = 0.0;
        const auto xs = g.nodes();
        for (int j = 0; j < J; ++j) e = std::max(e, std::abs(Lu[j] + std::sin(xs[j])));
        if (prev > 0.0) ratios.push_back(prev / e);
        prev = e;
    }
    for (double r : ratios) CHECK(r == Approx(4.0).margin(0.2));
}

TEST_CASE("tridiagonal solve") {
    const auto u = thomas({0, 1, 1}, {4, 4, 4}, {1, 1, 0}, {5, 6, 5});
    for (double v : u) CHECK(v == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("linear terminal value is harmonic") {
    auto s = heat(1.0);
    s.h = [](double x) { return x; };
    const TimeGrid tg(1.0, 200);
    const SpatialGrid xg(-3.0, 3.0, 59);
    for (auto sch : {SpdeScheme::explicit_, SpdeScheme::semi_implicit}) {
        const auto F = solve_spde_path(s, std::vector<double>(200, 0.0), tg, xg, sch);
        for (const auto& row : F.u)
            for (int j = 0; j < xg.J; ++j) CHECK(row[j] == Approx(xg.x(j)).margin(1e-12));
        CHECK(F.at(0, 0.55) == Approx(0.55).margin(1e-12));
    }
}

TEST_CASE("unit driver gives T - t away from the boundary effect") {
    auto s = heat(0.5);
    s.f = [](double, double, double, double) { return 1.0; };
    const TimeGrid tg(1.0, 16);
    const SpatialGrid xg(-4.0, 4.0, 79, Boundary::one_sided_extrapolation);
    const auto F = solve_spde_path(s, std::vector<double>(16, 0.0), tg, xg, SpdeScheme::semi_implicit);
    for (int i = 0; i <= tg.N; ++i)
        for (int j = 0; j < xg.J; ++j) CHECK(F.u[i][j] == Approx(1.0 - tg.t(i)).margin(1e-12));
}

TEST_CASE("constant noise on a linear field is summed exactly") {
    auto s = heat(1.0);
    s.h = [](double x) { return x; };
    s.g = [](double, double, double, double) { return 0.7; };
    const TimeGrid tg(1.0, 10);
    const std::vector<double> dB{0.1, -0.3, 0.2, 0.05, 0.0, -0.1, 0.4, -0.2, 0.1, 0.3};
    const SpatialGrid xg(-3.0, 3.0, 29, Boundary::one_sided_extrapolation);
    const auto F = solve_spde_path(s, dB, tg, xg, SpdeScheme::semi_implicit);
    for (int i = 0; i <= tg.N; ++i) {
        double tail = 0.0;
        for (int k = i; k < tg.N; ++k) tail += dB[k];
        for (int j = 0; j < xg.J; ++j) CHECK(F.u[i][j] == Approx(xg.x(j) + 0.7 * tail).margin(1e-12));
    }
}

TEST_CASE("explicit scheme refuses CFL violations") {
    auto s = heat(1.0);
    const SpatialGrid xg(-3.0, 3.0, 199);
    CHECK_THROWS_AS(solve_spde_path(s, std::vector<double>(4, 0.0), TimeGrid(1.0, 4), xg, SpdeScheme::explicit_), Refused);
    CHECK_NOTHROW(solve_spde_path(s, std::vector<double>(4, 0.0), TimeGrid(1.0, 4), xg, SpdeScheme::semi_implicit));
}

TEST_CASE("blow-up is reported") {
    auto s = heat(0.1);
    s.h = [](double) { return 1.0; };
    s.f = [](double, double, double u, double) { return u * u * 1e300; };
    CHECK_THROWS_AS(solve_spde_path(s, std::vector<double>(4, 0.0), TimeGrid(1.0, 4), SpatialGrid(-1, 1, 9),
                                    SpdeScheme::semi_implicit),
                    BlowUp);
}

TEST_CASE("weighted Sobolev norm") {
    auto zero = heat(0.0);
    const TimeGrid tg(1.0, 4);
    CHECK(sobolev_norm(solve_spde_path(zero, std::vector<double>(4, 0.0), tg, SpatialGrid(-5, 5, 49), SpdeScheme::semi_implicit),
                       WeightFn::poly(4.0)) == 0.0);
    auto one = zero;
    one.h = [](double) { return 1.0; };
    // Trapezoid error at the kink of (1+|x|)^-4 is about dx^2 * 8/12.
    std::vector<double> err;
    for (int J : {3999, 7999}) {
        const SpatialGrid wide(-200.0, 200.0, J);
        const auto F = solve_spde_path(one, std::vector<double>(4, 0.0), tg, wide, SpdeScheme::semi_implicit);
        err.push_back(sobolev_norm(F, WeightFn::poly(4.0)) - 2.0 / 3.0);
    }
    CHECK(std::abs(err[1]) < 3e-3);
    CHECK(err[0] / err[1] == Approx(4.0).margin(0.3));

    auto lin = heat(1.0);
    lin.h = [](double x) { return std::sin(x); };
    auto lin2 = lin;
    lin2.h = [](double x) { return 2.0 * std::sin(x); };
    const SpatialGrid xg(-5.0, 5.0, 99);
    const double n1 = sobolev_norm(solve_spde_path(lin, std::vector<double>(4, 0.0), tg, xg, SpdeScheme::semi_implicit),
                                   WeightFn::exp(1.0));
    const double n2 = sobolev_norm(solve_spde_path(lin2, std::vector<double>(4, 0.0), tg, xg, SpdeScheme::semi_implicit),
                                   WeightFn::exp(1.0));
    CHECK(n2 == Approx(4.0 * n1).epsilon(1e-12));
}

TEST_CASE("weight function constraints") {
    CHECK_THROWS_AS(WeightFn::poly(3.0), IllPosed);
    CHECK_NOTHROW(WeightFn::poly(3.5));
    CHECK_THROWS_AS(WeightFn::exp(0.0), IllPosed);
    const auto w = weight_inv(WeightFn::exp(10.0), {0.0, 1.0, 5.0});
    CHECK(w[0] == 1.0);
    CHECK(w[2] == 0.0);
}

TEST_CASE("bump test functions are smooth and compactly supported") {
    const auto b = bump_test_fn(0.5, 1.0, 2.0);
    CHECK(b.phi(0.0, 1.6) == 0.0);
    CHECK(b.phi(0.0, 0.5) == Approx(std::exp(-1.0)));
    CHECK(b.phi(1.0, 0.5) == Approx(3.0 * std::exp(-1.0)));
    for (double x : linspace(-0.4, 1.4, 19)) {
        CHECK(b.phi_x(0.3, x) == Approx(central_diff([&](double y) { return b.phi(0.3, y); }, x)).margin(1e-7));
        CHECK(b.phi_t(0.3, x) == Approx(central_diff([&](double t) { return b.phi(t, x); }, 0.3)).margin(1e-7));
    }
}

TEST_CASE("weak form residual of the zero solution is zero") {
    const auto s = heat(1.0);
    const TimeGrid tg(1.0, 8);
    const SpatialGrid xg(-3.0, 3.0, 59);
    const std::vector<double> dB(8, 0.1);
    const auto F = solve_spde_path(s, dB, tg, xg, SpdeScheme::semi_implicit);
    for (double r : weak_form_residual(F, {bump_test_fn(0.0, 1.0), bump_test_fn(1.0, 0.5, 1.0)}, dB, s)) CHECK(r == 0.0);
    CHECK_THROWS_AS(weak_form_residual(F, {bump_test_fn(2.5, 1.0)}, dB, s), Refused);
}

TEST_CASE("weak form residual of the exact linear solution shrinks under refinement") {
    auto s = heat(1.0);
    s.h = [](double x) { return x; };
    s.g = [](double, double, double, double) { return 0.4; };
    const CounterRng rng(5, stream::B);
    std::vector<double> fine(64);
    for (int k = 0; k < 64; ++k) fine[k] = std::sqrt(1.0 / 64) * rng.normal(k);
    const std::vector<TestFn> tests{bump_test_fn(0.0, 1.0, 1.0), bump_test_fn(-0.7, 0.8)};
    std::vector<double> r0;
    for (int N : {16, 32, 64}) {
        const auto dB = coarsen_path(fine, N);
        const TimeGrid tg(1.0, N);
        const SpatialGrid xg(-3.0, 3.0, 2 * N - 1, Boundary::one_sided_extrapolation);
        const auto F = solve_spde_path(s, dB, tg, xg, SpdeScheme::semi_implicit);
        r0.push_back(weak_form_residual(F, tests, dB, s)[0]);
    }
    INFO(r0[0] << " " << r0[1] << " " << r0[2]);
    CHECK(r0[1] < r0[0]);
    CHECK(r0[2] < r0[1]);
}

TEST_CASE("Feynman-Kac routes agree for a martingale terminal") {
    ProblemSpec s = heat(1.0);
    s.T = 0.25;
    s.h = [](double x) { return x; };
    s.f = [](double, double, double, double z) { return 0.01 * z * z; };
    s.homogeneous = true;
    GrowthProfile p;
    p.quad_C = 0.01;
    p.alpha = 0.1;
    p.c_of_y = [](double) { return 0.01; };
    FkConfig c;
    c.quad.solver.M = 4000;
    c.quad.solver.degree = 2;
    c.quad.xi_sample = linspace(-3.0, 3.0, 61);
    const TimeGrid tg(0.25, 16);
    const SpatialGrid xg(-3.0, 3.0, 29, Boundary::one_sided_extrapolation);
    const auto r = feynman_kac_compare(s, p, std::vector<double>(16, 0.0), tg, xg, c);
    REQUIRE(!r.x.empty());
    for (std::size_t k = 0; k < r.x.size(); ++k) {
        CHECK(r.u_fd[k] == Approx(r.x[k] + 0.01 * 0.25).margin(2e-3));
        CHECK(r.u_mc[k] == Approx(r.x[k] + 0.01 * 0.25).margin(0.03));
    }
}

TEST_CASE("norm equivalence ratios") {
    const auto still = heat(0.0);
    NormEqConfig c;
    c.M = 100;
    const auto r = estimate_norm_equivalence({[](double x) { return std::exp(-x * x); }, [](double) { return 1.0; }}, still,
                                             TimeGrid(1.0, 4), c);
    for (double v : r.ratios) CHECK(v == Approx(1.0).epsilon(1e-12));

    const auto bm = heat(1.0);
    c.M = 100000;
    c.nx = 41;
    std::vector<double> ratios;
    for (std::uint64_t seed : {1, 2, 3}) {
        c.seed = seed;
        ratios.push_back(estimate_norm_equivalence({[](double x) { return std::abs(x) <= 1.0 ? 1.0 : 0.0; }}, bm,
                                                   TimeGrid(1.0, 10), c)
                             .ratios[0]);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*lo > 0.0);
    CHECK(*hi <= 1.1 * *lo);

    CHECK_THROWS_AS(estimate_norm_equivalence({[](double) { return 0.0; }}, bm, TimeGrid(1.0, 2), c), Refused);
}
