#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdsde/scenarios.hpp"

using namespace bdsde;
using Catch::Approx;

namespace {

AprioriInput flat_input(double y, const TimeGrid& g, double xi) {
    AprioriInput in;
    in.grid = g;
    in.y_min.assign(g.N + 1, y);
    in.y_max.assign(g.N + 1, y);
    in.xi_sup = std::abs(xi);
    in.xi_max = in.xi_min = xi;
    return in;
}

Y0Solver tree_solver() {
    return [](const ProblemSpec& s, const std::vector<double>& dB, std::uint64_t, double x0) {
        auto sp = s;
        sp.x0 = x0;
        return solve_tree_for_b(sp, TimeGrid(s.T, int(dB.size())), dB, TreeOptions{}).Y0;
    };
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("a priori bound attained by constant terminal") {
    const TimeGrid g(1.0, 10);
    GrowthProfile p;
    const auto r = check_apriori(flat_input(0.7, g, 0.7), p);
    CHECK(r.pass);
    CHECK(r.rows[0].detail["bound"] == Approx(0.7));
    // slack is 5 dt = 0.5
    CHECK(check_apriori(flat_input(1.19, g, 0.7), p).pass);
    CHECK_FALSE(check_apriori(flat_input(1.21, g, 0.7), p).pass);
}

TEST_CASE("a priori bound for unit driver from the tree") {
    ProblemSpec s;
    s.f = [](double, double, double, double) { return 1.0; };
    const TimeGrid g(1.0, 6);
    const auto sol = solve_tree_for_b(s, g, tree_b_path(g, 0), TreeOptions{});
    AprioriInput in = flat_input(0.0, g, 0.0);
    for (int i = 0; i <= g.N; ++i) {
        in.y_min[i] = *std::min_element(sol.Y[i].begin(), sol.Y[i].end());
        in.y_max[i] = *std::max_element(sol.Y[i].begin(), sol.Y[i].end());
    }
    in.f_sup = 1.0;
    GrowthProfile p;
    p.bound_b = [](double) { return 1.0; };
    const auto r = check_apriori(in, p);
    CHECK(r.pass);
    CHECK(r.rows[0].detail["bound"] == Approx(1.0));
    CHECK(r.rows[0].detail["sup_y"] == Approx(1.0));
}

TEST_CASE("a priori check needs both profile bounds") {
    GrowthProfile p;
    p.bound_b = nullptr;
    CHECK_THROWS_AS(check_apriori(flat_input(0.0, TimeGrid(1.0, 2), 0.0), p), Error);
}

TEST_CASE("three-SE rows") {
    CHECK(within_3se("x", 1.0, 0.1, 1.29).pass);
    CHECK_FALSE(within_3se("x", 1.0, 0.1, 1.31).pass);
    CHECK(within_3se("x", 2.0, 0.0, 2.0).pass);
}

TEST_CASE("report merge prefixes row names and propagates failure") {
    CheckReport a, b;
    a.name = "a";
    b.name = "b";
    a.add({"ok", true});
    b.add({"bad", false});
    a.merge(b);
    CHECK_FALSE(a.pass);
    CHECK(a.rows.back().name == "b/bad");
    CHECK(a.to_json()["rows"].size() == 2);
}

TEST_CASE("comparison on the tree: ordered terminal values") {
    ProblemSpec lo, hi;
    lo.h = [](double) { return 0.0; };
    hi.h = [](double) { return 1.0; };
    lo.f = hi.f = [](double, double, double y, double z) { return -0.5 * y + 0.2 * std::sin(z); };
    lo.g = hi.g = [](double, double, double, double z) { return 0.3 * z; };
    const TimeGrid g(1.0, 4);
    ComparisonSetup cs;
    for (std::uint64_t b = 0; b < 16; ++b) cs.b_paths.push_back(tree_b_path(g, b));
    cs.seeds = 1;
    cs.pre_grid = SampleGrid::box(1.0, 3, -2, 2, 5, -2, 2, 5);
    const auto r = check_comparison("tree", lo, hi, cs, tree_solver());
    CHECK(r.pass);
    for (const auto& n : r.table["nodes"]) CHECK(n["mean_diff"].get<double>() < 0.0);
}

TEST_CASE("identical specs compare equal") {
    ProblemSpec s;
    s.h = [](double x) { return std::cos(x); };
    const TimeGrid g(1.0, 3);
    ComparisonSetup cs;
    cs.b_paths = {tree_b_path(g, 5)};
    cs.seeds = 1;
    const auto r = check_comparison("same", s, s, cs, tree_solver());
    CHECK(r.pass);
    CHECK(r.table["nodes"][0]["mean_diff"] == 0.0);
}

TEST_CASE("comparison refuses unordered inputs and the unenforced run fails") {
    ProblemSpec lo, hi;
    lo.h = [](double) { return 1.0; };
    hi.h = [](double) { return 0.0; };
    const TimeGrid g(1.0, 3);
    ComparisonSetup cs;
    cs.b_paths = {tree_b_path(g, 1)};
    cs.seeds = 1;
    CHECK_THROWS_AS(check_comparison("rev", lo, hi, cs, tree_solver()), Refused);
    cs.enforce_pre = false;
    CHECK_FALSE(check_comparison("rev", lo, hi, cs, tree_solver()).pass);
}

TEST_CASE("monotone stability needs three members") {
    StabilitySetup st;
    st.grid = TimeGrid(1.0, 4);
    CHECK_THROWS_AS(run_monotone_stability({}, st), Refused);
}

TEST_CASE("monotone stability: constant sequence and injected violation") {
    ProblemSpec s;
    s.T = 0.5;
    s.h = [](double x) { return 0.3 * std::tanh(x); };
    s.f = [](double, double, double, double z) { return z * z; };
    s.g = [](double, double, double, double z) { return 0.2 * z; };
    const auto p = make_transform(1.0, 0.2, TransformVariant::simple, 1.0);
    const auto base = transform_problem(s, p);
    StabilitySetup st;
    st.grid = TimeGrid(0.5, 6);
    st.b_path = tree_b_path(st.grid, 9);
    st.seeds = 5;
    st.solver.M = 2000;
    st.solver.degree = 3;
    const auto same = run_monotone_stability({{"a", base}, {"b", base}, {"c", base}}, st);
    for (double d : same.table["sup_differences"]) CHECK(d == 0.0);
    CHECK(same.rows[0].pass);

    auto lifted = base;
    const Gen f0 = base.spec.f;
    lifted.spec.f = [f0](double t, double x, double u, double v) { return f0(t, x, u, v) + 0.5 * u; };
    const auto bad = run_monotone_stability({{"a", base}, {"b", lifted}, {"c", base}}, st);
    CHECK_FALSE(bad.rows[0].pass);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("stability on the tree with shifted terminal values") {
    ProblemSpec base;
    base.h = [](double x) { return std::sin(x); };
    base.f = [](double, double, double y, double) { return -y; };
    const TimeGrid g(1.0, 4);
    ComparisonSetup cs;
    cs.b_paths = {tree_b_path(g, 3), tree_b_path(g, 12)};
    cs.seeds = 1;
    std::vector<Perturbation> lv;
    for (int k : {2, 4, 8}) {
        auto s = base;
        s.h = [k](double x) { return std::sin(x) + 1.0 / k; };
        lv.push_back({"k=" + std::to_string(k), s, 1.0 / k, 1.0 / k});
    }
    const auto r = run_stability(base, lv, cs, tree_solver());
    CHECK(r.pass);
    CHECK_THROWS_AS(run_stability(base, {lv[0]}, cs, tree_solver()), Refused);
}

TEST_CASE("registry lists every scenario and rejects unknown names") {
    for (const char* n : {"example-3-1", "example-3-2", "apriori", "comparison", "monotone", "stability", "simple-spde",
                          "general-fk", "norm-equivalence", "ito-residual"})
        CHECK_NOTHROW(find_scenario(n));
    try {
        find_scenario("nope");
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string m = e.what();
        CHECK(m.find("example-3-1") != std::string::npos);
        CHECK(m.find("ito-residual") != std::string::npos);
    }
}

TEST_CASE("config hash depends on config and seed") {
    Config a{{"steps", "8"}}, b{{"steps", "9"}};
    CHECK(config_hash(a, 1) == config_hash(a, 1));
    CHECK(config_hash(a, 1) != config_hash(a, 2));
    CHECK(config_hash(a, 1) != config_hash(b, 1));
}

TEST_CASE("validate_config runs the H2 validator") {
    const auto ok = validate_config(parse_config_text("f = quad\ng = alpha_z\nalpha = 0.25\nC = 1\nh = sin\nT = 1\n"));
    CHECK(ok.pass);
    const auto bad = validate_config(parse_config_text("f = quad\ng = alpha_z\nalpha = 0.25\nC = 0.5\nh = sin\n"
                                                       "T = 1\nquad_C_override = 1\n"));
    CHECK(bad.name == "H2");
}

TEST_CASE("scenario reports replay bit-identically") {
    const auto dir = std::filesystem::temp_directory_path() / "bdsde_harness_replay";
    std::filesystem::remove_all(dir);
    RunContext c1, c2;
    c1.seed = c2.seed = 17;
    c1.out_dir = (dir / "a").string();
    c2.out_dir = (dir / "b").string();
    const auto r1 = run_scenario("apriori", c1);
    const auto r2 = run_scenario("apriori", c2);
    CHECK(r1.to_json().dump() == r2.to_json().dump());
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
    CHECK(slurp(dir / "a" / "summary.csv").rfind("name,pass,margin,se\n", 0) == 0);
    CHECK(r1.seed == 17);
    CHECK_FALSE(r1.config_hash.empty());
    std::filesystem::remove_all(dir);
}
