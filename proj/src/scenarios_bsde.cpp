#include <cstdio>

#include "bdsde/scenarios.hpp"

namespace bdsde {

namespace {

Gen gen(double (*fn)(double, double, double, double)) { return fn; }

ProblemSpec base_spec(const std::string& name, double T, Fx h) {
    ProblemSpec s;
    s.name = name;
    s.T = T;
    s.h = std::move(h);
    return s;
}

SolverConfig lattice_solver(int M, std::uint64_t seed, Scheme sch = Scheme::explicit_) {
    SolverConfig c;
    c.M = M;
    c.seed = seed;
    c.family = BasisFamily::pwlinear;
    c.w_mode = PathMode::two_point;
    c.scheme = sch;
    c.check_lipschitz = true;
    return c;
}

std::vector<double> tree_b(const TimeGrid& g, int count) {
    // spread the chosen scenarios over the full B-tree
    std::vector<double> ids;
    const std::uint64_t total = 1ull << g.N;
    for (int k = 0; k < count; ++k) ids.push_back(double((std::uint64_t(k) * total) / std::uint64_t(count)));
    return ids;
}

}  // namespace

std::vector<ProblemSpec> lipschitz_suite() {
    std::vector<ProblemSpec> v;
    {
        auto s = base_spec("lip-cos", 1.0, [](double x) { return std::sin(x); });
        s.x0 = 0.2;
        s.f = gen([](double, double, double y, double z) { return 0.5 * std::cos(y) - 0.3 * z; });
        s.g = gen([](double, double, double y, double) { return 0.2 * y + 0.1; });
        v.push_back(s);
    }
    {
        auto s = base_spec("lip-linear", 1.0, [](double x) { return x; });
        s.f = gen([](double, double, double y, double) { return -y + 0.5; });
        s.a0 = gen([](double, double, double, double) { return -1.0; });
        s.b = [](double) { return 0.1; };
        v.push_back(s);
    }
    {
        auto s = base_spec("lip-alpha-z", 0.5, [](double x) { return std::cos(x); });
        s.f = gen([](double, double, double y, double z) { return 0.5 * std::sin(y) + 0.2 * z; });
        s.g = gen([](double, double, double, double z) { return 0.25 * z; });
        v.push_back(s);
    }
    {
        auto s = base_spec("lip-abs-z", 1.0, [](double x) { return std::tanh(2.0 * x); });
        s.f = gen([](double, double, double y, double z) { return -0.5 * y + 0.3 * std::abs(z); });
        s.g = gen([](double, double, double y, double) { return 0.1 * y; });
        s.sigma = [](double x) { return 0.8 + 0.1 * std::cos(x); };
        v.push_back(s);
    }
    {
        auto s = base_spec("lip-affine-g", 1.0, [](double) { return 1.0; });
        s.g = gen([](double, double, double y, double) { return 0.2 + 0.3 * y; });
        v.push_back(s);
    }
    {
        auto s = base_spec("lip-x-dependent", 1.0, [](double x) { return std::sin(x) + 0.5; });
        s.x0 = -0.3;
        s.f = gen([](double t, double x, double y, double z) { return std::cos(x + t) - 0.2 * y + 0.1 * std::sin(z); });
        s.g = gen([](double, double x, double y, double z) { return 0.1 * std::sin(x) * y + 0.2 * z; });
        s.b = [](double x) { return -0.2 * x; };
        v.push_back(s);
    }
    return v;
}

// Solver Y0 (two-point W, lattice basis) against the tree oracle on the same B-tree scenarios,
// averaged over the chosen B scenarios per seed.
CheckReport scenario_oracle_equivalence(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "oracle-equivalence";
    const int N = ctx.steps(6), M = ctx.paths(10000), seeds = int(ctx.num("seeds", 20)), nb = int(ctx.num("b_paths", 8));
    json rows = json::array();
    for (const auto& s : lipschitz_suite()) {
        const TimeGrid g(s.T, N);
        TreeOptions o;
        double tree = 0.0;
        const auto ids = tree_b(g, nb);
        for (double id : ids) tree += solve_tree_for_b(s, g, tree_b_path(g, std::uint64_t(id)), o).Y0 / double(ids.size());
        std::vector<double> est;
        for (int k = 0; k < seeds; ++k) {
            double a = 0.0;
            for (double id : ids) {
                const auto F = solve_lipschitz_bdsde(s, tree_b_path(g, std::uint64_t(id)), g,
                                                     lattice_solver(M, ctx.seed + k), s.x0, std::uint64_t(id));
                a += field_y0(F) / double(ids.size());
            }
            est.push_back(a);
        }
        const auto m = mean_se(est);
        rep.add(within_3se(s.name, m.mean, m.se, tree));
        rows.push_back({{"scenario", s.name}, {"tree", tree}, {"solver", m.mean}, {"se", m.se}});
    }
    rep.table = {{"N", N}, {"M", M}, {"seeds", seeds}, {"b_paths", nb}, {"rows", rows}};
    return rep;
}

// Exponential-transform case: f = C|z|^2, g = alpha z.
CheckReport scenario_example_3_1(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "example-3-1";
    const double C = ctx.num("C", 1.0), al = ctx.num("alpha", 0.25), c = ctx.num("c", 0.7);
    const int N = ctx.steps(6), M = ctx.paths(10000), seeds = int(ctx.num("seeds", 20));
    Config base{{"f", "quad"}, {"g", "alpha_z"}, {"C", std::to_string(C)}, {"alpha", std::to_string(al)}};

    // constant terminal value: the pipeline returns Y = c, Z = 0
    {
        Config k = base;
        k["h"] = "const";
        k["c"] = std::to_string(c);
        k["T"] = "1";
        const auto sb = spec_from_config(k);
        const TimeGrid g(1.0, N);
        QuadConfig qc;
        qc.solver.M = 2000;
        qc.solver.seed = ctx.seed;
        const auto dB = sample_b_path(g, ctx.seed, PathMode::gaussian);
        const auto r = solve_quadratic_bdsde(sb.spec, sb.profile, dB, g, qc, 0.0);
        double ey = 0.0, ez = 0.0;
        for (int i = 0; i <= N; ++i)
            for (double x : linspace(-2.0, 2.0, 9)) {
                const auto v = r.last().at(i, x);
                ey = std::max(ey, std::abs(v.y - c));
                ez = std::max(ez, std::abs(v.z));
            }
        rep.add({"constant xi: |Y - c| <= 1e-10", ey <= 1e-10, 1e-10 - ey, 0.0, {{"max_error", ey}}});
        rep.add({"constant xi: |Z| <= 1e-10", ez <= 1e-10, 1e-10 - ez, 0.0, {{"max_error", ez}}});
    }
    // xi = sin(W_T) against the tree on the untransformed equation, all 2^N B scenarios
    {
        const double T = ctx.num("T", 0.1);
        Config k = base;
        k["h"] = "sin";
        k["T"] = std::to_string(T);
        const auto sb = spec_from_config(k);
        const TimeGrid g(T, N);
        TreeOptions o;
        const auto tree = solve_tree_bdsde(sb.spec, g, o);
        double ref = 0.0;
        for (double y : tree.Y0) ref += y * tree.b_weight();
        std::vector<double> est;
        for (int s = 0; s < seeds; ++s) {
            QuadConfig qc;
            qc.solver = lattice_solver(M, ctx.seed + s);
            double a = 0.0;
            for (std::size_t kb = 0; kb < tree.Y0.size(); ++kb) {
                const auto r = solve_quadratic_bdsde(sb.spec, sb.profile, tree_b_path(g, kb), g, qc, 0.0, kb);
                a += r.y0[0] * tree.b_weight();
            }
            est.push_back(a);
        }
        const auto m = mean_se(est);
        rep.add(within_3se("sin(W_T): pipeline vs quadratic tree", m.mean, m.se, ref));
        rep.table = {{"T", T}, {"N", N}, {"M", M}, {"seeds", seeds}, {"tree_y0", ref}, {"pipeline_y0", m.mean}, {"se", m.se}};
    }
    return rep;
}

// Linear noise case: f = 0, g = H + d y, xi = c. Left-point (implicit) discretisation reproduces
// c e^{d^2 T} + (H/d)(e^{d^2 T} - 1); the right-endpoint scheme has mean c.
CheckReport scenario_example_3_2(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "example-3-2";
    const double c = ctx.num("c", 1.0), H = ctx.num("H", 1.0), T = ctx.num("T", 1.0);
    const int N = ctx.steps(64), MW = ctx.paths(16), seeds = int(ctx.num("seeds", 20)),
              per_seed = int(ctx.num("b_paths", 1000));
    const std::vector<double> ds = cfg_list(ctx.cfg, "d_list", {0.5, 1.0, 1.5});
    const double d_main = ctx.num("d", 1.0);
    const TimeGrid g(T, N);
    json rows = json::array();
    std::vector<double> spreads, maxima;
    auto run = [&](double d, Scheme sch) {
        auto s = base_spec("example-3-2", T, [c](double) { return c; });
        s.g = [H, d](double, double, double y, double) { return H + d * y; };
        std::vector<double> per_seed_mean, all;
        for (int k = 0; k < seeds; ++k) {
            double acc = 0.0;
            for (int j = 0; j < per_seed; ++j) {
                const std::uint64_t id = std::uint64_t(k) * per_seed + j;
                const auto dB = sample_b_path(g, ctx.seed * 1000003ull + id, PathMode::two_point);
                SolverConfig sc;
                sc.M = MW;
                sc.seed = ctx.seed + k;
                sc.degree = 1;
                sc.scheme = sch;
                sc.picard_iters = 60;
                sc.picard_tol = 1e-13;
                const double y0 = field_y0(solve_lipschitz_bdsde(s, dB, g, sc, 0.0, id));
                acc += y0;
                all.push_back(y0);
            }
            per_seed_mean.push_back(acc / per_seed);
        }
        return std::pair{mean_se(per_seed_mean), all};
    };
    const double ref = c * std::exp(d_main * d_main * T) + H / d_main * (std::exp(d_main * d_main * T) - 1.0);
    for (double d : ds) {
        const auto [m, all] = run(d, Scheme::implicit_fg);
        const auto sd = mean_se(all).sd;
        const double mx = *std::max_element(all.begin(), all.end());
        spreads.push_back(sd);
        maxima.push_back(mx);
        const double closed = c * std::exp(d * d * T) + H / d * (std::exp(d * d * T) - 1.0);
        rows.push_back({{"d", d}, {"mean", m.mean}, {"se", m.se}, {"closed_form", closed}, {"spread_sd", sd}, {"max", mx}});
        if (d == d_main) rep.add(within_3se("closed form c e^{d^2T} + (H/d)(e^{d^2T}-1)", m.mean, m.se, ref));
    }
    double grow = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < spreads.size(); ++k) grow = std::min(grow, spreads[k] - spreads[k - 1]);
    rep.add({"per-B spread grows with d", grow > 0.0, grow, 0.0, {{"spread_sd", spreads}, {"max", maxima}}});
    // right-endpoint convention for reference only
    const auto re = [&] {
        auto s = base_spec("example-3-2", T, [c](double) { return c; });
        s.g = [H, d_main](double, double, double y, double) { return H + d_main * y; };
        std::vector<double> v;
        for (int j = 0; j < 2000; ++j) {
            SolverConfig sc;
            sc.M = MW;
            sc.degree = 1;
            v.push_back(field_y0(solve_lipschitz_bdsde(s, sample_b_path(g, 7770000ull + j, PathMode::two_point), g, sc, 0.0)));
        }
        return mean_se(v);
    }();
    rep.table = {{"N", N}, {"rows", rows}, {"closed_form_d", ref},
                 {"right_endpoint_mean", re.mean}, {"right_endpoint_se", re.se}};
    return rep;
}


namespace {

SampleGrid h2_grid(double T) { return SampleGrid::box(T, 5, -3.0, 3.0, 13, -5.0, 5.0, 21, linspace(-3.0, 3.0, 7)); }

struct AprioriCase {
    std::string label;
    SpecBundle sb;
    bool quadratic;
};

std::vector<AprioriCase> apriori_cases() {
    std::vector<AprioriCase> v;
    auto add = [&](const std::string& label, const std::string& text, bool quad) {
        v.push_back({label, spec_from_config(parse_config_text(text)), quad});
    };
    add("constant-terminal", "f = zero\ng = zero\nh = const\nc = 0.8\nT = 1\nalpha = 0.25\n", false);
    add("unit-driver", "f = const\nk = 1\ng = zero\nh = const\nc = 0\nT = 1\nalpha = 0.25\n", false);
    add("example-3-1", "f = quad\ng = alpha_z\nh = sin\nC = 1\nalpha = 0.25\nT = 0.5\n", true);
    add("linear-decay", "f = linear_y\na = -1\nk = 0.5\ng = alpha_sin_y_z\nalpha = 0.3\ng_lip_C = 4\nh = sin\nT = 1\n", false);
    add("growing", "f = linear_y\na = 0.5\nk = 0.2\ng = zero\nh = cos\namp = 0.5\nalpha = 0.25\nT = 1\n", false);
    return v;
}

}  // namespace

CheckReport scenario_apriori(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "apriori";
    const int N = ctx.steps(20), M = ctx.paths(5000);
    json rows = json::array();
    for (const auto& cs : apriori_cases()) {
        const auto& s = cs.sb.spec;
        auto prof = cs.sb.profile;
        if (prof.g_lip_C <= 0.0) prof.g_lip_C = 1.0;
        const auto val = validate_h2(s, prof, h2_grid(s.T));
        if (!val.pass) {
            rows.push_back({{"case", cs.label}, {"h2_validated", false}});
            continue;
        }
        const TimeGrid g(s.T, N);
        const auto dB = sample_b_path(g, ctx.seed + 17, PathMode::gaussian);
        const auto xs = linspace(-6.0, 6.0, 241);
        const double K = prof.apriori_bound(terminal_sup(s, xs), s.T);
        const double fs = f_sup_sampled(s, K, 1.0, linspace(-3.0, 3.0, 7));
        CheckReport r;
        if (cs.quadratic) {
            QuadConfig qc;
            qc.solver.M = M;
            qc.solver.seed = ctx.seed;
            // Lattice W with knots on the lattice: exact projections keep u = exp(beta Y) positive.
            qc.solver.family = BasisFamily::pwlinear;
            qc.solver.w_mode = PathMode::two_point;
            qc.solver.max_knots = 4 * N + 8;
            const auto q = solve_quadratic_bdsde(s, prof, dB, g, qc, s.x0);
            r = check_apriori(apriori_input(q.last(), s, xs, fs), prof);
            if (ctx.artifacts()) write_field_csv(ctx.file("field_apriori_" + cs.label + ".csv"), q.last().base);
        } else {
            SolverConfig sc;
            sc.M = M;
            sc.seed = ctx.seed;
            const auto F = solve_lipschitz_bdsde(s, dB, g, sc, s.x0);
            r = check_apriori(apriori_input(F, s, xs, fs), prof);
            if (ctx.artifacts()) write_field_csv(ctx.file("field_apriori_" + cs.label + ".csv"), F);
        }
        r.name = cs.label;
        rep.merge(r);
        rows.push_back({{"case", cs.label}, {"h2_validated", true}, {"bound", K}, {"slack", scheme_slack(g.dt(), fs)}});
    }
    rep.table["cases"] = rows;
    return rep;
}

// Y0 of a problem via the regression solver or the exact-transform pipeline.
static Y0Solver lipschitz_y0(int N, int M) {
    return [N, M](const ProblemSpec& s, const std::vector<double>& dB, std::uint64_t seed, double x0) {
        SolverConfig c;
        c.M = M;
        c.seed = seed;
        return field_y0(solve_lipschitz_bdsde(s, dB, TimeGrid(s.T, N), c, x0));
    };
}

static Y0Solver quadratic_y0(int N, int M, GrowthProfile prof) {
    return [N, M, prof](const ProblemSpec& s, const std::vector<double>& dB, std::uint64_t seed, double x0) {
        QuadConfig qc;
        qc.solver.M = M;
        qc.solver.seed = seed;
        return solve_quadratic_bdsde(s, prof, dB, TimeGrid(s.T, N), qc, x0).y0[0];
    };
}

CheckReport scenario_str_feasibility(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "str-feasibility";
    const double C = ctx.num("C", 1.0), al = ctx.num("alpha", 0.3), M = ctx.num("M", 1.0);
    const auto As = linspace(ctx.num("A_lo", 1.5), ctx.num("A_hi", 10.0), int(ctx.num("A_n", 18)));
    const auto Ls = linspace(ctx.num("lambda_lo", 0.5), ctx.num("lambda_hi", 20.0), int(ctx.num("lambda_n", 40)));
    try {
        const auto s = search_comparison_phi(C, al, M, As, Ls, 1000);
        rep.add({"feasible (A, lambda, delta > 0)", s.diag.feasible, s.diag.delta, 0.0,
                 {{"A", s.best.A}, {"lambda", s.best.lambda}}});
        rep.add({"w > 0, w' > 0, w'' < 0 on 1000 points", s.diag.signs_ok,
                 std::min({s.diag.min_w, s.diag.min_w1, -s.diag.max_w2}), 0.0});
        rep.table = {{"A", s.best.A},           {"lambda", s.best.lambda}, {"delta", s.diag.delta},
                     {"candidates", s.candidates}, {"feasible", s.feasible}, {"diagnostics", s.diag.to_json()}};
    } catch (const Refused& e) {
        rep.add({"feasible (A, lambda, delta > 0)", false, -1.0, 0.0, {{"error", e.what()}}});
    }
    return rep;
}

CheckReport scenario_comparison(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "comparison";
    const int N = ctx.steps(10), M = ctx.paths(2000), seeds = int(ctx.num("seeds", 20));
    ComparisonSetup cs;
    cs.seeds = seeds;
    cs.seed0 = ctx.seed;
    cs.x0s = {-0.5, 0.0, 0.5};
    const TimeGrid g(1.0, N);
    for (int k = 0; k < 2; ++k) cs.b_paths.push_back(sample_b_path(g, ctx.seed + 100 + k, PathMode::gaussian));
    cs.pre_grid = h2_grid(1.0);

    // tree oracle: xi1 = 0 <= xi2 = 1 with a shared Lipschitz driver, exact ordering on every B scenario
    {
        auto s1 = lipschitz_suite()[0];
        auto s2 = s1;
        s1.h = [](double) { return 0.0; };
        s2.h = [](double) { return 1.0; };
        const TimeGrid tg(1.0, 6);
        TreeOptions o;
        const auto a = solve_tree_bdsde(s1, tg, o), b = solve_tree_bdsde(s2, tg, o);
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < a.paths.size(); ++k)
            for (int i = 0; i <= tg.N; ++i)
                for (std::size_t n = 0; n < a.paths[k].Y[i].size(); ++n)
                    worst = std::min(worst, b.paths[k].Y[i][n] - a.paths[k].Y[i][n]);
        rep.add({"tree: xi1 = 0 <= xi2 = 1", worst >= 0.0, worst, 0.0});
    }
    // Lipschitz pair: f2 = f1 + 0.3, shared g
    {
        auto s1 = lipschitz_suite()[3];
        auto s2 = s1;
        s2.f = [f = s1.f](double t, double x, double y, double z) { return f(t, x, y, z) + 0.3; };
        rep.merge(check_comparison("lipschitz f1 <= f2", s1, s2, cs, lipschitz_y0(N, M)));
        // negative control: reversed order, precondition not enforced
        ComparisonSetup rev = cs;
        rev.enforce_pre = false;
        auto neg = check_comparison("negative control (reversed)", s2, s1, rev, lipschitz_y0(N, M));
        rep.add({"negative control fails", !neg.pass, neg.rows[0].margin < 0 ? -neg.rows[0].margin : neg.rows[0].margin,
                 neg.rows[0].se, {{"reversed_pass", neg.pass}, {"precondition_margin", neg.table["precondition_margin"]}}});
        bool refused = false;
        try {
            check_comparison("refuse", s2, s1, cs, lipschitz_y0(N, M));
        } catch (const Refused&) {
            refused = true;
        }
        rep.add({"reversed inputs refused by precondition", refused, refused ? 0.0 : -1.0, 0.0});
    }
    // Lipschitz pair on terminal values
    {
        auto s1 = lipschitz_suite()[5];
        auto s2 = s1;
        s1.h = [](double x) { return std::sin(x) - 0.2; };
        rep.merge(check_comparison("lipschitz xi1 <= xi2", s1, s2, cs, lipschitz_y0(N, M)));
    }
    // quadratic pair: f1 = f2 - 0.5, exact-transform pipeline
    {
        const auto sb = spec_from_config(parse_config_text(
            "f = sin_y_quad\nfamp = 0.5\ng = alpha_z\nh = sin\namp = 0.5\nC = 0.5\nalpha = 0.25\nT = 0.5\n"));
        auto s2 = sb.spec;
        auto s1 = s2;
        s1.f = [f = s2.f](double t, double x, double y, double z) { return f(t, x, y, z) - 0.5; };
        auto prof = sb.profile;
        prof.bound_b = [](double) { return 1.0; };
        ComparisonSetup q = cs;
        q.b_paths.clear();
        const TimeGrid qg(s2.T, N);
        for (int k = 0; k < 2; ++k) q.b_paths.push_back(sample_b_path(qg, ctx.seed + 200 + k, PathMode::gaussian));
        q.pre_grid = h2_grid(s2.T);
        rep.merge(check_comparison("quadratic f1 = f2 - 0.5", s1, s2, q, quadratic_y0(N, M, prof)));
    }
    rep.merge(scenario_str_feasibility(ctx));
    return rep;
}

namespace {

struct MonotoneSetup {
    SpecBundle sb;
    double M;
    std::vector<int> schedule;
    double v_box;
};

MonotoneSetup monotone_setup(const RunContext& ctx) {
    MonotoneSetup m{spec_from_config(parse_config_text(
                        "f = sin_y_quad\ng = alpha_sin_y_z\nh = tanh\namp = 0.25\nhk = 12\nC = 1\nalpha = 0.3\nT = 0.25\n")),
                    0.0, {4, 8, 16, 32}, ctx.num("v_box", 12.0)};
    const auto sched = cfg_list(ctx.cfg, "schedule", {4, 8, 16, 32});
    m.schedule.assign(sched.begin(), sched.end());
    QuadConfig qc;
    m.M = quad_bound_M(m.sb.spec, m.sb.profile, qc);
    return m;
}

StabilitySetup monotone_stability_setup(const RunContext& ctx, double T) {
    StabilitySetup st;
    st.grid = TimeGrid(T, ctx.steps(12));
    st.b_path = sample_b_path(st.grid, ctx.seed + 31, PathMode::gaussian);
    st.seeds = int(ctx.num("seeds", 20));
    st.seed0 = ctx.seed;
    st.solver.M = ctx.paths(2000);
    st.solver.family = BasisFamily::pwlinear;
    st.solver.max_knots = 32;
    return st;
}

}  // namespace

CheckReport scenario_monotone(const RunContext& ctx) {
    const auto m = monotone_setup(ctx);
    const auto st = monotone_stability_setup(ctx, m.sb.spec.T);
    const double h = 1.0 / (4.0 * *std::max_element(m.schedule.begin(), m.schedule.end()));
    CheckReport rep;
    rep.name = "monotone";
    {
        std::vector<SequenceMember> seq;
        for (int n : m.schedule)
            seq.push_back({"n=" + std::to_string(n),
                           lipschitz_transformed_spec(m.sb.spec, m.sb.profile, Pipeline::approx_sequence, m.M, n, m.v_box, h)});
        auto r = run_monotone_stability(seq, st);
        r.name = "sup-convolution schedule";
        rep.merge(r);
    }
    // negative control: the first member is pushed below the second
    {
        std::vector<SequenceMember> seq;
        for (int n : {8, 16, 32}) {
            auto ts = lipschitz_transformed_spec(m.sb.spec, m.sb.profile, Pipeline::approx_sequence, m.M, n, m.v_box, h);
            seq.push_back({"n=" + std::to_string(n), ts});
        }
        auto low = seq[0].problem.spec.f;
        seq[0].problem.spec.f = [low](double t, double x, double u, double v) { return low(t, x, u, v) - 0.5; };
        seq[0].label = "n=8 lowered";
        StabilitySetup s2 = st;
        s2.seeds = 5;
        const auto r = run_monotone_stability(seq, s2);
        rep.add({"negative control (f1 < f2) fails", !r.rows[0].pass, std::abs(r.rows[0].margin), r.rows[0].se,
                 {{"control_pass", r.rows[0].pass}}});
    }
    rep.table["M"] = m.M;
    rep.table["v_box"] = m.v_box;
    rep.table["spacing"] = h;
    return rep;
}

// Stability in the terminal value and the driver: xi + 1/k and f + 1/k, k in {2, 4, 8}.
CheckReport scenario_stability(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "stability";
    const int N = ctx.steps(10), M = ctx.paths(2000);
    ComparisonSetup cs;
    cs.seeds = int(ctx.num("seeds", 20));
    cs.seed0 = ctx.seed;
    cs.x0s = {-0.5, 0.0, 0.5};
    const auto base = lipschitz_suite()[3];
    const TimeGrid g(base.T, N);
    cs.b_paths = {sample_b_path(g, ctx.seed + 41, PathMode::gaussian)};
    GrowthProfile prof;
    prof.bound_a = [](double) { return -0.5; };
    const double ea = std::exp(prof.a_plus_L1(base.T));
    std::vector<Perturbation> xi_lv, f_lv, same;
    for (int k : {2, 4, 8}) {
        auto s = base;
        s.h = [h = base.h, k](double x) { return h(x) + 1.0 / k; };
        xi_lv.push_back({"xi+1/" + std::to_string(k), s, 1.0 / k, ea / k});
        auto t = base;
        t.f = [f = base.f, k](double a, double x, double y, double z) { return f(a, x, y, z) + 1.0 / k; };
        f_lv.push_back({"f+1/" + std::to_string(k), t, 1.0 / k});
        same.push_back({"identity", base, 0.0, 0.0});
    }
    auto a = run_stability(base, xi_lv, cs, lipschitz_y0(N, M));
    a.name = "terminal perturbation";
    rep.merge(a);
    auto b = run_stability(base, f_lv, cs, lipschitz_y0(N, M));
    b.name = "driver perturbation";
    rep.merge(b);
    cs.seeds = 3;
    auto c = run_stability(base, same, cs, lipschitz_y0(N, M));
    c.name = "zero perturbation";
    rep.merge(c);
    return rep;
}

// RMS over all W-branches and a sample of two-point B paths of the discrete Ito residual
// for Phi = exp(beta .) along the tree solution of f = C|z|^2, g = alpha z.
CheckReport scenario_ito_residual(const RunContext& ctx) {
    CheckReport rep;
    rep.name = "ito-residual";
    const double C = ctx.num("C", 1.0), al = ctx.num("alpha", 0.25), T = ctx.num("T", 0.5);
    const int nb = int(ctx.num("b_paths", 16));
    const auto Ns = cfg_list(ctx.cfg, "N_list", {4, 8, 16});
    auto s = base_spec("ito", T, [](double x) { return std::sin(x); });
    s.f = [C](double, double, double, double z) { return C * z * z; };
    s.g = [al](double, double, double, double z) { return al * z; };
    const double be = beta_for(C, al, TransformVariant::simple);
    auto Phi = [be](double y) { return std::exp(be * y); };
    auto d1 = [be](double y) { return be * std::exp(be * y); };
    auto d2 = [be](double y) { return be * be * std::exp(be * y); };
    std::vector<double> rms;
    for (double Nd : Ns) {
        const int N = int(Nd);
        const TimeGrid g(T, N);
        const double dt = g.dt(), sq = std::sqrt(dt);
        double ss = 0.0;
        double cnt = 0.0;
        TreeOptions o;
        o.n_max = 20;
        for (int kb = 0; kb < nb; ++kb) {
            const auto dB = sample_b_path(g, ctx.seed * 7919ull + kb, PathMode::two_point);
            const auto t = solve_tree_for_b(s, g, dB, o);
            std::vector<double> a(N + 1), b(N), c(N), d(N), dW(N);
            for (std::uint64_t w = 0; w < (1ull << N); ++w) {
                for (int i = 0; i <= N; ++i) a[i] = t.Y[i][BTreeSolution::node(w, i)];
                for (int i = 0; i < N; ++i) {
                    const auto k = BTreeSolution::node(w, i), kn = BTreeSolution::node(w, i + 1);
                    const double z = t.Z[i][k], t1 = g.t(i + 1);
                    b[i] = -0.5 * (s.f(t1, t.X[i + 1][2 * k], t.Y[i + 1][2 * k], z) +
                                   s.f(t1, t.X[i + 1][2 * k + 1], t.Y[i + 1][2 * k + 1], z));
                    c[i] = -s.g(t1, t.X[i + 1][kn], t.Y[i + 1][kn], t.Z[i + 1][kn]);
                    d[i] = z;
                    dW[i] = ((w >> i) & 1) ? sq : -sq;
                }
                const double r = ito_residual(Phi, d1, d2, a, b, c, d, dW, dB, dt);
                ss += r * r;
                cnt += 1.0;
            }
        }
        rms.push_back(std::sqrt(ss / cnt));
    }
    for (std::size_t k = 1; k < rms.size(); ++k) {
        const double ratio = rms[k - 1] / rms[k];
        rep.add({"ratio N=" + std::to_string(int(Ns[k - 1])) + "->" + std::to_string(int(Ns[k])) + " in [1.4, 2.6]",
                 ratio >= 1.4 && ratio <= 2.6, std::min(ratio - 1.4, 2.6 - ratio), 0.0, {{"ratio", ratio}}});
    }
    rep.table = {{"N", Ns}, {"rms_residual", rms}, {"beta", be}, {"b_paths", nb}};
    return rep;
}

}  // namespace bdsde
