#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "spde.hpp"

namespace bdsde {

struct CheckRow {
    std::string name;
    bool pass = true;
    double margin = 0.0;  // >= 0 means satisfied
    double se = 0.0;
    json detail = json::object();
};

struct CheckReport {
    std::string name;
    bool pass = true;
    std::vector<CheckRow> rows;
    json table = json::object();
    std::uint64_t seed = 0;
    std::string config_hash;

    CheckRow& add(CheckRow r) {
        pass = pass && r.pass;
        rows.push_back(std::move(r));
        return rows.back();
    }
    void merge(const CheckReport& o) {
        for (const auto& r : o.rows) {
            CheckRow c = r;
            c.name = o.name + "/" + r.name;
            add(c);
        }
        table[o.name] = o.table;
    }
    json to_json() const {
        json rs = json::array();
        for (const auto& r : rows)
            rs.push_back({{"name", r.name}, {"pass", r.pass}, {"margin", r.margin}, {"se", r.se}, {"detail", r.detail}});
        return {{"name", name}, {"pass", pass}, {"seed", seed}, {"config_hash", config_hash}, {"rows", rs}, {"table", table}};
    }
};

// |mean| <= 3 SE + floor
inline double stat_floor(double ref) { return 1e-9 * (1.0 + std::abs(ref)); }

inline CheckRow within_3se(const std::string& name, double est, double se, double ref) {
    const double tol = 3.0 * se + stat_floor(ref);
    CheckRow r{name, std::abs(est - ref) <= tol, tol - std::abs(est - ref), se, {{"estimate", est}, {"reference", ref}}};
    return r;
}

// ---- a priori bound ----

struct AprioriInput {
    std::vector<double> y_min, y_max;  // per time node 0..N
    TimeGrid grid;
    double xi_sup = 0.0, xi_max = 0.0, xi_min = 0.0;
    double f_sup = 0.0;  // sup |f| on the sampled range, sets the scheme slack
};

inline double scheme_slack(double dt, double f_sup) { return 5.0 * dt * (1.0 + f_sup); }

inline CheckReport check_apriori(const AprioriInput& in, const GrowthProfile& prof) {
    if (!prof.bound_a || !prof.bound_b) throw Error("check_apriori: profile is missing a or b");
    CheckReport rep;
    rep.name = "apriori";
    const double T = in.grid.T;
    const double slack = scheme_slack(in.grid.dt(), in.f_sup);
    const double K = prof.apriori_bound(in.xi_sup, T);
    double ysup = 0.0;
    for (std::size_t i = 0; i < in.y_min.size(); ++i) ysup = std::max({ysup, std::abs(in.y_min[i]), std::abs(in.y_max[i])});
    rep.add({"sup|Y| <= (|xi| + |b|_1) exp(|a+|_1)", ysup <= K + slack, K + slack - ysup, 0.0,
             {{"sup_y", ysup}, {"bound", K}, {"slack", slack}}});

    // one-sided bounds with int_t^T a and int_t^T b exp(int_t^s a)
    double worst_up = std::numeric_limits<double>::infinity(), worst_lo = worst_up;
    for (int i = 0; i <= in.grid.N; ++i) {
        const double t = in.grid.t(i);
        const int m = 200;
        const double hs = (T - t) / m;
        std::vector<double> ia(m + 1, 0.0), integrand(m + 1);
        for (int k = 1; k <= m; ++k)
            ia[k] = ia[k - 1] + 0.5 * hs * (prof.bound_a(t + (k - 1) * hs) + prof.bound_a(t + k * hs));
        for (int k = 0; k <= m; ++k) integrand[k] = prof.bound_b(t + k * hs) * std::exp(ia[k]);
        const double eb = trapezoid(integrand, hs), ea = std::exp(ia[m]);
        const double up = std::max(in.xi_max, 0.0) * ea + eb, lo = std::min(in.xi_min, 0.0) * ea - eb;
        worst_up = std::min(worst_up, up + slack - in.y_max[i]);
        worst_lo = std::min(worst_lo, in.y_min[i] - (lo - slack));
    }
    rep.add({"Y <= upper one-sided bound", worst_up >= 0.0, worst_up, 0.0, {{"slack", slack}}});
    rep.add({"Y >= lower one-sided bound", worst_lo >= 0.0, worst_lo, 0.0, {{"slack", slack}}});
    return rep;
}

inline AprioriInput apriori_input(const BackwardField& F, const ProblemSpec& s, const std::vector<double>& xs,
                                  double f_sup) {
    AprioriInput in{F.y_min, F.y_max, F.grid, terminal_sup(s, xs), -1e300, 1e300, f_sup};
    for (double x : xs) {
        in.xi_max = std::max(in.xi_max, s.h(x));
        in.xi_min = std::min(in.xi_min, s.h(x));
    }
    return in;
}

inline AprioriInput apriori_input(const MappedField& F, const ProblemSpec& s, const std::vector<double>& xs,
                                  double f_sup) {
    auto in = apriori_input(F.base, s, xs, f_sup);
    for (std::size_t i = 0; i < in.y_min.size(); ++i) {
        in.y_min[i] = inverse_point(F.base.y_min[i], 0.0, F.params, int(i)).first;
        in.y_max[i] = inverse_point(F.base.y_max[i], 0.0, F.params, int(i)).first;
    }
    return in;
}

// sup |f| over t in [0,T], y in [-K,K], z in [-zb,zb] at the given states.
inline double f_sup_sampled(const ProblemSpec& s, double K, double zb, const std::vector<double>& xs) {
    double m = 0.0;
    for (double t : linspace(0.0, s.T, 5))
        for (double x : xs)
            for (double y : linspace(-K, K, 21))
                for (double z : linspace(-zb, zb, 21)) m = std::max(m, std::abs(s.f(t, x, y, z)));
    return m;
}

// ---- comparison ----

// Y0 of a problem for one backward path, seed and initial state.
using Y0Solver = std::function<double(const ProblemSpec&, const std::vector<double>& dB, std::uint64_t seed, double x0)>;

struct ComparisonSetup {
    std::vector<std::vector<double>> b_paths;
    std::vector<double> x0s{0.0};
    int seeds = 20;
    std::uint64_t seed0 = 1;
    SampleGrid pre_grid;
    std::vector<double> pre_xs = linspace(-4.0, 4.0, 41);
    bool enforce_pre = true;
};

// Paired (common random numbers) check of y1_0 <= y2_0 + 3 SE per node and backward path.
inline CheckReport check_comparison(const std::string& name, const ProblemSpec& s1, const ProblemSpec& s2,
                                    const ComparisonSetup& cs, const Y0Solver& solve) {
    CheckReport rep;
    rep.name = name;
    rep.seed = cs.seed0;
    double pre = std::numeric_limits<double>::infinity();
    for (double x : cs.pre_xs) pre = std::min(pre, s2.h(x) - s1.h(x));
    for (double t : cs.pre_grid.t)
        for (double x : cs.pre_grid.x)
            for (double y : cs.pre_grid.y)
                for (double z : cs.pre_grid.z) pre = std::min(pre, s2.f(t, x, y, z) - s1.f(t, x, y, z));
    const bool pre_ok = pre >= -1e-12;
    rep.table["precondition_margin"] = pre;
    if (cs.enforce_pre && !pre_ok)
        throw Refused("check_comparison: inputs are not ordered on the sample grid (xi1 <= xi2, f1 <= f2)");
    double worst = std::numeric_limits<double>::infinity(), worst_se = 0.0;
    json nodes = json::array();
    for (std::size_t b = 0; b < cs.b_paths.size(); ++b)
        for (double x0 : cs.x0s) {
            std::vector<double> d, y1s;
            for (int k = 0; k < cs.seeds; ++k) {
                const double y1 = solve(s1, cs.b_paths[b], cs.seed0 + k, x0);
                const double y2 = solve(s2, cs.b_paths[b], cs.seed0 + k, x0);
                d.push_back(y1 - y2);
                y1s.push_back(y1);
            }
            const auto m = mean_se(d);
            const double margin = 3.0 * m.se + stat_floor(mean_se(y1s).mean) - m.mean;
            if (margin < worst) {
                worst = margin;
                worst_se = m.se;
            }
            nodes.push_back({{"b_path", b}, {"x0", x0}, {"mean_diff", m.mean}, {"se", m.se}});
        }
    rep.table["nodes"] = nodes;
    rep.add({"y1 <= y2 + 3SE at all nodes", worst >= 0.0, worst, worst_se, {{"precondition_ok", pre_ok}}});
    return rep;
}

// ---- monotone stability ----

struct SequenceMember {
    std::string label;
    TransformedSpec problem;  // Lipschitz problem in transformed variables
};

struct StabilitySetup {
    std::vector<double> b_path;
    double x0 = 0.0;
    int seeds = 20;
    std::uint64_t seed0 = 1;
    SolverConfig solver;
    TimeGrid grid;
};

// Fixed evaluation nodes: t_i for i in {0, N/4, N/2, 3N/4}, x around x0 scaled by sqrt(t_i).
inline std::vector<std::pair<int, double>> stability_nodes(const TimeGrid& g, double x0, double sigma) {
    std::vector<std::pair<int, double>> out{{0, x0}};
    for (int i : {g.N / 4, g.N / 2, 3 * g.N / 4}) {
        if (i <= 0) continue;
        const double s = sigma * std::sqrt(g.t(i));
        for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) out.push_back({i, x0 + c * s});
    }
    return out;
}

inline CheckReport run_monotone_stability(const std::vector<SequenceMember>& seq, const StabilitySetup& st,
                                          double sigma = 1.0) {
    if (seq.size() < 3) throw Refused("run_monotone_stability: schedule shorter than 3 has no trend");
    CheckReport rep;
    rep.name = "monotone-stability";
    rep.seed = st.seed0;
    const auto nodes = stability_nodes(st.grid, st.x0, sigma);
    const std::size_t K = seq.size(), P = nodes.size();
    // Y[k][seed][node], Z likewise
    std::vector<std::vector<std::vector<double>>> Y(K), Z(K);
    for (std::size_t k = 0; k < K; ++k)
        for (int s = 0; s < st.seeds; ++s) {
            SolverConfig c = st.solver;
            c.seed = st.seed0 + s;
            c.check_lipschitz = false;
            const auto F = inverse_map(solve_lipschitz_bdsde(seq[k].problem.spec, st.b_path, st.grid, c, st.x0),
                                       seq[k].problem.params);
            std::vector<double> y(P), z(P);
            for (std::size_t p = 0; p < P; ++p) {
                const auto v = F.at(nodes[p].first, nodes[p].second);
                y[p] = v.y;
                z[p] = v.z;
            }
            Y[k].push_back(y);
            Z[k].push_back(z);
        }
    double worst = std::numeric_limits<double>::infinity(), worst_se = 0.0;
    std::vector<double> sup_diff, z_l2;
    json y0 = json::array();
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> v;
        for (int s = 0; s < st.seeds; ++s) v.push_back(Y[k][s][0]);
        const auto m = mean_se(v);
        y0.push_back({{"label", seq[k].label}, {"y0", m.mean}, {"se", m.se}});
    }
    for (std::size_t k = 1; k < K; ++k) {
        double sd = 0.0, zl = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            std::vector<double> d;
            for (int s = 0; s < st.seeds; ++s) {
                d.push_back(Y[k][s][p] - Y[k - 1][s][p]);
                zl += std::pow(Z[k][s][p] - Z[k - 1][s][p], 2);
            }
            const auto m = mean_se(d);
            // non-increasing in the sequence index
            const double margin = 3.0 * m.se + stat_floor(Y[k - 1][0][p]) - m.mean;
            if (margin < worst) {
                worst = margin;
                worst_se = m.se;
            }
            sd = std::max(sd, std::abs(m.mean));
        }
        sup_diff.push_back(sd);
        z_l2.push_back(std::sqrt(zl / double(P * st.seeds)));
    }
    rep.add({"Y^n monotone within 3SE", worst >= 0.0, worst, worst_se});
    double dec = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < sup_diff.size(); ++k) dec = std::min(dec, sup_diff[k - 1] - sup_diff[k]);
    rep.add({"sup-differences strictly decreasing", dec > 0.0, dec, 0.0});
    rep.table = {{"y0", y0}, {"sup_differences", sup_diff}, {"z_increment_l2", z_l2}};
    return rep;
}

// ---- stability ----

struct Perturbation {
    std::string label;
    ProblemSpec spec;
    double input_distance = 0.0;
    double bound = std::numeric_limits<double>::infinity();  // optional heuristic bound on the output distance
};

inline CheckReport run_stability(const ProblemSpec& base, const std::vector<Perturbation>& levels,
                                 const ComparisonSetup& cs, const Y0Solver& solve) {
    if (levels.size() < 3) throw Refused("run_stability: need at least 3 perturbation levels");
    CheckReport rep;
    rep.name = "stability";
    rep.seed = cs.seed0;
    std::vector<double> dist, dist_se;
    json tab = json::array();
    for (const auto& lv : levels) {
        double d = 0.0, dse = 0.0;
        for (const auto& b : cs.b_paths)
            for (double x0 : cs.x0s) {
                std::vector<double> diff;
                for (int k = 0; k < cs.seeds; ++k)
                    diff.push_back(solve(lv.spec, b, cs.seed0 + k, x0) - solve(base, b, cs.seed0 + k, x0));
                const auto m = mean_se(diff);
                if (std::abs(m.mean) >= d) {
                    d = std::abs(m.mean);
                    dse = m.se;
                }
            }
        dist.push_back(d);
        dist_se.push_back(dse);
        tab.push_back({{"label", lv.label}, {"input_distance", lv.input_distance}, {"output_distance", d}, {"se", dse}});
        if (std::isfinite(lv.bound))
            rep.add({"bound " + lv.label, d <= lv.bound + 3 * dse, lv.bound + 3 * dse - d, dse});
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < dist.size(); ++k)
        worst = std::min(worst, dist[k - 1] - dist[k] + 3 * std::hypot(dist_se[k - 1], dist_se[k]));
    rep.add({"output distance decreasing", worst >= 0.0, worst, dist_se.back()});
    rep.table["levels"] = tab;
    return rep;
}

}  // namespace bdsde
