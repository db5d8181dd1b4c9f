#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "paths.hpp"
#include "scheme.hpp"

namespace bdsde {

struct TreeOptions {
    Scheme scheme = Scheme::explicit_;
    int max_iter = 50;
    double tol = 1e-12;
    int n_max = N_MAX;
    // Node arrays are kept per backward scenario only up to this N.
    int keep_nodes_upto = 8;
};

// Solution on the W-tree for one backward path. Level i holds 2^i nodes;
// node k at level i has children 2k (dW < 0) and 2k+1 (dW > 0).
struct BTreeSolution {
    std::vector<double> dB;
    std::vector<std::vector<double>> X, Y, Z;
    double Y0 = 0.0;

    // Node index at level i along W-path w (bit j of w is the sign of step j).
    static std::uint64_t node(std::uint64_t w, int i) {
        std::uint64_t k = 0;
        for (int j = 0; j < i; ++j) k = 2 * k + ((w >> j) & 1);
        return k;
    }
};

struct TreeSolution {
    TimeGrid grid;
    std::vector<double> Y0;              // one per backward scenario
    std::vector<BTreeSolution> paths;    // empty when N > keep_nodes_upto
    double b_weight() const { return 1.0 / double(Y0.size()); }
};

namespace detail {

inline std::vector<std::vector<double>> forward_tree(const ProblemSpec& s, const TimeGrid& grid) {
    const double dt = grid.dt(), sq = std::sqrt(dt);
    std::vector<std::vector<double>> X(grid.N + 1);
    X[0] = {s.x0};
    for (int i = 0; i < grid.N; ++i) {
        X[i + 1].resize(X[i].size() * 2);
        for (std::size_t k = 0; k < X[i].size(); ++k) {
            X[i + 1][2 * k] = euler_step(s, X[i][k], dt, -sq);
            X[i + 1][2 * k + 1] = euler_step(s, X[i][k], dt, sq);
        }
        for (double v : X[i + 1])
            if (!std::isfinite(v)) throw BlowUp("solve_tree_bdsde: forward blow-up", i + 1);
    }
    return X;
}

template <class Fn>
double fixed_point(Fn&& F, double y, const TreeOptions& o) {
    for (int it = 0; it < o.max_iter; ++it) {
        const double yn = F(y);
        if (!std::isfinite(yn)) break;
        if (std::abs(yn - y) <= o.tol * std::max(1.0, std::abs(yn))) return yn;
        y = yn;
    }
    throw NonConvergence("solve_tree_bdsde: fixed point did not converge; dt too large for the generator");
}

}  // namespace detail

inline BTreeSolution solve_tree_for_b(const ProblemSpec& spec, const TimeGrid& grid, const std::vector<double>& dB,
                                      const TreeOptions& opt, const std::vector<std::vector<double>>* Xtree = nullptr) {
    spec.require_scalar();
    if (grid.N > 30) throw Refused("solve_tree_for_b: N too large for a W-tree");
    if (int(dB.size()) != grid.N) throw Error("solve_tree_for_b: backward path length mismatch");
    BTreeSolution s;
    s.dB = dB;
    s.X = Xtree ? *Xtree : detail::forward_tree(spec, grid);
    const int N = grid.N;
    const double dt = grid.dt(), sq = std::sqrt(dt);
    s.Y.resize(N + 1);
    s.Z.resize(N + 1);
    s.Y[N].resize(s.X[N].size());
    s.Z[N].resize(s.X[N].size());
    for (std::size_t k = 0; k < s.X[N].size(); ++k) {
        const double x = s.X[N][k];
        s.Y[N][k] = spec.h(x);
        s.Z[N][k] = spec.sigma(x) * central_diff(spec.h, x);
    }
    for (int i = N - 1; i >= 0; --i) {
        const double t0 = grid.t(i), t1 = grid.t(i + 1), db = dB[i];
        const auto &Xn = s.X[i + 1], &Yn = s.Y[i + 1], &Zn = s.Z[i + 1];
        s.Y[i].resize(s.X[i].size());
        s.Z[i].resize(s.X[i].size());
        for (std::size_t k = 0; k < s.X[i].size(); ++k) {
            const std::size_t c0 = 2 * k, c1 = 2 * k + 1;
            const double x = s.X[i][k];
            if (opt.scheme == Scheme::implicit_fg) {
                const double z = (Yn[c1] - Yn[c0]) / (2.0 * sq);
                const double m = 0.5 * (Yn[c0] + Yn[c1]);
                s.Z[i][k] = z;
                s.Y[i][k] = detail::fixed_point(
                    [&](double y) { return m + spec.f(t0, x, y, z) * dt + spec.g(t0, x, y, z) * db; }, m, opt);
                continue;
            }
            const double G0 = Yn[c0] + spec.g(t1, Xn[c0], Yn[c0], Zn[c0]) * db;
            const double G1 = Yn[c1] + spec.g(t1, Xn[c1], Yn[c1], Zn[c1]) * db;
            const double z = (G1 - G0) / (2.0 * sq);
            s.Z[i][k] = z;
            if (opt.scheme == Scheme::explicit_) {
                s.Y[i][k] = 0.5 * (G0 + spec.f(t1, Xn[c0], Yn[c0], z) * dt) + 0.5 * (G1 + spec.f(t1, Xn[c1], Yn[c1], z) * dt);
            } else {
                const double m = 0.5 * (G0 + G1);
                s.Y[i][k] = detail::fixed_point([&](double y) { return m + spec.f(t0, x, y, z) * dt; }, m, opt);
            }
            if (!std::isfinite(s.Y[i][k])) throw BlowUp("solve_tree_bdsde: non-finite Y", i);
        }
    }
    s.Y0 = s.Y[0][0];
    return s;
}

inline TreeSolution solve_tree_bdsde(const ProblemSpec& spec, const TimeGrid& grid, const TreeOptions& opt = {}) {
    spec.require_scalar();
    const auto set = enumerate_tree_paths(grid, TreeWhich::backward, opt.n_max);
    const auto X = detail::forward_tree(spec, grid);
    TreeSolution sol;
    sol.grid = grid;
    const bool keep = grid.N <= opt.keep_nodes_upto;
    std::vector<double> dW, dB;
    for (std::uint64_t b = 0; b < set.count(); ++b) {
        set.increments(b, dW, dB);
        auto s = solve_tree_for_b(spec, grid, dB, opt, &X);
        sol.Y0.push_back(s.Y0);
        if (keep) sol.paths.push_back(std::move(s));
    }
    return sol;
}

// One joint scenario seen by a tree functional.
struct ScenarioView {
    std::uint64_t b = 0;
    std::uint64_t w = 0;
    double y0 = 0.0;
    const BTreeSolution* path = nullptr;  // null when nodes were not kept

    double x(int i) const { return path->X[i][BTreeSolution::node(w, i)]; }
    double y(int i) const { return path->Y[i][BTreeSolution::node(w, i)]; }
    double z(int i) const { return path->Z[i][BTreeSolution::node(w, i)]; }
};

// Exact weighted average over all joint (W, B) scenarios.
template <class Fn>
double tree_expect(const TreeSolution& sol, Fn&& functional) {
    const std::uint64_t nb = sol.Y0.size();
    const bool nodes = !sol.paths.empty();
    const std::uint64_t nw = nodes ? (std::uint64_t(1) << sol.grid.N) : 1;
    double s = 0.0;
    for (std::uint64_t b = 0; b < nb; ++b)
        for (std::uint64_t w = 0; w < nw; ++w)
            s += functional(ScenarioView{b, w, sol.Y0[b], nodes ? &sol.paths[b] : nullptr});
    return s / double(nb * nw);
}

inline void write_tree_csv(const std::string& path, const TreeSolution& sol) {
    std::ofstream o(path);
    if (!o) throw Error("write_tree_csv: cannot open " + path);
    o.precision(17);
    o << "scenario,node_level,node_index,X,Y,Z\n";
    if (sol.paths.empty()) {
        for (std::size_t b = 0; b < sol.Y0.size(); ++b) o << b << ",0,0,," << sol.Y0[b] << ",\n";
        return;
    }
    for (std::size_t b = 0; b < sol.paths.size(); ++b) {
        const auto& p = sol.paths[b];
        for (std::size_t i = 0; i < p.Y.size(); ++i)
            for (std::size_t k = 0; k < p.Y[i].size(); ++k)
                o << b << ',' << i << ',' << k << ',' << p.X[i][k] << ',' << p.Y[i][k] << ',' << p.Z[i][k] << '\n';
    }
}

}  // namespace bdsde
