#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace bdsde {

struct TimeGrid {
    double T = 1.0;
    int N = 1;

    TimeGrid() = default;
    TimeGrid(double T_, int N_) : T(T_), N(N_) {
        if (!(T > 0.0) || N < 1) throw IllPosed("TimeGrid: need T > 0 and N >= 1");
    }
    double dt() const { return T / N; }
    double t(int i) const { return i == N ? T : T * double(i) / double(N); }
};

enum class PathMode { gaussian, two_point };

inline const char* to_string(PathMode m) { return m == PathMode::gaussian ? "gaussian" : "two-point"; }

inline PathMode path_mode_from(const std::string& s) {
    if (s == "gaussian") return PathMode::gaussian;
    if (s == "two-point") return PathMode::two_point;
    throw Error("unknown path mode '" + s + "'");
}

inline double draw_increment(const CounterRng& r, std::uint64_t idx, PathMode m, double sq) {
    return m == PathMode::gaussian ? sq * r.normal(idx) : sq * r.sign(idx);
}

struct DualPathBatch {
    TimeGrid grid;
    int M = 0;
    int MB = 0;  // 1 when one backward path is shared by all samples
    std::uint64_t seed = 0;
    PathMode mode = PathMode::gaussian;
    std::vector<double> dW;  // M x N
    std::vector<double> dB;  // MB x N

    double dw(int k, int i) const { return dW[std::size_t(k) * grid.N + i]; }
    double db(int k, int i) const { return dB[std::size_t(MB == 1 ? 0 : k) * grid.N + i]; }
};

// W and B come from separate counter streams of the same seed. With antithetic set,
// W sample 2k+1 is the reflection of sample 2k.
inline DualPathBatch sample_dual_paths(const TimeGrid& grid, int M, std::uint64_t seed, PathMode mode,
                                       bool shared_b = false, bool antithetic = false) {
    if (M < 1) throw Error("sample_dual_paths: M must be >= 1");
    DualPathBatch b;
    b.grid = grid;
    b.M = M;
    b.MB = shared_b ? 1 : M;
    b.seed = seed;
    b.mode = mode;
    const double sq = std::sqrt(grid.dt());
    const CounterRng rw(seed, stream::W), rb(seed, stream::B);
    b.dW.resize(std::size_t(M) * grid.N);
    b.dB.resize(std::size_t(b.MB) * grid.N);
    for (std::size_t j = 0; j < b.dW.size(); ++j) b.dW[j] = draw_increment(rw, j, mode, sq);
    if (antithetic)
        for (int k = 1; k < M; k += 2)
            for (int i = 0; i < grid.N; ++i) b.dW[std::size_t(k) * grid.N + i] = -b.dw(k - 1, i);
    for (std::size_t j = 0; j < b.dB.size(); ++j) b.dB[j] = draw_increment(rb, j, mode, sq);
    return b;
}

// One backward path of N increments.
inline std::vector<double> sample_b_path(const TimeGrid& grid, std::uint64_t seed, PathMode mode) {
    const CounterRng rb(seed, stream::B);
    const double sq = std::sqrt(grid.dt());
    std::vector<double> v(grid.N);
    for (int i = 0; i < grid.N; ++i) v[i] = draw_increment(rb, std::uint64_t(i), mode, sq);
    return v;
}

// Sum consecutive blocks of a fine increment path.
inline std::vector<double> coarsen_path(const std::vector<double>& fine, int N) {
    if (N < 1 || fine.size() % std::size_t(N) != 0) throw Error("coarsen_path: N must divide the fine length");
    const std::size_t r = fine.size() / N;
    std::vector<double> out(N, 0.0);
    for (int i = 0; i < N; ++i)
        for (std::size_t j = 0; j < r; ++j) out[i] += fine[i * r + j];
    return out;
}

inline void write_batch_csv(const std::string& path, const DualPathBatch& b) {
    std::ofstream o(path);
    if (!o) throw Error("write_batch_csv: cannot open " + path);
    o.precision(17);
    o << "# seed=" << b.seed << " mode=" << to_string(b.mode) << "\n";
    o << "sample,step,dW,dB\n";
    for (int k = 0; k < b.M; ++k)
        for (int i = 0; i < b.grid.N; ++i) o << k << ',' << i << ',' << b.dw(k, i) << ',' << b.db(k, i) << '\n';
}

// ---- exhaustive two-point trees ----

inline constexpr int N_MAX = 12;

enum class TreeWhich { forward, backward, both };

// Lazy enumeration: path k is decoded from its bits (bit i -> sign of step i).
struct TreePathSet {
    TimeGrid grid;
    TreeWhich which = TreeWhich::forward;

    std::uint64_t count() const {
        return std::uint64_t(1) << (which == TreeWhich::both ? 2 * grid.N : grid.N);
    }
    double weight() const { return 1.0 / double(count()); }

    void increments(std::uint64_t k, std::vector<double>& dW, std::vector<double>& dB) const {
        const int N = grid.N;
        const double sq = std::sqrt(grid.dt());
        dW.assign(N, 0.0);
        dB.assign(N, 0.0);
        for (int i = 0; i < N; ++i) {
            if (which == TreeWhich::forward) {
                dW[i] = ((k >> i) & 1) ? sq : -sq;
            } else if (which == TreeWhich::backward) {
                dB[i] = ((k >> i) & 1) ? sq : -sq;
            } else {
                dW[i] = ((k >> i) & 1) ? sq : -sq;
                dB[i] = ((k >> (N + i)) & 1) ? sq : -sq;
            }
        }
    }
};

inline TreePathSet enumerate_tree_paths(const TimeGrid& grid, TreeWhich which, int n_max = N_MAX) {
    if (grid.N > n_max) throw Refused("enumerate_tree_paths: N exceeds N_max = " + std::to_string(n_max));
    return TreePathSet{grid, which};
}

// The backward path with index k of a two-point tree.
inline std::vector<double> tree_b_path(const TimeGrid& grid, std::uint64_t k) {
    std::vector<double> dW, dB;
    TreePathSet{grid, TreeWhich::backward}.increments(k, dW, dB);
    return dB;
}

// ---- forward SDE ----

struct ForwardBatch {
    int M = 0;
    int N = 0;
    std::vector<double> X;  // time-major: X[i*M + k]

    double x(int k, int i) const { return X[std::size_t(i) * M + k]; }
    const double* row(int i) const { return X.data() + std::size_t(i) * M; }
};

inline double euler_step(const ProblemSpec& s, double x, double dt, double dw) { return x + s.b(x) * dt + s.sigma(x) * dw; }

inline ForwardBatch simulate_forward(double x0, const ProblemSpec& spec, const DualPathBatch& batch) {
    spec.check();
    ForwardBatch fb;
    fb.M = batch.M;
    fb.N = batch.grid.N;
    fb.X.resize(std::size_t(fb.N + 1) * fb.M);
    const double dt = batch.grid.dt();
    for (int k = 0; k < fb.M; ++k) fb.X[k] = x0;
    for (int i = 0; i < fb.N; ++i) {
        const double* cur = fb.X.data() + std::size_t(i) * fb.M;
        double* nxt = fb.X.data() + std::size_t(i + 1) * fb.M;
        for (int k = 0; k < fb.M; ++k) {
            nxt[k] = euler_step(spec, cur[k], dt, batch.dw(k, i));
            if (!std::isfinite(nxt[k]))
                throw BlowUp("simulate_forward: non-finite state at step " + std::to_string(i + 1), i + 1);
        }
    }
    return fb;
}

// sum_i g(t_{i+1}) dB_i
inline double backward_integral(const std::vector<double>& g_values, const std::vector<double>& dB) {
    if (g_values.size() != dB.size()) throw Error("backward_integral: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < dB.size(); ++i) s += g_values[i] * dB[i];
    return s;
}

// Residual of the discrete Ito formula for alpha_{i+1} = alpha_i + beta_i dt + gamma_i dB_i + delta_i dW_i.
// The backward term pairs gamma_i with Phi'(alpha_{i+1}).
template <class P0, class P1, class P2>
double ito_residual(P0&& Phi, P1&& dPhi, P2&& d2Phi, const std::vector<double>& alpha, const std::vector<double>& beta,
                    const std::vector<double>& gamma, const std::vector<double>& delta, const std::vector<double>& dW,
                    const std::vector<double>& dB, double dt) {
    const std::size_t N = dW.size();
    if (alpha.size() != N + 1 || beta.size() != N || gamma.size() != N || delta.size() != N || dB.size() != N)
        throw Error("ito_residual: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double a = alpha[i];
        s += dPhi(a) * beta[i] * dt + dPhi(alpha[i + 1]) * gamma[i] * dB[i] + dPhi(a) * delta[i] * dW[i] -
             0.5 * d2Phi(a) * gamma[i] * gamma[i] * dt + 0.5 * d2Phi(a) * delta[i] * delta[i] * dt;
    }
    return Phi(alpha[N]) - Phi(alpha[0]) - s;
}

}  // namespace bdsde
