#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "quad.hpp"

namespace bdsde {

enum class Boundary { dirichlet_from_terminal, one_sided_extrapolation };

struct SpatialGrid {
    double x_lo = -3.0, x_hi = 3.0;
    int J = 100;  // interior nodes
    Boundary boundary = Boundary::dirichlet_from_terminal;

    SpatialGrid() = default;
    SpatialGrid(double lo, double hi, int j, Boundary b = Boundary::dirichlet_from_terminal)
        : x_lo(lo), x_hi(hi), J(j), boundary(b) {
        if (!(hi > lo) || j < 3) throw IllPosed("SpatialGrid: need x_hi > x_lo and J >= 3");
    }
    double dx() const { return (x_hi - x_lo) / (J + 1); }
    double x(int j) const { return x_lo + (j + 1) * dx(); }
    std::vector<double> nodes() const {
        std::vector<double> v(J);
        for (int j = 0; j < J; ++j) v[j] = x(j);
        return v;
    }
};

struct WeightFn {
    enum Kind { exp_delta, poly_q } kind = poly_q;
    double param = 4.0;

    static WeightFn exp(double delta) {
        if (!(delta > 0.0)) throw IllPosed("WeightFn: delta must be positive");
        return {exp_delta, delta};
    }
    static WeightFn poly(double q, int n = 1) {
        if (!(q > n + 2)) throw IllPosed("WeightFn: poly-q needs q > n + 2");
        return {poly_q, q};
    }
    double rho(double x) const {
        return kind == exp_delta ? std::exp(param * std::abs(x)) : std::pow(1.0 + std::abs(x), param);
    }
    double inv(double x) const { return 1.0 / rho(x); }
};

// Integration weights rho^{-1} on nodes, zeroed where rho^{-1} < 1e-12 * max.
inline std::vector<double> weight_inv(const WeightFn& w, const std::vector<double>& xs) {
    std::vector<double> v(xs.size());
    double m = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) m = std::max(m, v[j] = w.inv(xs[j]));
    for (double& e : v)
        if (e < 1e-12 * m) e = 0.0;
    return v;
}

// Tridiagonal L = b d/dx + a/2 d^2/dx^2, rows over interior nodes.
struct TriOperator {
    std::vector<double> lo, di, up;

    std::vector<double> apply(const std::vector<double>& u, double left, double right) const {
        const int J = int(di.size());
        std::vector<double> out(J);
        for (int j = 0; j < J; ++j) {
            const double um = j > 0 ? u[j - 1] : left, up_ = j + 1 < J ? u[j + 1] : right;
            out[j] = lo[j] * um + di[j] * u[j] + up[j] * up_;
        }
        return out;
    }
};

inline TriOperator assemble_L(const ProblemSpec& s, const SpatialGrid& g) {
    const double h = g.dx();
    TriOperator L;
    L.lo.resize(g.J);
    L.di.resize(g.J);
    L.up.resize(g.J);
    for (int j = 0; j < g.J; ++j) {
        const double x = g.x(j), b = s.b(x), sg = s.sigma(x), a = sg * sg;
        L.lo[j] = -b / (2 * h) + 0.5 * a / (h * h);
        L.di[j] = -a / (h * h);
        L.up[j] = b / (2 * h) + 0.5 * a / (h * h);
    }
    return L;
}

// Solves the tridiagonal system (lo, di, up) u = r.
inline std::vector<double> thomas(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                                  std::vector<double> r) {
    const std::size_t n = di.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (di[i - 1] == 0.0) throw Error("thomas: zero pivot");
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        r[i] -= m * r[i - 1];
    }
    std::vector<double> u(n);
    u[n - 1] = r[n - 1] / di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) u[i] = (r[i] - up[i] * u[i + 1]) / di[i];
    return u;
}

// E[h(x + s xi)], xi standard normal, by trapezoid on [-8, 8].
inline double heat_smooth(const Fx& h, double x, double s) {
    if (s <= 0.0) return h(x);
    constexpr int n = 161;
    const double step = 16.0 / (n - 1);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        const double xi = -8.0 + k * step;
        const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
        acc += w * std::exp(-0.5 * xi * xi) * h(x + s * xi);
    }
    return acc * step / std::sqrt(2.0 * M_PI);
}

enum class SpdeScheme { explicit_, semi_implicit };

inline const char* to_string(SpdeScheme s) { return s == SpdeScheme::explicit_ ? "explicit" : "semi-implicit"; }

struct SpdeField {
    TimeGrid tgrid;
    SpatialGrid xgrid;
    std::vector<std::vector<double>> u;   // [i][j], i = 0..N
    std::vector<std::vector<double>> du;  // sigma * du/dx
    std::vector<double> u_left, u_right;  // boundary values per time
    std::uint64_t b_path_id = 0;

    // Linear interpolation of u(t_i, .) on interior nodes.
    double at(int i, double x) const {
        const double h = xgrid.dx();
        const double s = (x - xgrid.x_lo) / h - 1.0;
        const int J = xgrid.J;
        if (s <= 0.0) return u[i][0];
        if (s >= J - 1) return u[i][J - 1];
        const int j = int(s);
        const double w = s - j;
        return (1 - w) * u[i][j] + w * u[i][j + 1];
    }
};

inline std::vector<double> grad_sigma(const ProblemSpec& s, const SpatialGrid& g, const std::vector<double>& u,
                                      double left, double right) {
    const int J = g.J;
    const double h = g.dx();
    std::vector<double> d(J);
    for (int j = 0; j < J; ++j) {
        const double um = j > 0 ? u[j - 1] : left, up = j + 1 < J ? u[j + 1] : right;
        d[j] = s.sigma(g.x(j)) * (up - um) / (2 * h);
    }
    return d;
}

inline std::pair<double, double> boundary_values(const ProblemSpec& s, const SpatialGrid& g, double tau,
                                                 const std::vector<double>& u) {
    if (g.boundary == Boundary::one_sided_extrapolation)
        return {2 * u[0] - u[1], 2 * u[g.J - 1] - u[g.J - 2]};
    const double sl = s.sigma(g.x_lo), sr = s.sigma(g.x_hi);
    return {heat_smooth(s.h, g.x_lo, std::abs(sl) * std::sqrt(tau)), heat_smooth(s.h, g.x_hi, std::abs(sr) * std::sqrt(tau))};
}

inline SpdeField solve_spde_path(const ProblemSpec& s, const std::vector<double>& frozen_b, const TimeGrid& tg,
                                 const SpatialGrid& xg, SpdeScheme scheme, std::uint64_t b_path_id = 0) {
    s.require_scalar();
    if (int(frozen_b.size()) != tg.N) throw Error("solve_spde_path: backward path length differs from the time grid");
    const int N = tg.N, J = xg.J;
    const double dt = tg.dt(), h = xg.dx();
    const auto L = assemble_L(s, xg);
    if (scheme == SpdeScheme::explicit_) {
        double amax = 0.0;
        for (int j = 0; j < J; ++j) amax = std::max(amax, std::pow(s.sigma(xg.x(j)), 2));
        if (dt * amax / (h * h) > 0.5)
            throw Refused("solve_spde_path: CFL violated, explicit scheme needs dt <= " +
                          std::to_string(0.5 * h * h / amax));
    }
    SpdeField F{tg, xg, {}, {}, {}, {}, b_path_id};
    F.u.assign(N + 1, std::vector<double>(J));
    F.du.assign(N + 1, std::vector<double>(J));
    F.u_left.resize(N + 1);
    F.u_right.resize(N + 1);
    const auto xs = xg.nodes();
    for (int j = 0; j < J; ++j) F.u[N][j] = s.h(xs[j]);
    if (xg.boundary == Boundary::dirichlet_from_terminal) {
        F.u_left[N] = s.h(xg.x_lo);
        F.u_right[N] = s.h(xg.x_hi);
    } else {
        std::tie(F.u_left[N], F.u_right[N]) = boundary_values(s, xg, 0.0, F.u[N]);
    }
    F.du[N] = grad_sigma(s, xg, F.u[N], F.u_left[N], F.u_right[N]);

    for (int i = N - 1; i >= 0; --i) {
        const double t1 = tg.t(i + 1), dB = frozen_b[i];
        const auto& u1 = F.u[i + 1];
        const auto& d1 = F.du[i + 1];
        std::vector<double> rhs(J);
        for (int j = 0; j < J; ++j)
            rhs[j] = u1[j] + dt * s.f(t1, xs[j], u1[j], d1[j]) + s.g(t1, xs[j], u1[j], d1[j]) * dB;
        auto& u = F.u[i];
        if (scheme == SpdeScheme::explicit_) {
            const auto Lu = L.apply(u1, F.u_left[i + 1], F.u_right[i + 1]);
            for (int j = 0; j < J; ++j) u[j] = rhs[j] + dt * Lu[j];
            if (xg.boundary == Boundary::one_sided_extrapolation)
                std::tie(F.u_left[i], F.u_right[i]) = boundary_values(s, xg, 0.0, u);
            else
                std::tie(F.u_left[i], F.u_right[i]) = boundary_values(s, xg, s.T - tg.t(i), u);
        } else {
            std::vector<double> lo(J), di(J), up(J);
            for (int j = 0; j < J; ++j) {
                lo[j] = -dt * L.lo[j];
                di[j] = 1.0 - dt * L.di[j];
                up[j] = -dt * L.up[j];
            }
            if (xg.boundary == Boundary::one_sided_extrapolation) {
                // u_{-1} = 2u_0 - u_1 folded into the first and last rows
                di[0] += 2 * lo[0];
                up[0] -= lo[0];
                di[J - 1] += 2 * up[J - 1];
                lo[J - 1] -= up[J - 1];
                lo[0] = up[J - 1] = 0.0;
                u = thomas(lo, di, up, rhs);
                std::tie(F.u_left[i], F.u_right[i]) = boundary_values(s, xg, 0.0, u);
            } else {
                std::tie(F.u_left[i], F.u_right[i]) = boundary_values(s, xg, s.T - tg.t(i), u1);
                rhs[0] -= lo[0] * F.u_left[i];
                rhs[J - 1] -= up[J - 1] * F.u_right[i];
                lo[0] = up[J - 1] = 0.0;
                u = thomas(lo, di, up, rhs);
            }
        }
        if (!all_finite(u)) throw BlowUp("solve_spde_path: non-finite field", i);
        F.du[i] = grad_sigma(s, xg, u, F.u_left[i], F.u_right[i]);
    }
    return F;
}

// Trapezoid in t and x of (|u|^2 + |sigma du|^2) rho^{-1}.
inline double sobolev_norm(const SpdeField& F, const WeightFn& rho) {
    const auto xs = F.xgrid.nodes();
    const auto w = weight_inv(rho, xs);
    std::vector<double> per_t(F.u.size());
    for (std::size_t i = 0; i < F.u.size(); ++i) {
        std::vector<double> v(xs.size());
        for (std::size_t j = 0; j < xs.size(); ++j) v[j] = (F.u[i][j] * F.u[i][j] + F.du[i][j] * F.du[i][j]) * w[j];
        per_t[i] = trapezoid(v, F.xgrid.dx());
    }
    return trapezoid(per_t, F.tgrid.dt());
}

struct TestFn {
    std::string name;
    double lo = -1, hi = 1;  // support
    std::function<double(double t, double x)> phi, phi_t, phi_x;
};

// Smooth bump exp(-1/(1-r^2)) on [c-r0, c+r0], times (1 + k t).
inline TestFn bump_test_fn(double c, double r0, double k = 0.0, std::string name = "bump") {
    TestFn f;
    f.name = std::move(name);
    f.lo = c - r0;
    f.hi = c + r0;
    auto base = [=](double x) {
        const double r = (x - c) / r0;
        return std::abs(r) < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
    };
    auto dbase = [=](double x) {
        const double r = (x - c) / r0;
        if (std::abs(r) >= 1.0) return 0.0;
        const double q = 1.0 - r * r;
        return std::exp(-1.0 / q) * (-2.0 * r / (q * q)) / r0;
    };
    f.phi = [=](double t, double x) { return (1.0 + k * t) * base(x); };
    f.phi_t = [=](double, double x) { return k * base(x); };
    f.phi_x = [=](double t, double x) { return (1.0 + k * t) * dbase(x); };
    return f;
}

// |LHS - RHS| of the integrated test-function identity at t = 0:
//   int int u phi_s + int u(0)phi(0) - int h phi(T) + 1/2 int int sigma u_x sigma phi_x
//   + int int u d/dx[(b - A~) phi] = int int f phi + sum_i int g(t_{i+1}) phi(t_{i+1}) dB_i
// with A~ = a'/2, time integrals by trapezoid.
inline std::vector<double> weak_form_residual(const SpdeField& F, const std::vector<TestFn>& tests,
                                              const std::vector<double>& frozen_b, const ProblemSpec& s) {
    const auto& xg = F.xgrid;
    const auto xs = xg.nodes();
    const int N = F.tgrid.N, J = xg.J;
    const double h = xg.dx(), dt = F.tgrid.dt();
    auto a_of = [&](double x) { return s.sigma(x) * s.sigma(x); };
    auto At = [&](double x) { return 0.5 * central_diff(a_of, x); };
    std::vector<double> out;
    for (const auto& tf : tests) {
        if (tf.lo <= xg.x_lo + h || tf.hi >= xg.x_hi - h)
            throw Refused("weak_form_residual: support of '" + tf.name + "' touches the grid boundary");
        std::vector<double> lhs_t(N + 1), f_t(N + 1);
        double stoch = 0.0;
        for (int i = 0; i <= N; ++i) {
            const double t = F.tgrid.t(i);
            std::vector<double> a(J), b(J), gb(J);
            for (int j = 0; j < J; ++j) {
                const double x = xs[j], u = F.u[i][j], du = F.du[i][j];
                auto m = [&](double y) { return (s.b(y) - At(y)) * tf.phi(t, y); };
                a[j] = u * tf.phi_t(t, x) + 0.5 * du * s.sigma(x) * tf.phi_x(t, x) + u * central_diff(m, x);
                b[j] = s.f(t, x, u, du) * tf.phi(t, x);
                if (i > 0) gb[j] = s.g(t, x, u, du) * tf.phi(t, x);
            }
            lhs_t[i] = trapezoid(a, h);
            f_t[i] = trapezoid(b, h);
            if (i > 0) stoch += trapezoid(gb, h) * frozen_b[i - 1];
        }
        std::vector<double> u0(J), hT(J);
        for (int j = 0; j < J; ++j) {
            u0[j] = F.u[0][j] * tf.phi(0.0, xs[j]);
            hT[j] = s.h(xs[j]) * tf.phi(s.T, xs[j]);
        }
        const double lhs = trapezoid(lhs_t, dt) + trapezoid(u0, h) - trapezoid(hT, h);
        const double rhs = trapezoid(f_t, dt) + stoch;
        out.push_back(std::abs(lhs - rhs));
    }
    return out;
}

// ---- Feynman-Kac cross-validation ----

struct FkConfig {
    QuadConfig quad;
    WeightFn rho = WeightFn::poly(4.0);
    SpdeScheme scheme = SpdeScheme::semi_implicit;
    int approx_n = 16;  // sup-convolution index for the approx-sequence pipeline
};

struct FkReport {
    std::vector<double> x, u_fd, u_mc;
    double sup_abs = 0.0, sup_rel = 0.0, weighted_l2 = 0.0;
    double beta = 0.0;
    json to_json() const {
        return {{"x", x},           {"u_fd", u_fd},       {"u_mc", u_mc},
                {"sup_abs", sup_abs}, {"sup_rel", sup_rel}, {"weighted_l2", weighted_l2}, {"beta", beta}};
    }
};

inline std::vector<int> interior_third(const SpatialGrid& g) {
    const double w = (g.x_hi - g.x_lo) / 3.0;
    std::vector<int> idx;
    for (int j = 0; j < g.J; ++j)
        if (g.x(j) >= g.x_lo + w - 1e-12 && g.x(j) <= g.x_hi - w + 1e-12) idx.push_back(j);
    return idx;
}

inline FkReport feynman_kac_compare(const ProblemSpec& spec, const GrowthProfile& prof,
                                    const std::vector<double>& frozen_b, const TimeGrid& tg, const SpatialGrid& xg,
                                    const FkConfig& cfg, std::uint64_t b_path_id = 0) {
    QuadConfig qc = cfg.quad;
    if (qc.pipeline == Pipeline::approx_sequence) qc.schedule = {cfg.approx_n};
    const double M = quad_bound_M(spec, prof, qc);
    const int n = qc.pipeline == Pipeline::approx_sequence ? cfg.approx_n : 0;
    const auto ts = lipschitz_transformed_spec(spec, prof, qc.pipeline, M, n, qc.v_box);
    const auto F = solve_spde_path(ts.spec, frozen_b, tg, xg, cfg.scheme, b_path_id);

    FkReport r;
    r.beta = ts.params.beta;
    double fd_sup = 0.0, l2 = 0.0;
    const auto idx = interior_third(xg);
    for (int j : idx) {
        const double x0 = xg.x(j);
        const double ufd = inverse_point(F.u[0][j], 0.0, ts.params, 0, x0).first;
        const auto q = solve_quadratic_bdsde(spec, prof, frozen_b, tg, qc, x0, b_path_id);
        const double umc = q.fields.back().y0();
        r.x.push_back(x0);
        r.u_fd.push_back(ufd);
        r.u_mc.push_back(umc);
        fd_sup = std::max(fd_sup, std::abs(ufd));
        r.sup_abs = std::max(r.sup_abs, std::abs(ufd - umc));
        l2 += (ufd - umc) * (ufd - umc) * cfg.rho.inv(x0) * xg.dx();
    }
    r.sup_rel = fd_sup > 0.0 ? r.sup_abs / fd_sup : r.sup_abs;
    r.weighted_l2 = std::sqrt(l2);
    return r;
}

// ---- norm equivalence ----

struct NormEqConfig {
    int M = 10000;
    std::uint64_t seed = 1;
    double x_lo = -8.0, x_hi = 8.0;
    int nx = 81;
    WeightFn rho = WeightFn::poly(4.0);
};

struct NormEqResult {
    std::vector<double> ratios;
    double ratio_min = 0.0, ratio_max = 0.0;
};

// Ratio E int int |phi(X_s^{0,x})| ds rho^{-1}(x) dx / int int |phi(x)| ds rho^{-1}(x) dx per phi.
inline NormEqResult estimate_norm_equivalence(const std::vector<Fx>& phis, const ProblemSpec& s, const TimeGrid& tg,
                                              const NormEqConfig& c) {
    s.require_scalar();
    if (phis.empty()) throw Error("estimate_norm_equivalence: empty test family");
    const auto xs = linspace(c.x_lo, c.x_hi, c.nx);
    const auto w = weight_inv(c.rho, xs);
    const double hx = xs[1] - xs[0], dt = tg.dt(), sq = std::sqrt(dt);
    const int N = tg.N;
    const CounterRng rng(c.seed, stream::W);
    std::vector<double> num(phis.size(), 0.0), den(phis.size(), 0.0);
    std::vector<double> X(c.M), acc(phis.size());
    for (int ix = 0; ix < c.nx; ++ix) {
        const double wx = w[ix] * hx * ((ix == 0 || ix == c.nx - 1) ? 0.5 : 1.0);
        if (wx == 0.0) continue;
        for (std::size_t p = 0; p < phis.size(); ++p) den[p] += wx * s.T * std::abs(phis[p](xs[ix]));
        std::fill(X.begin(), X.end(), xs[ix]);
        std::vector<std::vector<double>> per_t(phis.size(), std::vector<double>(N + 1, 0.0));
        for (int i = 0; i <= N; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int k = 0; k < c.M; ++k) {
                for (std::size_t p = 0; p < phis.size(); ++p) acc[p] += std::abs(phis[p](X[k]));
                if (i < N) X[k] = euler_step(s, X[k], dt, sq * rng.normal(std::uint64_t(k) * N + i));
            }
            for (std::size_t p = 0; p < phis.size(); ++p) per_t[p][i] = acc[p] / c.M;
        }
        for (std::size_t p = 0; p < phis.size(); ++p) num[p] += wx * trapezoid(per_t[p], dt);
    }
    NormEqResult r;
    for (std::size_t p = 0; p < phis.size(); ++p) {
        if (!(den[p] > 1e-14)) throw Refused("estimate_norm_equivalence: test function has no weighted mass");
        r.ratios.push_back(num[p] / den[p]);
    }
    r.ratio_min = *std::min_element(r.ratios.begin(), r.ratios.end());
    r.ratio_max = *std::max_element(r.ratios.begin(), r.ratios.end());
    return r;
}

inline void write_spde_csv(const std::string& path, const SpdeField& F) {
    std::ofstream o(path);
    if (!o) throw Error("write_spde_csv: cannot open " + path);
    o << "t,x,u,sigma_du\n";
    o.precision(17);
    for (std::size_t i = 0; i < F.u.size(); ++i)
        for (int j = 0; j < F.xgrid.J; ++j)
            o << F.tgrid.t(int(i)) << ',' << F.xgrid.x(j) << ',' << F.u[i][j] << ',' << F.du[i][j] << '\n';
}

}  // namespace bdsde
