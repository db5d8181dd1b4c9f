#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "solver.hpp"

namespace bdsde {

enum class TransformVariant { simple, general };

inline const char* to_string(TransformVariant v) { return v == TransformVariant::simple ? "simple" : "general"; }

// simple: 2C/(1-alpha^2); general: 2C/(1-alpha)
inline double beta_for(double C, double alpha, TransformVariant v) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw IllPosed("beta_for: alpha must lie in [0,1)");
    if (!(C > 0.0)) throw IllPosed("beta_for: C must be positive");
    return v == TransformVariant::simple ? 2.0 * C / (1.0 - alpha * alpha) : 2.0 * C / (1.0 - alpha);
}

struct TransformParams {
    double beta = 1.0;
    TransformVariant variant = TransformVariant::simple;
    double bound_M = 1.0;
    double floor = 0.0;
    bool cutoff = false;  // multiply fbar by the support cutoff Phi(u)

    double u_lo() const { return std::exp(-beta * (bound_M + 1.0)); }
    double u_hi() const { return std::exp(beta * (bound_M + 1.0)); }

    void check() const {
        if (!(beta > 0.0)) throw IllPosed("TransformParams: beta must be positive");
        if (!(std::exp(-beta * bound_M) > floor)) throw IllPosed("TransformParams: floor above exp(-beta M)");
    }
};

inline TransformParams make_transform(double C, double alpha, TransformVariant v, double M, bool cutoff = false) {
    TransformParams p;
    p.beta = beta_for(C, alpha, v);
    p.variant = v;
    p.bound_M = M;
    p.floor = 1e-12 * std::exp(-p.beta * (M + 1.0));
    p.cutoff = cutoff;
    p.check();
    return p;
}

// 1 on |y| <= M, 0 on |y| >= M+1, linear in between.
inline double cutoff_phi(double y, double M) {
    const double a = std::abs(y);
    if (a <= M) return 1.0;
    if (a >= M + 1.0) return 0.0;
    return M + 1.0 - a;
}

struct TransformedSpec {
    ProblemSpec spec;
    TransformParams params;
};

// (fbar, gbar, xibar) of the exponential change of variable u = exp(beta Y), v = beta u Z.
inline TransformedSpec transform_problem(const ProblemSpec& s, const TransformParams& p) {
    p.check();
    TransformedSpec out{s, p};
    auto& t = out.spec;
    t.name = s.name + "/exp";
    const double be = p.beta, fl = p.floor, M = p.bound_M;
    const bool cut = p.cutoff;
    const Gen f = s.f, g = s.g;
    auto guard = [fl](double u) {
        if (!(u > fl)) throw PositivityBreach("transform: evaluation at u below the positivity floor", -1, u);
    };
    t.f = [=](double tt, double x, double u, double v) {
        if (cut) {
            if (u <= std::exp(-be * (M + 1.0))) return 0.0;
        } else {
            guard(u);
        }
        const double Y = std::log(u) / be, Z = v / (be * u);
        const double gv = g(tt, x, Y, Z);
        const double r = be * u * f(tt, x, Y, Z) + 0.5 * be * be * u * (gv * gv - Z * Z);
        return cut ? cutoff_phi(Y, M) * r : r;
    };
    t.g = [=](double tt, double x, double u, double v) {
        guard(u);
        return be * u * g(tt, x, std::log(u) / be, v / (be * u));
    };
    const Fx h = s.h;
    t.h = [=](double x) { return std::exp(be * h(x)); };
    t.a0 = nullptr;
    return out;
}

inline std::pair<double, double> inverse_point(double y, double z, const TransformParams& p, int node = -1,
                                               double x = 0.0) {
    if (!(y >= p.floor) || !(y > 0.0))
        throw PositivityBreach("inverse_map: transformed value below the positivity floor", node, x);
    return {std::log(y) / p.beta, z / (p.beta * y)};
}

inline std::pair<double, double> forward_point(double Y, double Z, const TransformParams& p) {
    const double y = std::exp(p.beta * Y);
    return {y, p.beta * y * Z};
}

// A field of the transformed equation read back in original variables.
struct MappedField {
    BackwardField base;
    TransformParams params;

    FieldValue at(int i, double x) const {
        const auto v = evaluate_field(base, i, x);
        const auto [Y, Z] = inverse_point(v.y, v.z, params, i, x);
        return {Y, Z, v.clamped};
    }
    double y0() const { return at(0, base.x0).y; }
    // max |Y| over simulated samples, from the per-node range of y
    double y_sup() const {
        double m = 0.0;
        for (std::size_t i = 0; i < base.y_min.size(); ++i) {
            if (!(base.y_min[i] >= params.floor))
                throw PositivityBreach("MappedField: sample below the positivity floor", int(i), 0.0);
            m = std::max({m, std::abs(std::log(base.y_min[i])), std::abs(std::log(base.y_max[i]))});
        }
        return m / params.beta;
    }
    double positivity_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : base.y_min) m = std::min(m, v - params.floor);
        return m;
    }
};

inline MappedField inverse_map(const BackwardField& f, const TransformParams& p) {
    MappedField m{f, p};
    for (std::size_t i = 0; i < f.y_min.size(); ++i)
        if (!(f.y_min[i] >= p.floor))
            throw PositivityBreach("inverse_map: transformed field below the positivity floor", int(i), 0.0);
    return m;
}

// Largest finite-difference slopes of F over a (y, z) box.
inline std::pair<double, double> lipschitz_scan_box(const Gen& F, double t, double x, double ylo, double yhi, double zlo,
                                                    double zhi, int n = 41) {
    double ly = 0.0, lz = 0.0;
    for (double y : linspace(ylo, yhi, n))
        for (double z : linspace(zlo, zhi, n)) {
            const double a = std::abs(central_diff([&](double v) { return F(t, x, v, z); }, y));
            const double b = std::abs(central_diff([&](double v) { return F(t, x, y, v); }, z));
            if (!std::isfinite(a) || !std::isfinite(b)) throw IllPosed("lipschitz_scan_box: non-finite slope");
            ly = std::max(ly, a);
            lz = std::max(lz, b);
        }
    return {ly, lz};
}

// ---- truncation ----

inline ProblemSpec truncate(const ProblemSpec& s, double M) {
    ProblemSpec t = s;
    t.name = s.name + "/trunc";
    const ProblemSpec src = s;
    t.f = [src, M](double tt, double x, double y, double z) {
        const double a = src.a0_at(tt, x, y, z);
        return a * y + src.f0_at(tt, x, cutoff_phi(y, M) * y, z);
    };
    return t;
}

// ---- sup-convolution ----

struct LipschitzApproxConfig {
    int n = 4;
    double spacing = 0.0;  // 0 means 1/(4n)
    double y_lo = 0.0, y_hi = 1.0;
    double z_lo = -1.0, z_hi = 1.0;

    double h() const { return spacing > 0.0 ? spacing : 1.0 / (4.0 * n); }
};

// Grid values S(p_i, q_j) = max over grid nodes (p, q) of f(p,q) - n|p-p_i| - n|q-q_j|,
// computed by separable forward/backward sweeps.
class SupConvTable {
public:
    SupConvTable(const std::function<double(double, double)>& f, const LipschitzApproxConfig& c) : n_(c.n) {
        if (c.n < 1) throw Error("sup_convolution: n must be >= 1");
        const double h = c.h();
        if (h > 1.0 / (4.0 * c.n) + 1e-15) throw Error("sup_convolution: spacing must be <= 1/(4n)");
        np_ = int(std::ceil((c.y_hi - c.y_lo) / h)) + 1;
        nq_ = int(std::ceil((c.z_hi - c.z_lo) / h)) + 1;
        p0_ = c.y_lo;
        q0_ = c.z_lo;
        hp_ = (c.y_hi - c.y_lo) / (np_ - 1);
        hq_ = (c.z_hi - c.z_lo) / (nq_ - 1);
        S_.resize(std::size_t(np_) * nq_);
        for (int i = 0; i < np_; ++i)
            for (int j = 0; j < nq_; ++j) {
                const double v = f(p0_ + i * hp_, q0_ + j * hq_);
                if (std::isnan(v)) throw IllPosed("sup_convolution: NaN generator value on the search grid");
                S_[idx(i, j)] = v;
            }
        const double dq = n_ * hq_, dp = n_ * hp_;
        for (int i = 0; i < np_; ++i) {
            for (int j = 1; j < nq_; ++j) S_[idx(i, j)] = std::max(S_[idx(i, j)], S_[idx(i, j - 1)] - dq);
            for (int j = nq_ - 2; j >= 0; --j) S_[idx(i, j)] = std::max(S_[idx(i, j)], S_[idx(i, j + 1)] - dq);
        }
        for (int j = 0; j < nq_; ++j) {
            for (int i = 1; i < np_; ++i) S_[idx(i, j)] = std::max(S_[idx(i, j)], S_[idx(i - 1, j)] - dp);
            for (int i = np_ - 2; i >= 0; --i) S_[idx(i, j)] = std::max(S_[idx(i, j)], S_[idx(i + 1, j)] - dp);
        }
    }

    // Bilinear interpolation of the grid table inside the box, L1 cone outside.
    double operator()(double y, double z) const {
        const double yc = std::clamp(y, p0_, p0_ + (np_ - 1) * hp_);
        const double zc = std::clamp(z, q0_, q0_ + (nq_ - 1) * hq_);
        const double out = n_ * (std::abs(y - yc) + std::abs(z - zc));
        const int i = std::clamp(int(std::floor((yc - p0_) / hp_)), 0, np_ - 2);
        const int j = std::clamp(int(std::floor((zc - q0_) / hq_)), 0, nq_ - 2);
        const double a = std::clamp((yc - p0_) / hp_ - i, 0.0, 1.0), b = std::clamp((zc - q0_) / hq_ - j, 0.0, 1.0);
        const double v = (1 - a) * (1 - b) * S_[idx(i, j)] + a * (1 - b) * S_[idx(i + 1, j)] +
                         (1 - a) * b * S_[idx(i, j + 1)] + a * b * S_[idx(i + 1, j + 1)];
        return v - out;
    }
    double grid_value(int i, int j) const { return S_[idx(i, j)]; }
    double p(int i) const { return p0_ + i * hp_; }
    double q(int j) const { return q0_ + j * hq_; }
    int np() const { return np_; }
    int nq() const { return nq_; }

    std::size_t nodes() const { return S_.size(); }

private:
    std::size_t idx(int i, int j) const { return std::size_t(i) * nq_ + j; }
    int n_, np_ = 0, nq_ = 0;
    double p0_ = 0, q0_ = 0, hp_ = 0, hq_ = 0;
    std::vector<double> S_;
};

// n-Lipschitz approximation of f_tilde in (y, z): grid sup-convolution, bilinear between nodes.
// Using one grid for a whole schedule keeps the sequence pointwise non-increasing in n.
// Homogeneous generators share one table; otherwise a table is built per (t, x).
inline Gen sup_convolution(const Gen& f_tilde, const LipschitzApproxConfig& c, bool homogeneous,
                           double cover_lo = std::numeric_limits<double>::quiet_NaN(),
                           double cover_hi = std::numeric_limits<double>::quiet_NaN()) {
    if (std::isfinite(cover_lo) && (c.y_lo > cover_lo || c.y_hi < cover_hi))
        throw Refused("sup_convolution: search grid does not cover the truncated support");
    struct Cache {
        std::mutex m;
        std::map<std::pair<double, double>, std::shared_ptr<SupConvTable>> tables;
    };
    auto cache = std::make_shared<Cache>();
    return [=](double t, double x, double y, double z) {
        const auto key = homogeneous ? std::pair<double, double>{0.0, 0.0} : std::pair<double, double>{t, x};
        std::shared_ptr<SupConvTable> tab;
        {
            std::lock_guard<std::mutex> lk(cache->m);
            auto& slot = cache->tables[key];
            if (!slot)
                slot = std::make_shared<SupConvTable>([&](double p, double q) { return f_tilde(t, x, p, q); }, c);
            tab = slot;
        }
        return (*tab)(y, z);
    };
}

// ---- full pipeline ----

enum class Pipeline { exact_transform, approx_sequence };

inline const char* to_string(Pipeline p) { return p == Pipeline::exact_transform ? "exact-transform" : "approx-sequence"; }

struct QuadConfig {
    SolverConfig solver;
    Pipeline pipeline = Pipeline::exact_transform;
    std::vector<int> schedule{4, 8, 16, 32};
    double v_box = 4.0;  // |v| range of the sup-convolution grid
    double bound_M = 0.0;  // 0: derive the a priori bound from the profile
    std::vector<double> xi_sample = linspace(-6.0, 6.0, 241);
};

struct QuadResult {
    Pipeline pipeline = Pipeline::exact_transform;
    TransformParams params;
    std::vector<MappedField> fields;  // one per schedule entry (one for exact-transform)
    std::vector<int> schedule;
    std::vector<double> y0;
    std::vector<double> sup_diff;  // sup over evaluation nodes of |Y^{n_{k+1}} - Y^{n_k}|
    bool monotone = true;
    json diagnostics;

    const MappedField& last() const { return fields.back(); }
};

// Evaluation nodes shared by sequence fields solved with the same seed: 9 points per time node.
inline std::vector<std::pair<int, double>> evaluation_nodes(const BackwardField& f) {
    std::vector<std::pair<int, double>> out{{0, f.x0}};
    for (int i = 1; i < f.grid.N; ++i) {
        const auto& b = f.basis[i];
        for (double x : linspace(b.lo, b.hi, 9)) out.push_back({i, x});
    }
    return out;
}

inline double quad_bound_M(const ProblemSpec& spec, const GrowthProfile& prof, const QuadConfig& qc) {
    const double K = prof.apriori_bound(terminal_sup(spec, qc.xi_sample), spec.T);
    return qc.bound_M > 0.0 ? qc.bound_M : std::max(K, prof.bound_M);
}

// Lipschitz problem solved in place of the quadratic one: the simple transform for
// exact-transform, or truncate -> general transform with cutoff -> sup-convolution(n).
inline TransformedSpec lipschitz_transformed_spec(const ProblemSpec& spec, const GrowthProfile& prof, Pipeline pl,
                                                  double M, int n, double v_box, double spacing = 0.0) {
    if (pl == Pipeline::exact_transform)
        return transform_problem(spec, make_transform(prof.quad_C, prof.alpha, TransformVariant::simple, M));
    const auto p = make_transform(prof.quad_C, prof.alpha, TransformVariant::general, M, true);
    auto ts = transform_problem(truncate(spec, M), p);
    LipschitzApproxConfig lc;
    lc.n = n;
    lc.spacing = spacing;
    lc.y_lo = p.u_lo();
    lc.y_hi = p.u_hi();
    lc.z_lo = -v_box;
    lc.z_hi = v_box;
    ts.spec.f = sup_convolution(ts.spec.f, lc, spec.homogeneous, p.u_lo(), p.u_hi());
    return ts;
}

inline QuadResult solve_quadratic_bdsde(const ProblemSpec& spec, const GrowthProfile& prof,
                                        const std::vector<double>& frozen_b, const TimeGrid& grid, const QuadConfig& qc,
                                        double x0, std::uint64_t b_path_id = 0) {
    spec.require_scalar();
    prof.check();
    QuadResult r;
    r.pipeline = qc.pipeline;
    const double K = prof.apriori_bound(terminal_sup(spec, qc.xi_sample), spec.T);
    const double M = quad_bound_M(spec, prof, qc);
    SolverConfig sc = qc.solver;
    sc.check_lipschitz = false;

    if (qc.pipeline == Pipeline::exact_transform) {
        const auto ts = lipschitz_transformed_spec(spec, prof, qc.pipeline, M, 0, qc.v_box);
        r.params = ts.params;
        const auto f = solve_lipschitz_bdsde(ts.spec, frozen_b, grid, sc, x0, b_path_id);
        r.fields.push_back(inverse_map(f, r.params));
        r.y0.push_back(r.fields.back().y0());
        r.schedule = {0};
    } else {
        if (qc.schedule.empty()) throw Error("solve_quadratic_bdsde: empty schedule");
        const double h = 1.0 / (4.0 * *std::max_element(qc.schedule.begin(), qc.schedule.end()));
        for (int n : qc.schedule) {
            const auto ts = lipschitz_transformed_spec(spec, prof, qc.pipeline, M, n, qc.v_box, h);
            r.params = ts.params;
            const auto f = solve_lipschitz_bdsde(ts.spec, frozen_b, grid, sc, x0, b_path_id);
            r.fields.push_back(inverse_map(f, r.params));
            r.y0.push_back(r.fields.back().y0());
        }
        r.schedule = qc.schedule;
        const auto nodes = evaluation_nodes(r.fields.front().base);
        for (std::size_t k = 1; k < r.fields.size(); ++k) {
            double d = 0.0;
            for (auto [i, x] : nodes) {
                const double a = r.fields[k - 1].at(i, x).y, b = r.fields[k].at(i, x).y;
                d = std::max(d, std::abs(b - a));
                if (b > a + 1e-9 * (1.0 + std::abs(a))) r.monotone = false;
            }
            r.sup_diff.push_back(d);
        }
    }
    json pm = json::array();
    for (const auto& f : r.fields) pm.push_back(f.positivity_margin());
    r.diagnostics = {{"pipeline", to_string(r.pipeline)},
                     {"beta", r.params.beta},
                     {"variant", to_string(r.params.variant)},
                     {"M", M},
                     {"apriori_K", K},
                     {"floor", r.params.floor},
                     {"schedule", r.schedule},
                     {"y0", r.y0},
                     {"sup_differences", r.sup_diff},
                     {"monotone", r.monotone},
                     {"positivity_margins", pm}};
    return r;
}

// ---- comparison change of variable ----

struct ComparisonPhi {
    double M = 1, A = 2, lambda = 1, C = 1, alpha = 0.3;

    double phi(double yt) const { return std::log((std::exp(lambda * A * yt) + 1.0) / A) / lambda - M; }
    double phi_inv(double y) const { return std::log(A * std::exp(lambda * (y + M)) - 1.0) / (lambda * A); }
    double e(double y) const { return std::exp(-lambda * (y + M)); }
    double w(double y) const { return A - e(y); }
    double w1(double y) const { return lambda * e(y); }
    double w2(double y) const { return -lambda * lambda * e(y); }
    // (1-alpha)/2 w''/w + 2C w'/w + (w'/w)^2
    double coef(double y) const {
        const double W = w(y), r = w1(y) / W;
        return 0.5 * (1.0 - alpha) * w2(y) / W + 2.0 * C * r + r * r;
    }
    // Closed form of coef as a single fraction.
    double coef_closed(double y) const {
        const double E = e(y);
        return 0.5 * E / ((A - E) * (A - E)) *
               (lambda * lambda * (-(1.0 - alpha) * A + (3.0 - alpha) * E) + 4.0 * C * lambda * (A - E));
    }
};

struct PhiDiagnostics {
    double min_w = 0, min_w1 = 0, max_w2 = 0, max_coef = 0, delta = 0;
    bool signs_ok = false;
    bool feasible = false;
    json to_json() const {
        return {{"min_w", min_w}, {"min_w1", min_w1}, {"max_w2", max_w2},
                {"max_coef", max_coef}, {"delta", delta}, {"signs_ok", signs_ok}, {"feasible", feasible}};
    }
};

inline PhiDiagnostics check_comparison_phi(const ComparisonPhi& c, int npts = 1000) {
    PhiDiagnostics d;
    d.min_w = d.min_w1 = std::numeric_limits<double>::infinity();
    d.max_w2 = d.max_coef = -std::numeric_limits<double>::infinity();
    for (double y : linspace(-c.M, c.M, npts)) {
        d.min_w = std::min(d.min_w, c.w(y));
        d.min_w1 = std::min(d.min_w1, c.w1(y));
        d.max_w2 = std::max(d.max_w2, c.w2(y));
        d.max_coef = std::max(d.max_coef, c.coef(y));
    }
    d.delta = -d.max_coef;
    d.signs_ok = d.min_w > 0 && d.min_w1 > 0 && d.max_w2 < 0;
    d.feasible = d.signs_ok && d.delta > 0;
    return d;
}

inline ComparisonPhi comparison_phi(double M, double A, double lambda, double C = 1.0, double alpha = 0.3) {
    if (!(A > 1.0) || !(lambda > 0.0)) throw IllPosed("comparison_phi: need A > 1 and lambda > 0");
    return ComparisonPhi{M, A, lambda, C, alpha};
}

struct PhiSearch {
    ComparisonPhi best;
    PhiDiagnostics diag;
    int candidates = 0;
    int feasible = 0;
};

// Grid search over (A, lambda); keeps the candidate with the largest delta.
inline PhiSearch search_comparison_phi(double C, double alpha, double M, std::vector<double> As,
                                       std::vector<double> lambdas, int npts = 1000) {
    PhiSearch s;
    bool found = false;
    for (double A : As)
        for (double l : lambdas) {
            ++s.candidates;
            const auto c = comparison_phi(M, A, l, C, alpha);
            const auto d = check_comparison_phi(c, npts);
            if (!d.feasible) continue;
            ++s.feasible;
            if (!found || d.delta > s.diag.delta) {
                s.best = c;
                s.diag = d;
                found = true;
            }
        }
    if (!found) throw Refused("comparison_phi: no feasible (A, lambda) on the search grid");
    return s;
}

}  // namespace bdsde
