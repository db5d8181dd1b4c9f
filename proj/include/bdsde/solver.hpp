#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "paths.hpp"
#include "scheme.hpp"

namespace bdsde {

enum class BasisFamily { polynomial, pwlinear };

inline const char* to_string(BasisFamily f) { return f == BasisFamily::polynomial ? "polynomial" : "pwlinear"; }

// Polynomial: Legendre up to `degree` on [lo, hi] (empirical 1-99 percentiles).
// Pwlinear: hat functions on knots; knots default to the distinct sample values
// when there are at most max_knots of them, otherwise to quantiles.
struct RegressionBasis {
    BasisFamily family = BasisFamily::polynomial;
    int degree = 4;
    int max_knots = 128;
    std::vector<double> knots;
    double lo = 0.0, hi = 0.0;
    bool degenerate = false;

    int size() const {
        if (degenerate) return 1;
        return family == BasisFamily::polynomial ? degree + 1 : int(knots.size());
    }

    void fit_domain(const double* x, int M) {
        std::vector<double> v(x, x + M);
        std::sort(v.begin(), v.end());
        auto pct = [&](double p) { return v[std::size_t(std::floor(p * (M - 1)))]; };
        if (family == BasisFamily::polynomial) {
            lo = pct(0.01);
            hi = pct(0.99);
        } else {
            lo = v.front();
            hi = v.back();
            std::vector<double> u;
            for (double a : v)
                if (u.empty() || a - u.back() > 1e-12 * (1.0 + std::abs(a))) u.push_back(a);
            if (int(u.size()) <= max_knots) {
                knots = u;
            } else {
                knots.clear();
                for (int j = 0; j < max_knots; ++j) knots.push_back(pct(double(j) / (max_knots - 1)));
                knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
            }
        }
        degenerate = !(hi - lo > 1e-12 * (1.0 + std::abs(lo))) || (family == BasisFamily::pwlinear && knots.size() < 2);
    }

    // Fills phi (size()); returns true when x was clamped into [lo, hi].
    bool eval(double x, double* phi) const {
        if (degenerate) {
            phi[0] = 1.0;
            return false;
        }
        const bool clamped = x < lo || x > hi;
        x = std::clamp(x, lo, hi);
        if (family == BasisFamily::polynomial) {
            const double s = 2.0 * (x - lo) / (hi - lo) - 1.0;
            phi[0] = 1.0;
            if (degree >= 1) phi[1] = s;
            for (int n = 1; n < degree; ++n) phi[n + 1] = ((2.0 * n + 1.0) * s * phi[n] - n * phi[n - 1]) / (n + 1.0);
            return clamped;
        }
        const int K = int(knots.size());
        std::fill(phi, phi + K, 0.0);
        const auto it = std::upper_bound(knots.begin(), knots.end(), x);
        int j = int(it - knots.begin()) - 1;
        j = std::clamp(j, 0, K - 2);
        const double w = (x - knots[j]) / (knots[j + 1] - knots[j]);
        phi[j] = 1.0 - w;
        phi[j + 1] = w;
        return clamped;
    }
};

struct RegressionFit {
    std::vector<double> coef;
    double offset = 0.0;

    double at(const RegressionBasis& b, double x, std::vector<double>& phi) const {
        phi.resize(b.size());
        b.eval(x, phi.data());
        double s = offset;
        for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * phi[j];
        return s;
    }
};

// Normal equations with relative diagonal ridge, Cholesky factor reused across targets.
class Regressor {
public:
    Regressor(const RegressionBasis& b, const double* x, int M, double ridge = 1e-10) : b_(b), M_(M) {
        p_ = b.size();
        if (M < p_) throw Error("regression: singular normal equations (M too small or basis too rich)");
        phi_.resize(std::size_t(M) * p_);
        for (int k = 0; k < M; ++k) b.eval(x[k], &phi_[std::size_t(k) * p_]);
        L_.assign(std::size_t(p_) * p_, 0.0);
        for (int k = 0; k < M; ++k) {
            const double* r = &phi_[std::size_t(k) * p_];
            for (int i = 0; i < p_; ++i)
                for (int j = 0; j <= i; ++j) L_[i * p_ + j] += r[i] * r[j];
        }
        double md = 0.0;
        for (int i = 0; i < p_; ++i) md += L_[i * p_ + i];
        md /= p_;
        for (int i = 0; i < p_; ++i) L_[i * p_ + i] += ridge * md;
        for (int j = 0; j < p_; ++j) {
            double d = L_[j * p_ + j];
            for (int k = 0; k < j; ++k) d -= L_[j * p_ + k] * L_[j * p_ + k];
            if (!(d > 1e-300)) throw Error("regression: singular normal equations (M too small or basis too rich)");
            d = std::sqrt(d);
            L_[j * p_ + j] = d;
            for (int i = j + 1; i < p_; ++i) {
                double s = L_[i * p_ + j];
                for (int k = 0; k < j; ++k) s -= L_[i * p_ + k] * L_[j * p_ + k];
                L_[i * p_ + j] = s / d;
            }
        }
    }

    RegressionFit fit(const std::vector<double>& target) const {
        RegressionFit f;
        double m = 0.0;
        for (double v : target) {
            if (!std::isfinite(v)) throw BlowUp("regression: non-finite target (generator blow-up)", -1);
            m += v;
        }
        m /= M_;
        f.offset = m;
        std::vector<double> r(p_, 0.0);
        for (int k = 0; k < M_; ++k) {
            const double c = target[k] - m;
            const double* row = &phi_[std::size_t(k) * p_];
            for (int j = 0; j < p_; ++j) r[j] += row[j] * c;
        }
        for (int i = 0; i < p_; ++i) {
            double s = r[i];
            for (int k = 0; k < i; ++k) s -= L_[i * p_ + k] * r[k];
            r[i] = s / L_[i * p_ + i];
        }
        for (int i = p_ - 1; i >= 0; --i) {
            double s = r[i];
            for (int k = i + 1; k < p_; ++k) s -= L_[k * p_ + i] * r[k];
            r[i] = s / L_[i * p_ + i];
        }
        f.coef = std::move(r);
        return f;
    }

    // Fitted values at the sample points.
    void predict(const RegressionFit& f, std::vector<double>& out) const {
        out.resize(M_);
        for (int k = 0; k < M_; ++k) {
            const double* row = &phi_[std::size_t(k) * p_];
            double s = f.offset;
            for (int j = 0; j < p_; ++j) s += f.coef[j] * row[j];
            out[k] = s;
        }
    }

private:
    const RegressionBasis& b_;
    int M_ = 0, p_ = 0;
    std::vector<double> phi_, L_;
};

struct SolverConfig {
    int M = 10000;
    std::uint64_t seed = 1;
    BasisFamily family = BasisFamily::polynomial;
    int degree = 4;
    int max_knots = 128;
    PathMode w_mode = PathMode::gaussian;
    bool antithetic = false;
    Scheme scheme = Scheme::explicit_;
    int picard_iters = 10;
    double picard_tol = 1e-10;
    double ridge = 1e-10;
    bool check_lipschitz = true;
    double lipschitz_box = 5.0;
    double lipschitz_max = 1e6;
};

struct BackwardField {
    TimeGrid grid;
    std::vector<RegressionBasis> basis;  // per node 0..N-1
    std::vector<RegressionFit> y, z;
    Fx h, sigma;
    std::vector<double> frozen_b;
    std::uint64_t b_path_id = 0;
    SolverConfig cfg;
    double x0 = 0.0;
    double y_sup = 0.0;     // max |Y| over samples and nodes
    double z_energy = 0.0;  // sum_i mean(Z_i^2) dt
    double terminal_residual = 0.0;  // node N evaluates h directly
    double picard_residual = 0.0;
    std::vector<double> y_min, y_max;  // per node sample range of Y
};

struct FieldValue {
    double y = 0.0, z = 0.0;
    bool clamped = false;
};

inline FieldValue evaluate_field(const BackwardField& f, int i, double x) {
    if (i < 0 || i > f.grid.N) throw Error("evaluate_field: node out of range");
    if (i == f.grid.N) return {f.h(x), f.sigma(x) * central_diff(f.h, x), false};
    std::vector<double> phi;
    FieldValue v;
    phi.resize(f.basis[i].size());
    v.clamped = f.basis[i].eval(x, phi.data());
    v.y = f.y[i].offset;
    v.z = f.z[i].offset;
    for (std::size_t j = 0; j < phi.size(); ++j) {
        v.y += f.y[i].coef[j] * phi[j];
        v.z += f.z[i].coef[j] * phi[j];
    }
    return v;
}

// Largest finite-difference slopes of a generator over a (y, z) box.
inline std::pair<double, double> lipschitz_scan(const Gen& F, double t, double x, double box, int n = 21) {
    double ly = 0.0, lz = 0.0;
    for (double y : linspace(-box, box, n))
        for (double z : linspace(-box, box, n)) {
            ly = std::max(ly, std::abs(central_diff([&](double v) { return F(t, x, v, z); }, y)));
            lz = std::max(lz, std::abs(central_diff([&](double v) { return F(t, x, y, v); }, z)));
        }
    return {ly, lz};
}

inline BackwardField solve_lipschitz_bdsde(const ProblemSpec& spec, const std::vector<double>& frozen_b,
                                           const TimeGrid& grid, const SolverConfig& cfg, double x0,
                                           std::uint64_t b_path_id = 0) {
    spec.require_scalar();
    if (int(frozen_b.size()) != grid.N) throw Error("solve_lipschitz_bdsde: frozen B path length mismatch");
    if (cfg.check_lipschitz) {
        for (const Gen* G : {&spec.f, &spec.g}) {
            const auto [ly, lz] = lipschitz_scan(*G, 0.0, x0, cfg.lipschitz_box);
            if (!(ly <= cfg.lipschitz_max && lz <= cfg.lipschitz_max))
                throw IllPosed("solve_lipschitz_bdsde: generator fails the Lipschitz sanity check");
        }
    }
    const int N = grid.N, M = cfg.M;
    const double dt = grid.dt();
    const auto batch = sample_dual_paths(grid, M, cfg.seed, cfg.w_mode, true, cfg.antithetic);
    const auto fw = simulate_forward(x0, spec, batch);

    BackwardField F;
    F.grid = grid;
    F.h = spec.h;
    F.sigma = spec.sigma;
    F.frozen_b = frozen_b;
    F.b_path_id = b_path_id;
    F.cfg = cfg;
    F.x0 = x0;
    F.basis.resize(N);
    F.y.resize(N);
    F.z.resize(N);
    F.y_min.assign(N + 1, 0.0);
    F.y_max.assign(N + 1, 0.0);

    std::vector<double> Y(M), Z(M), Yn(M), Zn(M), G(M), Ghat(M), tgt(M), Yp(M);
    const double* XN = fw.row(N);
    for (int k = 0; k < M; ++k) {
        Y[k] = spec.h(XN[k]);
        Z[k] = spec.sigma(XN[k]) * central_diff(spec.h, XN[k]);
    }
    auto track = [&](int i) {
        const auto [a, b] = std::minmax_element(Y.begin(), Y.end());
        F.y_min[i] = *a;
        F.y_max[i] = *b;
        F.y_sup = std::max({F.y_sup, std::abs(*a), std::abs(*b)});
    };
    track(N);

    for (int i = N - 1; i >= 0; --i) {
        std::swap(Y, Yn);
        std::swap(Z, Zn);
        const double t0 = grid.t(i), t1 = grid.t(i + 1), db = frozen_b[i];
        const double* Xi = fw.row(i);
        const double* Xn = fw.row(i + 1);
        auto& B = F.basis[i];
        B.family = cfg.family;
        B.degree = cfg.degree;
        B.max_knots = cfg.max_knots;
        B.fit_domain(Xi, M);
        const Regressor R(B, Xi, M, cfg.ridge);

        const bool gl = cfg.scheme == Scheme::implicit_fg;
        for (int k = 0; k < M; ++k) G[k] = Yn[k] + (gl ? 0.0 : spec.g(t1, Xn[k], Yn[k], Zn[k]) * db);
        R.predict(R.fit(G), Ghat);
        for (int k = 0; k < M; ++k) tgt[k] = (G[k] - Ghat[k]) * batch.dw(k, i) / dt;
        F.z[i] = R.fit(tgt);
        R.predict(F.z[i], Z);

        if (cfg.scheme == Scheme::explicit_) {
            for (int k = 0; k < M; ++k) tgt[k] = G[k] + spec.f(t1, Xn[k], Yn[k], Z[k]) * dt;
            F.y[i] = R.fit(tgt);
            R.predict(F.y[i], Y);
        } else {
            Y = Ghat;
            double change = 0.0;
            for (int it = 0; it < cfg.picard_iters; ++it) {
                for (int k = 0; k < M; ++k) {
                    tgt[k] = G[k] + spec.f(t0, Xi[k], Y[k], Z[k]) * dt;
                    if (gl) tgt[k] += spec.g(t0, Xi[k], Y[k], Z[k]) * db;
                }
                F.y[i] = R.fit(tgt);
                R.predict(F.y[i], Yp);
                change = 0.0;
                for (int k = 0; k < M; ++k) change = std::max(change, std::abs(Yp[k] - Y[k]) / std::max(1.0, std::abs(Yp[k])));
                std::swap(Y, Yp);
                if (change <= cfg.picard_tol) break;
            }
            F.picard_residual = std::max(F.picard_residual, change);
        }
        for (int k = 0; k < M; ++k)
            if (!std::isfinite(Y[k])) throw BlowUp("solve_lipschitz_bdsde: non-finite Y", i);
        double ze = 0.0;
        for (int k = 0; k < M; ++k) ze += Z[k] * Z[k];
        F.z_energy += ze / M * dt;
        track(i);
    }
    return F;
}

inline double field_y0(const BackwardField& f) { return evaluate_field(f, 0, f.x0).y; }

inline void write_field_csv(const std::string& path, const BackwardField& f) {
    std::ofstream o(path);
    if (!o) throw Error("write_field_csv: cannot open " + path);
    o.precision(17);
    o << "node,t,family,lo,hi,kind,offset,coefficients\n";
    for (int i = 0; i < f.grid.N; ++i) {
        for (int which = 0; which < 2; ++which) {
            const auto& r = which == 0 ? f.y[i] : f.z[i];
            o << i << ',' << f.grid.t(i) << ',' << to_string(f.basis[i].family) << ',' << f.basis[i].lo << ','
              << f.basis[i].hi << ',' << (which == 0 ? "y" : "z") << ',' << r.offset;
            for (double c : r.coef) o << ',' << c;
            o << '\n';
        }
    }
}

inline json field_meta_json(const BackwardField& f) {
    return json{{"seed", f.cfg.seed},
                {"M", f.cfg.M},
                {"N", f.grid.N},
                {"T", f.grid.T},
                {"basis", to_string(f.cfg.family)},
                {"degree", f.cfg.degree},
                {"w_mode", to_string(f.cfg.w_mode)},
                {"scheme", to_string(f.cfg.scheme)},
                {"b_path_id", f.b_path_id},
                {"x0", f.x0},
                {"y0", field_y0(f)},
                {"y_sup", f.y_sup},
                {"z_energy", f.z_energy},
                {"picard_residual", f.picard_residual}};
}

}  // namespace bdsde
