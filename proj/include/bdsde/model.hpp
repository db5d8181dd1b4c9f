#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace bdsde {

using json = nlohmann::ordered_json;

struct ProblemSpec {
    std::string name = "unnamed";
    int dim_x = 1;
    int dim_w = 1;
    int dim_b = 1;
    double T = 1.0;
    double x0 = 0.0;
    Fx h = [](double) { return 0.0; };
    Gen f = [](double, double, double, double) { return 0.0; };
    Gen g = [](double, double, double, double) { return 0.0; };
    Fx b = [](double) { return 0.0; };
    Fx sigma = [](double) { return 1.0; };
    // Optional split f = a0*y + f0. Empty means a0 = 0.
    Gen a0;
    // Set when f and g ignore (t, x); lets quad build a single approximation table.
    bool homogeneous = false;

    void check() const {
        if (!(T > 0.0)) throw IllPosed("ProblemSpec: horizon T must be positive");
        if (dim_x < 1 || dim_w < 1 || dim_b < 1) throw IllPosed("ProblemSpec: dimensions must be >= 1");
        if (!h || !f || !g || !b || !sigma) throw IllPosed("ProblemSpec: missing coefficient");
    }
    void require_scalar() const {
        check();
        if (dim_x != 1 || dim_w != 1 || dim_b != 1)
            throw IllPosed("ProblemSpec: solvers support n = d = l = 1 only");
    }
    double a0_at(double t, double x, double y, double z) const { return a0 ? a0(t, x, y, z) : 0.0; }
    double f0_at(double t, double x, double y, double z) const { return f(t, x, y, z) - a0_at(t, x, y, z) * y; }
};

// sup |h| over sampled states.
inline double terminal_sup(const ProblemSpec& s, const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) {
        const double v = s.h(x);
        if (!std::isfinite(v)) throw IllPosed("terminal_sup: non-finite terminal value");
        m = std::max(m, std::abs(v));
    }
    return m;
}

struct GrowthProfile {
    double quad_C = 1.0;
    double alpha = 0.5;
    double g_lip_C = 0.0;  // Lipschitz constant of g in y; 0 means quad_C
    Ft bound_a = [](double) { return 0.0; };
    double a_const = 0.0;
    double a_lower = -std::numeric_limits<double>::infinity();
    Ft bound_b = [](double) { return 0.0; };
    Fx c_of_y = [](double) { return 1.0; };
    double bound_M = 0.0;
    double str_a = 0.1;
    Ft str_b = [](double) { return 0.0; };
    Ft l_of_t;
    Ft k_of_t;
    Ft l_eps_of_t;
    double eps = 0.1;

    double gC() const { return g_lip_C > 0.0 ? g_lip_C : quad_C; }

    double b_L1(double T) const {
        std::vector<double> v;
        for (double t : linspace(0.0, T, 1001)) v.push_back(std::abs(bound_b(t)));
        return trapezoid(v, T / 1000.0);
    }
    double a_plus_L1(double T) const {
        std::vector<double> v;
        for (double t : linspace(0.0, T, 1001)) v.push_back(std::max(bound_a(t), 0.0));
        return trapezoid(v, T / 1000.0);
    }
    // (||xi|| + ||b||_1) exp(||a+||_1)
    double apriori_bound(double xi_sup, double T) const { return (xi_sup + b_L1(T)) * std::exp(a_plus_L1(T)); }

    void check() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw IllPosed("GrowthProfile: alpha must lie in (0,1)");
        if (!(quad_C > 0.0)) throw IllPosed("GrowthProfile: C must be positive");
    }
};

struct SampleGrid {
    std::vector<double> t, x{0.0}, y, z;

    static SampleGrid box(double T, std::size_t nt, double ylo, double yhi, std::size_t ny, double zlo, double zhi,
                          std::size_t nz, std::vector<double> xs = {0.0}) {
        SampleGrid g;
        g.t = linspace(0.0, T, nt);
        g.x = std::move(xs);
        g.y = linspace(ylo, yhi, ny);
        g.z = linspace(zlo, zhi, nz);
        return g;
    }
    bool empty() const { return t.empty() || x.empty() || y.empty() || z.empty(); }
};

struct InequalityCheck {
    std::string name;
    double max_violation = 0.0;
    double margin = std::numeric_limits<double>::infinity();
    double wt = 0, wx = 0, wy = 0, wz = 0;
    bool pass = true;

    // lhs <= rhs at (t,x,y,z)
    void record(double lhs, double rhs, double t, double x, double y, double z) {
        if (!std::isfinite(lhs) || !std::isfinite(rhs))
            throw IllPosed("validator: non-finite coefficient evaluation in '" + name + "'");
        const double slack = rhs - lhs;
        if (slack < margin) {
            margin = slack;
            wt = t, wx = x, wy = y, wz = z;
        }
        max_violation = std::max(max_violation, -slack);
    }
};

struct ValidationReport {
    std::string name;
    double tol = 1e-8;
    std::vector<InequalityCheck> checks;
    bool pass = true;

    const InequalityCheck& get(const std::string& n) const {
        for (const auto& c : checks)
            if (c.name == n) return c;
        throw Error("ValidationReport: no check named " + n);
    }
    void finalize() {
        pass = true;
        for (auto& c : checks) {
            c.pass = c.max_violation <= tol;
            pass = pass && c.pass;
        }
    }
    json to_json() const {
        json j;
        j["name"] = name;
        j["pass"] = pass;
        j["tolerance"] = tol;
        j["checks"] = json::array();
        for (const auto& c : checks) {
            j["checks"].push_back({{"name", c.name},
                                   {"pass", c.pass},
                                   {"max_violation", c.max_violation},
                                   {"margin", c.margin},
                                   {"worst", {{"t", c.wt}, {"x", c.wx}, {"y", c.wy}, {"z", c.wz}}}});
        }
        return j;
    }
};

namespace detail {

inline void check_spacing(const std::vector<double>& v, const char* axis) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double h = fd_step(std::max(std::abs(v[i]), std::abs(v[i - 1])));
        if (std::abs(v[i] - v[i - 1]) < 2.0 * h)
            throw Refused(std::string("validator: grid too fine for finite differences along ") + axis);
    }
}

inline void check_grid(const SampleGrid& g) {
    if (g.empty()) throw Refused("validator: empty sample grid");
    check_spacing(g.y, "y");
    check_spacing(g.z, "z");
}

template <class Fn>
void for_grid(const SampleGrid& g, Fn&& fn) {
    for (double t : g.t)
        for (double x : g.x)
            for (double y : g.y)
                for (double z : g.z) fn(t, x, y, z);
}

inline double dy(const Gen& F, double t, double x, double y, double z) {
    return central_diff([&](double v) { return F(t, x, v, z); }, y);
}
inline double dz(const Gen& F, double t, double x, double y, double z) {
    return central_diff([&](double v) { return F(t, x, y, v); }, z);
}

// Largest eigenvalue of [[gy^2 - C, gy gz], [gy gz, gz^2 - a]].
inline double lip_excess(double gy, double gz, double C, double a) {
    const double p = gy * gy - C, q = gz * gz - a, r = gy * gz;
    return 0.5 * (p + q) + std::sqrt(0.25 * (p - q) * (p - q) + r * r);
}

}  // namespace detail

inline ValidationReport validate_h2(const ProblemSpec& spec, const GrowthProfile& prof, const SampleGrid& grid,
                                    double tol = 1e-8) {
    spec.check();
    detail::check_grid(grid);
    ValidationReport rep{"H2", tol, {}, true};
    InequalityCheck f0{"|f0| <= b + c(|y|)|z|^2"}, alo{"d <= a0"}, ahi{"a0 <= a"}, gg{"|g|^2 <= alpha|z|^2"},
        gl{"|dg|^2 <= C|dy|^2 + alpha|dz|^2"}, mono{"c nondecreasing"};
    detail::for_grid(grid, [&](double t, double x, double y, double z) {
        const double a0 = spec.a0_at(t, x, y, z);
        f0.record(std::abs(spec.f0_at(t, x, y, z)), prof.bound_b(t) + prof.c_of_y(std::abs(y)) * z * z, t, x, y, z);
        if (std::isfinite(prof.a_lower)) alo.record(prof.a_lower, a0, t, x, y, z);
        ahi.record(a0, prof.bound_a(t), t, x, y, z);
        const double gv = spec.g(t, x, y, z);
        gg.record(gv * gv, prof.alpha * z * z, t, x, y, z);
        const double gy = detail::dy(spec.g, t, x, y, z), gz = detail::dz(spec.g, t, x, y, z);
        gl.record(detail::lip_excess(gy, gz, prof.gC(), prof.alpha), 0.0, t, x, y, z);
    });
    std::vector<double> ay;
    for (double y : grid.y) ay.push_back(std::abs(y));
    std::sort(ay.begin(), ay.end());
    for (std::size_t i = 1; i < ay.size(); ++i) mono.record(prof.c_of_y(ay[i - 1]), prof.c_of_y(ay[i]), 0, 0, ay[i], 0);
    rep.checks = {f0, ahi, gg, gl, mono};
    if (std::isfinite(prof.a_lower)) rep.checks.insert(rep.checks.begin() + 1, alo);
    rep.finalize();
    return rep;
}

inline ValidationReport validate_str(const Gen& f, double a, const Ft& b_fn, const SampleGrid& grid, double tol = 1e-8) {
    if (!(a > 0.0)) throw IllPosed("validate_str: a must be positive");
    detail::check_grid(grid);
    ValidationReport rep{"STR", tol, {}, true};
    InequalityCheck c{"df/dy + a|df/dz|^2 <= b(t)"};
    detail::for_grid(grid, [&](double t, double x, double y, double z) {
        const double fy = detail::dy(f, t, x, y, z), fz = detail::dz(f, t, x, y, z);
        c.record(fy + a * fz * fz, b_fn(t), t, x, y, z);
    });
    rep.checks = {c};
    rep.finalize();
    return rep;
}

inline ValidationReport validate_h3(const ProblemSpec& spec, const GrowthProfile& prof, const SampleGrid& grid,
                                    double tol = 1e-8) {
    spec.check();
    if (!prof.l_of_t || !prof.k_of_t || !prof.l_eps_of_t)
        throw Error("validate_h3: profile needs l_of_t, k_of_t and l_eps_of_t");
    detail::check_grid(grid);
    ValidationReport rep{"H3", tol, {}, true};
    const double C = prof.quad_C, Cg = prof.gC(), al = prof.alpha;
    InequalityCheck fb{"|f| <= l + C|z|^2"}, gb{"|g|^2 <= alpha|z|^2"}, fy{"df/dy <= l_eps + eps|z|^2"},
        gy{"|dg/dy|^2 <= C"}, fz{"|df/dz| <= k + C|z|"}, gz{"|dg/dz|^2 <= alpha"};
    detail::for_grid(grid, [&](double t, double x, double y, double z) {
        fb.record(std::abs(spec.f(t, x, y, z)), prof.l_of_t(t) + C * z * z, t, x, y, z);
        const double gv = spec.g(t, x, y, z);
        gb.record(gv * gv, al * z * z, t, x, y, z);
        fy.record(detail::dy(spec.f, t, x, y, z), prof.l_eps_of_t(t) + prof.eps * z * z, t, x, y, z);
        const double gyv = detail::dy(spec.g, t, x, y, z), gzv = detail::dz(spec.g, t, x, y, z);
        gy.record(gyv * gyv, Cg, t, x, y, z);
        fz.record(std::abs(detail::dz(spec.f, t, x, y, z)), prof.k_of_t(t) + C * std::abs(z), t, x, y, z);
        gz.record(gzv * gzv, al, t, x, y, z);
    });
    rep.checks = {fb, gb, fy, gy, fz, gz};
    rep.finalize();
    return rep;
}

// ---- flat key-value config ----

using Config = std::map<std::string, std::string>;

inline Config parse_config_text(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config: line " + std::to_string(lineno) + ": expected key = value");
        const std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (k.empty()) throw Error("config: line " + std::to_string(lineno) + ": empty key");
        c[k] = v;
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline std::string config_text(const Config& c) {
    std::string s;
    for (const auto& [k, v] : c) s += k + " = " + v + "\n";
    return s;
}

inline double cfg_num(const Config& c, const std::string& k, double def) {
    auto it = c.find(k);
    if (it == c.end()) return def;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error("config: key '" + k + "' is not a number: " + it->second);
    }
}

inline std::string cfg_str(const Config& c, const std::string& k, const std::string& def) {
    auto it = c.find(k);
    return it == c.end() ? def : it->second;
}

inline std::vector<double> cfg_list(const Config& c, const std::string& k, std::vector<double> def) {
    auto it = c.find(k);
    if (it == c.end()) return def;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        Config tmp{{k, tok}};
        out.push_back(cfg_num(tmp, k, 0.0));
    }
    return out;
}

// Built-in coefficient forms addressable from config files.
//   f: zero | const | quad | quad_const | sin_y_quad | linear_y | sin_x_quad
//   g: zero | alpha_z | alpha_sin_y_z | affine_y
//   h: const | identity | sin | cos | tanh
struct SpecBundle {
    ProblemSpec spec;
    GrowthProfile profile;
};

inline SpecBundle spec_from_config(const Config& c) {
    SpecBundle out;
    auto& s = out.spec;
    auto& p = out.profile;
    const double C = cfg_num(c, "C", 1.0), al = cfg_num(c, "alpha", 0.25), k = cfg_num(c, "k", 0.0);
    const double H = cfg_num(c, "H", 1.0), d = cfg_num(c, "d", 1.0), amp = cfg_num(c, "amp", 1.0),
                 cc = cfg_num(c, "c", 1.0), la = cfg_num(c, "a", -1.0);
    s.name = cfg_str(c, "scenario", "custom");
    s.T = cfg_num(c, "T", 1.0);
    s.x0 = cfg_num(c, "x0", 0.0);
    const double bd = cfg_num(c, "drift", 0.0), sg = cfg_num(c, "sigma", 1.0);
    s.b = [bd](double) { return bd; };
    s.sigma = [sg](double) { return sg; };
    p.quad_C = C;
    p.alpha = al;
    p.g_lip_C = cfg_num(c, "g_lip_C", 0.0);

    const std::string f = cfg_str(c, "f", "zero");
    if (f == "zero") {
        s.f = [](double, double, double, double) { return 0.0; };
        p.bound_b = [](double) { return 0.0; };
    } else if (f == "const") {
        s.f = [k](double, double, double, double) { return k; };
        p.bound_b = [k](double) { return std::abs(k); };
    } else if (f == "quad") {
        s.f = [C](double, double, double, double z) { return C * z * z; };
        p.c_of_y = [C](double) { return C; };
    } else if (f == "quad_const") {
        s.f = [C, k](double, double, double, double z) { return C * z * z + k; };
        p.c_of_y = [C](double) { return C; };
        p.bound_b = [k](double) { return std::abs(k); };
    } else if (f == "sin_y_quad") {
        const double fa = cfg_num(c, "famp", 1.0);
        s.f = [C, fa](double, double, double y, double z) { return fa * std::sin(y) + C * z * z; };
        p.c_of_y = [C](double) { return C; };
        p.bound_b = [fa](double) { return std::abs(fa); };
    } else if (f == "linear_y") {
        s.f = [la, k](double, double, double y, double) { return la * y + k; };
        s.a0 = [la](double, double, double, double) { return la; };
        p.bound_a = [la](double) { return la; };
        p.a_const = la;
        p.a_lower = la;
        p.bound_b = [k](double) { return std::abs(k); };
    } else if (f == "sin_x_quad") {
        s.f = [C](double, double x, double, double z) { return std::sin(x) + C * z * z; };
        p.c_of_y = [C](double) { return C; };
        p.bound_b = [](double) { return 1.0; };
    } else {
        throw Error("config: unknown f form '" + f + "'");
    }
    s.homogeneous = (f != "sin_x_quad");

    const std::string g = cfg_str(c, "g", "zero");
    if (g == "zero") {
        s.g = [](double, double, double, double) { return 0.0; };
    } else if (g == "alpha_z") {
        s.g = [al](double, double, double, double z) { return al * z; };
    } else if (g == "alpha_sin_y_z") {
        s.g = [al](double, double, double y, double z) { return al * std::sin(y) * z; };
    } else if (g == "affine_y") {
        s.g = [H, d](double, double, double y, double) { return H + d * y; };
    } else {
        throw Error("config: unknown g form '" + g + "'");
    }

    const std::string h = cfg_str(c, "h", "const");
    if (h == "const") {
        s.h = [cc](double) { return cc; };
    } else if (h == "identity") {
        s.h = [](double x) { return x; };
    } else if (h == "sin") {
        s.h = [amp](double x) { return amp * std::sin(x); };
    } else if (h == "cos") {
        s.h = [amp](double x) { return amp * std::cos(x); };
    } else if (h == "tanh") {
        const double hk = cfg_num(c, "hk", 1.0);
        s.h = [amp, hk](double x) { return amp * std::tanh(hk * x); };
    } else {
        throw Error("config: unknown h form '" + h + "'");
    }
    s.check();
    return out;
}

}  // namespace bdsde
