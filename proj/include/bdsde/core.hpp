#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdsde {

// Coefficient signatures. Everything is scalar: n = d = l = 1.
using Gen = std::function<double(double t, double x, double y, double z)>;
using Fx = std::function<double(double x)>;
using Ft = std::function<double(double t)>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IllPosed : Error {
    using Error::Error;
};
struct BlowUp : Error {
    int step;
    BlowUp(const std::string& msg, int step_) : Error(msg), step(step_) {}
};
struct NonConvergence : Error {
    using Error::Error;
};
struct PositivityBreach : Error {
    int node;
    double x;
    PositivityBreach(const std::string& msg, int node_, double x_) : Error(msg), node(node_), x(x_) {}
};
struct Refused : Error {
    using Error::Error;
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {a};
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
    return v;
}

inline double fd_step(double v) { return 1e-5 * std::max(1.0, std::abs(v)); }

// Central difference of a scalar function at v.
template <class F>
double central_diff(F&& fn, double v) {
    const double h = fd_step(v);
    return (fn(v + h) - fn(v - h)) / (2.0 * h);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    double sd = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    if (v.empty()) return r;
    double s = 0.0;
    for (double x : v) s += x;
    r.mean = s / double(v.size());
    if (v.size() > 1) {
        double q = 0.0;
        for (double x : v) q += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(q / double(v.size() - 1));
        r.se = r.sd / std::sqrt(double(v.size()));
    }
    return r;
}

inline bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Trapezoid rule on a uniform grid.
inline double trapezoid(const std::vector<double>& v, double h) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
    return s * h;
}

}  // namespace bdsde
