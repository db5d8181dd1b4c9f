// Runs every acceptance criterion at its stated tolerance; one PASS/FAIL line each.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "bdsde/scenarios.hpp"

using namespace bdsde;

namespace {

struct Outcome {
    bool pass = false;
    std::string note;
};

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

// Pass state of the rows selected by pred; false when nothing matched.
bool rows_pass(const CheckReport& r, const std::function<bool(const CheckRow&)>& pred, int* count = nullptr) {
    bool ok = true;
    int n = 0;
    for (const auto& row : r.rows)
        if (pred(row)) {
            ++n;
            if (!row.pass) {
                ok = false;
                std::cout << "    failing row: " << r.name << " :: " << row.name << " (margin " << row.margin << ")\n";
            }
        }
    if (count) *count = n;
    return ok && n > 0;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CheckReport timed(const std::string& name, double* secs) {
    RunContext ctx;
    ctx.seed = default_seed();
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_scenario(name, ctx);
    *secs = seconds_since(t0);
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;

    criteria.push_back({"oracle equivalence (>= 5 Lipschitz specs, N = 6, 20 seeds, M = 1e4, <= 60 s)", [] {
                            double t = 0;
                            const auto r = timed("oracle-equivalence", &t);
                            int n = 0;
                            const bool ok = rows_pass(r, [](const CheckRow&) { return true; }, &n);
                            return Outcome{ok && n >= 5 && t <= 60.0, std::to_string(n) + " specs, " + fmt("%.1f s", t)};
                        }});
    criteria.push_back({"example-3-1: exponential transform exactness (constant xi to 1e-10, sin(W_T) vs quadratic tree within 3 SE)", [] {
                            double t = 0;
                            const auto r = timed("example-3-1", &t);
                            return Outcome{rows_pass(r, [](const CheckRow&) { return true; }), fmt("%.1f s", t)};
                        }});
    criteria.push_back({"example-3-2: linear noise closed form within 3 SE and spread growing with d", [] {
                            double t = 0;
                            const auto r = timed("example-3-2", &t);
                            return Outcome{rows_pass(r, [](const CheckRow&) { return true; }), fmt("%.1f s", t)};
                        }});
    criteria.push_back({"a priori bound on every H2-validated case", [] {
                            double t = 0;
                            const auto r = timed("apriori", &t);
                            int n = 0;
                            const bool ok = rows_pass(r, [](const CheckRow&) { return true; }, &n);
                            return Outcome{ok, std::to_string(n) + " bound checks, " + fmt("%.1f s", t)};
                        }});

    CheckReport comparison;
    double comparison_t = 0;
    criteria.push_back({"comparison: >= 3 ordered pairs incl. quadratic, negative control fails", [&] {
                            comparison = timed("comparison", &comparison_t);
                            int pairs = 0;
                            for (const auto& row : comparison.rows)
                                if (row.name.find("<=") != std::string::npos && !starts_with(row.name, "str-feasibility/"))
                                    ++pairs;
                            bool quad = false;
                            for (const auto& row : comparison.rows) quad = quad || starts_with(row.name, "quadratic");
                            const bool ok = rows_pass(comparison, [](const CheckRow& row) {
                                return !starts_with(row.name, "str-feasibility/");
                            });
                            return Outcome{ok && pairs >= 3 && quad,
                                           std::to_string(pairs) + " pairs, " + fmt("%.1f s", comparison_t)};
                        }});
    criteria.push_back({"monotone stability over n in {4, 8, 16, 32}", [] {
                            double t = 0;
                            const auto r = timed("monotone", &t);
                            return Outcome{rows_pass(r, [](const CheckRow&) { return true; }), fmt("%.1f s", t)};
                        }});
    criteria.push_back({"discrete Ito residual ratios in [1.4, 2.6] over N = 4, 8, 16", [] {
                            double t = 0;
                            const auto r = timed("ito-residual", &t);
                            return Outcome{rows_pass(r, [](const CheckRow&) { return true; }), fmt("%.1f s", t)};
                        }});

    CheckReport spde;
    double spde_t = 0;
    criteria.push_back({"Feynman-Kac: sup relative discrepancy <= 5% at (64, 200, 2e4), decreasing, <= 5 min", [&] {
                            spde = timed("simple-spde", &spde_t);
                            const bool ok = rows_pass(spde, [](const CheckRow& row) { return !starts_with(row.name, "weak-form/"); });
                            return Outcome{ok && spde_t <= 300.0, fmt("%.1f s", spde_t)};
                        }});
    criteria.push_back({"weak-form residual ratios in [1.4, 2.6] for 3 test functions", [&] {
                            int n = 0;
                            const bool ok = rows_pass(spde, [](const CheckRow& row) { return starts_with(row.name, "weak-form/"); }, &n);
                            return Outcome{ok, std::to_string(n) + " ratios"};
                        }});
    criteria.push_back({"STR feasibility for (C, alpha, M) = (1, 0.3, 1)", [] {
                            RunContext ctx;
                            const auto r = scenario_str_feasibility(ctx);
                            return Outcome{rows_pass(r, [](const CheckRow&) { return true; }),
                                           "A = " + fmt("%.3g", r.table["A"].get<double>()) +
                                               ", lambda = " + fmt("%.3g", r.table["lambda"].get<double>()) +
                                               ", delta = " + fmt("%.3g", r.table["delta"].get<double>())};
                        }});
    criteria.push_back({"determinism: report.json bit-identical on rerun", [] {
                            const auto root = std::filesystem::temp_directory_path() / "bdsde_acceptance_det";
                            std::filesystem::remove_all(root);
                            bool ok = true;
                            std::string names;
                            for (const char* name : {"example-3-2", "apriori", "ito-residual", "norm-equivalence"}) {
                                for (const char* run : {"a", "b"}) {
                                    RunContext ctx;
                                    ctx.seed = 12345;
                                    ctx.out_dir = (root / name / run).string();
                                    run_scenario(name, ctx);
                                }
                                const auto a = slurp(root / name / "a" / "report.json");
                                const auto b = slurp(root / name / "b" / "report.json");
                                ok = ok && !a.empty() && a == b;
                                names += std::string(names.empty() ? "" : ", ") + name;
                            }
                            std::filesystem::remove_all(root);
                            return Outcome{ok, names};
                        }});

    int failed = 0, k = 0;
    for (auto& [label, fn] : criteria) {
        ++k;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << label << " [" << o.note << "]" << std::endl;
    }
    std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
