#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdsde/scenarios.hpp"

namespace bdsde {

const std::vector<ScenarioEntry>& registry() {
    static const std::vector<ScenarioEntry> r{
        {"example-3-1", "exponential transform: constant terminal exactness and sin(W_T) against the tree", scenario_example_3_1},
        {"example-3-2", "linear g = H + dY: closed-form mean and growth of the per-B spread with d", scenario_example_3_2},
        {"apriori", "sup |Y| against the a priori bound on H2-validated problems", scenario_apriori},
        {"comparison", "ordered inputs give ordered Y0, negative control, STR change of variable", scenario_comparison},
        {"monotone", "sup-convolution schedule {4,8,16,32}: monotone Y^n and shrinking differences", scenario_monotone},
        {"stability", "perturbed terminal values and drivers converge", scenario_stability},
        {"simple-spde", "finite differences vs Monte Carlo for the simple situation, weak-form residual", scenario_simple_spde},
        {"general-fk", "finite differences vs Monte Carlo through truncation and sup-convolution", scenario_general_fk},
        {"norm-equivalence", "weighted norm ratios of the forward flow", scenario_norm_equivalence},
        {"ito-residual", "discrete Ito formula residual of the exponential transform on tree paths", scenario_ito_residual},
        {"oracle-equivalence", "regression solver against the exhaustive tree on Lipschitz problems", scenario_oracle_equivalence},
    };
    return r;
}

const ScenarioEntry& find_scenario(const std::string& name) {
    for (const auto& e : registry())
        if (e.name == name) return e;
    std::string msg = "unknown scenario '" + name + "'; registry:";
    for (const auto& e : registry()) msg += " " + e.name;
    throw Error(msg);
}

std::string config_hash(const Config& cfg, std::uint64_t seed) {
    std::ostringstream o;
    o << std::hex << std::hash<std::string>{}(config_text(cfg) + "#seed=" + std::to_string(seed));
    return o.str();
}

std::uint64_t default_seed() {
    if (const char* e = std::getenv("BDSDE_SEED")) {
        try {
            return std::stoull(e);
        } catch (const std::exception&) {
            throw Error("BDSDE_SEED is not an unsigned integer: '" + std::string(e) + "'");
        }
    }
    return 1;
}

static std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

CheckReport run_scenario(const std::string& name, RunContext ctx) {
    const auto& e = find_scenario(name);
    if (ctx.artifacts()) std::filesystem::create_directories(ctx.out_dir);
    CheckReport rep = e.run(ctx);
    rep.name = name;
    rep.seed = ctx.seed;
    rep.config_hash = config_hash(ctx.cfg, ctx.seed);
    if (ctx.artifacts()) {
        json j = rep.to_json();
        json cfg = json::object();
        for (const auto& [k, v] : ctx.cfg) cfg[k] = v;
        j["config"] = cfg;
        j["seed_env"] = std::getenv("BDSDE_SEED") ? std::string(std::getenv("BDSDE_SEED")) : std::string();
        std::ofstream(ctx.file("report.json")) << j.dump(2) << '\n';
        std::ofstream s(ctx.file("summary.csv"));
        s.precision(17);
        s << "name,pass,margin,se\n";
        for (const auto& r : rep.rows) s << csv_field(r.name) << ',' << (r.pass ? 1 : 0) << ',' << r.margin << ',' << r.se << '\n';
    }
    return rep;
}

ValidationReport validate_config(const Config& cfg) {
    const auto sb = spec_from_config(cfg);
    const double T = sb.spec.T;
    const auto grid = SampleGrid::box(T, int(cfg_num(cfg, "grid_t", 5)), cfg_num(cfg, "y_lo", -3), cfg_num(cfg, "y_hi", 3),
                                      int(cfg_num(cfg, "grid_y", 13)), cfg_num(cfg, "z_lo", -5), cfg_num(cfg, "z_hi", 5),
                                      int(cfg_num(cfg, "grid_z", 21)), linspace(-3.0, 3.0, 7));
    return validate_h2(sb.spec, sb.profile, grid);
}

}  // namespace bdsde
