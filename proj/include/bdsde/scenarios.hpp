#pragma once

#include <string>
#include <vector>

#include "harness.hpp"

namespace bdsde {

// Settings shared by every registry scenario. Scenario-specific keys are read from cfg.
struct RunContext {
    Config cfg;
    std::uint64_t seed = 1;
    std::string out_dir;  // empty: no field artifacts

    int steps(int def) const { return int(cfg_num(cfg, "steps", def)); }
    int paths(int def) const { return int(cfg_num(cfg, "paths", def)); }
    double num(const std::string& k, double def) const { return cfg_num(cfg, k, def); }
    bool artifacts() const { return !out_dir.empty(); }
    std::string file(const std::string& name) const { return out_dir + "/" + name; }
};

struct ScenarioEntry {
    std::string name;
    std::string description;
    CheckReport (*run)(const RunContext&);
};

const std::vector<ScenarioEntry>& registry();
const ScenarioEntry& find_scenario(const std::string& name);

CheckReport scenario_oracle_equivalence(const RunContext& ctx);
CheckReport scenario_example_3_1(const RunContext& ctx);
CheckReport scenario_example_3_2(const RunContext& ctx);
CheckReport scenario_apriori(const RunContext& ctx);
CheckReport scenario_comparison(const RunContext& ctx);
CheckReport scenario_monotone(const RunContext& ctx);
CheckReport scenario_stability(const RunContext& ctx);
CheckReport scenario_simple_spde(const RunContext& ctx);
CheckReport scenario_general_fk(const RunContext& ctx);
CheckReport scenario_norm_equivalence(const RunContext& ctx);
CheckReport scenario_ito_residual(const RunContext& ctx);
CheckReport scenario_weak_form(const RunContext& ctx);
CheckReport scenario_str_feasibility(const RunContext& ctx);

// Lipschitz problems used by the oracle-equivalence and comparison checks.
std::vector<ProblemSpec> lipschitz_suite();

// Runs a scenario, writes report.json and summary.csv into ctx.out_dir (when set), returns the report.
CheckReport run_scenario(const std::string& name, RunContext ctx);

// Runs the assumption validators on a config file's problem.
ValidationReport validate_config(const Config& cfg);

std::string config_hash(const Config& cfg, std::uint64_t seed);

// Default seed, overridable through the BDSDE_SEED environment variable.
std::uint64_t default_seed();

}  // namespace bdsde
