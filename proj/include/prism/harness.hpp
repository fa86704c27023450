#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/backends.hpp"
#include "prism/baselines.hpp"
#include "prism/metrics.hpp"
#include "prism/templates.hpp"
#include "prism/types.hpp"

namespace prism {

struct HarnessConfig {
    std::filesystem::path dataset;
    std::string strategy = "prism";
    StrategyParams strategy_params;
    std::vector<std::string> aggregation = {"majority", "prm_score"};
    RunConfig run;
    std::string backend_kind = "sim";  // sim | wire
    std::optional<std::filesystem::path> sim_world;
    ScriptedWorld world;  // resolved from sim_world (or defaults)
    WireConfig wire;
    Pricing pricing;
    std::filesystem::path prompt_dir = PRISM_DEFAULT_PROMPT_DIR;
    std::map<std::string, std::filesystem::path> template_overrides;
    std::filesystem::path output_dir = "out";
    bool checkpoints = true;
    std::optional<int> limit;
    int offset = 0;
    int problem_parallel = 4;
    bool resume = false;
    std::optional<std::filesystem::path> save_initial;
    std::optional<std::filesystem::path> load_initial;

    // Test-only: consulted after each checkpoint write; returning true
    // simulates a kill at that barrier. Never part of the config file.
    std::function<bool(const std::string& problem_id, int iteration)> abort_hook;

    // Strict parser: unknown keys are rejected, referenced files must exist,
    // and run parameter ranges are enforced.
    static HarnessConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static HarnessConfig from_file(const std::filesystem::path& path);
    void finalize();  // resolves the world file and validates ranges
};

struct RunOutcome {
    nlohmann::json report;
    std::vector<ProblemRunData> problems;
    int exit_code = 0;  // nonzero iff any problem failed
};

// Runs the configured strategy over the dataset: Sample-N population
// creation, T enhancement iterations, the requested aggregations, per
// iteration checkpoints, and the JSON+CSV report under output_dir.
RunOutcome run_harness(const HarnessConfig& config);

// Continues from existing checkpoints; completed problems are untouched and
// a corrupt checkpoint chain restarts that problem from scratch.
RunOutcome resume_harness(HarnessConfig config);

std::filesystem::path checkpoint_dir(const HarnessConfig& config, const std::string& problem_id);

}  // namespace prism
