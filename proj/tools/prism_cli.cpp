// Run harness: loads a dataset, runs the selected enhancement strategy over
// every problem, evaluates the requested aggregations, and writes the
// JSON+CSV report. Flags override config-file values.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prism/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"PRM-guided population refinement harness"};

    std::string config_path;
    std::string dataset;
    std::string strategy;
    std::vector<std::string> aggregation;
    std::string backend;
    std::string sim_world;
    std::string out_dir;
    std::string save_initial;
    std::string load_initial;
    long long seed = -1;
    int max_parallel = -1;
    int limit = -1;
    int offset = -1;
    int problem_parallel = -1;
    bool resume = false;
    bool no_checkpoints = false;

    app.add_option("--config", config_path, "JSON run configuration file");
    app.add_option("--dataset", dataset, "JSONL dataset path");
    app.add_option("--strategy", strategy,
                   "Enhancement strategy (none, prism, critic_refine, agentic_debate, "
                   "mad_conformist, mad_follower, recursive_self_aggregation)");
    app.add_option("--aggregation", aggregation,
                   "Aggregation method (majority, prm_score, llm); repeatable");
    app.add_option("--seed", seed, "Run seed");
    app.add_option("--backend", backend, "Backend kind: wire or sim");
    app.add_option("--sim-world", sim_world, "Simulator world JSON file");
    app.add_option("--max-parallel", max_parallel, "In-flight call bound within one problem");
    app.add_option("--limit", limit, "Only run the first K problems after --offset");
    app.add_option("--offset", offset, "Skip the first K problems");
    app.add_option("--out", out_dir, "Output directory (report, CSVs, checkpoints)");
    app.add_option("--problem-parallel", problem_parallel, "Problems run concurrently");
    app.add_option("--save-initial", save_initial,
                   "Write the generated initial populations to this file");
    app.add_option("--load-initial", load_initial,
                   "Reuse initial populations from a previous --save-initial file");
    app.add_flag("--resume", resume, "Continue from checkpoints in the output directory");
    app.add_flag("--no-checkpoints", no_checkpoints, "Disable checkpoint files");

    CLI11_PARSE(app, argc, argv);

    try {
        prism::HarnessConfig config;
        if (!config_path.empty()) config = prism::HarnessConfig::from_file(config_path);
        if (!dataset.empty()) config.dataset = dataset;
        if (!strategy.empty()) config.strategy = strategy;
        if (!aggregation.empty()) config.aggregation = aggregation;
        if (seed >= 0) config.run.seed = static_cast<std::uint64_t>(seed);
        if (!backend.empty()) config.backend_kind = backend;
        if (!sim_world.empty()) config.sim_world = sim_world;
        if (max_parallel > 0) config.run.max_parallel = max_parallel;
        if (limit >= 0) config.limit = limit;
        if (offset >= 0) config.offset = offset;
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (problem_parallel > 0) config.problem_parallel = problem_parallel;
        if (!save_initial.empty()) config.save_initial = save_initial;
        if (!load_initial.empty()) config.load_initial = load_initial;
        if (no_checkpoints) config.checkpoints = false;
        config.resume = resume;

        prism::RunOutcome outcome = run_harness(config);

        const auto& summary = outcome.report.at("summary");
        std::printf("problems: %lld (failed: %lld)\n",
                    summary.at("problems").get<long long>(),
                    summary.at("failed_problems").get<long long>());
        if (summary.contains("accuracy")) {
            for (auto it = summary.at("accuracy").begin(); it != summary.at("accuracy").end();
                 ++it) {
                std::printf("accuracy[%s]: %.4f (%lld/%lld)\n", it.key().c_str(),
                            it.value().at("accuracy").get<double>(),
                            it.value().at("correct").get<long long>(),
                            it.value().at("graded").get<long long>());
            }
        }
        std::printf("tokens: in=%lld out=%lld  cost=$%.4f\n",
                    summary.at("tokens").at("input_tokens").get<long long>(),
                    summary.at("tokens").at("output_tokens").get<long long>(),
                    summary.at("cost").get<double>());
        std::printf("report: %s\n", (config.output_dir / "report.json").string().c_str());
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
