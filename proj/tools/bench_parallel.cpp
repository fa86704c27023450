// Benchmark: runs the same simulator workload on the serial reference path
// and on the OpenMP path, checks the reports are identical, and prints the
// timings. The engine's determinism contract makes the comparison exact.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

#include "prism/dataset.hpp"
#include "prism/harness.hpp"
#include "prism/parallel.hpp"

namespace fs = std::filesystem;

namespace {

prism::HarnessConfig workload(const fs::path& root, const fs::path& out, int threads) {
    prism::HarnessConfig config;
    config.dataset = root / "dataset.jsonl";
    config.strategy = "prism";
    config.aggregation = {"majority", "prm_score"};
    config.backend_kind = "sim";
    config.world.seed = 7;
    config.world.p_init_correct = 0.3;
    config.world.p_fix = 0.3;
    config.world.p_break = 0.3;
    config.world.rho = 0.1;
    config.run.seed = 42;
    config.run.refinement_depth = 5;
    config.output_dir = out;
    config.checkpoints = false;
    config.problem_parallel = threads;
    config.run.max_parallel = 1;  // outer loop carries the parallelism
    return config;
}

double timed_run(const prism::HarnessConfig& config, std::string& report) {
    auto t0 = std::chrono::steady_clock::now();
    prism::RunOutcome outcome = prism::run_harness(config);
    auto t1 = std::chrono::steady_clock::now();
    report = outcome.report.dump();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int n_problems = argc > 1 ? std::atoi(argv[1]) : 80;

    fs::path root = fs::temp_directory_path() / "prism_bench";
    fs::remove_all(root);
    fs::create_directories(root);

    std::vector<prism::Problem> problems;
    for (int i = 0; i < n_problems; ++i) {
        prism::Problem p;
        p.id = "bench-" + std::to_string(i);
        p.statement = "Compute the quantity described by instance " + std::to_string(i) + ".";
        p.gold_answer = std::to_string(100 + i);
        problems.push_back(std::move(p));
    }
    prism::write_dataset(root / "dataset.jsonl", problems);

    const int threads = prism::parallel_max_threads();
    std::printf("problems: %d, openmp: %s, threads: %d\n", n_problems,
                prism::parallel_enabled() ? "yes" : "no", threads);

    std::string serial_report, parallel_report;
    double serial_s = timed_run(workload(root, root / "out_serial", 1), serial_report);
    std::printf("serial reference: %.3f s\n", serial_s);

    double parallel_s = timed_run(workload(root, root / "out_parallel", threads), parallel_report);
    std::printf("openmp (%d threads): %.3f s\n", threads, parallel_s);

    if (serial_report != parallel_report) {
        std::printf("FAIL: serial and parallel reports differ\n");
        return 1;
    }
    std::printf("reports identical, speedup: %.2fx\n", serial_s / parallel_s);
    fs::remove_all(root);
    return 0;
}
