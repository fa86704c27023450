// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit status is nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prism/dataset.hpp"
#include "prism/engine.hpp"
#include "prism/errors.hpp"
#include "prism/harness.hpp"
#include "prism/metrics.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"
#include "prism/verify.hpp"

using namespace prism;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool condition, const std::string& what) {
        if (!condition && ok) {
            ok = false;
            detail = what;
        }
    }
};

struct Stats {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

Stats mean_se(const std::vector<double>& xs) {
    Stats s;
    s.n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= s.n;
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= (s.n - 1);
    s.se = std::sqrt(var / s.n);
    return s;
}

Feedback feedback_with(Verdict verdict, int n_correct, int n_neutral, int n_incorrect) {
    Feedback fb;
    fb.final_verdict = verdict;
    for (int i = 0; i < n_correct; ++i) fb.step_labels.push_back(StepLabel::correct);
    for (int i = 0; i < n_neutral; ++i) fb.step_labels.push_back(StepLabel::neutral);
    for (int i = 0; i < n_incorrect; ++i) fb.step_labels.push_back(StepLabel::incorrect);
    fb.notes.assign(fb.step_labels.size(), "");
    return fb;
}

// --- shared experiment plumbing -------------------------------------------------

fs::path make_dataset(const fs::path& dir, const std::string& prefix, int n) {
    std::vector<Problem> problems;
    for (int i = 0; i < n; ++i) {
        Problem p;
        p.id = prefix + std::to_string(i);
        p.statement = "Determine the quantity for instance " + std::to_string(i) + ".";
        p.gold_answer = std::to_string(1000 + i);
        problems.push_back(std::move(p));
    }
    fs::path path = dir / (prefix + ".jsonl");
    write_dataset(path, problems);
    return path;
}

HarnessConfig experiment_config(const fs::path& dataset, const fs::path& out,
                                const ScriptedWorld& world, const std::string& strategy,
                                std::uint64_t seed) {
    HarnessConfig config;
    config.dataset = dataset;
    config.strategy = strategy;
    config.aggregation = {"majority", "prm_score"};
    config.backend_kind = "sim";
    config.world = world;
    config.run.seed = seed;
    config.run.population_width = 10;
    config.run.refinement_depth = 5;
    config.run.max_parallel = 1;
    config.problem_parallel = parallel_max_threads();
    config.output_dir = out;
    config.checkpoints = false;
    return config;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- criteria -------------------------------------------------------------------

void score_transform_golden_table(Check& check) {
    struct Row {
        Verdict verdict;
        double at0, at05, at1;
    };
    const std::vector<Row> table{
        {Verdict::incorrect, 0.0, 0.15, 0.3},
        {Verdict::correct, 0.5, 0.75, 1.0},
        {Verdict::neutral, 0.0, 0.3, 0.6},
        {Verdict::missing, 0.0, 0.4, 0.8},
        {Verdict::verification_failed, 0.0, 0.0, 0.0},
    };
    for (const Row& row : table) {
        double s0, s05, s1;
        if (row.verdict == Verdict::verification_failed) {
            Feedback fb;
            fb.final_verdict = row.verdict;
            s0 = s05 = s1 = scalar_score(fb);
        } else {
            s0 = scalar_score(feedback_with(row.verdict, 0, 0, 4));
            s05 = scalar_score(feedback_with(row.verdict, 0, 2, 0));
            s1 = scalar_score(feedback_with(row.verdict, 4, 0, 0));
        }
        check.require(std::abs(s0 - row.at0) <= 1e-12, "score at r=0 off for verdict row");
        check.require(std::abs(s05 - row.at05) <= 1e-12, "score at r=0.5 off for verdict row");
        check.require(std::abs(s1 - row.at1) <= 1e-12, "score at r=1 off for verdict row");
    }

    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 10000; ++trial) {
        Verdict v = static_cast<Verdict>(rng() % 5);
        Feedback fb;
        if (v != Verdict::verification_failed) {
            int total = 1 + static_cast<int>(rng() % 14);
            int c = static_cast<int>(rng() % (total + 1));
            int n = static_cast<int>(rng() % (total - c + 1));
            fb = feedback_with(v, c, n, total - c - n);
        } else {
            fb.final_verdict = v;
        }
        double s = scalar_score(fb);
        switch (v) {
            case Verdict::correct: check.require(s >= 0.5 && s <= 1.0, "correct bound broken"); break;
            case Verdict::incorrect: check.require(s >= 0.0 && s <= 0.3, "incorrect bound broken"); break;
            case Verdict::neutral: check.require(s >= 0.0 && s <= 0.6, "neutral bound broken"); break;
            case Verdict::missing: check.require(s >= 0.0 && s <= 0.8, "missing bound broken"); break;
            case Verdict::verification_failed: check.require(s == 0.0, "failed must score 0"); break;
        }
    }
}

void ess_correctness(Check& check) {
    check.require(std::abs(compute_ess(std::vector<double>{1, 1, 1, 1}) - 4.0) <= 1e-12,
                  "uniform ESS != 4");
    check.require(std::abs(compute_ess(std::vector<double>{1, 0, 0, 0}) - 1.0) <= 1e-12,
                  "point-mass ESS != 1");
    check.require(std::abs(compute_ess(std::vector<double>{2, 1, 1}) - 16.0 / 6.0) <= 1e-12,
                  "ESS([2,1,1]) != 16/6");

    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 1 + static_cast<int>(rng() % 20);
        std::vector<double> w(n);
        for (double& x : w) x = uniform01(rng) + 1e-12;
        double ess = compute_ess(w);
        check.require(ess >= 1.0 - 1e-9 && ess <= n + 1e-9, "ESS outside [1, N]");
    }
}

void resampling_unbiasedness(Check& check) {
    const std::vector<double> w{0.5, 0.3, 0.2};
    const std::vector<double> expected{5.0, 3.0, 2.0};
    const int n = 10;
    const int trials = 10000;
    std::vector<double> sum(3, 0.0), sumsq(3, 0.0);
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(50000 + t);
        ResampleDraw draw = systematic_resample_indices(w, n, rng);
        int width = std::accumulate(draw.offspring_counts.begin(), draw.offspring_counts.end(), 0);
        check.require(width == n, "resampling changed the population width");
        for (int i = 0; i < 3; ++i) {
            sum[i] += draw.offspring_counts[i];
            sumsq[i] += static_cast<double>(draw.offspring_counts[i]) * draw.offspring_counts[i];
        }
    }
    for (int i = 0; i < 3; ++i) {
        double mean = sum[i] / trials;
        double var = sumsq[i] / trials - mean * mean;
        double se = std::sqrt(std::max(var, 0.0) / trials);
        check.require(std::abs(mean - expected[i]) <= 3 * se + 1e-9,
                      "mean offspring count outside 3 standard errors");
    }
}

void clone_cap(Check& check) {
    const int n = 10;
    std::vector<double> w(n, 0.0);
    w[0] = 1.0;
    for (int t = 0; t < 1000; ++t) {
        std::mt19937_64 rng(90000 + t);
        ResampleDraw draw = systematic_resample_indices(w, n, rng);
        CapResult capped = cap_copies(draw.source_index, w, 0.3);
        int max_count = 0, total = 0;
        for (int c : capped.offspring_counts) {
            max_count = std::max(max_count, c);
            total += c;
        }
        check.require(max_count == 3, "post-cap max copies != ceil(0.3 * 10)");
        check.require(total == n, "cap changed the population width");
    }
}

void acceptance_calibration(Check& check) {
    const double expected = std::pow(0.5, 1.25);
    std::mt19937_64 rng(107);
    const int trials = 100000;
    int accepted = 0;
    for (int i = 0; i < trials; ++i) {
        if (accept(0.8, 0.4, 0.8, rng)) ++accepted;
    }
    double p = static_cast<double>(accepted) / trials;
    double se = std::sqrt(expected * (1 - expected) / trials);
    check.require(std::abs(p - expected) <= 3 * se,
                  "downhill acceptance off the tempered ratio");

    for (double s_old : {0.1, 0.4, 0.8}) {
        for (double delta : {0.0, 0.1, 0.2}) {
            for (int i = 0; i < 2000; ++i) {
                check.require(accept(s_old, s_old + delta, 0.8, rng),
                              "uphill proposal rejected");
            }
        }
    }
}

void directional_correction(Check& check, const fs::path& root) {
    fs::path dataset = make_dataset(root, "dir", 200);
    std::vector<double> prism_flips, critic_flips;
    for (int seed = 0; seed < 5; ++seed) {
        ScriptedWorld world;
        world.seed = 1000 + seed;
        world.p_init_correct = 0.3;
        world.p_fix = 0.3;
        world.p_break = 0.3;
        world.rho = 0.1;
        for (auto* bucket : {&prism_flips, &critic_flips}) {
            const char* strategy = bucket == &prism_flips ? "prism" : "critic_refine";
            HarnessConfig config = experiment_config(
                dataset, root / ("dir_out_" + std::to_string(seed) + "_" + strategy), world,
                strategy, seed);
            RunOutcome outcome = run_harness(config);
            for (const auto& p : outcome.report.at("per_problem")) {
                bucket->push_back(p.at("net_flip").get<double>());
            }
        }
    }
    Stats prism_stats = mean_se(prism_flips);
    Stats critic_stats = mean_se(critic_flips);
    check.require(prism_stats.mean - 3 * prism_stats.se > 0.0,
                  "prism NetFlip not positive with a 3-SE margin");
    check.require(std::abs(critic_stats.mean) <= 3 * critic_stats.se,
                  "critic_refine NetFlip outside the 3-SE band around 0");
    std::ostringstream detail;
    detail << "prism " << prism_stats.mean << "±" << prism_stats.se << ", critic "
           << critic_stats.mean << "±" << critic_stats.se;
    check.detail = check.ok ? detail.str() : check.detail + " (" + detail.str() + ")";
}

void monotone_pop_acc(Check& check, const fs::path& root) {
    fs::path dataset = make_dataset(root, "mono", 100);
    for (int seed = 0; seed < 3; ++seed) {
        ScriptedWorld world;
        world.seed = 3000 + seed;
        world.p_init_correct = 0.3;
        world.p_fix = 0.4;
        world.p_break = 0.0;
        world.rho = 0.0;
        HarnessConfig config = experiment_config(
            dataset, root / ("mono_out_" + std::to_string(seed)), world, "prism", seed);
        RunOutcome outcome = run_harness(config);
        for (const auto& p : outcome.report.at("per_problem")) {
            const auto& pa = p.at("pop_acc");
            for (std::size_t t = 1; t < pa.size(); ++t) {
                check.require(pa.at(t).get<double>() >= pa.at(t - 1).get<double>() - 1e-12,
                              "PopAcc decreased under the noiseless oracle");
            }
        }
    }
}

void low_correctness_robustness(Check& check, const fs::path& root) {
    fs::path dataset = make_dataset(root, "low", 200);
    int prism_correct = 0, prism_graded = 0, mad_correct = 0, mad_graded = 0;
    for (int seed = 0; seed < 5; ++seed) {
        ScriptedWorld world;
        world.seed = 2000 + seed;
        world.p_init_correct = 0.2;
        world.p_fix = 0.3;
        world.p_break = 0.1;
        world.rho = 0.1;

        HarnessConfig prism_config = experiment_config(
            dataset, root / ("low_out_prism_" + std::to_string(seed)), world, "prism", seed);
        auto prism_acc =
            run_harness(prism_config).report.at("summary").at("accuracy").at("prm_score");
        prism_correct += prism_acc.at("correct").get<int>();
        prism_graded += prism_acc.at("graded").get<int>();

        HarnessConfig mad_config = experiment_config(
            dataset, root / ("low_out_mad_" + std::to_string(seed)), world, "mad_conformist",
            seed);
        mad_config.aggregation = {"majority"};
        auto mad_acc = run_harness(mad_config).report.at("summary").at("accuracy").at("majority");
        mad_correct += mad_acc.at("correct").get<int>();
        mad_graded += mad_acc.at("graded").get<int>();
    }
    double prism_accuracy = static_cast<double>(prism_correct) / prism_graded;
    double mad_accuracy = static_cast<double>(mad_correct) / mad_graded;
    check.require(prism_accuracy - mad_accuracy >= 0.10,
                  "prism+prm_score did not beat mad_conformist+majority by 10 points");
    std::ostringstream detail;
    detail << "prism+prm_score " << prism_accuracy << " vs mad_conformist+majority "
           << mad_accuracy;
    check.detail = check.ok ? detail.str() : check.detail + " (" + detail.str() + ")";
}

void verifier_parser_totality(Check& check) {
    std::mt19937_64 rng(113);
    auto random_bytes = [&](std::size_t max_len) {
        std::size_t len = rng() % max_len;
        std::string s;
        for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng() % 256));
        return s;
    };
    auto well_formed = [&](int n_steps, bool with_final) {
        Feedback fb;
        for (int i = 0; i < n_steps; ++i) {
            fb.step_labels.push_back(static_cast<StepLabel>(static_cast<int>(rng() % 3) - 1));
            fb.notes.push_back("note");
        }
        fb.final_verdict = with_final
                               ? static_cast<Verdict>(rng() % 3)  // correct/incorrect/neutral
                               : Verdict::missing;
        return serialize_feedback(fb);
    };

    const int total_cases = 100000;
    for (int trial = 0; trial < total_cases; ++trial) {
        int n_steps = 1 + static_cast<int>(rng() % 6);
        int kind = trial % 5;
        std::string text;
        bool must_fail = false;
        bool must_miss = false;
        switch (kind) {
            case 0: text = random_bytes(200); break;
            case 1:  // out-of-range token on some line
                text = well_formed(n_steps, true);
                text.insert(0, "looks plausible +2\n");
                must_fail = true;
                break;
            case 2:  // one step line dropped
                text = well_formed(n_steps, true);
                text.erase(0, text.find('\n') + 1);
                must_fail = true;
                break;
            case 3:  // extra trailing junk after the final check
                text = well_formed(n_steps, true) + "post-hoc commentary\n";
                must_fail = true;
                break;
            case 4:  // valid steps, no final line
                text = well_formed(n_steps, false);
                must_miss = true;
                break;
        }
        Feedback fb = parse_verifier_output(text, n_steps);
        if (must_fail) {
            check.require(fb.final_verdict == Verdict::verification_failed,
                          "malformed output not classified as VERIFICATION_FAILED");
            check.require(fb.step_labels.empty(), "failed verification kept labels");
            check.require(scalar_score(fb) == 0.0, "failed verification scored nonzero");
        } else if (must_miss) {
            check.require(fb.final_verdict == Verdict::missing,
                          "absent final line not classified MISSING");
            check.require(static_cast<int>(fb.step_labels.size()) == n_steps,
                          "MISSING lost step labels");
        } else if (fb.final_verdict == Verdict::verification_failed) {
            check.require(fb.step_labels.empty() && scalar_score(fb) == 0.0,
                          "failed verification invariants broken");
        }
    }
}

void determinism_and_resume(Check& check, const fs::path& root) {
    fs::path dataset = make_dataset(root, "det", 5);
    ScriptedWorld world;
    world.seed = 4000;
    world.p_init_correct = 0.3;
    world.p_fix = 0.4;
    world.p_break = 0.2;
    world.rho = 0.1;

    HarnessConfig config = experiment_config(dataset, root / "det_out", world, "prism", 77);
    config.run.refinement_depth = 3;
    config.checkpoints = true;
    config.problem_parallel = 1;

    run_harness(config);
    std::string report1 = slurp(config.output_dir / "report.json");

    fs::remove_all(config.output_dir);
    run_harness(config);
    std::string report2 = slurp(config.output_dir / "report.json");
    check.require(report1 == report2, "reruns differ byte-for-byte");

    // Interrupt partway, then resume.
    fs::remove_all(config.output_dir);
    HarnessConfig interrupted = config;
    int written = 0;
    interrupted.abort_hook = [&](const std::string&, int) { return ++written == 7; };
    bool aborted = false;
    try {
        run_harness(interrupted);
    } catch (const AbortRunError&) {
        aborted = true;
    }
    check.require(aborted, "abort hook did not interrupt the run");

    HarnessConfig resumed = config;
    resumed.resume = true;
    RunOutcome outcome = run_harness(resumed);
    std::string report3 = slurp(config.output_dir / "report.json");
    check.require(report1 == report3, "resumed run differs from the uninterrupted one");

    // Token totals must equal the checkpoint-level sum exactly.
    std::int64_t checkpoint_total = 0;
    for (const auto& entry :
         fs::recursive_directory_iterator(config.output_dir / "checkpoints")) {
        if (!entry.is_regular_file()) continue;
        nlohmann::json j = nlohmann::json::parse(slurp(entry.path()));
        const nlohmann::json* calls = nullptr;
        if (j.contains("record")) {
            calls = &j.at("record").at("calls");
        } else if (j.contains("calls")) {
            calls = &j.at("calls");
        }
        if (!calls) continue;
        for (const auto& c : *calls) {
            checkpoint_total += c.at("usage").at("in").get<std::int64_t>() +
                                c.at("usage").at("out").get<std::int64_t>();
        }
    }
    std::int64_t report_total =
        outcome.report.at("summary").at("tokens").at("input_tokens").get<std::int64_t>() +
        outcome.report.at("summary").at("tokens").at("output_tokens").get<std::int64_t>();
    check.require(report_total == checkpoint_total,
                  "report token totals diverge from the checkpoint sum");
}

void cost_accounting(Check& check) {
    Pricing pricing;  // $0.05 and $0.20 per million tokens
    double cost = cost_estimate_from_total(1000000, pricing);
    check.require(std::abs(cost - 0.11) <= 1e-9, "60/40 split does not reproduce $0.11");

    TokenTotals exact;
    exact.input_tokens = 1000000;
    check.require(std::abs(cost_estimate(exact, pricing) - 0.05) <= 1e-12,
                  "exact per-side pricing off");
}

}  // namespace

int main() {
    fs::path root = fs::temp_directory_path() /
                    ("prism_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);

    struct Criterion {
        std::string name;
        std::function<void(Check&)> fn;
    };
    const std::vector<Criterion> criteria{
        {"score-transform golden table and verdict bounds",
         [](Check& c) { score_transform_golden_table(c); }},
        {"ESS closed form and range property", [](Check& c) { ess_correctness(c); }},
        {"systematic resampling unbiasedness", [](Check& c) { resampling_unbiasedness(c); }},
        {"clone cap bounds duplication", [](Check& c) { clone_cap(c); }},
        {"acceptance-rule calibration", [](Check& c) { acceptance_calibration(c); }},
        {"directional correction (prism > 0, critic ~ 0)",
         [&](Check& c) { directional_correction(c, root); }},
        {"monotone PopAcc under the noiseless oracle", [&](Check& c) { monotone_pop_acc(c, root); }},
        {"low-correctness robustness (prism vs conformist)",
         [&](Check& c) { low_correctness_robustness(c, root); }},
        {"verifier-parser totality under fuzzing", [](Check& c) { verifier_parser_totality(c); }},
        {"determinism and interrupt/resume", [&](Check& c) { determinism_and_resume(c, root); }},
        {"cost accounting conventions", [](Check& c) { cost_accounting(c); }},
    };

    bool all_ok = true;
    for (const Criterion& criterion : criteria) {
        Check check;
        auto t0 = std::chrono::steady_clock::now();
        try {
            criterion.fn(check);
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = std::string("exception: ") + e.what();
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s (%.2fs)%s%s\n", check.ok ? "PASS" : "FAIL", criterion.name.c_str(),
                    seconds, check.detail.empty() ? "" : " - ", check.detail.c_str());
        all_ok = all_ok && check.ok;
    }

    std::error_code ec;
    fs::remove_all(root, ec);
    if (!all_ok) {
        std::printf("acceptance: FAIL\n");
        return 1;
    }
    std::printf("acceptance: PASS\n");
    return 0;
}
