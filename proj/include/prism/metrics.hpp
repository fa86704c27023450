#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/aggregate.hpp"
#include "prism/records.hpp"
#include "prism/types.hpp"

namespace prism {

// Fraction of particles whose answer matches gold; unextractable answers
// count as incorrect.
double pop_acc(const Population& population, const Answer& gold);
double pop_acc(const std::vector<SlotRecord>& slots);

// Sum over refinement steps of (incorrect->correct) - (correct->incorrect)
// transitions, tracked per slot. Histories must share one length.
int net_flip(const std::vector<std::vector<bool>>& correctness_history);
std::vector<int> net_flip_per_step(const std::vector<std::vector<bool>>& correctness_history);

struct DominanceStats {
    double p_max_share_gt_03 = 0.0;  // P(max offspring count / N > 0.3)
    double p_takeover = 0.0;         // P(max offspring count == N)
    int events = 0;
};

// Aggregated over resampling events; counts are the pre-cap offspring draws.
DominanceStats dominance_stats(const std::vector<std::vector<int>>& offspring_counts, int n);

struct AcceptanceDiagnostics {
    std::optional<double> p_downhill_accept;  // absent when no downhill proposals occurred
    std::optional<double> mean_score_accepted;
    std::optional<double> mean_score_rejected;
    int proposals = 0;
    int downhill = 0;
};

// Conditional acceptance statistics over real proposals (no-ops excluded).
AcceptanceDiagnostics acceptance_diagnostics(const std::vector<IterationRecord>& records);

struct Pricing {
    double input_per_mtok = 0.05;
    double output_per_mtok = 0.20;
};

struct TokenTotals {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t retry_input_tokens = 0;
    std::int64_t retry_output_tokens = 0;
};

// Exact per-side pricing when both sides are known; a 60/40 input/output
// split when only a combined total is available.
double cost_estimate(const TokenTotals& totals, const Pricing& pricing);
double cost_estimate_from_total(std::int64_t total_tokens, const Pricing& pricing);

TokenTotals fold_usage(const std::vector<CallRecord>& calls);
std::map<std::string, TokenTotals> fold_usage_by_role(const std::vector<CallRecord>& calls);

// --- Run report --------------------------------------------------------------

struct ProblemAggregation {
    std::map<std::string, AggregateResult> results;  // method name -> result
    std::vector<CallRecord> calls;                   // aggregation-phase calls
};

struct ProblemRunData {
    Problem problem;
    std::vector<IterationRecord> records;  // index 0 = initial population
    ProblemAggregation aggregation;
    bool failed = false;
    std::string failure;
};

struct ReportSettings {
    std::string strategy;
    std::vector<std::string> aggregation_methods;
    RunConfig run;
    Pricing pricing;
    std::string backend_kind;
};

// One machine-readable JSON document per run; per-problem and per-iteration
// flat CSV tables accompany it for external plotting. Schemas are versioned.
nlohmann::json build_report(const ReportSettings& settings,
                            const std::vector<ProblemRunData>& problems);

std::string report_per_problem_csv(const nlohmann::json& report);
std::string report_per_iteration_csv(const nlohmann::json& report);

}  // namespace prism
