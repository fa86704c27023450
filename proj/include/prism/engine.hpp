#pragma once

#include <random>
#include <span>
#include <vector>

#include "prism/backends.hpp"
#include "prism/records.hpp"
#include "prism/templates.hpp"
#include "prism/types.hpp"

namespace prism {

// --- Pure population operations --------------------------------------------

// w_i = s_i^(1/T_smc), unnormalized. Callers clamp scores to the floor first.
std::vector<double> compute_weights(std::span<const double> scores, double smc_temperature);

// (sum w)^2 / sum w^2. Throws DegeneratePopulationError on all-zero weights.
double compute_ess(std::span<const double> weights);

struct ResampleDraw {
    std::vector<int> source_index;     // slot -> source particle
    std::vector<int> offspring_counts; // per source, sums to n
};

// Systematic resampling: one uniform offset u0 in [0, 1/n) and n evenly
// spaced thresholds over the normalized weights.
ResampleDraw systematic_resample_indices(std::span<const double> weights, int n,
                                         std::mt19937_64& rng);

struct CapResult {
    std::vector<int> source_index;     // slot -> source; -1 keeps the pre-resample occupant
    std::vector<int> offspring_counts; // post-cap, per source
};

// Caps any single source at ceil(kappa * n) offspring. Excess slots go to the
// highest-weight sources still under the cap (ties to the lower index); when
// every source is capped a slot keeps its pre-resampling occupant.
CapResult cap_copies(const std::vector<int>& source_index, std::span<const double> weights,
                     double kappa);

double acceptance_probability(double score_old, double score_new, double smc_temperature);

// Metropolis-style filter: accept with probability min(1, (s_new/s_old)^(1/T)).
// Consumes exactly one uniform draw.
bool accept(double score_old, double score_new, double smc_temperature, std::mt19937_64& rng);

// Exactly one <verdict>A|B|NEITHER</verdict> tag; anything else is malformed.
std::optional<std::string> parse_verdict_tag(std::string_view text);

// --- Refinement engine ------------------------------------------------------

// Runs the refinement loop for one problem: score, arbitrate, reweight,
// ESS-gated systematic resampling with clone capping, then Metropolis-style
// rejuvenation. Stateless across calls; all randomness is derived from
// (seed, problem id, iteration, particle index), so particles may be
// processed concurrently in any order.
class RefinementEngine {
  public:
    RefinementEngine(const RunConfig& config, const BackendSet& backends,
                     const TemplateSet& templates);

    // One full iteration (1-based). The record captures the post-iteration
    // population alongside ESS/resampling/arbitration/acceptance diagnostics.
    IterationRecord run_iteration(const Problem& problem, Population& population, int iteration);

    // Phase entry points, exposed for targeted tests.
    void score_population(const Problem& problem, Population& population, int iteration,
                          std::vector<CallRecord>& calls);
    std::vector<ArbitrationEvent> arbitrate(const Problem& problem, Population& population,
                                            int iteration, std::vector<CallRecord>& calls);

    const RunConfig& config() const { return config_; }

  private:
    struct ProposalOutcome {
        Trace trace;
        Feedback feedback;
        double score = 0.0;
        MoveKind kind = MoveKind::no_op;
        bool accepted = false;
        bool downhill = false;
        std::vector<CallRecord> calls;
    };

    ProposalOutcome propose_and_filter(const Problem& problem, const Particle& particle,
                                       int iteration, int particle_index);
    void reweight(Population& population) const;

    const RunConfig& config_;
    const BackendSet& backends_;
    const TemplateSet& templates_;
};

// Sample-N population creation: N independent generator calls. Failed or
// unusable generations degrade to an answerless placeholder trace instead of
// aborting. Fills an iteration-0 record (slots + generator calls).
Population generate_initial_population(const Problem& problem, const RunConfig& config,
                                       const BackendSet& backends, const TemplateSet& templates,
                                       IterationRecord& record);

// Slot snapshots (answer, correctness vs. gold) for the current population.
std::vector<SlotRecord> snapshot_slots(const Population& population, const Problem& problem);

}  // namespace prism
