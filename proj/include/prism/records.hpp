#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/backends.hpp"
#include "prism/types.hpp"
#include "prism/verify.hpp"

namespace prism {

// A trace bound to its score, weight, and feedback within a population.
struct Particle {
    Trace trace;
    Feedback feedback;
    double score = 0.0;
    double weight = 0.0;
};

struct Population {
    std::vector<Particle> particles;

    int width() const { return static_cast<int>(particles.size()); }
};

struct CallRecord {
    Role role = Role::generator;
    std::string purpose;
    int iteration = 0;
    int particle_index = 0;
    Usage usage;
    std::vector<Usage> retry_usage;
    bool degraded = false;  // transport failure the engine absorbed
};

// Rejuvenation outcome for one slot.
struct ProposalRecord {
    MoveKind kind = MoveKind::no_op;
    double score_old = 0.0;
    double score_new = 0.0;
    bool accepted = false;
    bool downhill = false;
};

struct SlotRecord {
    double score = 0.0;
    double weight = 0.0;
    Verdict verdict = Verdict::verification_failed;
    MoveKind move_kind = MoveKind::init;
    std::optional<std::string> answer;
    std::optional<bool> correct;  // vs. gold when the dataset provides one
    std::optional<ProposalRecord> proposal;
};

struct ArbitrationEvent {
    std::string answer_a;
    std::string answer_b;
    std::string verdict;  // A | B | NEITHER
    bool transport_failed = false;
};

struct EngineDiagnostics {
    double ess = 0.0;
    bool resampled = false;
    std::vector<int> offspring_counts;         // pre-cap, as drawn
    std::vector<int> offspring_counts_capped;  // after the clone cap
    std::vector<ArbitrationEvent> arbitration_events;
};

// Per-problem, per-iteration log. iteration 0 records the initial population.
struct IterationRecord {
    int iteration = 0;
    std::vector<SlotRecord> slots;
    std::optional<EngineDiagnostics> engine;
    std::vector<CallRecord> calls;
};

// --- JSON forms (checkpoints, reports) -------------------------------------

nlohmann::json to_json(const Usage& u);
Usage usage_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trace& t);
Trace trace_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Feedback& f);
Feedback feedback_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Particle& p);
Particle particle_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CallRecord& c);
CallRecord call_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IterationRecord& r);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

nlohmann::json population_to_json(const Population& pop);
Population population_from_json(const nlohmann::json& j);

}  // namespace prism
