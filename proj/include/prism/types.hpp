#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prism/answer.hpp"

namespace prism {

struct Problem {
    std::string id;
    std::string statement;
    std::optional<std::string> gold_answer;  // already-normalized comparisons use make_answer()
    std::optional<std::string> domain_tag;
};

enum class MoveKind { init, clone, local_refine, explore, no_op };

enum class Verdict { correct, incorrect, neutral, missing, verification_failed };

enum class StepLabel : int { incorrect = -1, neutral = 0, correct = 1 };

const char* to_string(MoveKind kind);
const char* to_string(Verdict verdict);
MoveKind move_kind_from_string(const std::string& s);
Verdict verdict_from_string(const std::string& s);

struct Provenance {
    int parent_index = -1;  // -1 for init particles
    int iteration = 0;
    MoveKind move_kind = MoveKind::init;
};

// One candidate reasoning trajectory. raw_text is the tagged re-serialization
// of steps; answer is extracted from the original generation before tagging.
struct Trace {
    std::vector<std::string> steps;
    std::string raw_text;
    std::optional<Answer> answer;
    Provenance provenance;
};

struct Decoding {
    double temperature = 0.8;
    double top_p = 0.9;
    int max_tokens = 8192;
};

struct RunConfig {
    int population_width = 10;        // N
    int refinement_depth = 5;         // T
    double smc_temperature = 0.8;     // T_smc > 0
    double ess_threshold = 0.5;       // alpha in (0, 1]
    double explore_prob = 0.1;        // eta in [0, 1]
    double arbitration_clamp = 0.3;   // c in (0, 1)
    double clone_cap_fraction = 0.3;  // kappa in (0, 1]
    double score_floor = 1e-6;        // epsilon > 0
    double arbitration_theta_hi = 0.95;
    double arbitration_delta_tie = 0.05;
    std::uint64_t seed = 0;
    Decoding generator_decoding{0.8, 0.9, 8192};
    Decoding iterator_decoding{0.8, 0.9, 8192};
    int max_parallel = 8;  // in-flight call bound within one problem

    void validate() const;  // throws ConfigError on out-of-range values
};

}  // namespace prism
