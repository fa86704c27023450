#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prism/backends.hpp"
#include "prism/records.hpp"
#include "prism/templates.hpp"

namespace prism {

enum class AggregationMethod { majority, prm_score, llm };

const char* to_string(AggregationMethod method);
AggregationMethod aggregation_method_from_string(const std::string& s);

struct AggregateResult {
    std::optional<Answer> answer;
    AggregationMethod method = AggregationMethod::majority;
    // Per-answer tallies: counts for majority voting, summed scores for the
    // score vote. Keys are canonical answers.
    std::map<std::string, double> support;
    std::int64_t aggregator_tokens = 0;
    bool fell_back = false;  // llm aggregation fell back to majority voting
};

// Most frequent extracted answer; ties broken by larger summed score, then by
// lowest particle index. Absent when no particle has an extractable answer.
AggregateResult majority_vote(const Population& population);

// argmax_a sum of scores over particles answering a; ties broken by count,
// then lowest particle index.
AggregateResult prm_score_vote(const Population& population);

// Renders every candidate into the aggregation template, issues one call, and
// extracts the final answer from the response. Unparsable responses fall back
// to majority voting.
AggregateResult llm_aggregate(const Problem& problem, const Population& population,
                              Backend& backend, const Template& tpl, const RunConfig& config,
                              std::vector<CallRecord>& calls);

// Candidate block rendered into {candidates}: answers, not scores.
std::string render_candidates(const Population& population);

}  // namespace prism
