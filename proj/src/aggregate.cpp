#include "prism/aggregate.hpp"

#include <sstream>

#include "prism/errors.hpp"

namespace prism {

const char* to_string(AggregationMethod method) {
    switch (method) {
        case AggregationMethod::majority: return "majority";
        case AggregationMethod::prm_score: return "prm_score";
        case AggregationMethod::llm: return "llm";
    }
    return "?";
}

AggregationMethod aggregation_method_from_string(const std::string& s) {
    if (s == "majority") return AggregationMethod::majority;
    if (s == "prm_score") return AggregationMethod::prm_score;
    if (s == "llm") return AggregationMethod::llm;
    throw ConfigError("unknown aggregation method: " + s);
}

namespace {

struct Tally {
    int count = 0;
    double score_sum = 0.0;
    int min_index = -1;
};

std::map<std::string, Tally> tally_answers(const Population& population) {
    std::map<std::string, Tally> tallies;
    for (int i = 0; i < population.width(); ++i) {
        const Particle& p = population.particles[i];
        if (!p.trace.answer) continue;
        Tally& t = tallies[p.trace.answer->canonical];
        if (t.count == 0) t.min_index = i;
        ++t.count;
        t.score_sum += p.score;
    }
    return tallies;
}

}  // namespace

AggregateResult majority_vote(const Population& population) {
    AggregateResult result;
    result.method = AggregationMethod::majority;
    auto tallies = tally_answers(population);
    const std::string* best = nullptr;
    const Tally* best_tally = nullptr;
    for (const auto& [answer, t] : tallies) {
        result.support[answer] = t.count;
        bool wins = best == nullptr;
        if (!wins) {
            if (t.count != best_tally->count) {
                wins = t.count > best_tally->count;
            } else if (t.score_sum != best_tally->score_sum) {
                wins = t.score_sum > best_tally->score_sum;
            } else {
                wins = t.min_index < best_tally->min_index;
            }
        }
        if (wins) {
            best = &answer;
            best_tally = &t;
        }
    }
    if (best) result.answer = Answer{*best};
    return result;
}

AggregateResult prm_score_vote(const Population& population) {
    AggregateResult result;
    result.method = AggregationMethod::prm_score;
    auto tallies = tally_answers(population);
    const std::string* best = nullptr;
    const Tally* best_tally = nullptr;
    for (const auto& [answer, t] : tallies) {
        result.support[answer] = t.score_sum;
        bool wins = best == nullptr;
        if (!wins) {
            if (t.score_sum != best_tally->score_sum) {
                wins = t.score_sum > best_tally->score_sum;
            } else if (t.count != best_tally->count) {
                wins = t.count > best_tally->count;
            } else {
                wins = t.min_index < best_tally->min_index;
            }
        }
        if (wins) {
            best = &answer;
            best_tally = &t;
        }
    }
    if (best) result.answer = Answer{*best};
    return result;
}

std::string render_candidates(const Population& population) {
    std::ostringstream out;
    for (int i = 0; i < population.width(); ++i) {
        const Particle& p = population.particles[i];
        out << "Candidate " << (i + 1)
            << " answer: " << (p.trace.answer ? p.trace.answer->canonical : "NONE") << '\n'
            << p.trace.raw_text << "\n\n";
    }
    return out.str();
}

AggregateResult llm_aggregate(const Problem& problem, const Population& population,
                              Backend& backend, const Template& tpl, const RunConfig& config,
                              std::vector<CallRecord>& calls) {
    AggregateResult result;
    result.method = AggregationMethod::llm;
    if (population.width() == 0) return result;

    std::string prompt = tpl.render(
        {{"problem", problem.statement}, {"candidates", render_candidates(population)}});
    CallMeta meta{problem.id, config.refinement_depth, 0, "aggregate"};
    ChatCall call = make_call(Role::generator, std::move(prompt), config, meta);
    ChatReply reply = backend.call(call);
    calls.push_back(CallRecord{call.role, meta.purpose, meta.iteration, 0, reply.usage,
                               reply.retry_usage, !reply.ok()});
    result.aggregator_tokens = reply.usage.input_tokens + reply.usage.output_tokens;

    std::optional<Answer> extracted;
    if (reply.ok()) extracted = extract_answer(reply.text);
    if (extracted) {
        result.answer = extracted;
        result.support[extracted->canonical] = 1.0;
        return result;
    }
    AggregateResult fallback = majority_vote(population);
    fallback.method = AggregationMethod::llm;
    fallback.fell_back = true;
    fallback.aggregator_tokens = result.aggregator_tokens;
    return fallback;
}

}  // namespace prism
