#include "prism/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "prism/errors.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"

namespace prism {

std::vector<double> compute_weights(std::span<const double> scores, double smc_temperature) {
    std::vector<double> weights(scores.size());
    double inv_t = 1.0 / smc_temperature;
    for (std::size_t i = 0; i < scores.size(); ++i) weights[i] = std::pow(scores[i], inv_t);
    return weights;
}

double compute_ess(std::span<const double> weights) {
    double sum = 0.0, sum_sq = 0.0;
    for (double w : weights) {
        sum += w;
        sum_sq += w * w;
    }
    if (sum_sq <= 0.0) throw DegeneratePopulationError("all-zero weight vector");
    return sum * sum / sum_sq;
}

ResampleDraw systematic_resample_indices(std::span<const double> weights, int n,
                                         std::mt19937_64& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw DegeneratePopulationError("all-zero weight vector");

    ResampleDraw draw;
    draw.source_index.resize(n);
    draw.offspring_counts.assign(weights.size(), 0);

    double u0 = uniform01(rng) / n;
    int i = 0;
    double cumulative = weights[0] / total;
    for (int k = 0; k < n; ++k) {
        double u = u0 + static_cast<double>(k) / n;
        while (u > cumulative && i + 1 < static_cast<int>(weights.size())) {
            ++i;
            cumulative += weights[i] / total;
        }
        draw.source_index[k] = i;
        ++draw.offspring_counts[i];
    }
    return draw;
}

CapResult cap_copies(const std::vector<int>& source_index, std::span<const double> weights,
                     double kappa) {
    const int n = static_cast<int>(source_index.size());
    const int cap = static_cast<int>(std::ceil(kappa * n));

    CapResult result;
    result.source_index = source_index;
    result.offspring_counts.assign(weights.size(), 0);

    std::vector<int> excess_slots;
    for (int k = 0; k < n; ++k) {
        int src = source_index[k];
        if (result.offspring_counts[src] < cap) {
            ++result.offspring_counts[src];
        } else {
            excess_slots.push_back(k);
        }
    }

    for (int slot : excess_slots) {
        int best = -1;
        for (int src = 0; src < static_cast<int>(weights.size()); ++src) {
            if (result.offspring_counts[src] >= cap) continue;
            if (best == -1 || weights[src] > weights[best]) best = src;
        }
        if (best == -1) {
            result.source_index[slot] = -1;  // every source capped: keep the occupant
        } else {
            result.source_index[slot] = best;
            ++result.offspring_counts[best];
        }
    }
    return result;
}

double acceptance_probability(double score_old, double score_new, double smc_temperature) {
    double ratio = std::pow(score_new / score_old, 1.0 / smc_temperature);
    return std::min(1.0, ratio);
}

bool accept(double score_old, double score_new, double smc_temperature, std::mt19937_64& rng) {
    return uniform01(rng) < acceptance_probability(score_old, score_new, smc_temperature);
}

std::optional<std::string> parse_verdict_tag(std::string_view text) {
    static constexpr std::string_view kOpen = "<verdict>";
    static constexpr std::string_view kClose = "</verdict>";
    std::size_t open = text.find(kOpen);
    if (open == std::string_view::npos) return std::nullopt;
    std::size_t close = text.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) return std::nullopt;
    if (text.find(kOpen, open + kOpen.size()) != std::string_view::npos) return std::nullopt;
    std::string_view body = text.substr(open + kOpen.size(), close - open - kOpen.size());
    std::size_t b = body.find_first_not_of(" \t\r\n");
    std::size_t e = body.find_last_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    std::string verdict(body.substr(b, e - b + 1));
    if (verdict != "A" && verdict != "B" && verdict != "NEITHER") return std::nullopt;
    return verdict;
}

// ---------------------------------------------------------------------------

RefinementEngine::RefinementEngine(const RunConfig& config, const BackendSet& backends,
                                   const TemplateSet& templates)
    : config_(config), backends_(backends), templates_(templates) {}

void RefinementEngine::reweight(Population& population) const {
    for (Particle& p : population.particles) {
        p.weight = std::pow(clamp_score(p.score, config_.score_floor), 1.0 / config_.smc_temperature);
    }
}

void RefinementEngine::score_population(const Problem& problem, Population& population,
                                        int iteration, std::vector<CallRecord>& calls) {
    const int n = population.width();
    std::vector<std::vector<CallRecord>> slot_calls(n);
    parallel_for(n, config_.max_parallel, [&](std::size_t i) {
        Particle& particle = population.particles[i];
        CallMeta meta{problem.id, iteration, static_cast<int>(i), "verify"};
        ChatCall call = make_call(Role::verifier,
                                  build_verifier_input(problem, particle.trace, templates_.verify),
                                  config_, meta);
        ChatReply reply = backends_.verifier->call(call);
        CallRecord record{call.role, meta.purpose, iteration, static_cast<int>(i),
                          reply.usage, reply.retry_usage, !reply.ok()};
        slot_calls[i].push_back(std::move(record));
        if (!reply.ok()) {
            particle.feedback = Feedback{};  // verification_failed
            particle.score = 0.0;
            return;
        }
        particle.feedback =
            parse_verifier_output(reply.text, static_cast<int>(particle.trace.steps.size()));
        particle.score = scalar_score(particle.feedback);
    });
    for (auto& sc : slot_calls) {
        calls.insert(calls.end(), sc.begin(), sc.end());
    }
    reweight(population);
}

std::vector<ArbitrationEvent> RefinementEngine::arbitrate(const Problem& problem,
                                                          Population& population, int iteration,
                                                          std::vector<CallRecord>& calls) {
    struct Group {
        std::string answer;
        double max_score = 0.0;
        int count = 0;
        int best_index = -1;
        int min_index = -1;
    };
    std::map<std::string, Group> by_answer;
    for (int i = 0; i < population.width(); ++i) {
        const Particle& p = population.particles[i];
        if (!p.trace.answer) continue;
        Group& g = by_answer[p.trace.answer->canonical];
        if (g.count == 0) {
            g.answer = p.trace.answer->canonical;
            g.min_index = i;
        }
        ++g.count;
        if (g.best_index == -1 || p.score > g.max_score) {
            g.max_score = p.score;
            g.best_index = i;
        }
    }
    std::vector<Group> groups;
    for (auto& [_, g] : by_answer) groups.push_back(g);
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        if (a.max_score != b.max_score) return a.max_score > b.max_score;
        if (a.count != b.count) return a.count > b.count;
        return a.min_index < b.min_index;
    });

    std::vector<ArbitrationEvent> events;
    if (groups.size() < 2) return events;
    const Group& top = groups[0];
    const Group& runner = groups[1];
    bool both_near_perfect = top.max_score > config_.arbitration_theta_hi &&
                             runner.max_score > config_.arbitration_theta_hi;
    bool near_tie = top.max_score - runner.max_score < config_.arbitration_delta_tie;
    if (!both_near_perfect && !near_tie) return events;

    const Particle& rep_a = population.particles[top.best_index];
    const Particle& rep_b = population.particles[runner.best_index];
    std::string prompt = templates_.compare.render({{"problem", problem.statement},
                                                    {"solution_a", rep_a.trace.raw_text},
                                                    {"solution_b", rep_b.trace.raw_text},
                                                    {"answer_a", top.answer},
                                                    {"answer_b", runner.answer}});
    CallMeta meta{problem.id, iteration, top.best_index, "compare"};
    ChatCall call = make_call(Role::comparator, std::move(prompt), config_, meta);
    ChatReply reply = backends_.comparator->call(call);
    calls.push_back(CallRecord{call.role, meta.purpose, iteration, top.best_index, reply.usage,
                               reply.retry_usage, !reply.ok()});

    ArbitrationEvent event;
    event.answer_a = top.answer;
    event.answer_b = runner.answer;
    event.transport_failed = !reply.ok();
    std::string verdict = "NEITHER";
    if (reply.ok()) {
        verdict = parse_verdict_tag(reply.text).value_or("NEITHER");
    }
    event.verdict = verdict;
    events.push_back(event);

    auto clamp_group = [&](const std::string& answer) {
        for (Particle& p : population.particles) {
            if (p.trace.answer && p.trace.answer->canonical == answer) {
                p.score = std::min(p.score, config_.arbitration_clamp);
            }
        }
    };
    if (verdict == "A") {
        clamp_group(runner.answer);
    } else if (verdict == "B") {
        clamp_group(top.answer);
    } else {
        clamp_group(top.answer);
        clamp_group(runner.answer);
    }
    return events;
}

RefinementEngine::ProposalOutcome RefinementEngine::propose_and_filter(const Problem& problem,
                                                                       const Particle& particle,
                                                                       int iteration,
                                                                       int particle_index) {
    ProposalOutcome out;
    auto rng = make_stream(config_.seed, problem.id, iteration, particle_index, "rejuvenate");
    const double mix_draw = uniform01(rng);
    const bool explore = mix_draw < config_.explore_prob;
    const MoveKind kind = explore ? MoveKind::explore : MoveKind::local_refine;

    std::string prompt;
    if (explore) {
        prompt = templates_.explore.render({{"problem", problem.statement}});
    } else {
        prompt = templates_.refine.render(
            {{"problem", problem.statement},
             {"tagged_steps", particle.trace.raw_text},
             {"feedback", render_feedback(particle.feedback)},
             {"final_answer", particle.trace.answer ? particle.trace.answer->canonical : "NONE"}});
    }
    CallMeta meta{problem.id, iteration, particle_index, to_string(kind)};
    ChatCall call = make_call(Role::iterator, std::move(prompt), config_, meta);
    ChatReply reply = backends_.iterator->call(call);
    out.calls.push_back(CallRecord{call.role, meta.purpose, iteration, particle_index, reply.usage,
                                   reply.retry_usage, !reply.ok()});

    bool usable = reply.ok();
    Trace proposal;
    if (usable) {
        try {
            proposal = stepwise_normalize(reply.text);
        } catch (const EmptyTraceError&) {
            usable = false;
        }
    }
    if (usable && !proposal.answer) usable = false;  // no extractable final answer

    if (!usable) {
        // No-op proposal: the particle keeps its trace, score, and feedback.
        out.trace = particle.trace;
        out.feedback = particle.feedback;
        out.score = particle.score;
        out.kind = MoveKind::no_op;
        out.downhill = false;
        // The acceptance draw is consumed regardless, so stream alignment does
        // not depend on proposal quality.
        out.accepted = accept(1.0, 1.0, config_.smc_temperature, rng);
        return out;
    }

    proposal.provenance = Provenance{particle_index, iteration, kind};

    CallMeta verify_meta{problem.id, iteration, particle_index, "verify_proposal"};
    ChatCall verify_call = make_call(
        Role::verifier, build_verifier_input(problem, proposal, templates_.verify), config_,
        verify_meta);
    ChatReply verify_reply = backends_.verifier->call(verify_call);
    out.calls.push_back(CallRecord{verify_call.role, verify_meta.purpose, iteration,
                                   particle_index, verify_reply.usage, verify_reply.retry_usage,
                                   !verify_reply.ok()});

    Feedback feedback;  // defaults to verification_failed
    if (verify_reply.ok()) {
        feedback =
            parse_verifier_output(verify_reply.text, static_cast<int>(proposal.steps.size()));
    }
    double score_new = scalar_score(feedback);

    out.trace = std::move(proposal);
    out.feedback = std::move(feedback);
    out.score = score_new;
    out.kind = kind;
    double s_old = clamp_score(particle.score, config_.score_floor);
    double s_new = clamp_score(score_new, config_.score_floor);
    out.downhill = s_new < s_old;
    out.accepted = accept(s_old, s_new, config_.smc_temperature, rng);
    return out;
}

IterationRecord RefinementEngine::run_iteration(const Problem& problem, Population& population,
                                                int iteration) {
    const int n = population.width();
    if (n != config_.population_width) {
        throw Error("population width " + std::to_string(n) + " != configured N " +
                    std::to_string(config_.population_width));
    }
    IterationRecord record;
    record.iteration = iteration;
    EngineDiagnostics diag;

    // Scoring.
    score_population(problem, population, iteration, record.calls);

    // Arbitration, then reweight (clamps only ever lower scores).
    diag.arbitration_events = arbitrate(problem, population, iteration, record.calls);
    reweight(population);

    // ESS-gated resampling with clone capping.
    std::vector<double> weights(n);
    for (int i = 0; i < n; ++i) weights[i] = population.particles[i].weight;
    diag.ess = compute_ess(weights);
    diag.resampled = diag.ess < config_.ess_threshold * n;
    if (diag.resampled) {
        auto rng = make_stream(config_.seed, problem.id, iteration, 0, "resample");
        ResampleDraw draw = systematic_resample_indices(weights, n, rng);
        CapResult capped = cap_copies(draw.source_index, weights, config_.clone_cap_fraction);
        diag.offspring_counts = draw.offspring_counts;
        diag.offspring_counts_capped = capped.offspring_counts;

        std::vector<Particle> resampled;
        resampled.reserve(n);
        for (int k = 0; k < n; ++k) {
            int src = capped.source_index[k];
            if (src < 0) {
                resampled.push_back(population.particles[k]);
            } else {
                Particle clone = population.particles[src];
                clone.trace.provenance = Provenance{src, iteration, MoveKind::clone};
                resampled.push_back(std::move(clone));
            }
        }
        population.particles = std::move(resampled);
    }

    // Metropolis-style rejuvenation; installs happen at the barrier below in
    // slot order, so concurrent proposals never observe partial updates.
    std::vector<ProposalOutcome> outcomes(n);
    parallel_for(n, config_.max_parallel, [&](std::size_t i) {
        outcomes[i] = propose_and_filter(problem, population.particles[i], iteration,
                                         static_cast<int>(i));
    });

    record.slots.resize(n);
    for (int i = 0; i < n; ++i) {
        ProposalOutcome& out = outcomes[i];
        ProposalRecord proposal{out.kind, population.particles[i].score, out.score, out.accepted,
                                out.downhill};
        if (out.accepted && out.kind != MoveKind::no_op) {
            Particle& p = population.particles[i];
            p.trace = std::move(out.trace);
            p.feedback = std::move(out.feedback);
            p.score = out.score;
        }
        record.calls.insert(record.calls.end(), out.calls.begin(), out.calls.end());
        record.slots[i].proposal = proposal;
    }
    reweight(population);

    std::vector<SlotRecord> snapshot = snapshot_slots(population, problem);
    for (int i = 0; i < n; ++i) {
        SlotRecord& slot = record.slots[i];
        slot.score = snapshot[i].score;
        slot.weight = snapshot[i].weight;
        slot.verdict = snapshot[i].verdict;
        slot.move_kind = snapshot[i].move_kind;
        slot.answer = snapshot[i].answer;
        slot.correct = snapshot[i].correct;
    }
    record.engine = std::move(diag);
    return record;
}

Population generate_initial_population(const Problem& problem, const RunConfig& config,
                                       const BackendSet& backends, const TemplateSet& templates,
                                       IterationRecord& record) {
    const int n = config.population_width;
    Population population;
    population.particles.resize(n);
    record.iteration = 0;
    std::vector<std::vector<CallRecord>> slot_calls(n);

    parallel_for(n, config.max_parallel, [&](std::size_t i) {
        CallMeta meta{problem.id, 0, static_cast<int>(i), "generate"};
        ChatCall call = make_call(Role::generator,
                                  templates.generate.render({{"problem", problem.statement}}),
                                  config, meta);
        ChatReply reply = backends.generator->call(call);
        slot_calls[i].push_back(CallRecord{call.role, meta.purpose, 0, static_cast<int>(i),
                                           reply.usage, reply.retry_usage, !reply.ok()});
        Trace trace;
        bool usable = reply.ok();
        if (usable) {
            try {
                trace = stepwise_normalize(reply.text);
            } catch (const EmptyTraceError&) {
                usable = false;
            }
        }
        if (!usable) {
            trace.steps = {"(generation unavailable)"};
            trace.raw_text = "<step i=\"1\">(generation unavailable)</step>";
            trace.answer.reset();
        }
        trace.provenance = Provenance{-1, 0, MoveKind::init};
        population.particles[i].trace = std::move(trace);
    });

    for (auto& sc : slot_calls) record.calls.insert(record.calls.end(), sc.begin(), sc.end());
    record.slots = snapshot_slots(population, problem);
    return population;
}

std::vector<SlotRecord> snapshot_slots(const Population& population, const Problem& problem) {
    std::optional<Answer> gold;
    if (problem.gold_answer) gold = make_answer(*problem.gold_answer);
    std::vector<SlotRecord> slots(population.width());
    for (int i = 0; i < population.width(); ++i) {
        const Particle& p = population.particles[i];
        SlotRecord& slot = slots[i];
        slot.score = p.score;
        slot.weight = p.weight;
        slot.verdict = p.feedback.final_verdict;
        slot.move_kind = p.trace.provenance.move_kind;
        if (p.trace.answer) slot.answer = p.trace.answer->canonical;
        if (gold) slot.correct = p.trace.answer && answers_equal(*p.trace.answer, *gold);
    }
    return slots;
}

}  // namespace prism
