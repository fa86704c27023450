#include "prism/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "prism/errors.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"

namespace prism {

namespace {

// Replaces the particle's trace when the rewrite produced a usable trace
// (extractable answer); otherwise the particle is left unchanged.
bool install_rewrite(Particle& particle, const ChatReply& reply, int iteration, int parent,
                     MoveKind kind) {
    if (!reply.ok()) return false;
    Trace trace;
    try {
        trace = stepwise_normalize(reply.text);
    } catch (const EmptyTraceError&) {
        return false;
    }
    if (!trace.answer) return false;
    trace.provenance = Provenance{parent, iteration, kind};
    particle.trace = std::move(trace);
    particle.feedback = Feedback{};
    particle.score = 0.0;
    particle.weight = 0.0;
    return true;
}

IterationRecord finish_record(const StrategyContext& ctx, const Population& population,
                              int iteration, std::vector<CallRecord> calls) {
    IterationRecord record;
    record.iteration = iteration;
    record.slots = snapshot_slots(population, ctx.problem);
    record.calls = std::move(calls);
    return record;
}

// Modal extracted answer; ties broken by larger summed score, then lowest
// particle index. Empty when nothing is extractable.
std::optional<std::string> modal_answer(const Population& population) {
    struct Tally {
        int count = 0;
        double score_sum = 0.0;
        int min_index = -1;
    };
    std::map<std::string, Tally> tallies;
    for (int i = 0; i < population.width(); ++i) {
        const Particle& p = population.particles[i];
        if (!p.trace.answer) continue;
        Tally& t = tallies[p.trace.answer->canonical];
        if (t.count == 0) t.min_index = i;
        ++t.count;
        t.score_sum += p.score;
    }
    const std::string* best = nullptr;
    const Tally* best_t = nullptr;
    for (const auto& [answer, t] : tallies) {
        bool wins = best == nullptr;
        if (!wins) {
            if (t.count != best_t->count) {
                wins = t.count > best_t->count;
            } else if (t.score_sum != best_t->score_sum) {
                wins = t.score_sum > best_t->score_sum;
            } else {
                wins = t.min_index < best_t->min_index;
            }
        }
        if (wins) {
            best = &answer;
            best_t = &t;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

class NoneStrategy final : public EnhancementStrategy {
  public:
    std::string name() const override { return "none"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        return finish_record(ctx, population, iteration, {});
    }
};

class PrismStrategy final : public EnhancementStrategy {
  public:
    std::string name() const override { return "prism"; }
    bool produces_scores() const override { return true; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        RefinementEngine engine(ctx.config, ctx.backends, ctx.templates);
        return engine.run_iteration(ctx.problem, population, iteration);
    }
};

// Each particle is independently critiqued, then rewritten; the rewrite
// replaces the trace unconditionally (no score gate).
class CriticRefineStrategy final : public EnhancementStrategy {
  public:
    std::string name() const override { return "critic_refine"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        const int n = population.width();
        std::vector<std::vector<CallRecord>> slot_calls(n);
        parallel_for(n, ctx.config.max_parallel, [&](std::size_t i) {
            Particle& p = population.particles[i];
            const std::string answer = p.trace.answer ? p.trace.answer->canonical : "NONE";
            ChatCall critique_call = make_call(
                Role::iterator,
                ctx.templates.critique.render({{"problem", ctx.problem.statement},
                                               {"tagged_steps", p.trace.raw_text},
                                               {"final_answer", answer}}),
                ctx.config, CallMeta{ctx.problem.id, iteration, static_cast<int>(i), "critique"});
            ChatReply critique = ctx.backends.iterator->call(critique_call);
            slot_calls[i].push_back(CallRecord{Role::iterator, "critique", iteration,
                                               static_cast<int>(i), critique.usage,
                                               critique.retry_usage, !critique.ok()});
            if (!critique.ok()) return;

            ChatCall rewrite_call = make_call(
                Role::iterator,
                ctx.templates.rewrite.render({{"problem", ctx.problem.statement},
                                              {"tagged_steps", p.trace.raw_text},
                                              {"critique", critique.text},
                                              {"final_answer", answer}}),
                ctx.config, CallMeta{ctx.problem.id, iteration, static_cast<int>(i), "rewrite"});
            ChatReply rewrite = ctx.backends.iterator->call(rewrite_call);
            slot_calls[i].push_back(CallRecord{Role::iterator, "rewrite", iteration,
                                               static_cast<int>(i), rewrite.usage,
                                               rewrite.retry_usage, !rewrite.ok()});
            install_rewrite(p, rewrite, iteration, static_cast<int>(i), MoveKind::local_refine);
        });
        std::vector<CallRecord> calls;
        for (auto& sc : slot_calls) calls.insert(calls.end(), sc.begin(), sc.end());
        return finish_record(ctx, population, iteration, std::move(calls));
    }
};

// Each particle revises itself conditioned on the answers of all others.
class AgenticDebateStrategy final : public EnhancementStrategy {
  public:
    std::string name() const override { return "agentic_debate"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        const int n = population.width();
        if (n < 2) throw Error("agentic_debate requires N >= 2");
        std::vector<std::string> answers(n);
        for (int i = 0; i < n; ++i) {
            answers[i] = population.particles[i].trace.answer
                             ? population.particles[i].trace.answer->canonical
                             : "NONE";
        }
        std::vector<std::vector<CallRecord>> slot_calls(n);
        parallel_for(n, ctx.config.max_parallel, [&](std::size_t i) {
            Particle& p = population.particles[i];
            std::ostringstream peers;
            for (int j = 0; j < n; ++j) {
                if (j == static_cast<int>(i)) continue;
                peers << "Peer " << (j + 1) << " answer: " << answers[j] << '\n';
            }
            ChatCall call = make_call(
                Role::iterator,
                ctx.templates.debate.render({{"problem", ctx.problem.statement},
                                             {"tagged_steps", p.trace.raw_text},
                                             {"final_answer", answers[i]},
                                             {"peer_answers", peers.str()}}),
                ctx.config, CallMeta{ctx.problem.id, iteration, static_cast<int>(i), "debate"});
            ChatReply reply = ctx.backends.iterator->call(call);
            slot_calls[i].push_back(CallRecord{Role::iterator, "debate", iteration,
                                               static_cast<int>(i), reply.usage, reply.retry_usage,
                                               !reply.ok()});
            install_rewrite(p, reply, iteration, static_cast<int>(i), MoveKind::local_refine);
        });
        std::vector<CallRecord> calls;
        for (auto& sc : slot_calls) calls.insert(calls.end(), sc.begin(), sc.end());
        return finish_record(ctx, population, iteration, std::move(calls));
    }
};

void conform_pass(const StrategyContext& ctx, Population& population, int iteration,
                  const std::string& target, std::vector<std::vector<CallRecord>>& slot_calls) {
    const int n = population.width();
    parallel_for(n, ctx.config.max_parallel, [&](std::size_t i) {
        Particle& p = population.particles[i];
        if (p.trace.answer && p.trace.answer->canonical == target) return;  // preserved verbatim
        ChatCall call = make_call(
            Role::iterator,
            ctx.templates.conform.render(
                {{"problem", ctx.problem.statement},
                 {"tagged_steps", p.trace.raw_text},
                 {"final_answer", p.trace.answer ? p.trace.answer->canonical : "NONE"},
                 {"target_answer", target}}),
            ctx.config, CallMeta{ctx.problem.id, iteration, static_cast<int>(i), "conform"});
        ChatReply reply = ctx.backends.iterator->call(call);
        slot_calls[i].push_back(CallRecord{Role::iterator, "conform", iteration,
                                           static_cast<int>(i), reply.usage, reply.retry_usage,
                                           !reply.ok()});
        install_rewrite(p, reply, iteration, static_cast<int>(i), MoveKind::local_refine);
    });
}

// Anchors the population to the current majority answer: agreeing particles
// are preserved, disagreeing ones are rewritten toward it.
class MadConformistStrategy final : public EnhancementStrategy {
  public:
    std::string name() const override { return "mad_conformist"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        std::vector<std::vector<CallRecord>> slot_calls(population.width());
        auto target = modal_answer(population);
        if (target) conform_pass(ctx, population, iteration, *target, slot_calls);
        std::vector<CallRecord> calls;
        for (auto& sc : slot_calls) calls.insert(calls.end(), sc.begin(), sc.end());
        return finish_record(ctx, population, iteration, std::move(calls));
    }
};

// Replaces the floor(fraction * N) lowest-score particles with rewrites that
// adopt the majority solution, then runs the conformist pass over everyone.
class MadFollowerStrategy final : public EnhancementStrategy {
  public:
    explicit MadFollowerStrategy(double fraction) : fraction_(fraction) {
        if (fraction < 0.0 || fraction > 1.0) throw ConfigError("follower fraction must lie in [0, 1]");
    }
    std::string name() const override { return "mad_follower"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        const int n = population.width();
        std::vector<std::vector<CallRecord>> slot_calls(n);
        auto target = modal_answer(population);
        if (target) {
            int n_replace = static_cast<int>(std::floor(fraction_ * n));
            std::vector<int> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return population.particles[a].score < population.particles[b].score;
            });
            std::vector<int> replace(order.begin(), order.begin() + n_replace);
            std::sort(replace.begin(), replace.end());
            parallel_for(replace.size(), ctx.config.max_parallel, [&](std::size_t k) {
                int i = replace[k];
                Particle& p = population.particles[i];
                ChatCall call = make_call(
                    Role::iterator,
                    ctx.templates.conform.render(
                        {{"problem", ctx.problem.statement},
                         {"tagged_steps", p.trace.raw_text},
                         {"final_answer", p.trace.answer ? p.trace.answer->canonical : "NONE"},
                         {"target_answer", *target}}),
                    ctx.config, CallMeta{ctx.problem.id, iteration, i, "adopt_majority"});
                ChatReply reply = ctx.backends.iterator->call(call);
                slot_calls[i].push_back(CallRecord{Role::iterator, "adopt_majority", iteration, i,
                                                   reply.usage, reply.retry_usage, !reply.ok()});
                install_rewrite(p, reply, iteration, i, MoveKind::local_refine);
            });
            conform_pass(ctx, population, iteration, *target, slot_calls);
        }
        std::vector<CallRecord> calls;
        for (auto& sc : slot_calls) calls.insert(calls.end(), sc.begin(), sc.end());
        return finish_record(ctx, population, iteration, std::move(calls));
    }

  private:
    double fraction_;
};

// Partitions the population into seeded random groups, synthesizes each group
// into one aggregate solution, and clones the aggregates to refill width N.
class RecursiveSelfAggregationStrategy final : public EnhancementStrategy {
  public:
    explicit RecursiveSelfAggregationStrategy(int group_size) : group_size_(group_size) {}
    std::string name() const override { return "recursive_self_aggregation"; }
    IterationRecord enhance(const StrategyContext& ctx, Population& population,
                            int iteration) override {
        const int n = population.width();
        if (group_size_ < 2 || group_size_ > n) {
            throw ConfigError("rsa group size must lie in [2, N]");
        }
        auto rng = make_stream(ctx.config.seed, ctx.problem.id, iteration, 0, "rsa_partition");
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        const int n_groups = (n + group_size_ - 1) / group_size_;
        std::vector<std::vector<int>> groups(n_groups);
        for (int i = 0; i < n; ++i) groups[i / group_size_].push_back(order[i]);

        std::vector<std::optional<Particle>> aggregates(n_groups);
        std::vector<std::vector<CallRecord>> group_calls(n_groups);
        parallel_for(n_groups, ctx.config.max_parallel, [&](std::size_t g) {
            std::ostringstream candidates;
            for (std::size_t m = 0; m < groups[g].size(); ++m) {
                const Particle& p = population.particles[groups[g][m]];
                candidates << "Candidate " << (m + 1)
                           << " answer: " << (p.trace.answer ? p.trace.answer->canonical : "NONE")
                           << '\n'
                           << p.trace.raw_text << "\n\n";
            }
            ChatCall call = make_call(
                Role::iterator,
                ctx.templates.synthesize.render(
                    {{"problem", ctx.problem.statement}, {"candidates", candidates.str()}}),
                ctx.config,
                CallMeta{ctx.problem.id, iteration, groups[g][0], "synthesize"});
            ChatReply reply = ctx.backends.iterator->call(call);
            group_calls[g].push_back(CallRecord{Role::iterator, "synthesize", iteration,
                                                groups[g][0], reply.usage, reply.retry_usage,
                                                !reply.ok()});
            Particle agg = population.particles[groups[g][0]];
            if (install_rewrite(agg, reply, iteration, groups[g][0], MoveKind::local_refine)) {
                aggregates[g] = std::move(agg);
            }
        });

        // Refill width N round-robin over the aggregates; a failed synthesis
        // keeps the group's original members for its share of slots.
        std::vector<Particle> next;
        next.reserve(n);
        for (int k = 0; k < n; ++k) {
            int g = k % n_groups;
            if (aggregates[g]) {
                Particle clone = *aggregates[g];
                if (k >= n_groups) {
                    clone.trace.provenance =
                        Provenance{clone.trace.provenance.parent_index, iteration, MoveKind::clone};
                }
                next.push_back(std::move(clone));
            } else {
                next.push_back(population.particles[groups[g][k / n_groups % groups[g].size()]]);
            }
        }
        population.particles = std::move(next);

        std::vector<CallRecord> calls;
        for (auto& gc : group_calls) calls.insert(calls.end(), gc.begin(), gc.end());
        return finish_record(ctx, population, iteration, std::move(calls));
    }

  private:
    int group_size_;
};

}  // namespace

std::unique_ptr<EnhancementStrategy> make_strategy(const std::string& name,
                                                   const StrategyParams& params) {
    if (name == "none") return std::make_unique<NoneStrategy>();
    if (name == "prism") return std::make_unique<PrismStrategy>();
    if (name == "critic_refine") return std::make_unique<CriticRefineStrategy>();
    if (name == "agentic_debate") return std::make_unique<AgenticDebateStrategy>();
    if (name == "mad_conformist") return std::make_unique<MadConformistStrategy>();
    if (name == "mad_follower") return std::make_unique<MadFollowerStrategy>(params.follower_fraction);
    if (name == "recursive_self_aggregation") {
        return std::make_unique<RecursiveSelfAggregationStrategy>(params.rsa_group_size);
    }
    throw ConfigError("unknown strategy: " + name);
}

std::vector<std::string> strategy_names() {
    return {"none",          "prism",        "critic_refine",
            "agentic_debate", "mad_conformist", "mad_follower",
            "recursive_self_aggregation"};
}

}  // namespace prism
