#pragma once

#include <memory>
#include <string>

#include "prism/backends.hpp"
#include "prism/engine.hpp"
#include "prism/records.hpp"
#include "prism/templates.hpp"

namespace prism {

struct StrategyContext {
    const Problem& problem;
    const RunConfig& config;
    const BackendSet& backends;
    const TemplateSet& templates;
};

// One population-enhancement iteration: width-N population in, width-N
// population out. Implementations must not depend on scheduling order.
class EnhancementStrategy {
  public:
    virtual ~EnhancementStrategy() = default;
    virtual std::string name() const = 0;
    virtual IterationRecord enhance(const StrategyContext& ctx, Population& population,
                                    int iteration) = 0;
    // Whether the strategy maintains verifier scores on its particles (used
    // to decide if the score vote can reuse them).
    virtual bool produces_scores() const { return false; }
};

struct StrategyParams {
    double follower_fraction = 0.5;
    int rsa_group_size = 3;
};

// Strategy names: none, prism, critic_refine, agentic_debate, mad_conformist,
// mad_follower, recursive_self_aggregation.
std::unique_ptr<EnhancementStrategy> make_strategy(const std::string& name,
                                                   const StrategyParams& params = {});

std::vector<std::string> strategy_names();

}  // namespace prism
