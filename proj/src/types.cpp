#include "prism/types.hpp"

#include "prism/errors.hpp"

namespace prism {

void RunConfig::validate() const {
    if (population_width < 1) throw ConfigError("N must be >= 1");
    if (refinement_depth < 0) throw ConfigError("T must be >= 0");
    if (!(smc_temperature > 0.0)) throw ConfigError("T_smc must be > 0");
    if (!(ess_threshold > 0.0) || ess_threshold > 1.0) throw ConfigError("alpha must lie in (0, 1]");
    if (explore_prob < 0.0 || explore_prob > 1.0) throw ConfigError("eta must lie in [0, 1]");
    if (!(arbitration_clamp > 0.0) || !(arbitration_clamp < 1.0))
        throw ConfigError("c must lie in (0, 1)");
    if (!(clone_cap_fraction > 0.0) || clone_cap_fraction > 1.0)
        throw ConfigError("kappa must lie in (0, 1]");
    if (!(score_floor > 0.0)) throw ConfigError("epsilon must be > 0");
    if (arbitration_theta_hi <= 0.0 || arbitration_theta_hi >= 1.0)
        throw ConfigError("theta_hi must lie in (0, 1)");
    if (arbitration_delta_tie < 0.0 || arbitration_delta_tie > 1.0)
        throw ConfigError("delta_tie must lie in [0, 1]");
    if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
}

}  // namespace prism
