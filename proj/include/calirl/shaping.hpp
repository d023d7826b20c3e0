#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "calirl/distribution.hpp"
#include "calirl/gridworld.hpp"
#include "calirl/rng.hpp"

namespace calirl {

enum class MixSource {
    EntropyMix,
    LinearDecayMix,
    AgentOnly,
    AdvisorOnly,
};

// Behavior distribution plus the weight the agent policy received in it.
// dist = (1 - coeff_agent) * p_advisor + coeff_agent * p_agent.
struct MixedPolicy {
    ActionDistribution dist;
    double coeff_agent = 1.0;
    MixSource source = MixSource::AgentOnly;
};

namespace detail {

inline void require_distribution(const ActionDistribution& p, const char* label) {
    if (!is_distribution(p)) throw std::invalid_argument(std::string(label) + " is not a distribution");
}

}  // namespace detail

// Uncertainty-weighted mixture: weight (1 - entropy_norm) on the advisor.
// Confident advice (entropy 0) reproduces it exactly; maximally uncertain
// advice (entropy 1) defers to the agent exactly.
inline MixedPolicy mix_entropy(const ActionDistribution& p_llm, const ActionDistribution& p_agent,
                               double entropy_norm) {
    detail::require_distribution(p_llm, "advisor distribution");
    detail::require_distribution(p_agent, "agent distribution");
    if (!(entropy_norm >= 0.0 && entropy_norm <= 1.0)) {
        throw std::invalid_argument("entropy_norm outside [0,1]: entropy was not normalized upstream");
    }
    MixedPolicy mixed;
    mixed.coeff_agent = entropy_norm;
    mixed.source = MixSource::EntropyMix;
    for (int a = 0; a < kNumActions; ++a) {
        mixed.dist[a] = (1.0 - entropy_norm) * p_llm[a] + entropy_norm * p_agent[a];
    }
    return mixed;
}

// Baseline advisor weight: 1 at episode 0, linearly down to 0 at the final
// episode.
inline double linear_decay_coeff(int episode, int total_episodes) {
    if (total_episodes < 2) throw std::invalid_argument("linear decay needs at least 2 episodes");
    if (episode < 0 || episode >= total_episodes) throw std::invalid_argument("episode index out of range");
    return 1.0 - static_cast<double>(episode) / static_cast<double>(total_episodes - 1);
}

// Fixed-weight mixture: lambda on the advisor.
inline MixedPolicy mix_fixed(const ActionDistribution& p_llm, const ActionDistribution& p_agent,
                             double lambda) {
    detail::require_distribution(p_llm, "advisor distribution");
    detail::require_distribution(p_agent, "agent distribution");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda outside [0,1]");
    MixedPolicy mixed;
    mixed.coeff_agent = 1.0 - lambda;
    mixed.source = MixSource::LinearDecayMix;
    for (int a = 0; a < kNumActions; ++a) {
        mixed.dist[a] = lambda * p_llm[a] + (1.0 - lambda) * p_agent[a];
    }
    return mixed;
}

inline MixedPolicy agent_only(const ActionDistribution& p_agent) {
    detail::require_distribution(p_agent, "agent distribution");
    return {p_agent, 1.0, MixSource::AgentOnly};
}

// Categorical draw from the mixed distribution; the returned log-probability
// is the mixture's mass on the sampled action.
inline std::pair<Action, double> sample_action(const MixedPolicy& policy, Rng& rng) {
    detail::require_distribution(policy.dist, "mixed distribution");
    const double u = rng.uniform();
    double cumulative = 0.0;
    int chosen = -1;
    for (int a = 0; a < kNumActions; ++a) {
        cumulative += policy.dist[a];
        if (u < cumulative) {
            chosen = a;
            break;
        }
    }
    if (chosen < 0) {  // u landed in the rounding slack past the last mass
        for (int a = kNumActions - 1; a >= 0; --a) {
            if (policy.dist[a] > 0.0) {
                chosen = a;
                break;
            }
        }
    }
    return {static_cast<Action>(chosen), std::log(policy.dist[static_cast<std::size_t>(chosen)])};
}

}  // namespace calirl
