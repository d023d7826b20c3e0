#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "calirl/distribution.hpp"
#include "calirl/gridworld.hpp"
#include "calirl/oracle.hpp"
#include "calirl/rng.hpp"

namespace calirl {

// Parameters of the simulated guidance model. Errors are a frozen property of
// the input: a state hash drawn from error_seed marks each state correct with
// probability `accuracy`, and a wrong state keeps the same wrong advised
// action on every query. `concentration` is the logit gap between the advised
// action and the rest. `pass_noise` scales the per-pass logit perturbation of
// the stochastic ensemble; wrong-marked states use pass_noise *
// hard_noise_boost, which is invisible to single-pass advice and surfaces only
// as ensemble spread.
struct AdvisorProfile {
    double accuracy = 0.90;
    double concentration = 8.0;
    double pass_noise = 1.0;
    double hard_noise_boost = 6.0;
    std::uint64_t error_seed = 0;

    void validate() const {
        if (accuracy < 0.0 || accuracy > 1.0) throw std::invalid_argument("accuracy outside [0,1]");
        if (concentration <= 0.0) throw std::invalid_argument("concentration must be positive");
        if (pass_noise < 0.0) throw std::invalid_argument("pass_noise must be non-negative");
        if (hard_noise_boost < 0.0) throw std::invalid_argument("hard_noise_boost must be non-negative");
    }
};

// One stochastic forward pass.
struct AdvicePass {
    ActionDistribution dist;
};

// Ensemble summary: the averaged distribution with its normalized entropy and
// one minus max-probability uncertainty readings.
struct CalibratedAdvice {
    ActionDistribution mean_dist;
    double entropy_norm = 0.0;
    double one_minus_max = 0.0;
    Action predicted_action = Action::TurnLeft;
    int passes_used = 0;
};

// Entropy normalized by log(5); 0 for one-hot, 1 for uniform.
inline double normalized_entropy(const ActionDistribution& dist) {
    const double h = entropy_nats(dist) / std::log(static_cast<double>(kNumActions));
    return h < 0.0 ? 0.0 : (h > 1.0 ? 1.0 : h);
}

namespace detail {

struct AdvisedChoice {
    int action_id;
    bool correct;
};

// Deterministic per-state verdict: which action the model advises and whether
// that matches the oracle.
inline AdvisedChoice advised_choice(const GridState& state, const GridConfig& config,
                                    const AdvisorProfile& profile) {
    const int oracle_id = static_cast<int>(optimal_action(state, config));
    const std::uint64_t h = state_hash(state, profile.error_seed);
    const bool correct = unit_from_bits(h) < profile.accuracy;
    if (correct) return {oracle_id, true};
    // stable wrong action, uniform over the four non-oracle ids
    const int offset = static_cast<int>(splitmix64(h) % (kNumActions - 1));
    int wrong = offset >= oracle_id ? offset + 1 : offset;
    return {wrong, false};
}

inline std::array<double, kNumActions> base_logits(int advised_id, double concentration) {
    std::array<double, kNumActions> z{};
    z[advised_id] = concentration;
    return z;
}

inline CalibratedAdvice summarize(const ActionDistribution& mean_dist, int passes_used) {
    CalibratedAdvice advice;
    advice.mean_dist = mean_dist;
    advice.entropy_norm = normalized_entropy(mean_dist);
    advice.predicted_action = static_cast<Action>(argmax_action(mean_dist));
    advice.one_minus_max = 1.0 - mean_dist[static_cast<std::size_t>(argmax_action(mean_dist))];
    advice.passes_used = passes_used;
    return advice;
}

}  // namespace detail

// One noiseless forward pass: softmax with the advised action's logit at
// `concentration` and the rest at zero. Deterministic in (state, profile).
inline ActionDistribution base_distribution(const GridState& state, const GridConfig& config,
                                            const AdvisorProfile& profile) {
    profile.validate();
    const detail::AdvisedChoice choice = detail::advised_choice(state, config, profile);
    return softmax(detail::base_logits(choice.action_id, profile.concentration));
}

// Single-pass advice with the pass noise forced to zero.
inline CalibratedAdvice advise_deterministic(const GridState& state, const GridConfig& config,
                                             const AdvisorProfile& profile) {
    return detail::summarize(base_distribution(state, config, profile), 1);
}

// K stochastic passes: base logits plus independent zero-mean Gaussian noise,
// softmaxed per pass. Bit-reproducible given the pass_rng state.
inline std::vector<AdvicePass> mc_passes(const GridState& state, const GridConfig& config,
                                         const AdvisorProfile& profile, int passes, Rng& pass_rng) {
    profile.validate();
    if (passes < 2) throw std::invalid_argument("ensemble advice requires at least 2 passes");
    const detail::AdvisedChoice choice = detail::advised_choice(state, config, profile);
    const std::array<double, kNumActions> logits =
        detail::base_logits(choice.action_id, profile.concentration);
    const double sigma = profile.pass_noise * (choice.correct ? 1.0 : profile.hard_noise_boost);

    std::vector<AdvicePass> result;
    result.reserve(static_cast<std::size_t>(passes));
    for (int k = 0; k < passes; ++k) {
        std::array<double, kNumActions> z = logits;
        if (sigma > 0.0) {
            for (double& v : z) v += sigma * pass_rng.gaussian();
        }
        result.push_back({softmax(z)});
    }
    return result;
}

inline CalibratedAdvice summarize_passes(const std::vector<AdvicePass>& passes) {
    if (passes.empty()) throw std::invalid_argument("cannot summarize zero passes");
    ActionDistribution mean{};
    for (const AdvicePass& pass : passes) {
        for (int a = 0; a < kNumActions; ++a) mean[a] += pass.dist[a];
    }
    for (double& v : mean) v /= static_cast<double>(passes.size());
    return detail::summarize(mean, static_cast<int>(passes.size()));
}

// Ensemble advice: arithmetic mean of K noisy passes plus its uncertainty
// summaries.
inline CalibratedAdvice advise_mc(const GridState& state, const GridConfig& config,
                                  const AdvisorProfile& profile, int passes, Rng& pass_rng) {
    return summarize_passes(mc_passes(state, config, profile, passes, pass_rng));
}

}  // namespace calirl
