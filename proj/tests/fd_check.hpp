#pragma once

// Finite-difference oracle for the PPO loss: random parameters and batches,
// central differences at step 1e-5, worst relative error across every
// parameter. Shared by the unit suite and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <vector>

#include "calirl/ppo.hpp"
#include "calirl/rng.hpp"

namespace test_support {

inline std::vector<double> random_observation_vector(calirl::Rng& rng, int length) {
    std::vector<double> obs(static_cast<std::size_t>(length), 0.0);
    for (double& v : obs) {
        const double u = rng.uniform();
        if (u < 0.45) v = 1.0;
        else if (u < 0.55) v = 0.5 + rng.uniform();  // exercise non-binary inputs too
    }
    return obs;
}

inline calirl::NetworkParams randomized_params(const calirl::PpoConfig& config, int obs_len,
                                               std::uint64_t seed) {
    calirl::Rng rng(seed);
    calirl::NetworkParams params = calirl::init_params(obs_len, config, rng);
    const auto jitter = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += 0.3 * rng.gaussian();
    };
    const auto jitter_v = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 0.3 * rng.gaussian();
    };
    jitter(params.actor_w1);
    jitter_v(params.actor_b1);
    jitter(params.actor_w2);
    jitter_v(params.actor_b2);
    jitter(params.critic_w1);
    jitter_v(params.critic_b1);
    jitter(params.critic_w2);
    jitter_v(params.critic_b2);
    return params;
}

struct FdBatch {
    std::vector<calirl::Transition> transitions;
    std::vector<double> advantages;
    std::vector<double> returns;
};

// Random transitions (a mix of guided and unguided) whose ratios stay clear of
// the clip kinks so central differences are valid.
inline FdBatch random_fd_batch(const calirl::NetworkParams& params,
                               const calirl::PpoConfig& config, calirl::Rng& rng, int size) {
    using namespace calirl;
    FdBatch batch;
    for (int i = 0; i < size; ++i) {
        while (true) {
            Transition t;
            t.observation = random_observation_vector(rng, params.observation_length());
            t.action = static_cast<Action>(rng.uniform_int(kNumActions));
            const ActionDistribution p = forward_actor(params, t.observation);
            if (rng.uniform() < 0.5) {
                ActionDistribution advisor{};
                double sum = 0.0;
                for (double& v : advisor) {
                    v = rng.uniform() + 1e-3;
                    sum += v;
                }
                for (double& v : advisor) v /= sum;
                t.advisor_dist = advisor;
                t.coeff_agent = rng.uniform();
            }
            const double coeff = t.advisor_dist ? t.coeff_agent : 1.0;
            const int a = static_cast<int>(t.action);
            const double mix =
                t.advisor_dist ? (1.0 - coeff) * (*t.advisor_dist)[a] + coeff * p[a] : p[a];
            t.behavior_log_prob = std::log(mix) + (rng.uniform() - 0.5) * 1.2;
            const double ratio = std::exp(std::log(mix) - t.behavior_log_prob);
            if (std::abs(ratio - (1.0 - config.clip_epsilon)) < 5e-3 ||
                std::abs(ratio - (1.0 + config.clip_epsilon)) < 5e-3) {
                continue;  // too close to a clip kink; redraw
            }
            t.reward = rng.gaussian();
            batch.transitions.push_back(std::move(t));
            break;
        }
        batch.advantages.push_back(2.0 * rng.gaussian());
        batch.returns.push_back(rng.gaussian());
    }
    return batch;
}

// Worst relative error between the analytic gradient and central finite
// differences over all parameters; denominators floored at 1e-3.
inline double ppo_gradient_check(const calirl::PpoConfig& config, int obs_len, std::uint64_t seed,
                                 int batch_size) {
    using namespace calirl;
    NetworkParams params = randomized_params(config, obs_len, seed);
    Rng rng(seed ^ 0xFDFD);
    FdBatch batch = random_fd_batch(params, config, rng, batch_size);
    std::vector<const Transition*> ptrs;
    for (const Transition& t : batch.transitions) ptrs.push_back(&t);
    const MinibatchView view{ptrs, batch.advantages, batch.returns};

    Gradients grads;
    ppo_loss_and_grad(params, view, config, grads);

    const double h = 1e-5;
    double worst = 0.0;
    const auto probe = [&](double& cell, double analytic) {
        const double saved = cell;
        Gradients scratch;
        cell = saved + h;
        const double up = ppo_loss_and_grad(params, view, config, scratch);
        cell = saved - h;
        const double down = ppo_loss_and_grad(params, view, config, scratch);
        cell = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
        worst = std::max(worst, err);
    };
    const auto check_matrix = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& analytic) {
        for (Eigen::Index r = 0; r < param.rows(); ++r)
            for (Eigen::Index c = 0; c < param.cols(); ++c) probe(param(r, c), analytic(r, c));
    };
    const auto check_vector = [&](Eigen::VectorXd& param, const Eigen::VectorXd& analytic) {
        for (Eigen::Index i = 0; i < param.size(); ++i) probe(param(i), analytic(i));
    };

    check_matrix(params.actor_w1, grads.actor_w1);
    check_vector(params.actor_b1, grads.actor_b1);
    check_matrix(params.actor_w2, grads.actor_w2);
    check_vector(params.actor_b2, grads.actor_b2);
    check_matrix(params.critic_w1, grads.critic_w1);
    check_vector(params.critic_b1, grads.critic_b1);
    check_matrix(params.critic_w2, grads.critic_w2);
    check_vector(params.critic_b2, grads.critic_b2);
    return worst;
}

}  // namespace test_support
