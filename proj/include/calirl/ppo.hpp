#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "calirl/distribution.hpp"
#include "calirl/gridworld.hpp"
#include "calirl/rng.hpp"

namespace calirl {

struct PpoConfig {
    double discount = 0.99;
    double clip_epsilon = 0.2;
    double learning_rate = 1e-4;
    int minibatch_size = 15;
    int epochs_per_update = 4;
    int hidden_width = 64;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double value_loss_weight = 0.5;
    double entropy_bonus_weight = 0.01;

    void validate() const {
        if (discount <= 0.0 || discount > 1.0) throw std::invalid_argument("discount outside (0,1]");
        if (clip_epsilon <= 0.0) throw std::invalid_argument("clip_epsilon must be positive");
        if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be positive");
        if (epochs_per_update < 1) throw std::invalid_argument("epochs_per_update must be positive");
        if (hidden_width < 1) throw std::invalid_argument("hidden_width must be positive");
    }
};

// Actor and critic are each a two-layer perceptron: input -> hidden (tanh) ->
// output. Actor emits 5 logits, critic one value.
struct NetworkParams {
    Eigen::MatrixXd actor_w1, actor_w2;
    Eigen::VectorXd actor_b1, actor_b2;
    Eigen::MatrixXd critic_w1, critic_w2;
    Eigen::VectorXd critic_b1, critic_b2;

    int observation_length() const { return static_cast<int>(actor_w1.cols()); }
    int hidden_width() const { return static_cast<int>(actor_w1.rows()); }
};

// One step of experience. The behavior log-probability is recorded under the
// mixed policy that actually sampled the action; advisor_dist and coeff_agent
// cache that mixture so the update can re-mix the current actor output the
// same way (absent for the unguided condition, where the actor itself is the
// behavior policy).
struct Transition {
    std::vector<double> observation;
    Action action = Action::TurnLeft;
    double behavior_log_prob = 0.0;
    double reward = 0.0;
    bool done = false;
    std::optional<ActionDistribution> advisor_dist;
    double coeff_agent = 1.0;
};

struct StepTargets {
    double ret = 0.0;       // discounted return
    double advantage = 0.0; // return minus the pre-update critic value (raw)
};

// Hidden layers get uniform noise scaled by 1/sqrt(fan_in); output layers are
// zero so the initial policy is uniform and the initial value 0.
inline NetworkParams init_params(int observation_length, const PpoConfig& config, Rng& rng) {
    config.validate();
    if (observation_length < 1) throw std::invalid_argument("observation_length must be positive");
    const int hidden = config.hidden_width;

    const auto scaled_uniform = [&](Eigen::MatrixXd& m, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = scale * (2.0 * rng.uniform() - 1.0);
            }
        }
    };

    NetworkParams params;
    params.actor_w1.setZero(hidden, observation_length);
    params.actor_b1.setZero(hidden);
    params.actor_w2.setZero(kNumActions, hidden);
    params.actor_b2.setZero(kNumActions);
    params.critic_w1.setZero(hidden, observation_length);
    params.critic_b1.setZero(hidden);
    params.critic_w2.setZero(1, hidden);
    params.critic_b2.setZero(1);
    scaled_uniform(params.actor_w1, observation_length);
    scaled_uniform(params.critic_w1, observation_length);
    return params;
}

namespace detail {

// Observations are mostly zeros (one-hot planes), so the input layer walks the
// nonzero entries instead of doing a dense mat-vec. Exact same arithmetic.
inline Eigen::VectorXd input_layer(const Eigen::MatrixXd& w1, const Eigen::VectorXd& b1,
                                   std::span<const double> obs) {
    Eigen::VectorXd pre = b1;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double x = obs[i];
        if (x == 0.0) continue;
        if (x == 1.0) {
            pre += w1.col(static_cast<Eigen::Index>(i));
        } else {
            pre += x * w1.col(static_cast<Eigen::Index>(i));
        }
    }
    return pre;
}

inline void input_layer_grad(Eigen::MatrixXd& grad_w1, const Eigen::VectorXd& dpre,
                             std::span<const double> obs) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double x = obs[i];
        if (x == 0.0) continue;
        if (x == 1.0) {
            grad_w1.col(static_cast<Eigen::Index>(i)) += dpre;
        } else {
            grad_w1.col(static_cast<Eigen::Index>(i)) += x * dpre;
        }
    }
}

struct ActorForward {
    Eigen::VectorXd hidden;  // tanh activations
    ActionDistribution probs;
};

inline ActorForward actor_forward(const NetworkParams& params, std::span<const double> obs) {
    ActorForward fwd;
    fwd.hidden = input_layer(params.actor_w1, params.actor_b1, obs).array().tanh();
    const Eigen::VectorXd logits = params.actor_w2 * fwd.hidden + params.actor_b2;
    std::array<double, kNumActions> z{};
    for (int a = 0; a < kNumActions; ++a) z[a] = logits(a);
    fwd.probs = softmax(z);
    return fwd;
}

struct CriticForward {
    Eigen::VectorXd hidden;
    double value = 0.0;
};

inline CriticForward critic_forward(const NetworkParams& params, std::span<const double> obs) {
    CriticForward fwd;
    fwd.hidden = input_layer(params.critic_w1, params.critic_b1, obs).array().tanh();
    fwd.value = (params.critic_w2 * fwd.hidden + params.critic_b2)(0);
    return fwd;
}

}  // namespace detail

inline ActionDistribution forward_actor(const NetworkParams& params, std::span<const double> obs) {
    if (static_cast<int>(obs.size()) != params.observation_length()) {
        throw std::invalid_argument("observation length does not match the network");
    }
    const ActionDistribution probs = detail::actor_forward(params, obs).probs;
    for (double p : probs) {
        if (!std::isfinite(p)) throw std::runtime_error("actor produced a non-finite probability");
    }
    return probs;
}

inline double forward_critic(const NetworkParams& params, std::span<const double> obs) {
    if (static_cast<int>(obs.size()) != params.observation_length()) {
        throw std::invalid_argument("observation length does not match the network");
    }
    const double value = detail::critic_forward(params, obs).value;
    if (!std::isfinite(value)) throw std::runtime_error("critic produced a non-finite value");
    return value;
}

// Discounted returns over one terminated-or-truncated trajectory, bootstrapped
// with `bootstrap_value` past the final step (0 for terminal episodes, the
// critic's value of the successor state for truncated ones). Advantages are
// raw return-minus-value; standardization happens inside ppo_update.
inline std::vector<StepTargets> compute_returns_and_advantages(std::span<const Transition> trajectory,
                                                               const NetworkParams& params,
                                                               double discount,
                                                               double bootstrap_value = 0.0) {
    if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
    std::vector<StepTargets> targets(trajectory.size());
    double running = bootstrap_value;
    for (std::size_t i = trajectory.size(); i-- > 0;) {
        running = trajectory[i].reward + discount * running;
        targets[i].ret = running;
        targets[i].advantage = running - forward_critic(params, trajectory[i].observation);
    }
    return targets;
}

// Accumulated parameter gradients; same shapes as NetworkParams.
struct Gradients {
    Eigen::MatrixXd actor_w1, actor_w2;
    Eigen::VectorXd actor_b1, actor_b2;
    Eigen::MatrixXd critic_w1, critic_w2;
    Eigen::VectorXd critic_b1, critic_b2;

    static Gradients zeros_like(const NetworkParams& params) {
        Gradients g;
        g.actor_w1.setZero(params.actor_w1.rows(), params.actor_w1.cols());
        g.actor_b1.setZero(params.actor_b1.size());
        g.actor_w2.setZero(params.actor_w2.rows(), params.actor_w2.cols());
        g.actor_b2.setZero(params.actor_b2.size());
        g.critic_w1.setZero(params.critic_w1.rows(), params.critic_w1.cols());
        g.critic_b1.setZero(params.critic_b1.size());
        g.critic_w2.setZero(params.critic_w2.rows(), params.critic_w2.cols());
        g.critic_b2.setZero(params.critic_b2.size());
        return g;
    }
};

struct LossDiagnostics {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_ratio = 0.0;
    double mean_entropy = 0.0;
    double first_minibatch_mean_ratio = 0.0;  // ratios at epoch 0, minibatch 0
    int minibatches = 0;
};

// One minibatch: parallel views into the update batch.
struct MinibatchView {
    std::span<const Transition* const> transitions;
    std::span<const double> advantages;  // already standardized
    std::span<const double> returns;
};

struct MinibatchStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_ratio = 0.0;
    double mean_entropy = 0.0;
};

// Clipped-surrogate loss over one minibatch, averaged over its transitions:
//   -mean(min(r*A, clip(r, 1-eps, 1+eps)*A))
//   + value_loss_weight * mean((v - return)^2)
//   - entropy_bonus_weight * mean(entropy(actor))
// where r = exp(log pi_mix(a|s) - behavior_log_prob) and pi_mix re-mixes the
// current actor output with the cached advisor distribution and coefficient.
// Advantages are treated as constants. Returns the loss and writes the
// analytic gradient of every parameter.
inline double ppo_loss_and_grad(const NetworkParams& params, const MinibatchView& minibatch,
                                const PpoConfig& config, Gradients& grads,
                                MinibatchStats* stats_out = nullptr) {
    const std::size_t count = minibatch.transitions.size();
    if (count == 0) throw std::invalid_argument("empty minibatch");
    if (count != minibatch.advantages.size() || count != minibatch.returns.size()) {
        throw std::invalid_argument("minibatch/advantage/return size mismatch");
    }
    grads = Gradients::zeros_like(params);

    const double n = static_cast<double>(count);
    const double eps = config.clip_epsilon;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy_sum = 0.0;
    double ratio_sum = 0.0;

    for (std::size_t i = 0; i < count; ++i) {
        const Transition& t = *minibatch.transitions[i];
        const double adv = minibatch.advantages[i];

        // ---- actor path ----
        const detail::ActorForward actor = detail::actor_forward(params, t.observation);
        const ActionDistribution& p = actor.probs;
        const int a = static_cast<int>(t.action);

        const double coeff = t.advisor_dist ? t.coeff_agent : 1.0;
        const double mix_a =
            t.advisor_dist ? (1.0 - coeff) * (*t.advisor_dist)[a] + coeff * p[a] : p[a];
        const double ratio = std::exp(std::log(mix_a) - t.behavior_log_prob);
        ratio_sum += ratio;

        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
        policy_loss -= std::min(unclipped, clipped) / n;

        // d(-min)/d(ratio): -A while the unclipped branch is active, else 0
        const bool unclipped_active = (adv >= 0.0) ? ratio <= 1.0 + eps : ratio >= 1.0 - eps;
        const double dL_dratio = unclipped_active ? -adv / n : 0.0;
        // ratio = mix_a * exp(-blp)  =>  d ratio / d mix_a = ratio / mix_a
        const double dL_dpa = dL_dratio * (ratio / mix_a) * coeff;

        const double entropy = entropy_nats(p);
        entropy_sum += entropy;

        // dL/dz through softmax: the policy term touches p[a] only; the
        // entropy bonus contributes w_e * p_k (log p_k + H) per logit.
        Eigen::VectorXd dz(kNumActions);
        for (int k = 0; k < kNumActions; ++k) {
            const double delta = (k == a) ? 1.0 : 0.0;
            dz(k) = dL_dpa * p[a] * (delta - p[k]);
            dz(k) += config.entropy_bonus_weight / n * p[k] * (std::log(p[k]) + entropy);
        }

        grads.actor_w2.noalias() += dz * actor.hidden.transpose();
        grads.actor_b2 += dz;
        Eigen::VectorXd dh = params.actor_w2.transpose() * dz;
        dh.array() *= 1.0 - actor.hidden.array().square();
        detail::input_layer_grad(grads.actor_w1, dh, t.observation);
        grads.actor_b1 += dh;

        // ---- critic path ----
        const detail::CriticForward critic = detail::critic_forward(params, t.observation);
        const double verr = critic.value - minibatch.returns[i];
        value_loss += verr * verr / n;
        const double dv = 2.0 * config.value_loss_weight * verr / n;

        grads.critic_w2.noalias() += dv * critic.hidden.transpose();
        grads.critic_b2(0) += dv;
        Eigen::VectorXd dch = params.critic_w2.transpose() * dv;
        dch.array() *= 1.0 - critic.hidden.array().square();
        detail::input_layer_grad(grads.critic_w1, dch, t.observation);
        grads.critic_b1 += dch;
    }

    const double loss = policy_loss + config.value_loss_weight * value_loss -
                        config.entropy_bonus_weight * entropy_sum / n;
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite ppo loss");
    if (stats_out) {
        stats_out->policy_loss = policy_loss;
        stats_out->value_loss = value_loss;
        stats_out->mean_ratio = ratio_sum / n;
        stats_out->mean_entropy = entropy_sum / n;
    }
    return loss;
}

// Adam moments, one slot per parameter tensor, shared step counter.
struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;
    bool initialized = false;

    void ensure(const NetworkParams& params) {
        if (!initialized) {
            m = Gradients::zeros_like(params);
            v = Gradients::zeros_like(params);
            step = 0;
            initialized = true;
        }
    }
};

namespace detail {

template <typename T>
void adam_apply(T& param, T& m, T& v, const T& g, const PpoConfig& c, double bias1, double bias2) {
    m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * g;
    v = (c.adam_beta2 * v.array() + (1.0 - c.adam_beta2) * g.array().square()).matrix();
    param.array() -=
        c.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.adam_eps);
}

}  // namespace detail

inline void adam_step(NetworkParams& params, AdamState& adam, const Gradients& grads,
                      const PpoConfig& config) {
    adam.ensure(params);
    adam.step += 1;
    const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.step));
    const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.step));
    detail::adam_apply(params.actor_w1, adam.m.actor_w1, adam.v.actor_w1, grads.actor_w1, config, bias1, bias2);
    detail::adam_apply(params.actor_b1, adam.m.actor_b1, adam.v.actor_b1, grads.actor_b1, config, bias1, bias2);
    detail::adam_apply(params.actor_w2, adam.m.actor_w2, adam.v.actor_w2, grads.actor_w2, config, bias1, bias2);
    detail::adam_apply(params.actor_b2, adam.m.actor_b2, adam.v.actor_b2, grads.actor_b2, config, bias1, bias2);
    detail::adam_apply(params.critic_w1, adam.m.critic_w1, adam.v.critic_w1, grads.critic_w1, config, bias1, bias2);
    detail::adam_apply(params.critic_b1, adam.m.critic_b1, adam.v.critic_b1, grads.critic_b1, config, bias1, bias2);
    detail::adam_apply(params.critic_w2, adam.m.critic_w2, adam.v.critic_w2, grads.critic_w2, config, bias1, bias2);
    detail::adam_apply(params.critic_b2, adam.m.critic_b2, adam.v.critic_b2, grads.critic_b2, config, bias1, bias2);
}

// One PPO update over a full episode batch: advantages standardized across
// the batch (mean 0, std 1, std floored at 1e-8), then epochs_per_update
// epochs of freshly shuffled minibatches, one Adam step each. Deterministic
// given (params, adam, batch, shuffle_rng state).
inline LossDiagnostics ppo_update(NetworkParams& params, AdamState& adam,
                                  std::span<const Transition> batch,
                                  std::span<const StepTargets> targets, const PpoConfig& config,
                                  Rng& shuffle_rng) {
    config.validate();
    if (batch.empty()) throw std::invalid_argument("empty update batch");
    if (batch.size() != targets.size()) throw std::invalid_argument("batch/target size mismatch");
    adam.ensure(params);

    // standardize advantages over the whole update batch
    std::vector<double> advantages(batch.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) mean += targets[i].advantage;
    mean /= static_cast<double>(targets.size());
    double var = 0.0;
    for (const StepTargets& t : targets) var += (t.advantage - mean) * (t.advantage - mean);
    const double stddev = std::max(std::sqrt(var / static_cast<double>(targets.size())), 1e-8);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        advantages[i] = (targets[i].advantage - mean) / stddev;
    }

    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0u);

    LossDiagnostics diag;
    Gradients grads;
    std::vector<const Transition*> mb;
    std::vector<double> mb_adv, mb_ret;
    double policy_sum = 0.0, value_sum = 0.0, ratio_sum = 0.0, entropy_sum = 0.0;

    for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.minibatch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.minibatch_size));
            mb.clear();
            mb_adv.clear();
            mb_ret.clear();
            for (std::size_t i = start; i < end; ++i) {
                mb.push_back(&batch[order[i]]);
                mb_adv.push_back(advantages[order[i]]);
                mb_ret.push_back(targets[order[i]].ret);
            }

            MinibatchStats stats;
            ppo_loss_and_grad(params, {mb, mb_adv, mb_ret}, config, grads, &stats);

            if (diag.minibatches == 0) diag.first_minibatch_mean_ratio = stats.mean_ratio;
            policy_sum += stats.policy_loss;
            value_sum += stats.value_loss;
            ratio_sum += stats.mean_ratio;
            entropy_sum += stats.mean_entropy;
            diag.minibatches += 1;

            adam_step(params, adam, grads, config);
        }
    }

    const double nb = static_cast<double>(diag.minibatches);
    diag.policy_loss = policy_sum / nb;
    diag.value_loss = value_sum / nb;
    diag.mean_ratio = ratio_sum / nb;
    diag.mean_entropy = entropy_sum / nb;
    return diag;
}

// ---- checkpointing ----

inline std::uint64_t ppo_config_hash(const PpoConfig& c, int observation_length) {
    std::string text;
    text += std::to_string(c.discount) + "|" + std::to_string(c.clip_epsilon) + "|" +
            std::to_string(c.learning_rate) + "|" + std::to_string(c.minibatch_size) + "|" +
            std::to_string(c.epochs_per_update) + "|" + std::to_string(c.hidden_width) + "|" +
            std::to_string(c.value_loss_weight) + "|" + std::to_string(c.entropy_bonus_weight) +
            "|" + std::to_string(observation_length);
    return fnv1a(std::span<const char>(text.data(), text.size()));
}

namespace detail {

inline constexpr std::uint32_t kCheckpointMagic = 0x43414c31u;  // "CAL1"
inline constexpr std::uint32_t kCheckpointVersion = 1u;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(value));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return value;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    write_pod(out, static_cast<std::uint64_t>(m.rows()));
    write_pod(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return m;
}

inline void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    write_pod(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

inline Eigen::VectorXd read_vector(std::istream& in) {
    const auto size = read_pod<std::uint64_t>(in);
    Eigen::VectorXd v(static_cast<Eigen::Index>(size));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return v;
}

}  // namespace detail

// Versioned binary dump of the parameters plus a hash of the config that
// produced them; loading verifies both so a resumed evaluation is
// bit-identical or fails loudly.
inline void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                            const PpoConfig& config) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + tmp.string());
        detail::write_pod(out, detail::kCheckpointMagic);
        detail::write_pod(out, detail::kCheckpointVersion);
        detail::write_pod(out, ppo_config_hash(config, params.observation_length()));
        detail::write_matrix(out, params.actor_w1);
        detail::write_vector(out, params.actor_b1);
        detail::write_matrix(out, params.actor_w2);
        detail::write_vector(out, params.actor_b2);
        detail::write_matrix(out, params.critic_w1);
        detail::write_vector(out, params.critic_b1);
        detail::write_matrix(out, params.critic_w2);
        detail::write_vector(out, params.critic_b2);
        if (!out) throw std::runtime_error("checkpoint write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline NetworkParams load_checkpoint(const std::filesystem::path& path, const PpoConfig& config,
                                     int observation_length) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    if (detail::read_pod<std::uint32_t>(in) != detail::kCheckpointMagic) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    if (detail::read_pod<std::uint32_t>(in) != detail::kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version: " + path.string());
    }
    if (detail::read_pod<std::uint64_t>(in) != ppo_config_hash(config, observation_length)) {
        throw std::runtime_error("checkpoint config hash mismatch: " + path.string());
    }
    NetworkParams params;
    params.actor_w1 = detail::read_matrix(in);
    params.actor_b1 = detail::read_vector(in);
    params.actor_w2 = detail::read_matrix(in);
    params.actor_b2 = detail::read_vector(in);
    params.critic_w1 = detail::read_matrix(in);
    params.critic_b1 = detail::read_vector(in);
    params.critic_w2 = detail::read_matrix(in);
    params.critic_b2 = detail::read_vector(in);
    return params;
}

}  // namespace calirl
