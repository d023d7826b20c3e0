#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "calirl/advisor.hpp"
#include "calirl/gridworld.hpp"
#include "calirl/io.hpp"
#include "calirl/metrics.hpp"
#include "calirl/oracle.hpp"
#include "calirl/ppo.hpp"
#include "calirl/shaping.hpp"

namespace calirl {

enum class Condition {
    Unguided,
    UncalibratedGuided,
    CalibratedEntropy,
    CalibratedLinearDecay,
};

inline const char* condition_name(Condition c) {
    switch (c) {
        case Condition::Unguided: return "unguided";
        case Condition::UncalibratedGuided: return "uncalibrated-guided";
        case Condition::CalibratedEntropy: return "calibrated-entropy";
        default: return "calibrated-linear-decay";
    }
}

inline Condition condition_from_name(const std::string& name) {
    if (name == "unguided") return Condition::Unguided;
    if (name == "uncalibrated-guided") return Condition::UncalibratedGuided;
    if (name == "calibrated-entropy") return Condition::CalibratedEntropy;
    if (name == "calibrated-linear-decay") return Condition::CalibratedLinearDecay;
    throw std::invalid_argument("unknown condition: " + name);
}

inline bool is_guided(Condition c) { return c != Condition::Unguided; }
inline bool is_calibrated(Condition c) {
    return c == Condition::CalibratedEntropy || c == Condition::CalibratedLinearDecay;
}

struct ExperimentConfig {
    Condition condition = Condition::CalibratedEntropy;
    int episodes = 3040;
    GridConfig grid;
    AdvisorProfile advisor;
    int passes = 10;
    PpoConfig ppo;
    std::uint64_t seed = 1;
    int window = 250;
    bool fixed_layout = false;
    std::string out_dir = "runs";

    void validate() const {
        grid.validate();
        ppo.validate();
        advisor.validate();
        if (episodes < 1) throw std::invalid_argument("episodes must be positive");
        if (window < 1) throw std::invalid_argument("window must be positive");
        if (is_calibrated(condition) && passes < 2) {
            throw std::invalid_argument("calibrated conditions require at least 2 passes");
        }
    }
};

// One advised step as logged to the advice CSV.
struct AdviceRow {
    int episode = 0;
    int step = 0;
    std::uint64_t prompt_hash = 0;
    int predicted_action = 0;
    int oracle_action = 0;
    double entropy_norm = 0.0;
    double one_minus_max = 0.0;
    int passes = 0;
};

// First sighting of each distinct prompt, for inspection; advice rows refer
// back by hash.
struct PromptRow {
    std::uint64_t hash = 0;
    int episode = 0;
    int step = 0;
    std::string text;
};

struct RunSummary {
    double auc = 0.0;
    std::optional<double> ece_entropy, ece_maxprob;
    std::optional<double> bs_entropy, bs_maxprob;
    std::optional<double> disc_entropy, disc_maxprob;
    std::optional<double> advice_accuracy;
};

struct RunResult {
    Condition condition = Condition::Unguided;
    std::uint64_t seed = 0;
    std::vector<double> rewards;         // one return per episode
    std::vector<AdviceRow> advice;       // empty for unguided
    std::vector<PromptRow> prompts;      // deduplicated prompt texts
    RunSummary summary;
    long advisor_queries = 0;
    double duration_seconds = 0.0;       // wall clock; excluded from emitted CSVs
    NetworkParams final_params;
    ExperimentConfig config;
};

// confidence = 1 - mean entropy, uncertainty = mean entropy
inline std::vector<CalibrationRecord> records_entropy_flavor(std::span<const AdviceRow> advice) {
    std::vector<CalibrationRecord> records;
    records.reserve(advice.size());
    for (const AdviceRow& row : advice) {
        records.push_back(make_record(1.0 - row.entropy_norm, row.entropy_norm,
                                      static_cast<Action>(row.predicted_action),
                                      static_cast<Action>(row.oracle_action)));
    }
    return records;
}

// confidence = max probability, uncertainty = 1 - max probability
inline std::vector<CalibrationRecord> records_maxprob_flavor(std::span<const AdviceRow> advice) {
    std::vector<CalibrationRecord> records;
    records.reserve(advice.size());
    for (const AdviceRow& row : advice) {
        records.push_back(make_record(1.0 - row.one_minus_max, row.one_minus_max,
                                      static_cast<Action>(row.predicted_action),
                                      static_cast<Action>(row.oracle_action)));
    }
    return records;
}

inline RunSummary summarize_run(std::span<const double> rewards, std::span<const AdviceRow> advice,
                                int window) {
    RunSummary summary;
    summary.auc = auc(moving_average(rewards, window));
    if (!advice.empty()) {
        const std::vector<CalibrationRecord> ent = records_entropy_flavor(advice);
        const std::vector<CalibrationRecord> maxp = records_maxprob_flavor(advice);
        summary.ece_entropy = ece(ent);
        summary.ece_maxprob = ece(maxp);
        summary.bs_entropy = brier(ent);
        summary.bs_maxprob = brier(maxp);
        summary.disc_entropy = discrimination(ent);
        summary.disc_maxprob = discrimination(maxp);
        double correct = 0.0;
        for (const CalibrationRecord& r : ent) correct += r.outcome();
        summary.advice_accuracy = correct / static_cast<double>(ent.size());
    }
    return summary;
}

namespace detail {

// Independent sub-streams derived from the run seed. The advisor's error seed
// depends on the seed only (not the condition) so every condition of a repeat
// faces the same frozen model.
struct RunStreams {
    Rng layout, passes, actions, shuffle, init;

    explicit RunStreams(std::uint64_t seed)
        : layout(hash_mix(seed, 0xA1)),
          passes(hash_mix(seed, 0xA2)),
          actions(hash_mix(seed, 0xA3)),
          shuffle(hash_mix(seed, 0xA4)),
          init(hash_mix(seed, 0xA5)) {}
};

inline std::uint64_t derive_error_seed(std::uint64_t seed) { return hash_mix(seed, 0xE1); }

}  // namespace detail

// Runs one condition end-to-end: per episode, roll out with the
// condition-specific behavior mixture, then one PPO update on that episode's
// transitions. Fully reproducible from (config, seed).
inline RunResult run_condition(const ExperimentConfig& config_in) {
    ExperimentConfig config = config_in;
    config.validate();
    if (config.advisor.error_seed == 0) {
        config.advisor.error_seed = detail::derive_error_seed(config.seed);
    }

    const auto start_time = std::chrono::steady_clock::now();
    detail::RunStreams streams(config.seed);

    const int obs_len = observation_length(config.grid);
    NetworkParams params = init_params(obs_len, config.ppo, streams.init);
    AdamState adam;

    RunResult result;
    result.condition = config.condition;
    result.seed = config.seed;
    result.config = config;
    result.rewards.reserve(static_cast<std::size_t>(config.episodes));

    std::optional<GridState> frozen_layout;
    std::vector<Transition> transitions;
    std::unordered_set<std::uint64_t> seen_prompts;

    for (int episode = 0; episode < config.episodes; ++episode) {
        int step_index = 0;
        try {
            GridState state;
            if (config.fixed_layout) {
                if (!frozen_layout) frozen_layout = new_env(config.grid, streams.layout);
                state = *frozen_layout;
            } else {
                state = new_env(config.grid, streams.layout);
            }

            transitions.clear();
            double episode_return = 0.0;
            double bootstrap = 0.0;

            while (true) {
                std::vector<double> obs = encode_observation(state, config.grid);
                const ActionDistribution p_agent = forward_actor(params, obs);

                MixedPolicy policy;
                std::optional<CalibratedAdvice> advice;
                switch (config.condition) {
                    case Condition::Unguided:
                        policy = agent_only(p_agent);
                        break;
                    case Condition::UncalibratedGuided:
                        advice = advise_deterministic(state, config.grid, config.advisor);
                        policy = mix_entropy(advice->mean_dist, p_agent, advice->entropy_norm);
                        break;
                    case Condition::CalibratedEntropy:
                        advice = advise_mc(state, config.grid, config.advisor, config.passes,
                                           streams.passes);
                        policy = mix_entropy(advice->mean_dist, p_agent, advice->entropy_norm);
                        break;
                    case Condition::CalibratedLinearDecay: {
                        advice = advise_mc(state, config.grid, config.advisor, config.passes,
                                           streams.passes);
                        const double lambda = linear_decay_coeff(episode, config.episodes);
                        policy = mix_fixed(advice->mean_dist, p_agent, lambda);
                        break;
                    }
                }

                if (advice) {
                    result.advisor_queries += 1;
                    const std::string prompt = render_prompt(state, config.grid);
                    const std::uint64_t prompt_hash =
                        fnv1a(std::span<const char>(prompt.data(), prompt.size()));
                    if (seen_prompts.insert(prompt_hash).second) {
                        result.prompts.push_back({prompt_hash, episode, step_index, prompt});
                    }
                    result.advice.push_back(
                        {episode, step_index, prompt_hash,
                         static_cast<int>(advice->predicted_action),
                         static_cast<int>(optimal_action(state, config.grid)),
                         advice->entropy_norm, advice->one_minus_max, advice->passes_used});
                }

                const auto [action, log_prob] = sample_action(policy, streams.actions);
                auto [next_state, outcome] = step(state, config.grid, action);

                Transition transition;
                transition.observation = std::move(obs);
                transition.action = action;
                transition.behavior_log_prob = log_prob;
                transition.reward = outcome.reward;
                transition.done = outcome.done;
                if (advice) {
                    transition.advisor_dist = advice->mean_dist;
                    transition.coeff_agent = policy.coeff_agent;
                }
                transitions.push_back(std::move(transition));

                episode_return += outcome.reward;
                step_index += 1;

                if (outcome.done) {
                    if (outcome.truncated && outcome.mission_completed != kMissionReachGoal) {
                        bootstrap =
                            forward_critic(params, encode_observation(next_state, config.grid));
                    }
                    break;
                }
                state = next_state;
            }

            const std::vector<StepTargets> targets = compute_returns_and_advantages(
                transitions, params, config.ppo.discount, bootstrap);
            ppo_update(params, adam, transitions, targets, config.ppo, streams.shuffle);
            result.rewards.push_back(episode_return);
        } catch (const std::exception& e) {
            throw std::runtime_error("episode " + std::to_string(episode) + ", step " +
                                     std::to_string(step_index) + ": " + e.what());
        }
    }

    result.summary = summarize_run(result.rewards, result.advice, config.window);
    result.final_params = std::move(params);
    result.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return result;
}

// ---- file emission ----

inline std::string curve_csv(std::span<const double> rewards, int window) {
    const std::vector<double> smoothed = moving_average(rewards, window);
    std::string out = "episode,reward,smoothed\n";
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        out += std::to_string(i) + "," + fmt_double(rewards[i]) + "," + fmt_double(smoothed[i]) +
               "\n";
    }
    return out;
}

inline std::string advice_csv(std::span<const AdviceRow> advice) {
    std::string out =
        "episode,step,prompt_hash,predicted_action,oracle_action,entropy_norm,one_minus_max,"
        "passes\n";
    for (const AdviceRow& row : advice) {
        out += std::to_string(row.episode) + "," + std::to_string(row.step) + "," +
               std::to_string(row.prompt_hash) + "," + std::to_string(row.predicted_action) + "," +
               std::to_string(row.oracle_action) + "," + fmt_double(row.entropy_norm) + "," +
               fmt_double(row.one_minus_max) + "," + std::to_string(row.passes) + "\n";
    }
    return out;
}

inline std::filesystem::path curve_path(const std::filesystem::path& dir, Condition condition,
                                        std::uint64_t seed) {
    return dir / ("curve_" + std::string(condition_name(condition)) + "_" + std::to_string(seed) +
                  ".csv");
}

inline std::filesystem::path advice_path(const std::filesystem::path& dir, Condition condition,
                                         std::uint64_t seed) {
    return dir / ("advice_" + std::string(condition_name(condition)) + "_" + std::to_string(seed) +
                  ".csv");
}

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Condition condition,
                                             std::uint64_t seed) {
    return dir / ("checkpoint_" + std::string(condition_name(condition)) + "_" +
                  std::to_string(seed));
}

inline std::filesystem::path prompts_path(const std::filesystem::path& dir, Condition condition,
                                          std::uint64_t seed) {
    return dir / ("prompts_" + std::string(condition_name(condition)) + "_" +
                  std::to_string(seed) + ".tsv");
}

// hash, first sighting, full text; prompts contain no tabs or newlines
inline std::string prompts_tsv(std::span<const PromptRow> prompts) {
    std::string out = "prompt_hash\tepisode\tstep\tprompt\n";
    for (const PromptRow& row : prompts) {
        out += std::to_string(row.hash) + "\t" + std::to_string(row.episode) + "\t" +
               std::to_string(row.step) + "\t" + row.text + "\n";
    }
    return out;
}

// Writes curve, advice, prompt, and checkpoint files for one run. Atomic per
// file; every byte is a pure function of (config, seed).
inline void write_run_files(const RunResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    atomic_write_file(curve_path(dir, result.condition, result.seed),
                      curve_csv(result.rewards, result.config.window));
    if (is_guided(result.condition)) {
        atomic_write_file(advice_path(dir, result.condition, result.seed),
                          advice_csv(result.advice));
        atomic_write_file(prompts_path(dir, result.condition, result.seed),
                          prompts_tsv(result.prompts));
    }
    save_checkpoint(checkpoint_path(dir, result.condition, result.seed), result.final_params,
                    result.config.ppo);
}

// ---- suite ----

struct SuiteRow {
    Condition condition = Condition::Unguided;
    int runs = 0;
    double auc_mean = 0.0, auc_sd = 0.0;
    std::optional<double> ece_entropy, ece_maxprob, bs_entropy, bs_maxprob;
    std::optional<double> disc_entropy, disc_maxprob, advice_accuracy;
};

struct SuiteResult {
    std::vector<SuiteRow> rows;                 // one per condition
    std::vector<RunResult> runs;                // every successful run
    std::vector<std::string> failures;          // "<condition> seed <s>: <error>"
};

namespace detail {

struct MeanAccumulator {
    double sum = 0.0;
    int n = 0;
    void add(const std::optional<double>& v) {
        if (v) {
            sum += *v;
            n += 1;
        }
    }
    std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / n;
    }
};

}  // namespace detail

inline SuiteRow aggregate_condition(Condition condition, std::span<const RunResult> runs) {
    SuiteRow row;
    row.condition = condition;
    double auc_sum = 0.0, auc_sq = 0.0;
    detail::MeanAccumulator ece_e, ece_m, bs_e, bs_m, d_e, d_m, acc;
    for (const RunResult& run : runs) {
        if (run.condition != condition) continue;
        row.runs += 1;
        auc_sum += run.summary.auc;
        auc_sq += run.summary.auc * run.summary.auc;
        ece_e.add(run.summary.ece_entropy);
        ece_m.add(run.summary.ece_maxprob);
        bs_e.add(run.summary.bs_entropy);
        bs_m.add(run.summary.bs_maxprob);
        d_e.add(run.summary.disc_entropy);
        d_m.add(run.summary.disc_maxprob);
        acc.add(run.summary.advice_accuracy);
    }
    if (row.runs > 0) {
        row.auc_mean = auc_sum / row.runs;
        const double var = auc_sq / row.runs - row.auc_mean * row.auc_mean;
        row.auc_sd = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    row.ece_entropy = ece_e.mean();
    row.ece_maxprob = ece_m.mean();
    row.bs_entropy = bs_e.mean();
    row.bs_maxprob = bs_m.mean();
    row.disc_entropy = d_e.mean();
    row.disc_maxprob = d_m.mean();
    row.advice_accuracy = acc.mean();
    return row;
}

inline std::string opt_text(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string("");
}

inline std::string summary_csv(std::span<const SuiteRow> rows) {
    std::string out =
        "condition,runs,auc_mean,auc_sd,ece_entropy,ece_maxprob,bs_entropy,bs_maxprob,"
        "disc_entropy,disc_maxprob,advice_accuracy\n";
    for (const SuiteRow& row : rows) {
        out += std::string(condition_name(row.condition)) + "," + std::to_string(row.runs) + "," +
               fmt_double(row.auc_mean) + "," + fmt_double(row.auc_sd) + "," +
               opt_text(row.ece_entropy) + "," + opt_text(row.ece_maxprob) + "," +
               opt_text(row.bs_entropy) + "," + opt_text(row.bs_maxprob) + "," +
               opt_text(row.disc_entropy) + "," + opt_text(row.disc_maxprob) + "," +
               opt_text(row.advice_accuracy) + "\n";
    }
    return out;
}

inline std::string table1_csv(std::span<const SuiteRow> rows) {
    std::string out = "method,auc\n";
    for (const SuiteRow& row : rows) {
        out += std::string(condition_name(row.condition)) + "," + fmt_double(row.auc_mean) + "\n";
    }
    return out;
}

// Calibration table rows: the uncalibrated-guided runs provide the
// single-pass (deterministic) rows, the calibrated-entropy runs the ensemble
// (sample consistency) rows, each in both confidence flavors.
inline std::string table2_csv(std::span<const SuiteRow> rows, const GridConfig& grid) {
    const std::string size_text =
        std::to_string(grid.room_width) + "*" + std::to_string(grid.room_height);
    std::string out = "method,ece,bs,discrimination\n";
    for (const SuiteRow& row : rows) {
        std::string label;
        if (row.condition == Condition::UncalibratedGuided) {
            label = "Deterministic " + size_text;
        } else if (row.condition == Condition::CalibratedEntropy) {
            label = "Sample Consistency " + size_text;
        } else {
            continue;
        }
        out += label + " by Mean Entropy," + opt_text(row.ece_entropy) + "," +
               opt_text(row.bs_entropy) + "," + opt_text(row.disc_entropy) + "\n";
        out += label + " by Max Probability," + opt_text(row.ece_maxprob) + "," +
               opt_text(row.bs_maxprob) + "," + opt_text(row.disc_maxprob) + "\n";
    }
    return out;
}

// Runs every condition for `repeats` seeds (base seed, base+1, ...). A failed
// run is recorded and the suite continues; aggregation uses the successes.
inline SuiteResult run_suite(const ExperimentConfig& base, std::span<const Condition> conditions,
                             int repeats, const std::filesystem::path& out_dir) {
    if (conditions.empty()) throw std::invalid_argument("suite needs at least one condition");
    if (repeats < 1) throw std::invalid_argument("repeats must be positive");

    SuiteResult suite;
    for (const Condition condition : conditions) {
        for (int r = 0; r < repeats; ++r) {
            ExperimentConfig config = base;
            config.condition = condition;
            config.seed = base.seed + static_cast<std::uint64_t>(r);
            try {
                RunResult result = run_condition(config);
                write_run_files(result, out_dir);
                suite.runs.push_back(std::move(result));
            } catch (const std::exception& e) {
                suite.failures.push_back(std::string(condition_name(condition)) + " seed " +
                                         std::to_string(config.seed) + ": " + e.what());
            }
        }
    }
    for (const Condition condition : conditions) {
        suite.rows.push_back(aggregate_condition(condition, suite.runs));
    }

    atomic_write_file(out_dir / "summary.csv", summary_csv(suite.rows));
    atomic_write_file(out_dir / "table1.csv", table1_csv(suite.rows));
    atomic_write_file(out_dir / "table2.csv", table2_csv(suite.rows, base.grid));
    if (!suite.failures.empty()) {
        std::string text;
        for (const std::string& f : suite.failures) text += f + "\n";
        atomic_write_file(out_dir / "failures.txt", text);
    }
    return suite;
}

inline std::vector<Condition> all_conditions() {
    return {Condition::Unguided, Condition::UncalibratedGuided, Condition::CalibratedEntropy,
            Condition::CalibratedLinearDecay};
}

}  // namespace calirl
