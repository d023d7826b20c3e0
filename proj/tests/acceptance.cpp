// Acceptance suite: runs the desk-scale experiment sweep once and checks every
// release criterion against it, plus the self-contained numeric criteria.
// Prints one pass/fail line per criterion; the exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "calirl/experiment.hpp"
#include "fd_check.hpp"
#include "support.hpp"

using namespace calirl;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& description, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion,
                description.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) failures += 1;
}

std::string fmt(double v) { return fmt_double(v); }

ExperimentConfig desk_config() {
    ExperimentConfig config;
    config.grid = test_support::make_config(3, 3);
    config.episodes = 1500;
    config.passes = 10;
    config.advisor.accuracy = 0.93;
    config.seed = 1;
    return config;
}

struct DeskResults {
    SuiteResult suite;
    double wall_seconds = 0.0;

    const SuiteRow& row(Condition c) const {
        for (const SuiteRow& r : suite.rows) {
            if (r.condition == c) return r;
        }
        throw std::logic_error("missing suite row");
    }
    std::vector<const RunResult*> runs_of(Condition c) const {
        std::vector<const RunResult*> out;
        for (const RunResult& r : suite.runs) {
            if (r.condition == c) out.push_back(&r);
        }
        return out;
    }
};

DeskResults run_desk_suite() {
    std::printf("running the desk-scale suite (4 conditions x 3 seeds x 1500 episodes)...\n");
    std::fflush(stdout);
    const auto start = std::chrono::steady_clock::now();
    DeskResults desk;
    ExperimentConfig base = desk_config();
    base.out_dir = test_support::scratch_dir("acceptance_desk").string();
    const std::vector<Condition> conditions = all_conditions();
    desk.suite = run_suite(base, conditions, 3, base.out_dir);
    desk.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const SuiteRow& row : desk.suite.rows) {
        std::printf("  %s: auc=%s ece=%s/%s bs=%s/%s disc=%s/%s acc=%s (%.0fs elapsed)\n",
                    condition_name(row.condition), fmt(row.auc_mean).c_str(),
                    row.ece_entropy ? fmt(*row.ece_entropy).c_str() : "-",
                    row.ece_maxprob ? fmt(*row.ece_maxprob).c_str() : "-",
                    row.bs_entropy ? fmt(*row.bs_entropy).c_str() : "-",
                    row.bs_maxprob ? fmt(*row.bs_maxprob).c_str() : "-",
                    row.disc_entropy ? fmt(*row.disc_entropy).c_str() : "-",
                    row.disc_maxprob ? fmt(*row.disc_maxprob).c_str() : "-",
                    row.advice_accuracy ? fmt(*row.advice_accuracy).c_str() : "-",
                    desk.wall_seconds);
    }
    return desk;
}

// ---- criteria 1-4: desk-suite comparisons ----

void criterion_1(const DeskResults& desk) {
    const double cal = desk.row(Condition::CalibratedEntropy).auc_mean;
    const double unguided = desk.row(Condition::Unguided).auc_mean;
    const bool failures_clean = desk.suite.failures.empty();
    const bool gap = cal >= 2.0 * unguided && cal > 0.0;
    const bool runtime = desk.wall_seconds <= 900.0;
    report(1, gap && runtime && failures_clean, "guided AUC at least doubles the unguided AUC",
           "calibrated-entropy " + fmt(cal) + " vs unguided " + fmt(unguided) + ", suite " +
               fmt(desk.wall_seconds) + "s");
}

void criterion_2(const DeskResults& desk) {
    const double cal = desk.row(Condition::CalibratedEntropy).auc_mean;
    const double decay = desk.row(Condition::CalibratedLinearDecay).auc_mean;
    report(2, cal > decay, "entropy shaping beats the linear-decay baseline on AUC",
           fmt(cal) + " vs " + fmt(decay));
}

void criterion_3(const DeskResults& desk) {
    const SuiteRow& cal = desk.row(Condition::CalibratedEntropy);
    const SuiteRow& det = desk.row(Condition::UncalibratedGuided);
    const bool have = cal.ece_entropy && cal.ece_maxprob && cal.bs_entropy && cal.bs_maxprob &&
                      det.ece_entropy && det.ece_maxprob && det.bs_entropy && det.bs_maxprob;
    bool pass = have;
    std::string detail;
    if (have) {
        const bool a = *cal.ece_entropy <= *det.ece_entropy;
        const bool b_cal = *cal.ece_entropy < *cal.ece_maxprob && *cal.bs_entropy < *cal.bs_maxprob;
        const bool b_det = *det.ece_entropy < *det.ece_maxprob && *det.bs_entropy < *det.bs_maxprob;
        pass = a && b_cal && b_det;
        detail = "ECE ent cal/det " + fmt(*cal.ece_entropy) + "/" + fmt(*det.ece_entropy) +
                 ", ECE max cal/det " + fmt(*cal.ece_maxprob) + "/" + fmt(*det.ece_maxprob) +
                 ", BS ent/max cal " + fmt(*cal.bs_entropy) + "/" + fmt(*cal.bs_maxprob) +
                 ", det " + fmt(*det.bs_entropy) + "/" + fmt(*det.bs_maxprob);
        // published reference magnitudes, informational only
        detail += std::abs(*cal.ece_entropy - 0.15) <= 0.15
                      ? "; cal ECE within 0.15 of the 0.15 reference"
                      : "; cal ECE outside 0.15 of the 0.15 reference";
    } else {
        detail = "missing calibration metrics";
    }
    report(3, pass, "calibration orderings: ensemble <= deterministic ECE, entropy beats max-prob",
           detail);
}

void criterion_4(const DeskResults& desk) {
    const SuiteRow& cal = desk.row(Condition::CalibratedEntropy);
    const SuiteRow& det = desk.row(Condition::UncalibratedGuided);
    long wrong_records = 0;
    for (const RunResult* run : desk.runs_of(Condition::CalibratedEntropy)) {
        for (const CalibrationRecord& r : records_entropy_flavor(run->advice)) {
            wrong_records += r.outcome() == 0 ? 1 : 0;
        }
    }
    const bool have = cal.disc_entropy && det.disc_entropy;
    const bool pass = have && wrong_records >= 500 && *cal.disc_entropy > *det.disc_entropy &&
                      *cal.disc_entropy >= 0.6;
    report(4, pass, "ensemble discrimination beats deterministic and reaches 0.6",
           (have ? fmt(*cal.disc_entropy) + " vs " + fmt(*det.disc_entropy) : "missing") + ", " +
               std::to_string(wrong_records) + " incorrect records");
}

// ---- criterion 5: metric unit oracles ----

void criterion_5() {
    bool pass = true;
    std::string detail = "all hand values matched";
    const auto expect = [&](bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = "first failure: " + what;
        }
    };
    const auto rec = [](double f, int o) {
        return make_record(f, 1.0 - f, o ? Action::Forward : Action::TurnLeft, Action::Forward);
    };

    const std::vector<CalibrationRecord> perfect(25, rec(1.0, 1));
    expect(std::abs(ece(perfect, 10) - 0.0) <= 1e-12, "ece of perfect records");
    const std::vector<CalibrationRecord> half{rec(0.9, 0), rec(0.9, 1)};
    expect(std::abs(ece(half, 10) - 0.4) <= 1e-12, "ece single-bin hand case");

    expect(std::abs(brier(std::vector<CalibrationRecord>{rec(1.0, 1)}) - 0.0) <= 1e-12, "brier 0");
    expect(std::abs(brier(std::vector<CalibrationRecord>{rec(1.0, 0)}) - 1.0) <= 1e-12, "brier 1");
    expect(std::abs(brier(std::vector<CalibrationRecord>{rec(0.8, 1), rec(0.4, 0)}) - 0.10) <=
               1e-12,
           "brier 0.10 hand case");

    const std::vector<CalibrationRecord> anecdotes{
        make_record(0.33, 0.67, Action::TurnRight, Action::Forward),
        make_record(0.77, 0.23, Action::TurnLeft, Action::Forward)};
    const auto d = discrimination(anecdotes, 0.5);
    expect(d.has_value() && std::abs(*d - 0.5) <= 1e-12, "discrimination 0.5 hand case");
    const std::vector<CalibrationRecord> flagged(4,
                                                 make_record(0.1, 0.9, Action::TurnLeft,
                                                             Action::Forward));
    expect(std::abs(*discrimination(flagged, 0.5) - 1.0) <= 1e-12, "discrimination all-flagged");
    expect(!discrimination(std::vector<CalibrationRecord>(3, rec(0.9, 1)), 0.5).has_value(),
           "discrimination of all-correct records is absent");

    const std::vector<double> constant(300, 0.5);
    for (double v : moving_average(constant, 250)) {
        expect(std::abs(v - 0.5) <= 1e-12, "moving average of a constant");
    }
    std::vector<double> spike(12, 0.0);
    spike.back() = 1.0;
    expect(std::abs(moving_average(spike, 2).back() - 0.5) <= 1e-12, "moving average window 2");
    std::vector<double> ramp(1000);
    for (int i = 0; i < 1000; ++i) ramp[static_cast<std::size_t>(i)] = i / 999.0;
    const auto smoothed = moving_average(ramp, 250);
    double tail = 0.0;
    for (int i = 750; i <= 999; ++i) tail += ramp[static_cast<std::size_t>(i)];
    expect(std::abs(smoothed[999] - tail / 250.0) <= 1e-12, "moving average of a ramp");

    expect(std::abs(auc(std::vector<double>{1.0, 1.0, 1.0}) - 3.0) <= 1e-12, "auc of ones");
    expect(std::abs(auc(std::vector<double>(50, 0.0))) <= 1e-12, "auc of zeros");
    const std::vector<double> plateau(3040, 1.42);
    expect(std::abs(auc(moving_average(plateau, 250)) - 4316.8) <= 1e-8, "auc plateau magnitude");

    Rng rng(424242);
    std::vector<CalibrationRecord> synthetic;
    synthetic.reserve(100000);
    for (int i = 0; i < 100000; ++i) {
        const double f = rng.uniform();
        synthetic.push_back(rec(f, rng.uniform() < f ? 1 : 0));
    }
    const double synthetic_ece = ece(synthetic, 10);
    expect(synthetic_ece < 0.01, "ece of perfectly calibrated synthetic records");

    report(5, pass, "metric implementations match their hand-computed oracles",
           pass ? "all hand values matched; synthetic ece " + fmt(synthetic_ece) : detail);
}

// ---- criterion 6: mixture identities ----

void criterion_6() {
    bool endpoints = true;
    bool interior = true;
    bool normalized = true;
    Rng rng(6666);
    const auto random_dist = [&] {
        ActionDistribution p{};
        double sum = 0.0;
        for (double& v : p) {
            v = rng.uniform() + 1e-9;
            sum += v;
        }
        for (double& v : p) v /= sum;
        return p;
    };

    for (int i = 0; i < 10000; ++i) {
        const ActionDistribution llm = random_dist();
        const ActionDistribution agent = random_dist();
        if (i < 200) {
            const MixedPolicy at_zero = mix_entropy(llm, agent, 0.0);
            const MixedPolicy at_one = mix_entropy(llm, agent, 1.0);
            for (int a = 0; a < kNumActions; ++a) {
                endpoints = endpoints && at_zero.dist[a] == llm[a] && at_one.dist[a] == agent[a];
            }
        }
        const MixedPolicy mixed = mix_entropy(llm, agent, rng.uniform());
        double sum = 0.0;
        for (double v : mixed.dist) {
            normalized = normalized && v >= 0.0;
            sum += v;
        }
        normalized = normalized && std::abs(sum - 1.0) <= 1e-9;
    }

    const MixedPolicy hand = mix_entropy({1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, 0.25);
    interior = std::abs(hand.dist[0] - 0.75) <= 1e-12 && std::abs(hand.dist[1] - 0.25) <= 1e-12 &&
               hand.dist[2] == 0.0 && hand.dist[3] == 0.0 && hand.dist[4] == 0.0;

    report(6, endpoints && interior && normalized,
           "entropy mixture endpoint identities, interior hand case, and normalization",
           std::string("endpoints ") + (endpoints ? "exact" : "broken") + ", interior " +
               (interior ? "1e-12" : "broken") + ", 10000 random mixtures " +
               (normalized ? "normalized" : "broken"));
}

// ---- criterion 7: oracle correctness ----

void criterion_7() {
    const GridConfig config = test_support::make_config(3, 3);
    long states_checked = 0;
    bool costs_match = true;
    for (std::uint64_t seed = 201; seed <= 205 && costs_match; ++seed) {
        Rng layout(seed);
        const GridState start = new_env(config, layout);
        for (const GridState& state : test_support::enumerate_reachable(start, config)) {
            states_checked += 1;
            if (cost_to_go(state, config) != test_support::brute_force_cost(state, config)) {
                costs_match = false;
                break;
            }
        }
    }

    Rng layout_rng(777);
    int completed = 0;
    for (int episode = 0; episode < 1000; ++episode) {
        GridState state = new_env(config, layout_rng);
        while (true) {
            auto [next, out] = step(state, config, optimal_action(state, config));
            if (out.done) {
                completed += out.mission_completed == kMissionReachGoal ? 1 : 0;
                break;
            }
            state = next;
        }
    }

    report(7, costs_match && completed == 1000,
           "oracle cost-to-go matches brute force on full 3x3 enumeration; greedy solves 1000 layouts",
           std::to_string(states_checked) + " states checked, " + std::to_string(completed) +
               "/1000 rollouts completed");
}

// ---- criterion 8: gradient check ----

void criterion_8() {
    PpoConfig config;
    config.hidden_width = 8;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        worst = std::max(worst, test_support::ppo_gradient_check(config, 12, seed, 4));
    }
    report(8, worst < 1e-4, "analytic PPO gradients match central finite differences",
           "worst relative error " + fmt(worst) + " over 50 batches");
}

// ---- criterion 9: byte-identical reruns ----

void criterion_9() {
    bool pass = true;
    std::string detail;
    for (Condition condition : {Condition::CalibratedEntropy, Condition::Unguided}) {
        ExperimentConfig config = desk_config();
        config.condition = condition;
        config.episodes = 40;
        config.seed = 31;

        const auto dir_a = test_support::scratch_dir("acceptance_det_a");
        const auto dir_b = test_support::scratch_dir("acceptance_det_b");
        write_run_files(run_condition(config), dir_a);
        write_run_files(run_condition(config), dir_b);

        const bool curves_equal = read_file(curve_path(dir_a, condition, config.seed)) ==
                                  read_file(curve_path(dir_b, condition, config.seed));
        bool advice_equal = true;
        if (is_guided(condition)) {
            advice_equal = read_file(advice_path(dir_a, condition, config.seed)) ==
                           read_file(advice_path(dir_b, condition, config.seed));
        }
        if (!(curves_equal && advice_equal)) {
            pass = false;
            detail += std::string(condition_name(condition)) + " differs; ";
        }
    }
    report(9, pass, "identical (config, seed) reruns emit byte-identical CSVs",
           pass ? "calibrated-entropy and unguided verified" : detail);
}

// ---- criterion 10: advisor accuracy calibration ----

void criterion_10() {
    const GridConfig config = test_support::make_config(3, 3);
    AdvisorProfile profile;
    profile.accuracy = 0.90;
    profile.error_seed = 909090;
    Rng rng(1010);
    int agree = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const GridState state = test_support::random_state(config, rng);
        const ActionDistribution dist = base_distribution(state, config, profile);
        agree += argmax_action(dist) == static_cast<int>(optimal_action(state, config)) ? 1 : 0;
    }
    const double rate = static_cast<double>(agree) / n;
    report(10, rate >= 0.88 && rate <= 0.92,
           "base advice agrees with the oracle at the configured 0.90 accuracy",
           "empirical agreement " + fmt(rate) + " over 10000 states");
}

}  // namespace

int main() {
    const DeskResults desk = run_desk_suite();
    criterion_1(desk);
    criterion_2(desk);
    criterion_3(desk);
    criterion_4(desk);
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();

    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures;
}
