// Command-line front end: `run` executes one condition, `suite` sweeps every
// condition over repeated seeds, `report` re-reads emitted CSVs and prints the
// summary tables.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calirl/experiment.hpp"

namespace {

using namespace calirl;

struct CliOptions {
    std::string condition = "calibrated-entropy";
    int episodes = 3040;
    int room_width = 4;
    int room_height = 4;
    std::string room;  // "WxH" convenience form
    int max_steps = 0;
    bool fixed_layout = false;
    std::uint64_t seed = 1;
    std::uint64_t error_seed = 0;
    int passes = 10;
    double accuracy = 0.90;
    double concentration = 8.0;
    double pass_noise = 1.0;
    double hard_noise_boost = 6.0;
    int window = 250;
    double learning_rate = 1e-4;
    int minibatch_size = 15;
    int epochs_per_update = 4;
    double gamma = 0.99;
    double clip_epsilon = 0.2;
    int hidden_width = 64;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double value_loss_weight = 0.5;
    double entropy_bonus_weight = 0.01;
    std::string out = "runs";
    int repeats = 3;
    bool desk = false;
    std::string config_path;
};

std::string trimmed(const std::string& text) {
    const auto begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw std::invalid_argument("not a boolean: " + value);
}

// Flat key = value file. Keys mirror the long flags (dashes or underscores);
// values already given on the command line win. Keys that belong to a
// different subcommand are ignored so one file can drive both run and suite.
void apply_config_file(CLI::App* cmd, CliOptions& opt) {
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"condition", [&](const std::string& v) { opt.condition = v; }},
        {"episodes", [&](const std::string& v) { opt.episodes = std::stoi(v); }},
        {"room-width", [&](const std::string& v) { opt.room_width = std::stoi(v); }},
        {"room-height", [&](const std::string& v) { opt.room_height = std::stoi(v); }},
        {"room", [&](const std::string& v) { opt.room = v; }},
        {"max-steps", [&](const std::string& v) { opt.max_steps = std::stoi(v); }},
        {"fixed-layout", [&](const std::string& v) { opt.fixed_layout = parse_bool(v); }},
        {"seed", [&](const std::string& v) { opt.seed = std::stoull(v); }},
        {"error-seed", [&](const std::string& v) { opt.error_seed = std::stoull(v); }},
        {"passes", [&](const std::string& v) { opt.passes = std::stoi(v); }},
        {"accuracy", [&](const std::string& v) { opt.accuracy = std::stod(v); }},
        {"concentration", [&](const std::string& v) { opt.concentration = std::stod(v); }},
        {"pass-noise", [&](const std::string& v) { opt.pass_noise = std::stod(v); }},
        {"hard-noise-boost", [&](const std::string& v) { opt.hard_noise_boost = std::stod(v); }},
        {"window", [&](const std::string& v) { opt.window = std::stoi(v); }},
        {"learning-rate", [&](const std::string& v) { opt.learning_rate = std::stod(v); }},
        {"minibatch-size", [&](const std::string& v) { opt.minibatch_size = std::stoi(v); }},
        {"epochs-per-update", [&](const std::string& v) { opt.epochs_per_update = std::stoi(v); }},
        {"gamma", [&](const std::string& v) { opt.gamma = std::stod(v); }},
        {"clip-epsilon", [&](const std::string& v) { opt.clip_epsilon = std::stod(v); }},
        {"hidden-width", [&](const std::string& v) { opt.hidden_width = std::stoi(v); }},
        {"adam-beta1", [&](const std::string& v) { opt.adam_beta1 = std::stod(v); }},
        {"adam-beta2", [&](const std::string& v) { opt.adam_beta2 = std::stod(v); }},
        {"adam-eps", [&](const std::string& v) { opt.adam_eps = std::stod(v); }},
        {"value-loss-weight", [&](const std::string& v) { opt.value_loss_weight = std::stod(v); }},
        {"entropy-bonus-weight",
         [&](const std::string& v) { opt.entropy_bonus_weight = std::stod(v); }},
        {"out", [&](const std::string& v) { opt.out = v; }},
        {"repeats", [&](const std::string& v) { opt.repeats = std::stoi(v); }},
        {"desk", [&](const std::string& v) { opt.desk = parse_bool(v); }},
    };

    std::istringstream in(read_file(opt.config_path));
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        line_number += 1;
        const std::string stripped = trimmed(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto equals = stripped.find('=');
        if (equals == std::string::npos) {
            throw std::runtime_error(opt.config_path + ":" + std::to_string(line_number) +
                                     ": expected key = value");
        }
        std::string key = trimmed(stripped.substr(0, equals));
        for (char& c : key) {
            if (c == '_') c = '-';
        }
        const std::string value = trimmed(stripped.substr(equals + 1));

        const auto setter = setters.find(key);
        if (setter == setters.end()) {
            throw std::runtime_error(opt.config_path + ":" + std::to_string(line_number) +
                                     ": unknown key '" + key + "'");
        }
        const CLI::Option* option = cmd->get_option_no_throw("--" + key);
        if (option == nullptr) continue;     // valid key for another subcommand
        if (option->count() > 0) continue;   // explicit flag wins over the file
        setter->second(value);
    }
}

void add_shared_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--episodes", opt.episodes, "episodes per run");
    cmd->add_option("--room-width", opt.room_width, "room interior width");
    cmd->add_option("--room-height", opt.room_height, "room interior height");
    cmd->add_option("--room", opt.room, "room size as WxH (overrides width/height)");
    cmd->add_option("--max-steps", opt.max_steps, "episode horizon (0 = 8x cell count)");
    cmd->add_flag("--fixed-layout", opt.fixed_layout, "reuse one layout for every episode");
    cmd->add_option("--seed", opt.seed, "master seed");
    cmd->add_option("--error-seed", opt.error_seed,
                    "advisor error seed (0 = derive from the master seed)");
    cmd->add_option("--passes", opt.passes, "ensemble passes per advice (K)");
    cmd->add_option("--accuracy", opt.accuracy, "advisor base accuracy");
    cmd->add_option("--concentration", opt.concentration, "advisor logit gap");
    cmd->add_option("--pass-noise", opt.pass_noise, "per-pass logit noise scale");
    cmd->add_option("--hard-noise-boost", opt.hard_noise_boost,
                    "pass-noise multiplier on wrong-marked states");
    cmd->add_option("--window", opt.window, "smoothing window (episodes)");
    cmd->add_option("--learning-rate", opt.learning_rate, "Adam learning rate");
    cmd->add_option("--minibatch-size", opt.minibatch_size, "update minibatch size");
    cmd->add_option("--epochs-per-update", opt.epochs_per_update, "epochs per update");
    cmd->add_option("--gamma", opt.gamma, "discount factor");
    cmd->add_option("--clip-epsilon", opt.clip_epsilon, "surrogate clip range");
    cmd->add_option("--hidden-width", opt.hidden_width, "MLP hidden width");
    cmd->add_option("--adam-beta1", opt.adam_beta1, "Adam beta1");
    cmd->add_option("--adam-beta2", opt.adam_beta2, "Adam beta2");
    cmd->add_option("--adam-eps", opt.adam_eps, "Adam epsilon");
    cmd->add_option("--value-loss-weight", opt.value_loss_weight, "critic loss weight");
    cmd->add_option("--entropy-bonus-weight", opt.entropy_bonus_weight, "entropy bonus weight");
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_flag("--desk", opt.desk,
                  "desk-scale preset: 3x3 rooms, 1500 episodes, accuracy 0.93, K=10, 3 repeats");
    cmd->add_option("--config", opt.config_path,
                    "flat key=value config file; command-line flags override it");
}

ExperimentConfig build_config(CLI::App* cmd, CliOptions& opt) {
    if (!opt.config_path.empty()) apply_config_file(cmd, opt);
    if (opt.desk) {
        opt.room_width = 3;
        opt.room_height = 3;
        opt.episodes = 1500;
        opt.accuracy = 0.93;
        opt.passes = 10;
        opt.repeats = 3;
        opt.room.clear();
    }
    if (!opt.room.empty()) {
        const auto x = opt.room.find('x');
        if (x == std::string::npos) throw CLI::ValidationError("--room", "expected WxH, e.g. 4x4");
        opt.room_width = std::stoi(opt.room.substr(0, x));
        opt.room_height = std::stoi(opt.room.substr(x + 1));
    }

    ExperimentConfig config;
    config.condition = condition_from_name(opt.condition);
    config.episodes = opt.episodes;
    config.grid.room_width = opt.room_width;
    config.grid.room_height = opt.room_height;
    config.grid.max_steps = opt.max_steps;
    config.grid.seed = opt.seed;
    config.fixed_layout = opt.fixed_layout;
    config.seed = opt.seed;
    config.advisor.accuracy = opt.accuracy;
    config.advisor.concentration = opt.concentration;
    config.advisor.pass_noise = opt.pass_noise;
    config.advisor.hard_noise_boost = opt.hard_noise_boost;
    config.advisor.error_seed = opt.error_seed;
    config.passes = opt.passes;
    config.window = opt.window;
    config.ppo.learning_rate = opt.learning_rate;
    config.ppo.minibatch_size = opt.minibatch_size;
    config.ppo.epochs_per_update = opt.epochs_per_update;
    config.ppo.discount = opt.gamma;
    config.ppo.clip_epsilon = opt.clip_epsilon;
    config.ppo.hidden_width = opt.hidden_width;
    config.ppo.adam_beta1 = opt.adam_beta1;
    config.ppo.adam_beta2 = opt.adam_beta2;
    config.ppo.adam_eps = opt.adam_eps;
    config.ppo.value_loss_weight = opt.value_loss_weight;
    config.ppo.entropy_bonus_weight = opt.entropy_bonus_weight;
    config.out_dir = opt.out;
    return config;
}

void print_summary_row(const SuiteRow& row) {
    std::cout << "  " << condition_name(row.condition) << ": runs=" << row.runs
              << " auc=" << fmt_double(row.auc_mean) << " (sd " << fmt_double(row.auc_sd) << ")";
    if (row.ece_entropy) {
        std::cout << " ece=" << fmt_double(*row.ece_entropy) << "/"
                  << (row.ece_maxprob ? fmt_double(*row.ece_maxprob) : "-")
                  << " bs=" << (row.bs_entropy ? fmt_double(*row.bs_entropy) : "-") << "/"
                  << (row.bs_maxprob ? fmt_double(*row.bs_maxprob) : "-") << " disc="
                  << (row.disc_entropy ? fmt_double(*row.disc_entropy) : "-") << "/"
                  << (row.disc_maxprob ? fmt_double(*row.disc_maxprob) : "-");
    }
    std::cout << "\n";
}

int cmd_run(CLI::App* cmd, CliOptions& opt) {
    ExperimentConfig config = build_config(cmd, opt);
    std::cout << "running " << condition_name(config.condition) << " seed " << config.seed
              << " (" << config.episodes << " episodes, rooms " << config.grid.room_width << "x"
              << config.grid.room_height << ")\n";
    RunResult result = run_condition(config);
    write_run_files(result, config.out_dir);

    const std::vector<double> smoothed = moving_average(result.rewards, config.window);
    std::cout << "done in " << fmt_double(result.duration_seconds)
              << "s: auc=" << fmt_double(result.summary.auc)
              << " final_smoothed=" << fmt_double(smoothed.back())
              << " advisor_queries=" << result.advisor_queries << "\n";
    if (result.summary.ece_entropy) {
        std::cout << "calibration: ece=" << fmt_double(*result.summary.ece_entropy) << "/"
                  << fmt_double(*result.summary.ece_maxprob)
                  << " bs=" << fmt_double(*result.summary.bs_entropy) << "/"
                  << fmt_double(*result.summary.bs_maxprob) << " accuracy="
                  << fmt_double(*result.summary.advice_accuracy) << " (entropy/max-prob flavors)\n";
    }
    std::cout << "wrote " << curve_path(config.out_dir, result.condition, result.seed).string()
              << "\n";
    return 0;
}

int cmd_suite(CLI::App* cmd, CliOptions& opt) {
    ExperimentConfig config = build_config(cmd, opt);
    const std::vector<Condition> conditions = all_conditions();
    std::cout << "suite: 4 conditions x " << opt.repeats << " seeds, " << config.episodes
              << " episodes each\n";
    SuiteResult suite = run_suite(config, conditions, opt.repeats, config.out_dir);
    for (const SuiteRow& row : suite.rows) print_summary_row(row);
    for (const std::string& failure : suite.failures) {
        std::cout << "  FAILED: " << failure << "\n";
    }
    std::cout << "wrote " << (std::filesystem::path(config.out_dir) / "summary.csv").string()
              << "\n";
    return suite.failures.empty() ? 0 : 1;
}

// report: recompute the tables from the CSVs in a directory.
struct ParsedRun {
    std::string condition;
    std::uint64_t seed = 0;
};

std::optional<ParsedRun> parse_run_filename(const std::string& stem, const std::string& prefix) {
    if (stem.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string rest = stem.substr(prefix.size());
    const auto underscore = rest.rfind('_');
    if (underscore == std::string::npos) return std::nullopt;
    ParsedRun parsed;
    parsed.condition = rest.substr(0, underscore);
    parsed.seed = std::stoull(rest.substr(underscore + 1));
    return parsed;
}

int cmd_report(const std::string& in_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(in_dir)) {
        std::cerr << "not a directory: " << in_dir << "\n";
        return 1;
    }

    std::map<std::string, std::vector<double>> aucs;
    std::map<std::string, std::vector<RunSummary>> calib;
    std::string room_label;

    for (const auto& entry : fs::directory_iterator(in_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        const std::string stem = entry.path().stem().string();
        if (auto parsed = parse_run_filename(stem, "curve_")) {
            std::istringstream in(read_file(entry.path()));
            std::string line;
            std::getline(in, line);  // header
            std::vector<double> smoothed;
            while (std::getline(in, line)) {
                const auto last_comma = line.rfind(',');
                if (last_comma == std::string::npos) continue;
                smoothed.push_back(std::stod(line.substr(last_comma + 1)));
            }
            if (!smoothed.empty()) aucs[parsed->condition].push_back(auc(smoothed));
        } else if (auto advice = parse_run_filename(stem, "advice_")) {
            std::istringstream in(read_file(entry.path()));
            std::string line;
            std::getline(in, line);
            std::vector<AdviceRow> rows;
            while (std::getline(in, line)) {
                AdviceRow row;
                std::istringstream fields(line);
                std::string field;
                std::getline(fields, field, ','); row.episode = std::stoi(field);
                std::getline(fields, field, ','); row.step = std::stoi(field);
                std::getline(fields, field, ','); row.prompt_hash = std::stoull(field);
                std::getline(fields, field, ','); row.predicted_action = std::stoi(field);
                std::getline(fields, field, ','); row.oracle_action = std::stoi(field);
                std::getline(fields, field, ','); row.entropy_norm = std::stod(field);
                std::getline(fields, field, ','); row.one_minus_max = std::stod(field);
                std::getline(fields, field, ','); row.passes = std::stoi(field);
                rows.push_back(row);
            }
            if (!rows.empty()) {
                RunSummary summary;
                const auto ent = records_entropy_flavor(rows);
                const auto maxp = records_maxprob_flavor(rows);
                summary.ece_entropy = ece(ent);
                summary.ece_maxprob = ece(maxp);
                summary.bs_entropy = brier(ent);
                summary.bs_maxprob = brier(maxp);
                summary.disc_entropy = discrimination(ent);
                summary.disc_maxprob = discrimination(maxp);
                calib[advice->condition].push_back(summary);
            }
        }
    }

    if (aucs.empty() && calib.empty()) {
        std::cerr << "no curve_*/advice_* files under " << in_dir << "\n";
        return 1;
    }

    std::cout << "== reward AUC (mean over runs) ==\n";
    for (const auto& [condition, values] : aucs) {
        double sum = 0.0;
        for (double v : values) sum += v;
        std::cout << "  " << condition << ": " << fmt_double(sum / values.size()) << " ("
                  << values.size() << " runs)\n";
    }

    const auto mean_of = [](const std::vector<RunSummary>& summaries, auto field) {
        double sum = 0.0;
        int n = 0;
        for (const RunSummary& s : summaries) {
            if (auto v = field(s)) {
                sum += *v;
                n += 1;
            }
        }
        return n ? std::optional<double>(sum / n) : std::nullopt;
    };

    std::cout << "== calibration (mean over runs) ==\n";
    const auto print_flavor_rows = [&](const std::string& condition, const char* label) {
        const auto it = calib.find(condition);
        if (it == calib.end()) return;
        const auto& s = it->second;
        const auto text = [](std::optional<double> v) { return v ? fmt_double(*v) : "-"; };
        std::cout << "  " << label << " by Mean Entropy: ece="
                  << text(mean_of(s, [](const RunSummary& r) { return r.ece_entropy; })) << " bs="
                  << text(mean_of(s, [](const RunSummary& r) { return r.bs_entropy; })) << " disc="
                  << text(mean_of(s, [](const RunSummary& r) { return r.disc_entropy; })) << "\n";
        std::cout << "  " << label << " by Max Probability: ece="
                  << text(mean_of(s, [](const RunSummary& r) { return r.ece_maxprob; })) << " bs="
                  << text(mean_of(s, [](const RunSummary& r) { return r.bs_maxprob; })) << " disc="
                  << text(mean_of(s, [](const RunSummary& r) { return r.disc_maxprob; })) << "\n";
    };
    print_flavor_rows("uncalibrated-guided", "Deterministic");
    print_flavor_rows("calibrated-entropy", "Sample Consistency");
    print_flavor_rows("calibrated-linear-decay", "Sample Consistency (linear decay)");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calirl: calibrated-advisor policy-shaping experiment harness"};
    app.require_subcommand(1);

    CliOptions run_opt, suite_opt;
    std::string report_dir;

    CLI::App* run = app.add_subcommand("run", "run one condition for one seed");
    run->add_option("--condition", run_opt.condition,
                    "unguided | uncalibrated-guided | calibrated-entropy | calibrated-linear-decay");
    add_shared_options(run, run_opt);

    CLI::App* suite = app.add_subcommand("suite", "run every condition over repeated seeds");
    suite->add_option("--repeats", suite_opt.repeats, "seeds per condition");
    add_shared_options(suite, suite_opt);

    CLI::App* report = app.add_subcommand("report", "summarize emitted CSVs");
    report->add_option("--in", report_dir, "directory holding curve_*/advice_* files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run, run_opt);
        if (suite->parsed()) return cmd_suite(suite, suite_opt);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
