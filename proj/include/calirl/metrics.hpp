#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "calirl/gridworld.hpp"

namespace calirl {

// One advised step scored against the oracle. outcome is 1 exactly when the
// predicted action matches the oracle action.
struct CalibrationRecord {
    double confidence = 0.0;   // 1 - mean entropy, or max probability
    double uncertainty = 0.0;  // 1 - confidence for the entropy flavor
    Action predicted = Action::TurnLeft;
    Action oracle = Action::TurnLeft;

    int outcome() const { return predicted == oracle ? 1 : 0; }
};

inline CalibrationRecord make_record(double confidence, double uncertainty, Action predicted,
                                     Action oracle) {
    return {confidence, uncertainty, predicted, oracle};
}

// Expected calibration error over M equal-width confidence bins, right-closed
// ((0, 1/M], (1/M, 2/M], ...) with confidence 0 counted in bin 1. Empty bins
// contribute nothing.
inline double ece(std::span<const CalibrationRecord> records, int bins = 10) {
    if (records.empty()) throw std::invalid_argument("ece of zero records");
    if (bins < 1) throw std::invalid_argument("ece needs at least one bin");

    std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
    for (const CalibrationRecord& r : records) {
        int bin = static_cast<int>(std::ceil(r.confidence * bins));
        bin = std::clamp(bin, 1, bins);
        conf_sum[static_cast<std::size_t>(bin - 1)] += r.confidence;
        acc_sum[static_cast<std::size_t>(bin - 1)] += r.outcome();
        count[static_cast<std::size_t>(bin - 1)] += 1;
    }

    double total = 0.0;
    const double n = static_cast<double>(records.size());
    for (int m = 0; m < bins; ++m) {
        const std::size_t c = count[static_cast<std::size_t>(m)];
        if (c == 0) continue;
        const double acc = acc_sum[static_cast<std::size_t>(m)] / static_cast<double>(c);
        const double conf = conf_sum[static_cast<std::size_t>(m)] / static_cast<double>(c);
        total += static_cast<double>(c) / n * std::abs(acc - conf);
    }
    return total;
}

// Mean squared gap between confidence and the binary outcome.
inline double brier(std::span<const CalibrationRecord> records) {
    if (records.empty()) throw std::invalid_argument("brier of zero records");
    double total = 0.0;
    for (const CalibrationRecord& r : records) {
        const double d = r.confidence - static_cast<double>(r.outcome());
        total += d * d;
    }
    return total / static_cast<double>(records.size());
}

// Among incorrect records, the fraction whose uncertainty exceeds the
// threshold. Absent (not zero) when there is no incorrect record.
inline std::optional<double> discrimination(std::span<const CalibrationRecord> records,
                                            double threshold = 0.5) {
    std::size_t wrong = 0;
    std::size_t flagged = 0;
    for (const CalibrationRecord& r : records) {
        if (r.outcome() == 0) {
            wrong += 1;
            if (r.uncertainty > threshold) flagged += 1;
        }
    }
    if (wrong == 0) return std::nullopt;
    return static_cast<double>(flagged) / static_cast<double>(wrong);
}

// Trailing mean with a growing window at the start: element t averages
// episodes max(0, t-window+1)..t. Output length equals input length.
inline std::vector<double> moving_average(std::span<const double> series, int window = 250) {
    if (window < 1) throw std::invalid_argument("window must be positive");
    std::vector<double> smoothed(series.size(), 0.0);
    for (std::size_t t = 0; t < series.size(); ++t) {
        const std::size_t begin = t + 1 >= static_cast<std::size_t>(window)
                                      ? t + 1 - static_cast<std::size_t>(window)
                                      : 0;
        double sum = 0.0;
        for (std::size_t i = begin; i <= t; ++i) sum += series[i];
        smoothed[t] = sum / static_cast<double>(t - begin + 1);
    }
    return smoothed;
}

// Area under the (smoothed) reward curve: rectangle rule at unit episode
// spacing, i.e. the plain sum.
inline double auc(std::span<const double> smoothed_series) {
    if (smoothed_series.empty()) throw std::invalid_argument("auc of an empty series");
    double total = 0.0;
    for (double v : smoothed_series) total += v;
    return total;
}

}  // namespace calirl
