#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace calirl {

inline constexpr int kNumActions = 5;

// Probability vector over the 5 discrete actions; the common currency of the
// agent policy, advisor advice, and their mixtures.
using ActionDistribution = std::array<double, kNumActions>;

inline ActionDistribution uniform_distribution() {
    return {0.2, 0.2, 0.2, 0.2, 0.2};
}

// Lowest id wins ties.
inline int argmax_action(const ActionDistribution& p) {
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
        if (p[a] > p[best]) best = a;
    }
    return best;
}

// Shannon entropy in nats, with 0*log(0) = 0.
inline double entropy_nats(const ActionDistribution& p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

inline bool is_distribution(const ActionDistribution& p, double tol = 1e-9) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0 || !std::isfinite(v)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

inline ActionDistribution softmax(const std::array<double, kNumActions>& logits) {
    double zmax = logits[0];
    for (double z : logits) zmax = std::max(zmax, z);
    ActionDistribution p{};
    double sum = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        p[a] = std::exp(logits[a] - zmax);
        sum += p[a];
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace calirl
