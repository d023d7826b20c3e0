#pragma once

// Shared test helpers: state sampling, an env-step-based brute-force planner
// kept independent of the pose-BFS the oracle module uses, and filesystem
// scratch space.

#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "calirl/gridworld.hpp"
#include "calirl/oracle.hpp"
#include "calirl/rng.hpp"

namespace test_support {

using namespace calirl;

inline GridConfig make_config(int width, int height, std::uint64_t seed = 0) {
    GridConfig config;
    config.room_width = width;
    config.room_height = height;
    config.seed = seed;
    return config;
}

// Identity of a state minus the step counter.
using StateKey = std::tuple<int, int, int, bool, bool, int, int, int, int, int, int, int>;

inline StateKey state_key(const GridState& s) {
    return {s.agent_pos.col,
            s.agent_pos.row,
            s.agent_dir,
            s.carrying_key,
            s.door_open,
            s.key_pos ? s.key_pos->col : -1,
            s.key_pos ? s.key_pos->row : -1,
            s.door_pos.col,
            s.door_pos.row,
            s.goal_pos.col,
            s.goal_pos.row,
            s.mission};
}

// A random valid state: fresh layout, then a uniformly chosen mission phase
// and agent pose consistent with it.
inline GridState random_state(const GridConfig& config, Rng& rng) {
    GridState state = new_env(config, rng);
    const int phase = static_cast<int>(rng.uniform_int(3));

    if (phase >= 1) {  // key picked up
        state.carrying_key = true;
        state.key_pos.reset();
        state.mission = kMissionOpenDoor;
    }
    if (phase == 2) {  // door opened
        state.door_open = true;
        state.mission = kMissionReachGoal;
    }

    std::vector<Cell> standable;
    for (int row = 1; row <= config.room_height; ++row) {
        for (int col = 1; col < config.grid_width() - 1; ++col) {
            const Cell c{col, row};
            if (is_wall(c, state.door_pos, config)) continue;
            if (state.key_pos && c == *state.key_pos) continue;
            if (c == state.door_pos && !state.door_open) continue;
            if (c == state.goal_pos) continue;  // standing on the goal is terminal
            if (!state.door_open && c.col > config.divider_col()) continue;
            standable.push_back(c);
        }
    }
    state.agent_pos = standable[rng.uniform_int(standable.size())];
    state.agent_dir = static_cast<int>(rng.uniform_int(4));
    return state;
}

// Minimal env steps until the current mission index advances (or the episode
// terminates, for the final mission), by breadth-first search over full
// states driven by step(). Independent of oracle.hpp's planner.
inline int brute_force_cost(const GridState& start, const GridConfig& config) {
    GridConfig roomy = config;
    roomy.max_steps = 1000000;  // keep the horizon out of the search

    GridState s0 = start;
    s0.step_count = 0;
    std::map<StateKey, int> seen;
    std::deque<GridState> frontier{s0};
    seen[state_key(s0)] = 0;

    while (!frontier.empty()) {
        const GridState current = frontier.front();
        frontier.pop_front();
        const int depth = seen[state_key(current)];
        for (int id = 0; id < kNumActionIds; ++id) {
            auto [next, outcome] = step(current, roomy, static_cast<Action>(id));
            if (outcome.mission_completed == start.mission ||
                (start.mission == kMissionReachGoal && outcome.done)) {
                return depth + 1;
            }
            next.step_count = 0;
            const StateKey key = state_key(next);
            if (!seen.contains(key)) {
                seen[key] = depth + 1;
                frontier.push_back(next);
            }
        }
    }
    return -1;  // unreachable
}

// Every state reachable from `start` via step(), ignoring the step counter
// and stopping at terminal states.
inline std::vector<GridState> enumerate_reachable(const GridState& start,
                                                  const GridConfig& config) {
    GridConfig roomy = config;
    roomy.max_steps = 1000000;

    GridState s0 = start;
    s0.step_count = 0;
    std::map<StateKey, bool> seen;
    std::deque<GridState> frontier{s0};
    std::vector<GridState> states;
    seen[state_key(s0)] = true;

    while (!frontier.empty()) {
        const GridState current = frontier.front();
        frontier.pop_front();
        states.push_back(current);
        for (int id = 0; id < kNumActionIds; ++id) {
            auto [next, outcome] = step(current, roomy, static_cast<Action>(id));
            if (outcome.done) continue;
            next.step_count = 0;
            const StateKey key = state_key(next);
            if (!seen.contains(key)) {
                seen[key] = true;
                frontier.push_back(next);
            }
        }
    }
    return states;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "calirl_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test_support
