#pragma once

#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "calirl/gridworld.hpp"

namespace calirl {

// Target of the current mission: the object cell plus the action that
// completes the mission once the agent faces (or enters) it.
struct PlanTarget {
    Cell target_pos;
    Action terminal_action;
};

inline PlanTarget plan_target(const GridState& state) {
    switch (state.mission) {
        case kMissionPickupKey:
            if (!state.key_pos) throw std::logic_error("mission 1 without a key on the grid");
            return {*state.key_pos, Action::Pickup};
        case kMissionOpenDoor:
            return {state.door_pos, Action::OpenDoor};
        default:
            return {state.goal_pos, Action::Forward};
    }
}

namespace detail {

inline constexpr int kInfiniteCost = std::numeric_limits<int>::max();

inline int pose_index(const Cell& c, int dir, const GridConfig& config) {
    return (c.row * config.grid_width() + c.col) * 4 + dir;
}

// Minimal remaining action count for every (position, direction) pose under
// the current mission phase, turns included. Backward BFS from the poses that
// complete the mission: facing the key (then pickup) for mission 1, facing the
// door (then open) for mission 2, standing on the goal for mission 3. Blocking
// matches the live environment: the key blocks until picked up, the door until
// opened. Unreachable poses keep kInfiniteCost.
inline std::vector<int> cost_field(const GridState& state, const GridConfig& config) {
    const PlanTarget target = plan_target(state);
    std::vector<int> cost(static_cast<std::size_t>(config.cell_count() * 4), kInfiniteCost);
    std::deque<int> queue;

    const auto standable = [&](const Cell& c) { return is_passable(c, state, config); };
    const auto seed_pose = [&](const Cell& c, int dir, int value) {
        const int idx = pose_index(c, dir, config);
        if (cost[static_cast<std::size_t>(idx)] > value) {
            cost[static_cast<std::size_t>(idx)] = value;
            queue.push_back(idx);
        }
    };

    for (int row = 0; row < config.grid_height(); ++row) {
        for (int col = 0; col < config.grid_width(); ++col) {
            const Cell c{col, row};
            if (!standable(c)) continue;
            if (state.mission == kMissionReachGoal) {
                if (c == target.target_pos) {
                    for (int dir = 0; dir < 4; ++dir) seed_pose(c, dir, 0);
                }
                continue;
            }
            for (int dir = 0; dir < 4; ++dir) {
                const Cell d = direction_delta(dir);
                const Cell ahead{c.col + d.col, c.row + d.row};
                if (ahead == target.target_pos) seed_pose(c, dir, 1);
            }
        }
    }

    while (!queue.empty()) {
        const int idx = queue.front();
        queue.pop_front();
        const int value = cost[static_cast<std::size_t>(idx)];
        const int dir = idx % 4;
        const Cell c{(idx / 4) % config.grid_width(), (idx / 4) / config.grid_width()};

        // predecessors via turn actions: turning left/right from them reaches (c, dir)
        seed_pose(c, (dir + 1) % 4, value + 1);
        seed_pose(c, (dir + 3) % 4, value + 1);
        // predecessor via forward: the pose one cell behind, same facing
        const Cell d = direction_delta(dir);
        const Cell behind{c.col - d.col, c.row - d.row};
        if (in_grid(behind, config) && standable(behind)) seed_pose(behind, dir, value + 1);
    }
    return cost;
}

inline bool completes_mission_now(const GridState& state, Action action) {
    const Cell f = front_cell(state);
    if (action == Action::Pickup) {
        return state.mission == kMissionPickupKey && state.key_pos && f == *state.key_pos;
    }
    if (action == Action::OpenDoor) {
        return state.mission == kMissionOpenDoor && state.carrying_key && f == state.door_pos;
    }
    return false;
}

}  // namespace detail

// Minimal number of actions to complete the current mission from this state.
inline int cost_to_go(const GridState& state, const GridConfig& config) {
    if (is_terminal(state, config)) return 0;
    const std::vector<int> field = detail::cost_field(state, config);
    const int value =
        field[static_cast<std::size_t>(detail::pose_index(state.agent_pos, state.agent_dir, config))];
    if (value == detail::kInfiniteCost) {
        throw std::runtime_error("state cannot complete its mission: layout bug");
    }
    return value;
}

// First action of a minimum-cost completion of the current mission; ties break
// toward the lowest action id.
inline Action optimal_action(const GridState& state, const GridConfig& config) {
    if (is_terminal(state, config)) throw std::logic_error("optimal_action on a terminal state");
    const std::vector<int> field = detail::cost_field(state, config);
    const auto pose_cost = [&](const Cell& c, int dir) {
        const int v = field[static_cast<std::size_t>(detail::pose_index(c, dir, config))];
        return v == detail::kInfiniteCost ? detail::kInfiniteCost - 1 : v;  // keep +1 safe
    };

    if (field[static_cast<std::size_t>(
            detail::pose_index(state.agent_pos, state.agent_dir, config))] ==
        detail::kInfiniteCost) {
        throw std::runtime_error("state cannot complete its mission: layout bug");
    }
    const int here = pose_cost(state.agent_pos, state.agent_dir);

    int best_cost = detail::kInfiniteCost;
    Action best = Action::TurnLeft;
    for (int id = 0; id < kNumActionIds; ++id) {
        const Action action = static_cast<Action>(id);
        int candidate = detail::kInfiniteCost;
        switch (action) {
            case Action::TurnLeft:
                candidate = 1 + pose_cost(state.agent_pos, (state.agent_dir + 3) % 4);
                break;
            case Action::TurnRight:
                candidate = 1 + pose_cost(state.agent_pos, (state.agent_dir + 1) % 4);
                break;
            case Action::Forward: {
                const Cell f = front_cell(state);
                // entering the goal is covered by the zero-cost goal poses
                candidate = is_passable(f, state, config) ? 1 + pose_cost(f, state.agent_dir)
                                                          : 1 + here;
                break;
            }
            case Action::Pickup:
            case Action::OpenDoor:
                candidate = detail::completes_mission_now(state, action) ? 1 : 1 + here;
                break;
        }
        if (candidate < best_cost) {
            best_cost = candidate;
            best = action;
        }
    }
    return best;
}

}  // namespace calirl
