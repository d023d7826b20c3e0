#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "calirl/rng.hpp"

namespace calirl {

// Discrete actions, contiguous ids 0..4.
enum class Action : int {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Pickup = 3,
    OpenDoor = 4,
};

inline constexpr int kNumActionIds = 5;

inline Action action_from_id(int id) {
    if (id < 0 || id >= kNumActionIds) throw std::invalid_argument("action id outside 0..4");
    return static_cast<Action>(id);
}

struct Cell {
    int col = 0;
    int row = 0;
    bool operator==(const Cell&) const = default;
};

// Two rooms of room_width x room_height interior cells side by side, split by
// a wall column holding one locked door, ringed by a boundary wall. The full
// grid is (2*room_width + 3) columns x (room_height + 2) rows.
struct GridConfig {
    int room_width = 3;
    int room_height = 3;
    int max_steps = 0;  // 0 -> default horizon of 8 * cell_count()
    std::uint64_t seed = 0;

    int grid_width() const { return 2 * room_width + 3; }
    int grid_height() const { return room_height + 2; }
    int cell_count() const { return grid_width() * grid_height(); }
    int divider_col() const { return room_width + 1; }
    int horizon() const { return max_steps > 0 ? max_steps : 8 * cell_count(); }

    void validate() const {
        if (room_width < 3 || room_height < 3) {
            throw std::invalid_argument("room dimensions must be at least 3x3");
        }
        if (horizon() < 4 * cell_count()) {
            throw std::invalid_argument("max_steps must be at least 4x the full cell count");
        }
    }
};

// Missions in completion order.
inline constexpr int kMissionPickupKey = 1;
inline constexpr int kMissionOpenDoor = 2;
inline constexpr int kMissionReachGoal = 3;

struct GridState {
    Cell agent_pos;
    int agent_dir = 0;  // 0 right, 1 down, 2 left, 3 up
    bool carrying_key = false;
    bool door_open = false;
    std::optional<Cell> key_pos;  // absent exactly while carried
    Cell door_pos;
    Cell goal_pos;
    int mission = kMissionPickupKey;
    int step_count = 0;
};

struct StepOutcome {
    double reward = 0.0;
    bool done = false;
    std::optional<int> mission_completed;  // mission index finished this step
    bool truncated = false;                // horizon hit
};

inline Cell direction_delta(int dir) {
    switch (dir & 3) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

inline Cell front_cell(const GridState& state) {
    const Cell d = direction_delta(state.agent_dir);
    return {state.agent_pos.col + d.col, state.agent_pos.row + d.row};
}

inline bool in_grid(const Cell& c, const GridConfig& config) {
    return c.col >= 0 && c.col < config.grid_width() && c.row >= 0 && c.row < config.grid_height();
}

// Wall cells: the boundary ring plus the divider column everywhere except the
// door cell.
inline bool is_wall(const Cell& c, const Cell& door_pos, const GridConfig& config) {
    if (c.col == 0 || c.col == config.grid_width() - 1 || c.row == 0 ||
        c.row == config.grid_height() - 1) {
        return true;
    }
    return c.col == config.divider_col() && !(c == door_pos);
}

// A cell the agent may stand on: not a wall, not the closed door, not the key.
inline bool is_passable(const Cell& c, const GridState& state, const GridConfig& config) {
    if (!in_grid(c, config) || is_wall(c, state.door_pos, config)) return false;
    if (c == state.door_pos && !state.door_open) return false;
    if (state.key_pos && c == *state.key_pos) return false;
    return true;
}

namespace detail {

inline std::vector<Cell> room_cells(const GridConfig& config, bool right_room) {
    std::vector<Cell> cells;
    const int c0 = right_room ? config.room_width + 2 : 1;
    for (int row = 1; row <= config.room_height; ++row) {
        for (int col = c0; col < c0 + config.room_width; ++col) {
            cells.push_back({col, row});
        }
    }
    return cells;
}

}  // namespace detail

// Draws a fresh episode layout: key, door, goal, then agent pose, each uniform
// over its free cells, in that fixed order. Deterministic given the rng state.
inline GridState new_env(const GridConfig& config, Rng& layout_rng) {
    config.validate();
    GridState state;

    const std::vector<Cell> left = detail::room_cells(config, false);
    const std::vector<Cell> right = detail::room_cells(config, true);
    if (left.empty() || right.empty()) throw std::invalid_argument("no free cell to place objects");

    state.key_pos = left[layout_rng.uniform_int(left.size())];
    state.door_pos = {config.divider_col(),
                      1 + static_cast<int>(layout_rng.uniform_int(config.room_height))};
    state.goal_pos = right[layout_rng.uniform_int(right.size())];

    std::vector<Cell> agent_cells;
    for (const Cell& c : left) {
        if (!(c == *state.key_pos)) agent_cells.push_back(c);
    }
    if (agent_cells.empty()) throw std::invalid_argument("no free cell to place the agent");
    state.agent_pos = agent_cells[layout_rng.uniform_int(agent_cells.size())];
    state.agent_dir = static_cast<int>(layout_rng.uniform_int(4));

    state.carrying_key = false;
    state.door_open = false;
    state.mission = kMissionPickupKey;
    state.step_count = 0;
    return state;
}

inline bool is_terminal(const GridState& state, const GridConfig& config) {
    return (state.mission == kMissionReachGoal && state.agent_pos == state.goal_pos) ||
           state.step_count >= config.horizon();
}

// One deterministic transition. Turns are free; blocked forward moves keep the
// position; pickup/open-door succeed only in their qualifying states and cost
// -0.02 otherwise; completing a subgoal pays +0.5; entering the goal ends the
// episode with 0.2 + (1 - step_count/max_steps).
inline std::pair<GridState, StepOutcome> step(const GridState& state, const GridConfig& config,
                                              Action action) {
    const int id = static_cast<int>(action);
    if (id < 0 || id >= kNumActionIds) throw std::invalid_argument("action id outside 0..4");
    if (is_terminal(state, config)) throw std::logic_error("step() called on a terminal state");

    GridState next = state;
    StepOutcome out;
    next.step_count += 1;

    switch (action) {
        case Action::TurnLeft:
            next.agent_dir = (next.agent_dir + 3) % 4;
            break;
        case Action::TurnRight:
            next.agent_dir = (next.agent_dir + 1) % 4;
            break;
        case Action::Forward: {
            const Cell target = front_cell(state);
            if (is_passable(target, state, config)) next.agent_pos = target;
            if (next.mission == kMissionReachGoal && next.agent_pos == next.goal_pos) {
                out.mission_completed = kMissionReachGoal;
                out.done = true;
                out.reward = 0.2 + (1.0 - static_cast<double>(next.step_count) /
                                              static_cast<double>(config.horizon()));
            }
            break;
        }
        case Action::Pickup: {
            const Cell target = front_cell(state);
            if (state.mission == kMissionPickupKey && state.key_pos && target == *state.key_pos) {
                next.carrying_key = true;
                next.key_pos.reset();
                next.mission = kMissionOpenDoor;
                out.mission_completed = kMissionPickupKey;
                out.reward = 0.5;
            } else {
                out.reward = -0.02;
            }
            break;
        }
        case Action::OpenDoor: {
            const Cell target = front_cell(state);
            if (state.mission == kMissionOpenDoor && state.carrying_key &&
                target == state.door_pos) {
                next.door_open = true;
                next.mission = kMissionReachGoal;
                out.mission_completed = kMissionOpenDoor;
                out.reward = 0.5;
            } else {
                out.reward = -0.02;
            }
            break;
        }
    }

    if (!out.done && next.step_count >= config.horizon()) {
        out.truncated = true;
        out.done = true;
    }
    return {next, out};
}

inline int observation_length(const GridConfig& config) {
    // 6 cell-type planes + agent position plane + direction(4) + carrying(1) + mission(3)
    return 7 * config.cell_count() + 8;
}

// Fixed-length binary feature vector: one-hot cell-type planes (wall, key,
// closed door, open door, goal, empty) flattened row-major, then one-hot agent
// position, direction, carrying flag, and mission.
inline std::vector<double> encode_observation(const GridState& state, const GridConfig& config) {
    const int cells = config.cell_count();
    std::vector<double> obs(static_cast<std::size_t>(observation_length(config)), 0.0);

    const auto plane_index = [&](int plane, const Cell& c) {
        return plane * cells + c.row * config.grid_width() + c.col;
    };

    for (int row = 0; row < config.grid_height(); ++row) {
        for (int col = 0; col < config.grid_width(); ++col) {
            const Cell c{col, row};
            int plane;
            if (is_wall(c, state.door_pos, config)) {
                plane = 0;
            } else if (state.key_pos && c == *state.key_pos) {
                plane = 1;
            } else if (c == state.door_pos) {
                plane = state.door_open ? 3 : 2;
            } else if (c == state.goal_pos) {
                plane = 4;
            } else {
                plane = 5;
            }
            obs[static_cast<std::size_t>(plane_index(plane, c))] = 1.0;
        }
    }
    obs[static_cast<std::size_t>(plane_index(6, state.agent_pos))] = 1.0;

    const int base = 7 * cells;
    obs[static_cast<std::size_t>(base + state.agent_dir)] = 1.0;
    obs[static_cast<std::size_t>(base + 4)] = state.carrying_key ? 1.0 : 0.0;
    obs[static_cast<std::size_t>(base + 5 + (state.mission - 1))] = 1.0;
    return obs;
}

namespace detail {

inline const char* direction_glyph(int dir) {
    switch (dir & 3) {
        case 0: return ">";
        case 1: return "v";
        case 2: return "<";
        default: return "^";
    }
}

inline std::string cell_text(const Cell& c) {
    return "(" + std::to_string(c.col) + ", " + std::to_string(c.row) + ")";
}

inline std::string forward_object_text(const GridState& state, const GridConfig& config) {
    const Cell f = front_cell(state);
    if (state.key_pos && f == *state.key_pos) return "key";
    if (f == state.door_pos) return state.door_open ? "open door" : "closed door";
    if (!in_grid(f, config) || is_wall(f, state.door_pos, config)) return "wall";
    if (f == state.goal_pos) return "goal";
    return "empty cell";
}

inline std::string mission_text(int mission) {
    switch (mission) {
        case kMissionPickupKey: return "pick up key";
        case kMissionOpenDoor: return "open door";
        default: return "go to the green goal";
    }
}

}  // namespace detail

// Natural-language description of the state, filled into the fixed guidance
// prompt template. Deterministic in (state, config).
inline std::string render_prompt(const GridState& state, const GridConfig& config) {
    std::string text;
    text.reserve(1024);
    text += "The red agent is in a " + std::to_string(config.room_width) + "x" +
            std::to_string(config.room_height) + " grid environment surrounded by walls. ";
    text +=
        "Each grid cell is identified by coordinates (i, j), where i denotes the column and j "
        "denotes the row. The agent can turn left (action 0), turn right (action 1), move forward "
        "(action 2), pick up key (action 3), and open door (action 4). The agent can face right "
        "(0), down (1), left (2), or up (3). The agent cannot pass through walls. It can open the "
        "door if it has the key and is facing the closed door, and it can pick up the key when "
        "facing it. The agent needs to find the shortest route to key or door and then pickup the "
        "key or open the door. Consider the direction as the way the agent is facing, not the way "
        "we are seeing the agent, to avoid mixing right and left. ";
    text += "In this state, the agent is at position " + detail::cell_text(state.agent_pos) +
            ", the agent direction is " + detail::direction_glyph(state.agent_dir) +
            " and agent's direction number is " + std::to_string(state.agent_dir) +
            ", and the forward object is " + detail::forward_object_text(state, config) +
            ", and the key position is " +
            detail::cell_text(state.key_pos ? *state.key_pos : state.agent_pos) + ", the key is " +
            (state.carrying_key ? "" : "not ") + "being carried by the agent, the door is at position " +
            detail::cell_text(state.door_pos) + ", the goal is at position " +
            detail::cell_text(state.goal_pos) + ", the door is " +
            (state.door_open ? "True" : "False") + " open, and the mission is " +
            detail::mission_text(state.mission) +
            ". What is the optimal action for the agent to take in this state to accomplish the "
            "mission?just say the optimal action number";
    return text;
}

// Layout-and-pose identity without the step counter; used for advisor error
// hashing and duplicate detection.
inline std::uint64_t state_hash(const GridState& state, std::uint64_t seed) {
    std::uint64_t h = seed;
    h = hash_mix(h, static_cast<std::uint64_t>(state.agent_pos.col));
    h = hash_mix(h, static_cast<std::uint64_t>(state.agent_pos.row));
    h = hash_mix(h, static_cast<std::uint64_t>(state.agent_dir));
    h = hash_mix(h, state.carrying_key ? 1u : 0u);
    h = hash_mix(h, state.door_open ? 1u : 0u);
    h = hash_mix(h, state.key_pos ? static_cast<std::uint64_t>(state.key_pos->col + 1) : 0u);
    h = hash_mix(h, state.key_pos ? static_cast<std::uint64_t>(state.key_pos->row + 1) : 0u);
    h = hash_mix(h, static_cast<std::uint64_t>(state.door_pos.col));
    h = hash_mix(h, static_cast<std::uint64_t>(state.door_pos.row));
    h = hash_mix(h, static_cast<std::uint64_t>(state.goal_pos.col));
    h = hash_mix(h, static_cast<std::uint64_t>(state.goal_pos.row));
    h = hash_mix(h, static_cast<std::uint64_t>(state.mission));
    return h;
}

}  // namespace calirl
