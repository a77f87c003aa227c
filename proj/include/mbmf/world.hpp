#pragma once

// Discrete stochastic navigation MDP: world representation, stepping, the
// scheduled non-stationarities and the synthetic arena generator.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mbmf/errors.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"

namespace mbmf {

using StateId = std::size_t;
using ActionId = std::size_t;

inline constexpr StateId kWall = std::numeric_limits<StateId>::max();

// Allocentric directions, clockwise from north. Rows grow southwards.
enum Direction : ActionId { kN = 0, kNE, kE, kSE, kS, kSW, kW, kNW };
inline constexpr std::size_t kNumDirections = 8;
inline constexpr std::array<int, kNumDirections> kDirRow{-1, -1, 0, 1, 1, 1, 0, -1};
inline constexpr std::array<int, kNumDirections> kDirCol{0, 1, 1, 1, 0, -1, -1, -1};

struct Outcome {
  StateId next = 0;
  double prob = 0.0;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct RewardMove {
  StateId new_goal = 0;
  friend bool operator==(const RewardMove&, const RewardMove&) = default;
};

struct AddObstacles {
  std::vector<std::pair<StateId, ActionId>> blocked;
  friend bool operator==(const AddObstacles&, const AddObstacles&) = default;
};

struct ChangeEvent {
  std::size_t at_step = 0;
  std::variant<RewardMove, AddObstacles> kind;
  friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
};

struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct WorldModel {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  // Intended neighbor per (s, a), row-major s * num_actions + a; kWall if blocked.
  std::vector<StateId> neighbors;
  // Outcome distribution per (s, a), same indexing.
  std::vector<std::vector<Outcome>> transitions;
  StateId goal = 0;
  std::vector<StateId> resets;
  std::vector<ChangeEvent> schedule;
  // Grid placement of each state; empty for worlds without a layout.
  std::vector<GridCell> cells;

  std::size_t index(StateId s, ActionId a) const { return s * num_actions + a; }

  const std::vector<Outcome>& outcomes(StateId s, ActionId a) const {
    check_ids(s, a);
    return transitions[index(s, a)];
  }

  StateId neighbor(StateId s, ActionId a) const {
    check_ids(s, a);
    return neighbors[index(s, a)];
  }

  void check_ids(StateId s, ActionId a) const {
    if (s >= num_states) throw InputError("state id " + std::to_string(s) + " out of range");
    if (a >= num_actions) throw InputError("action id " + std::to_string(a) + " out of range");
  }

  friend bool operator==(const WorldModel&, const WorldModel&) = default;
};

struct StepOutcome {
  StateId next_state = 0;
  double reward = 0.0;
  bool episode_reset = false;
  std::optional<StateId> post_reset_state;
};

// Samples s' from the (s, a) outcome distribution. Entering the goal pays 1
// and teleports the agent to a uniformly drawn reset state.
inline StepOutcome step(const WorldModel& world, StateId current, ActionId action, Rng& rng) {
  const auto& outs = world.outcomes(current, action);
  const double u = rng.uniform();
  double acc = 0.0;
  StateId next = outs.back().next;
  for (const auto& o : outs) {
    acc += o.prob;
    if (u < acc) {
      next = o.next;
      break;
    }
  }
  StepOutcome result;
  result.next_state = next;
  if (next == world.goal) {
    result.reward = 1.0;
    result.episode_reset = true;
    result.post_reset_state = world.resets[rng.below(world.resets.size())];
  }
  return result;
}

// Applies every event scheduled at exactly global_step. Returns true if the
// world changed.
inline bool apply_schedule(WorldModel& world, std::size_t global_step) {
  bool changed = false;
  for (const auto& event : world.schedule) {
    if (event.at_step != global_step) continue;
    if (const auto* move = std::get_if<RewardMove>(&event.kind)) {
      world.goal = move->new_goal;
    } else {
      for (auto [s, a] : std::get<AddObstacles>(event.kind).blocked) {
        world.transitions[world.index(s, a)] = {Outcome{s, 1.0}};
        world.neighbors[world.index(s, a)] = kWall;
      }
    }
    changed = true;
  }
  return changed;
}

// Breadth-first distances over the support of the outcome distributions.
// Unreachable states get SIZE_MAX.
inline std::vector<std::size_t> reachable_distances(const WorldModel& world, StateId from) {
  std::vector<std::size_t> dist(world.num_states, std::numeric_limits<std::size_t>::max());
  std::deque<StateId> frontier{from};
  dist[from] = 0;
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    for (ActionId a = 0; a < world.num_actions; ++a) {
      for (const auto& o : world.transitions[world.index(s, a)]) {
        if (o.prob > 0.0 && dist[o.next] == std::numeric_limits<std::size_t>::max()) {
          dist[o.next] = dist[s] + 1;
          frontier.push_back(o.next);
        }
      }
    }
  }
  return dist;
}

// Checks shape, distribution validity, id ranges, and that the goal and every
// scheduled relocation target are reachable from every reset state.
inline void validate_world(const WorldModel& world) {
  const std::size_t pairs = world.num_states * world.num_actions;
  if (world.num_states == 0 || world.num_actions == 0)
    throw ValidationError("world must have at least one state and one action");
  if (world.transitions.size() != pairs)
    throw ValidationError("transitions: expected " + std::to_string(pairs) + " (state, action) entries");
  if (world.neighbors.size() != pairs) throw ValidationError("neighbors: not total over (state, action)");
  for (StateId s = 0; s < world.num_states; ++s) {
    for (ActionId a = 0; a < world.num_actions; ++a) {
      const auto& outs = world.transitions[world.index(s, a)];
      const std::string where = "transitions[state=" + std::to_string(s) + ", action=" + std::to_string(a) + "]";
      if (outs.empty()) throw ValidationError(where + ": no outcomes");
      double sum = 0.0;
      for (const auto& o : outs) {
        if (o.next >= world.num_states) throw ValidationError(where + ": next state out of range");
        if (!(o.prob >= 0.0)) throw ValidationError(where + ": negative probability");
        sum += o.prob;
      }
      if (std::abs(sum - 1.0) > kProbTolerance)
        throw ValidationError(where + ": probabilities sum to " + std::to_string(sum) + " (normalization error)");
      const StateId nb = world.neighbors[world.index(s, a)];
      if (nb != kWall && nb >= world.num_states) throw ValidationError(where + ": neighbor out of range");
    }
  }
  if (world.goal >= world.num_states) throw ValidationError("goal out of range");
  if (world.resets.empty()) throw ValidationError("resets: at least one reset state required");
  std::vector<StateId> targets{world.goal};
  for (const auto& e : world.schedule) {
    if (const auto* move = std::get_if<RewardMove>(&e.kind)) {
      if (move->new_goal >= world.num_states) throw ValidationError("schedule: new_goal out of range");
      targets.push_back(move->new_goal);
    } else {
      for (auto [s, a] : std::get<AddObstacles>(e.kind).blocked) {
        if (s >= world.num_states || a >= world.num_actions)
          throw ValidationError("schedule: blocked pair out of range");
      }
    }
  }
  for (StateId r : world.resets) {
    if (r >= world.num_states) throw ValidationError("resets: state out of range");
    const auto dist = reachable_distances(world, r);
    for (StateId t : targets) {
      if (dist[t] == std::numeric_limits<std::size_t>::max())
        throw ValidationError("state " + std::to_string(t) + " unreachable from reset state " + std::to_string(r));
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic arena

struct ArenaParams {
  int rows = 4;
  int cols = 13;
  std::size_t num_states = 38;
  // Probability mass moved from the intended direction onto the two
  // adjacent directions, half each.
  double p_slip = 0.2;
  StateId goal = 18;
  StateId relocated_goal = 34;
  std::array<StateId, 2> resets{0, 32};
  int max_attempts = 10000;
};

namespace detail {

inline bool cell_free(const std::vector<char>& free, int rows, int cols, int r, int c) {
  return r >= 0 && r < rows && c >= 0 && c < cols && free[static_cast<std::size_t>(r * cols + c)];
}

// Diagonal moves may not squeeze between two blocked orthogonal cells.
inline int move_target(const std::vector<char>& free, int rows, int cols, int r, int c, std::size_t dir) {
  const int nr = r + kDirRow[dir];
  const int nc = c + kDirCol[dir];
  if (!cell_free(free, rows, cols, nr, nc)) return -1;
  if (kDirRow[dir] != 0 && kDirCol[dir] != 0) {
    if (!cell_free(free, rows, cols, r + kDirRow[dir], c) && !cell_free(free, rows, cols, r, c + kDirCol[dir]))
      return -1;
  }
  return nr * cols + nc;
}

inline bool four_connected(const std::vector<char>& free, int rows, int cols) {
  int start = -1, total = 0;
  for (int i = 0; i < rows * cols; ++i) {
    if (free[static_cast<std::size_t>(i)]) {
      ++total;
      if (start < 0) start = i;
    }
  }
  if (start < 0) return false;
  std::vector<char> seen(free.size(), 0);
  std::deque<int> q{start};
  seen[static_cast<std::size_t>(start)] = 1;
  int count = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    ++count;
    const int r = i / cols, c = i % cols;
    for (std::size_t d : {kN, kE, kS, kW}) {
      const int nr = r + kDirRow[d], nc = c + kDirCol[d];
      if (cell_free(free, rows, cols, nr, nc) && !seen[static_cast<std::size_t>(nr * cols + nc)]) {
        seen[static_cast<std::size_t>(nr * cols + nc)] = 1;
        q.push_back(nr * cols + nc);
      }
    }
  }
  return count == total;
}

inline std::vector<int> grid_distances(const std::vector<char>& free, int rows, int cols, int from) {
  std::vector<int> dist(free.size(), -1);
  std::deque<int> q{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    for (std::size_t d = 0; d < kNumDirections; ++d) {
      const int j = move_target(free, rows, cols, i / cols, i % cols, d);
      if (j >= 0 && dist[static_cast<std::size_t>(j)] < 0) {
        dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
        q.push_back(j);
      }
    }
  }
  return dist;
}

inline int orthogonal_degree(const std::vector<char>& free, int rows, int cols, int i) {
  int deg = 0;
  for (std::size_t d : {kN, kE, kS, kW})
    deg += cell_free(free, rows, cols, i / cols + kDirRow[d], i % cols + kDirCol[d]) ? 1 : 0;
  return deg;
}

}  // namespace detail

// Builds a transition distribution from intended neighbors: the intended
// direction keeps 1 - p_slip, each of the two adjacent directions gets
// p_slip / 2, and walls resolve to a self-transition.
inline void rebuild_slip_transitions(WorldModel& world, double p_slip) {
  if (!(p_slip >= 0.0 && p_slip <= 1.0)) throw ParameterError("p_slip must lie in [0, 1]");
  const std::size_t A = world.num_actions;
  world.transitions.assign(world.num_states * A, {});
  for (StateId s = 0; s < world.num_states; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      std::map<StateId, double> mass;
      auto land = [&](ActionId dir, double p) {
        if (p <= 0.0) return;
        const StateId nb = world.neighbors[world.index(s, dir)];
        mass[nb == kWall ? s : nb] += p;
      };
      land(a, 1.0 - p_slip);
      land((a + 1) % A, p_slip / 2.0);
      land((a + A - 1) % A, p_slip / 2.0);
      auto& outs = world.transitions[world.index(s, a)];
      for (auto [next, p] : mass) outs.push_back({next, p});
    }
  }
}

// Elongated rows x cols grid from which cells are removed at random until
// num_states free cells remain, keeping the free region connected. Role cells
// are then assigned: resets at the two extremities, the goal midway between
// them, and the relocation target at the dead-end farthest from the goal.
// Deterministic in seed.
inline WorldModel generate_arena(std::uint64_t seed, const ArenaParams& params = {}) {
  const int rows = params.rows, cols = params.cols;
  const std::size_t n = params.num_states;
  if (rows <= 0 || cols <= 0) throw GenerationError("arena grid must be non-empty");
  if (n < 4 || n > static_cast<std::size_t>(rows * cols))
    throw GenerationError("num_states must lie in [4, rows * cols]");
  if (!(params.p_slip >= 0.0 && params.p_slip <= 1.0)) throw ParameterError("p_slip must lie in [0, 1]");
  const std::array<StateId, 4> roles{params.resets[0], params.resets[1], params.goal, params.relocated_goal};
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] >= n) throw GenerationError("role state ids must be < num_states");
    for (std::size_t j = 0; j < i; ++j)
      if (roles[i] == roles[j]) throw GenerationError("role state ids must be distinct");
  }

  Rng rng(seed);
  const std::size_t total = static_cast<std::size_t>(rows * cols);
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    std::vector<char> free(total, 1);
    std::size_t remaining = total;
    int stalls = 0;
    while (remaining > n && stalls < 200) {
      const std::size_t cell = rng.below(total);
      if (!free[cell]) continue;
      free[cell] = 0;
      if (detail::four_connected(free, rows, cols)) {
        --remaining;
        stalls = 0;
      } else {
        free[cell] = 1;
        ++stalls;
      }
    }
    if (remaining != n) continue;

    // Extremities: leftmost and rightmost free cells (top-most on ties).
    int left = -1, right = -1;
    for (int c = 0; c < cols && left < 0; ++c)
      for (int r = 0; r < rows && left < 0; ++r)
        if (free[static_cast<std::size_t>(r * cols + c)]) left = r * cols + c;
    for (int c = cols - 1; c >= 0 && right < 0; --c)
      for (int r = 0; r < rows && right < 0; ++r)
        if (free[static_cast<std::size_t>(r * cols + c)]) right = r * cols + c;
    const auto dl = detail::grid_distances(free, rows, cols, left);
    const auto dr = detail::grid_distances(free, rows, cols, right);

    // Goal: maximizes the shorter of the two distances to the extremities.
    int goal = -1, best = -1;
    for (std::size_t i = 0; i < total; ++i) {
      if (!free[i] || static_cast<int>(i) == left || static_cast<int>(i) == right) continue;
      const int score = std::min(dl[i], dr[i]);
      if (score > best) {
        best = score;
        goal = static_cast<int>(i);
      }
    }
    if (goal < 0) continue;

    // Relocation target: the dead-end (single orthogonal opening) farthest
    // from the goal.
    const auto dg = detail::grid_distances(free, rows, cols, goal);
    int moved = -1;
    best = -1;
    for (std::size_t i = 0; i < total; ++i) {
      const int ci = static_cast<int>(i);
      if (!free[i] || ci == left || ci == right || ci == goal) continue;
      if (detail::orthogonal_degree(free, rows, cols, ci) != 1) continue;
      if (dg[i] > best) {
        best = dg[i];
        moved = ci;
      }
    }
    if (moved < 0) continue;

    // Dense ids: role cells get their prescribed ids, the others fill the
    // remaining ids in column-major order.
    std::vector<StateId> id_of(total, kWall);
    id_of[static_cast<std::size_t>(left)] = params.resets[0];
    id_of[static_cast<std::size_t>(right)] = params.resets[1];
    id_of[static_cast<std::size_t>(goal)] = params.goal;
    id_of[static_cast<std::size_t>(moved)] = params.relocated_goal;
    std::vector<char> taken(n, 0);
    for (StateId r : roles) taken[r] = 1;
    StateId next_id = 0;
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) {
        const std::size_t i = static_cast<std::size_t>(r * cols + c);
        if (!free[i] || id_of[i] != kWall) continue;
        while (taken[next_id]) ++next_id;
        id_of[i] = next_id;
        taken[next_id] = 1;
      }
    }

    WorldModel world;
    world.num_states = n;
    world.num_actions = kNumDirections;
    world.neighbors.assign(n * kNumDirections, kWall);
    world.cells.resize(n);
    for (std::size_t i = 0; i < total; ++i) {
      if (!free[i]) continue;
      const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
      const StateId s = id_of[i];
      world.cells[s] = {r, c};
      for (std::size_t d = 0; d < kNumDirections; ++d) {
        const int j = detail::move_target(free, rows, cols, r, c, d);
        if (j >= 0) world.neighbors[world.index(s, d)] = id_of[static_cast<std::size_t>(j)];
      }
    }
    rebuild_slip_transitions(world, params.p_slip);
    world.goal = params.goal;
    world.resets = {params.resets[0], params.resets[1]};
    world.schedule = {ChangeEvent{1600, RewardMove{params.relocated_goal}}};
    validate_world(world);
    return world;
  }
  throw GenerationError("could not generate a connected arena with a dead-end for seed " + std::to_string(seed));
}

// Blocks every (s, a) whose intended move enters one of the given states.
inline ChangeEvent obstacle_event(const WorldModel& world, std::size_t at_step, std::span<const StateId> cells) {
  AddObstacles obs;
  for (StateId s = 0; s < world.num_states; ++s) {
    for (ActionId a = 0; a < world.num_actions; ++a) {
      const StateId nb = world.neighbors[world.index(s, a)];
      if (nb != kWall && std::find(cells.begin(), cells.end(), nb) != cells.end()) obs.blocked.emplace_back(s, a);
    }
  }
  return {at_step, std::move(obs)};
}

// Shortest intended-move path length, ignoring slip.
inline std::size_t shortest_path_length(const WorldModel& world, StateId from, StateId to) {
  std::vector<std::size_t> dist(world.num_states, std::numeric_limits<std::size_t>::max());
  std::deque<StateId> q{from};
  dist[from] = 0;
  while (!q.empty()) {
    const StateId s = q.front();
    q.pop_front();
    for (ActionId a = 0; a < world.num_actions; ++a) {
      const StateId nb = world.neighbors[world.index(s, a)];
      if (nb != kWall && dist[nb] == std::numeric_limits<std::size_t>::max()) {
        dist[nb] = dist[s] + 1;
        q.push_back(nb);
      }
    }
  }
  return dist[to];
}

}  // namespace mbmf
