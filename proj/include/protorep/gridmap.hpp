#pragma once

#include <string>
#include <utility>
#include <vector>

#include "protorep/mdp.hpp"

namespace protorep {

/// Parsed grid world.  Cell legend: '#' wall, '.' empty, 'L' low-reward,
/// 'S' start (empty-reward), 'G' goal (terminal).  The optional header line
/// `!reward empty=<v> low=<v> goal=<v>` overrides the default three-level
/// rewards (-1, -20, 0).
struct GridMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::string> cells;  // rows strings, all of length cols
  double reward_empty = -1.0;
  double reward_low = -20.0;
  double reward_goal = 0.0;

  std::vector<int> cell_state;                  // rows*cols, -1 on walls
  std::vector<std::pair<int, int>> state_cell;  // state -> (row, col)

  char at(int r, int c) const { return cells[static_cast<size_t>(r)][static_cast<size_t>(c)]; }
  int state_at(int r, int c) const { return cell_state[static_cast<size_t>(r) * cols + c]; }
  int n_states() const { return static_cast<int>(state_cell.size()); }
};

/// Named reward/terminal ablations of a grid environment.
struct VariantFlags {
  bool no_low_reward = false;  // low-reward cells pay the empty reward
  bool no_terminals = false;   // goal cells become plain empty cells
  bool operator==(const VariantFlags&) const = default;
};

/// Accepts "standard", "no_low_reward", "no_terminals",
/// "no_low_reward_no_terminals"; anything else is a config error.
VariantFlags parse_variant(const std::string& name);
std::string variant_name(VariantFlags flags);

/// Parses the text form above.  Enforces: rectangular, at least one start,
/// walls optional at the border but movement clamps at the edge, and every
/// non-wall cell reachable from some start.  Throws ConfigError otherwise.
GridMap parse_grid_map(const std::string& text);

/// Rewrites cells per the variant ('L' -> '.', 'G' -> '.').
GridMap apply_variant(const GridMap& map, VariantFlags flags);

/// Inverse of parse_grid_map up to the canonical header ordering.
std::string serialize_grid_map(const GridMap& map);

/// Builds the 4-action MDP: actions 0=up 1=down 2=left 3=right; moving into a
/// wall or off the edge stays put; transitions are deterministic; rewards
/// attach to states; 'G' cells are absorbing with the goal reward.
TabularMdp grid_mdp(const GridMap& map);

/// One value per walkable cell laid out on the grid; wall cells are emitted
/// as empty CSV cells.  `values` has one entry per state.
std::string heatmap_csv(const GridMap& map, const Vector& values);

/// Grey-to-red shading of the same data, walls black; returns an SVG document.
std::string heatmap_svg(const GridMap& map, const Vector& values);

}  // namespace protorep
