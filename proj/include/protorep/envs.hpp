#pragma once

#include <optional>
#include <string>
#include <vector>

#include "protorep/gridmap.hpp"
#include "protorep/mdp.hpp"

namespace protorep {

/// A named, variant-resolved environment ready for learning or planning.
struct Environment {
  std::string name;
  VariantFlags variant;
  TabularMdp mdp;
  std::optional<GridMap> map;  // present for grid environments only
};

/// The shipped environment catalogue, in canonical order.
const std::vector<std::string>& environment_names();

/// Loads an embedded environment by name; variants apply to grids only
/// (requesting one on a non-grid environment is a config error).
Environment make_environment(const std::string& name,
                             const std::string& variant = "standard");

/// Parses the flat text format of data/*.env files: `states N`, `actions N`,
/// `start s p`, `t s a s' p`, `r s a v`, `terminal s` lines, '#' comments.
TabularMdp parse_tabular_env(const std::string& text);

/// Embedded asset lookup by file name (e.g. "grid_task.map"); nullptr when
/// absent.
const char* find_asset(const std::string& file_name);

/// Cell-type indicator features over all states: columns are
/// [empty, low, goal_0, goal_1, ...] with goals ordered by state index.
/// Start cells count as empty.  d = 2 + #goals.
Matrix cell_type_features(const GridMap& map, const TabularMdp& mdp);

/// Identity feature per terminal state (rows follow terminal-state order);
/// the feature matrix handed to terminal-feature planning.
Matrix goal_indicator_features(const TabularMdp& mdp);

}  // namespace protorep
