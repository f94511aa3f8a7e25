#include "protorep/envs.hpp"

#include <cmath>
#include <sstream>

#include "protorep_assets_gen.hpp"
#include "protorep/errors.hpp"

namespace protorep {

namespace {

const std::vector<std::string> k_names = {
    "grid_task",          "four_rooms", "grid_room",
    "grid_maze",          "grid_room_large", "grid_maze_large",
    "four_rooms_multigoal", "riverswim",  "sixarms"};

bool is_grid(const std::string& name) {
  return name != "riverswim" && name != "sixarms";
}

}  // namespace

const std::vector<std::string>& environment_names() { return k_names; }

const char* find_asset(const std::string& file_name) {
  for (const auto& a : assets::k_assets)
    if (file_name == a.name) return a.text;
  return nullptr;
}

TabularMdp parse_tabular_env(const std::string& text) {
  TabularMdp mdp;
  mdp.reward_on = TabularMdp::RewardOn::StateAction;
  int n_states = -1, n_actions = -1;
  struct Entry {
    int s, a, s2;
    double v;
  };
  std::vector<Entry> trans;
  std::vector<std::pair<int, double>> starts;
  std::vector<Entry> rewards;
  std::vector<int> terminals;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    auto need = [&](auto&... xs) {
      if (!((ls >> xs) && ...))
        throw ConfigError("env line " + std::to_string(lineno) + ": malformed '" + tag +
                          "' entry");
    };
    if (tag == "states") need(n_states);
    else if (tag == "actions") need(n_actions);
    else if (tag == "start") {
      int s; double p;
      need(s, p);
      starts.emplace_back(s, p);
    } else if (tag == "t") {
      Entry e{};
      need(e.s, e.a, e.s2, e.v);
      trans.push_back(e);
    } else if (tag == "r") {
      Entry e{};
      e.s2 = -1;
      need(e.s, e.a, e.v);
      rewards.push_back(e);
    } else if (tag == "terminal") {
      int s;
      need(s);
      terminals.push_back(s);
    } else {
      throw ConfigError("env line " + std::to_string(lineno) + ": unknown tag '" + tag + "'");
    }
  }
  if (n_states <= 0 || n_actions <= 0)
    throw ConfigError("env: missing or invalid 'states'/'actions' declarations");
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.P.assign(static_cast<size_t>(n_actions), Matrix::Zero(n_states, n_states));
  mdp.reward_sa = Matrix::Zero(n_states, n_actions);
  mdp.terminal.assign(static_cast<size_t>(n_states), 0);
  mdp.start = Vector::Zero(n_states);

  auto check_state = [&](int s, const char* what) {
    if (s < 0 || s >= n_states)
      throw ConfigError(std::string("env: ") + what + " state " + std::to_string(s) +
                        " out of range");
  };
  for (int s : terminals) {
    check_state(s, "terminal");
    mdp.terminal[static_cast<size_t>(s)] = 1;
  }
  for (const auto& e : trans) {
    check_state(e.s, "transition");
    check_state(e.s2, "transition target");
    if (e.a < 0 || e.a >= n_actions) throw ConfigError("env: action out of range");
    mdp.P[static_cast<size_t>(e.a)](e.s, e.s2) += e.v;
  }
  for (const auto& e : rewards) {
    check_state(e.s, "reward");
    if (e.a < 0 || e.a >= n_actions) throw ConfigError("env: reward action out of range");
    mdp.reward_sa(e.s, e.a) = e.v;
  }
  for (auto [s, p] : starts) {
    check_state(s, "start");
    mdp.start[s] = p;
  }
  // Terminal rows are zero by contract even if the file listed none.
  for (int s = 0; s < n_states; ++s)
    if (mdp.is_terminal(s))
      for (auto& P : mdp.P) P.row(s).setZero();
  mdp.validate();
  return mdp;
}

Environment make_environment(const std::string& name, const std::string& variant) {
  Environment env;
  env.name = name;
  env.variant = parse_variant(variant);
  if (is_grid(name)) {
    const char* text = find_asset(name + ".map");
    if (!text) throw ConfigError("unknown environment '" + name + "'");
    GridMap base = parse_grid_map(text);
    env.map = apply_variant(base, env.variant);
    env.mdp = grid_mdp(*env.map);
  } else {
    if (env.variant != VariantFlags{})
      throw ConfigError("variant '" + variant + "' does not apply to environment '" + name +
                        "'");
    const char* text = find_asset(name + ".env");
    if (!text) throw ConfigError("unknown environment '" + name + "'");
    env.mdp = parse_tabular_env(text);
  }
  return env;
}

Matrix cell_type_features(const GridMap& map, const TabularMdp& mdp) {
  const auto goals = mdp.terminal_states();
  const int d = 2 + static_cast<int>(goals.size());
  Matrix phi = Matrix::Zero(mdp.n_states, d);
  for (int s = 0; s < mdp.n_states; ++s) {
    auto [r, c] = map.state_cell[static_cast<size_t>(s)];
    const char ch = map.at(r, c);
    if (ch == 'G') {
      const auto it = std::find(goals.begin(), goals.end(), s);
      phi(s, 2 + static_cast<int>(it - goals.begin())) = 1.0;
    } else if (ch == 'L') {
      phi(s, 1) = 1.0;
    } else {
      phi(s, 0) = 1.0;
    }
  }
  return phi;
}

Matrix goal_indicator_features(const TabularMdp& mdp) {
  const auto goals = mdp.terminal_states();
  return Matrix::Identity(static_cast<Eigen::Index>(goals.size()),
                          static_cast<Eigen::Index>(goals.size()));
}

}  // namespace protorep
