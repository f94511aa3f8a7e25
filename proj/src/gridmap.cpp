#include "protorep/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "protorep/csvio.hpp"
#include "protorep/errors.hpp"

namespace protorep {

VariantFlags parse_variant(const std::string& name) {
  if (name == "standard" || name.empty()) return {};
  if (name == "no_low_reward") return {.no_low_reward = true, .no_terminals = false};
  if (name == "no_terminals") return {.no_low_reward = false, .no_terminals = true};
  if (name == "no_low_reward_no_terminals")
    return {.no_low_reward = true, .no_terminals = true};
  throw ConfigError("unknown variant '" + name +
                    "' (expected standard, no_low_reward, no_terminals, "
                    "no_low_reward_no_terminals)");
}

std::string variant_name(VariantFlags flags) {
  if (flags.no_low_reward && flags.no_terminals) return "no_low_reward_no_terminals";
  if (flags.no_low_reward) return "no_low_reward";
  if (flags.no_terminals) return "no_terminals";
  return "standard";
}

namespace {

void parse_reward_header(const std::string& line, GridMap& map) {
  std::istringstream in(line);
  std::string tag;
  in >> tag;  // "!reward"
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad reward header entry '" + kv + "' (want key=value)");
    const std::string key = kv.substr(0, eq);
    double value = 0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad reward value in header entry '" + kv + "'");
    }
    if (key == "empty") map.reward_empty = value;
    else if (key == "low") map.reward_low = value;
    else if (key == "goal") map.reward_goal = value;
    else throw ConfigError("unknown reward key '" + key + "' in map header");
  }
}

}  // namespace

GridMap parse_grid_map(const std::string& text) {
  GridMap map;
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  size_t i = 0;
  while (i < lines.size() && (lines[i].empty() || lines[i][0] == '!')) {
    if (!lines[i].empty() && lines[i].rfind("!reward", 0) == 0) parse_reward_header(lines[i], map);
    ++i;
  }
  for (; i < lines.size(); ++i) {
    if (lines[i].empty()) break;  // blank line ends the grid
    map.cells.push_back(lines[i]);
  }
  for (; i < lines.size(); ++i)
    if (!lines[i].empty()) throw ConfigError("map: content after the grid block");

  if (map.cells.empty()) throw ConfigError("map: no grid rows");
  map.rows = static_cast<int>(map.cells.size());
  map.cols = static_cast<int>(map.cells.front().size());
  if (map.cols == 0) throw ConfigError("map: empty first row");
  for (int r = 0; r < map.rows; ++r) {
    if (static_cast<int>(map.cells[static_cast<size_t>(r)].size()) != map.cols)
      throw ConfigError("map: row " + std::to_string(r) + " has length " +
                        std::to_string(map.cells[static_cast<size_t>(r)].size()) +
                        ", expected " + std::to_string(map.cols));
    for (int c = 0; c < map.cols; ++c) {
      const char ch = map.at(r, c);
      if (ch != '#' && ch != '.' && ch != 'L' && ch != 'S' && ch != 'G')
        throw ConfigError(std::string("map: illegal cell '") + ch + "' at row " +
                          std::to_string(r) + " col " + std::to_string(c));
    }
  }

  map.cell_state.assign(static_cast<size_t>(map.rows) * map.cols, -1);
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c)
      if (map.at(r, c) != '#') {
        map.cell_state[static_cast<size_t>(r) * map.cols + c] = map.n_states();
        map.state_cell.emplace_back(r, c);
      }
  if (map.state_cell.empty()) throw ConfigError("map: no walkable cells");

  bool has_start = false;
  for (auto [r, c] : map.state_cell) has_start |= map.at(r, c) == 'S';
  if (!has_start) throw ConfigError("map: no start cell");

  // Every walkable cell must be enterable from some start; search does not
  // continue through goals (nothing leaves an absorbing cell).
  std::vector<char> seen(map.state_cell.size(), 0);
  std::deque<int> frontier;
  for (int s = 0; s < map.n_states(); ++s) {
    auto [r, c] = map.state_cell[static_cast<size_t>(s)];
    if (map.at(r, c) == 'S') {
      seen[static_cast<size_t>(s)] = 1;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop_front();
    auto [r, c] = map.state_cell[static_cast<size_t>(s)];
    if (map.at(r, c) == 'G') continue;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= map.rows || nc < 0 || nc >= map.cols) continue;
      const int t = map.state_at(nr, nc);
      if (t < 0 || seen[static_cast<size_t>(t)]) continue;
      seen[static_cast<size_t>(t)] = 1;
      frontier.push_back(t);
    }
  }
  for (int s = 0; s < map.n_states(); ++s)
    if (!seen[static_cast<size_t>(s)]) {
      auto [r, c] = map.state_cell[static_cast<size_t>(s)];
      throw ConfigError("map: cell at row " + std::to_string(r) + " col " +
                        std::to_string(c) + " is unreachable from every start");
    }
  return map;
}

GridMap apply_variant(const GridMap& map, VariantFlags flags) {
  if (!flags.no_low_reward && !flags.no_terminals) return map;
  GridMap out = map;
  for (auto& row : out.cells)
    for (auto& ch : row) {
      if (flags.no_low_reward && ch == 'L') ch = '.';
      if (flags.no_terminals && ch == 'G') ch = '.';
    }
  // Cell/state indexing is unchanged (walls did not move).
  return out;
}

std::string serialize_grid_map(const GridMap& map) {
  std::string out = "!reward empty=" + format_double(map.reward_empty) +
                    " low=" + format_double(map.reward_low) +
                    " goal=" + format_double(map.reward_goal) + "\n";
  for (const auto& row : map.cells) {
    out += row;
    out += '\n';
  }
  return out;
}

TabularMdp grid_mdp(const GridMap& map) {
  TabularMdp mdp;
  mdp.n_states = map.n_states();
  mdp.n_actions = 4;
  mdp.P.assign(4, Matrix::Zero(mdp.n_states, mdp.n_states));
  mdp.reward_on = TabularMdp::RewardOn::State;
  mdp.reward_state = Vector::Zero(mdp.n_states);
  mdp.terminal.assign(static_cast<size_t>(mdp.n_states), 0);
  mdp.start = Vector::Zero(mdp.n_states);
  mdp.state_names.resize(static_cast<size_t>(mdp.n_states));

  int n_starts = 0;
  for (int s = 0; s < mdp.n_states; ++s) {
    auto [r, c] = map.state_cell[static_cast<size_t>(s)];
    const char ch = map.at(r, c);
    mdp.state_names[static_cast<size_t>(s)] = "r" + std::to_string(r) + "c" + std::to_string(c);
    switch (ch) {
      case 'L': mdp.reward_state[s] = map.reward_low; break;
      case 'G':
        mdp.reward_state[s] = map.reward_goal;
        mdp.terminal[static_cast<size_t>(s)] = 1;
        break;
      case 'S':
        mdp.start[s] = 1.0;
        ++n_starts;
        [[fallthrough]];
      default: mdp.reward_state[s] = map.reward_empty; break;
    }
  }
  mdp.start /= static_cast<double>(n_starts);

  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    auto [r, c] = map.state_cell[static_cast<size_t>(s)];
    for (int a = 0; a < 4; ++a) {
      const int nr = r + dr[a], nc = c + dc[a];
      int t = s;  // bump into wall or edge: stay put
      if (nr >= 0 && nr < map.rows && nc >= 0 && nc < map.cols && map.state_at(nr, nc) >= 0)
        t = map.state_at(nr, nc);
      mdp.P[a](s, t) = 1.0;
    }
  }
  mdp.validate();
  return mdp;
}

std::string heatmap_csv(const GridMap& map, const Vector& values) {
  if (values.size() != map.n_states())
    throw ConfigError("heatmap: value vector has " + std::to_string(values.size()) +
                      " entries, map has " + std::to_string(map.n_states()) + " states");
  // One row per non-wall cell; x is the column, y the row.
  std::string out = "x,y,value\n";
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      const int s = map.state_at(r, c);
      if (s < 0) continue;
      out += std::to_string(c) + ',' + std::to_string(r) + ',' + format_double(values[s]) + '\n';
    }
  return out;
}

std::string heatmap_svg(const GridMap& map, const Vector& values) {
  if (values.size() != map.n_states())
    throw ConfigError("heatmap: value vector size mismatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < map.n_states(); ++s) {
    const double v = values[s];
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0;
    hi = 1;
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const int cell = 24;
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(map.cols * cell) + "\" height=\"" + std::to_string(map.rows * cell) +
      "\">\n";
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      const int s = map.state_at(r, c);
      std::string fill = "#000000";
      if (s >= 0) {
        const double v = values[s];
        double t = std::isfinite(v) ? (v - lo) / span : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const int red = 230;
        const int gb = static_cast<int>(std::lround(235.0 * (1.0 - t)));
        char buf[8];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", red, gb, gb);
        fill = buf;
      }
      svg += "<rect x=\"" + std::to_string(c * cell) + "\" y=\"" + std::to_string(r * cell) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
             "\" fill=\"" + fill + "\"/>\n";
      if (s >= 0 && (map.at(r, c) == 'L' || map.at(r, c) == 'G' || map.at(r, c) == 'S')) {
        svg += "<text x=\"" + std::to_string(c * cell + 7) + "\" y=\"" +
               std::to_string(r * cell + 17) + "\" font-size=\"12\">" + map.at(r, c) +
               "</text>\n";
      }
    }
  svg += "</svg>\n";
  return svg;
}

}  // namespace protorep
