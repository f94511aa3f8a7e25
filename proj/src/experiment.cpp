#include "protorep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "protorep/agents.hpp"
#include "protorep/csvio.hpp"
#include "protorep/envs.hpp"
#include "protorep/errors.hpp"
#include "protorep/gridmap.hpp"
#include "protorep/logdomain.hpp"
#include "protorep/planning.hpp"
#include "protorep/represent.hpp"
#include "protorep/rng.hpp"
#include "protorep/rod.hpp"
#include "protorep/stats.hpp"

namespace protorep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double_or_throw(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw ConfigError("key '" + key + "': '" + text + "' is not a number");
  return v;
}

long parse_long_or_throw(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long v = 0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
  return v;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    for (char c : key)
      if (!(std::islower(static_cast<unsigned char>(c)) ||
            std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                          "' may only use [a-z0-9_]");
    if (value.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                        "' has no value");
    if (cfg.kv_.count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::load(const fs::path& path) {
  return parse(read_text_file(path));
}

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  if (v.find(',') != std::string::npos)
    throw ConfigError("key '" + key + "' does not accept a list here");
  return parse_double_or_throw(key, v);
}

double KvConfig::get_double(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}

long KvConfig::get_long(const std::string& key, long dflt) const {
  if (!has(key)) return dflt;
  const std::string v = get_string(key);
  if (v.find(',') != std::string::npos)
    throw ConfigError("key '" + key + "' does not accept a list here");
  return parse_long_or_throw(key, v);
}

int KvConfig::get_int(const std::string& key, int dflt) const {
  return static_cast<int>(get_long(key, dflt));
}

bool KvConfig::get_bool(const std::string& key, bool dflt) const {
  if (!has(key)) return dflt;
  const std::string v = get_string(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  const std::string v = get_string(key);
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    const size_t comma = v.find(',', pos);
    const std::string item = trim(v.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos));
    if (item.empty()) throw ConfigError("key '" + key + "': empty list item");
    out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void KvConfig::expect_only(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : kv_) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key '" + key + "'");
  }
}

std::string KvConfig::echo() const {
  std::string out;
  for (const auto& [key, value] : kv_) out += key + " = " + value + "\n";
  return out;
}

std::string CellSpec::label() const {
  std::string out;
  for (const auto& [k, v] : assignment) {
    if (!out.empty()) out += ',';
    out += k + "=" + v;
  }
  return out.empty() ? "default" : out;
}

namespace {

// --- schema -----------------------------------------------------------------

struct Schema {
  std::vector<std::string> axes;   // sweepable keys in declaration order
  std::vector<std::string> known;  // every accepted key
  const char* x_axis;
  const char* y_axis;
};

const Schema& schema_for(const std::string& experiment) {
  static const std::vector<std::string> common = {"experiment", "env",  "variant",
                                                  "seed",       "runs", "out",
                                                  "sweep_runs", "final_runs"};
  auto build = [](std::vector<std::string> axes, std::vector<std::string> extra,
                  const char* x, const char* y) {
    Schema s;
    s.axes = axes;
    s.known = common;
    s.known.insert(s.known.end(), axes.begin(), axes.end());
    s.known.insert(s.known.end(), extra.begin(), extra.end());
    s.x_axis = x;
    s.y_axis = y;
    return s;
  };
  static const std::map<std::string, Schema> schemas = {
      {"shaping", build({"shaping", "alpha", "beta"},
                        {"algo", "gamma", "epsilon", "lambda", "episodes", "step_cap", "q_init"},
                        "episode", "return")},
      {"rod", build({"kind", "p_option", "alpha", "n_learn", "n_option"},
                    {"n_iter", "n_steps", "lambda", "gamma", "option_sweeps", "alpha0",
                     "gamma0", "option_step_cap", "with_q", "q_alpha", "q_gamma", "q_sweeps",
                     "q_eval_cap"},
                    "iteration", "visited_frac")},
      {"count", build({"alpha", "eta", "beta", "lambda", "epsilon"},
                      {"algo", "gamma", "total_steps", "q_init"}, "steps", "total_return")},
      {"transfer", build({"method"},
                         {"configs", "lambda", "gamma", "alpha", "epsilon", "sf_train_steps",
                          "df_train_steps", "step_cap"},
                         "config", "return")},
      {"repr_analysis",
       build({"kind", "lambda", "gamma"}, {"bits"}, "index", "top_eigenvalue")},
  };
  auto it = schemas.find(experiment);
  if (it == schemas.end())
    throw ConfigError("unknown experiment '" + experiment +
                      "' (expected shaping, rod, count, transfer or repr_analysis)");
  return it->second;
}

KvConfig merged_config(const KvConfig& base, const CellSpec& cell) {
  KvConfig out = base;
  for (const auto& [k, v] : cell.assignment) out.set(k, v);
  return out;
}

ControlAlgo algo_from_name(const std::string& name) {
  if (name == "q") return ControlAlgo::QLearning;
  if (name == "sarsa") return ControlAlgo::Sarsa;
  throw ConfigError("unknown algo '" + name + "' (expected q or sarsa)");
}

// Reward-configuration stream id for transfer; far above any real cell index
// so test rewards are shared across methods and seeds.
constexpr std::uint64_t kRewardStream = 1000003;

// --- per-task results ---------------------------------------------------------

struct TaskResult {
  RunTable table;
  // Extra per-run artifacts: (file name suffix, bytes), stored next to the
  // run's raw CSV.
  std::vector<std::pair<std::string, std::string>> aux;
};

// Lazily computed shaping potentials, shared across tasks of one phase.
struct ShapingCtx {
  std::mutex mu;
  std::map<std::string, Vector> potentials;
  int goal_state = -1;
};

Vector shaping_potential(ShapingCtx& ctx, const ExperimentPlan& plan, const Environment& envr,
                         ShapingKind kind, double gamma, double lambda, int* goal_state) {
  std::lock_guard<std::mutex> lock(ctx.mu);
  const std::string name = shaping_kind_name(kind);
  auto it = ctx.potentials.find(name);
  if (it == ctx.potentials.end()) {
    const TabularMdp& mdp = envr.mdp;
    const Matrix pol = uniform_policy(mdp);
    std::vector<int> all(static_cast<size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) all[static_cast<size_t>(s)] = s;
    Vector e;
    if (kind == ShapingKind::DrPotential) {
      const ProtoRep rep = dr_closed_form(mdp, pol, lambda);
      e = dr_top_eigenvector(LogNonNegMatrix::from_hp(*rep.hp), all, mdp.n_states).vector;
    } else {
      const ProtoRep rep = sr_closed_form(mdp, pol, gamma);
      e = sr_top_eigenvector(rep.dense, all, mdp.n_states).vector;
    }
    if (kind == ShapingKind::SrPrior) {
      const std::vector<int> goals = mdp.terminal_states();
      if (goals.size() != 1)
        throw ConfigError("sr_prior shaping needs exactly one terminal state, environment has " +
                          std::to_string(goals.size()));
      ctx.goal_state = goals[0];
    }
    Matrix row(1, e.size());
    row.row(0) = e.transpose();
    write_text_file(plan.out_dir / "representations" / ("potential_" + name + ".csv"),
                    matrix_to_csv(row));
    it = ctx.potentials.emplace(name, std::move(e)).first;
  }
  *goal_state = ctx.goal_state;
  return it->second;
}

// --- task runners ---------------------------------------------------------

TaskResult run_shaping_task(const ExperimentPlan& plan, const KvConfig& cfg, ShapingCtx& ctx,
                            std::uint64_t seed) {
  const Environment envr = make_environment(plan.env, plan.variant);
  AgentSpec spec;
  spec.algo = algo_from_name(cfg.get_string("algo", "q"));
  spec.alpha = cfg.get_double("alpha", 0.1);
  spec.gamma = cfg.get_double("gamma", 0.99);
  spec.epsilon = cfg.get_double("epsilon", 0.05);
  spec.q_init = cfg.get_double("q_init", 0.0);
  const double lambda = cfg.get_double("lambda", 1.3);
  RunSpec run;
  run.episodes = cfg.get_int("episodes", 200);
  run.step_cap = cfg.get_int("step_cap", 1000);
  run.total_steps = 0;

  const ShapingKind kind = shaping_kind_from_name(cfg.get_string("shaping", "none"));
  ShapingConfig shaping;
  shaping.kind = kind;
  shaping.beta = cfg.get_double("beta", 0.5);
  shaping.gamma = spec.gamma;
  if (kind != ShapingKind::None)
    shaping.e =
        shaping_potential(ctx, plan, envr, kind, spec.gamma, lambda, &shaping.goal_state);

  const AgentRunResult res = run_control_loop(
      envr.mdp, spec, kind == ShapingKind::None ? nullptr : &shaping, nullptr, run, seed);

  TaskResult out;
  out.table.extra_columns = {"steps", "reached"};
  for (const EpisodeRow& ep : res.episodes)
    out.table.rows.push_back({static_cast<double>(ep.episode), ep.return_env,
                              static_cast<double>(ep.steps),
                              ep.reached_terminal ? 1.0 : 0.0});
  return out;
}

TaskResult run_rod_task(const ExperimentPlan& plan, const KvConfig& cfg, std::uint64_t seed) {
  const Environment base = make_environment(plan.env, plan.variant);
  Environment explore;
  if (base.map.has_value()) {
    VariantFlags flags = parse_variant(plan.variant);
    flags.no_terminals = true;
    explore = make_environment(plan.env, variant_name(flags));
  } else {
    for (int s = 0; s < base.mdp.n_states; ++s)
      if (base.mdp.is_terminal(s))
        throw ConfigError("environment '" + plan.env +
                          "' has terminal states and no terminal-free variant");
    explore = base;
  }

  RodConfig rc;
  rc.kind = rod_kind_from_name(cfg.get_string("kind", "race"));
  rc.n_iter = cfg.get_int("n_iter", 50);
  rc.n_steps = cfg.get_int("n_steps", 100);
  rc.p_option = cfg.get_double("p_option", 0.05);
  rc.n_option = cfg.get_int("n_option", 8);
  rc.n_learn = cfg.get_int("n_learn", 10);
  rc.alpha = cfg.get_double("alpha", 0.1);
  rc.lambda = cfg.get_double("lambda", 1.3);
  rc.gamma = cfg.get_double("gamma", 0.99);
  rc.option_sweeps = cfg.get_int("option_sweeps", 10);
  rc.alpha0 = cfg.get_double("alpha0", 0.1);
  rc.gamma0 = cfg.get_double("gamma0", 0.99);
  rc.option_step_cap = cfg.get_int("option_step_cap", 100);
  rc.with_q = cfg.get_bool("with_q", false);
  rc.q_alpha = cfg.get_double("q_alpha", 0.1);
  rc.q_gamma = cfg.get_double("q_gamma", 0.99);
  rc.q_sweeps = cfg.get_int("q_sweeps", 10);
  rc.q_eval_cap = cfg.get_int("q_eval_cap", 500);

  const RodResult res = run_rod(explore.mdp, rc, seed, rc.with_q ? &base.mdp : nullptr);

  TaskResult out;
  out.table.extra_columns = {"visited_frac", "mean_step_reward", "options", "env_steps"};
  for (const RodIterationRow& row : res.rows) {
    const double y = rc.with_q ? row.eval_return : row.visited_frac;
    out.table.rows.push_back({static_cast<double>(row.iter), y, row.visited_frac,
                              row.mean_step_reward, static_cast<double>(row.options),
                              static_cast<double>(row.env_steps)});
  }
  std::string counts = "state,count\n";
  for (size_t s = 0; s < res.visit_counts.size(); ++s)
    counts += std::to_string(s) + ',' + std::to_string(res.visit_counts[s]) + '\n';
  out.aux.emplace_back("_counts.csv", std::move(counts));
  return out;
}

TaskResult run_count_task(const ExperimentPlan& plan, const KvConfig& cfg, std::uint64_t seed) {
  const Environment envr = make_environment(plan.env, plan.variant);
  AgentSpec spec;
  spec.algo = algo_from_name(cfg.get_string("algo", "sarsa"));
  spec.alpha = cfg.get_double("alpha", 0.5);
  spec.gamma = cfg.get_double("gamma", 0.95);
  spec.epsilon = cfg.get_double("epsilon", 0.01);
  spec.q_init = cfg.get_double("q_init", 0.0);
  RunSpec run;
  run.episodes = 1;
  run.step_cap = 0;
  run.total_steps = cfg.get_long("total_steps", 5000);

  BonusConfig bonus;
  bonus.beta = cfg.get_double("beta", 100.0);
  bonus.eta = cfg.get_double("eta", 0.25);
  bonus.lambda = cfg.get_double("lambda", 1.0);
  const bool with_bonus = bonus.beta != 0.0;

  const AgentRunResult res =
      run_control_loop(envr.mdp, spec, nullptr, with_bonus ? &bonus : nullptr, run, seed);

  TaskResult out;
  out.table.rows.push_back({static_cast<double>(res.total_steps), res.total_return});
  return out;
}

TaskResult run_transfer_task(const ExperimentPlan& plan, const KvConfig& cfg,
                             std::uint64_t seed) {
  const Environment envr = make_environment(plan.env, plan.variant);
  if (!envr.map.has_value())
    throw ConfigError("transfer needs a grid environment, got '" + plan.env + "'");
  const TabularMdp& mdp = envr.mdp;
  const std::vector<int> goals = mdp.terminal_states();
  const int T = static_cast<int>(goals.size());
  if (T < 1) throw ConfigError("transfer needs at least one terminal state");

  const std::string method = cfg.get_string("method");
  const int n_configs = cfg.get_int("configs", 50);
  if (n_configs < 1) throw ConfigError("configs must be >= 1");
  const double lambda = cfg.get_double("lambda", 1.3);
  const double gamma = cfg.get_double("gamma", 0.99);
  const double alpha = cfg.get_double("alpha", 0.1);
  const double epsilon = cfg.get_double("epsilon", 0.1);
  const long sf_steps = cfg.get_long("sf_train_steps", 100000);
  const long df_steps = cfg.get_long("df_train_steps", 100000);
  const int step_cap = cfg.get_int("step_cap", 500);

  // Test reward draws depend only on the master seed and the configuration
  // index, so every method and every run sees the same test set.
  auto test_rewards = [&](int c) {
    Rng r(derive_seed(plan.master_seed, kRewardStream, static_cast<std::uint64_t>(c)));
    Vector w(T);
    for (int g = 0; g < T; ++g) w[g] = 50.0 * r.normal();
    return w;
  };
  auto with_rewards = [&](const Vector& w) {
    TabularMdp m = mdp;
    for (int g = 0; g < T; ++g) m.reward_state[goals[static_cast<size_t>(g)]] = w[g];
    return m;
  };
  auto greedy_src = [](const Matrix& q, int s) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(q.cols()); ++a)
      if (q(s, a) > q(s, best)) best = a;
    return best;
  };

  Rng learn_rng(derive_seed(seed, 0, 0));
  TaskResult out;
  out.table.extra_columns = {"steps", "reached"};
  auto evaluate = [&](const Matrix& q, int c, const Vector& w) {
    const TabularMdp test = with_rewards(w);
    Rng eval_rng(derive_seed(seed, 3, static_cast<std::uint64_t>(c)));
    const EpisodeRow row = greedy_rollout(test, q, step_cap, eval_rng);
    out.table.rows.push_back({static_cast<double>(c), row.return_env,
                              static_cast<double>(row.steps),
                              row.reached_terminal ? 1.0 : 0.0});
  };

  if (method == "oracle") {
    for (int c = 0; c < n_configs; ++c) {
      const Vector w = test_rewards(c);
      const Vector v = ssp_value_iteration(mdp, w);
      evaluate(ssp_q_from_values(mdp, v), c, w);
    }
    return out;
  }

  if (method == "df") {
    const Matrix phi = goal_indicator_features(mdp);
    Matrix zbar = sa_default_features_init(mdp, phi);
    int s = sample_start(mdp, learn_rng);
    int a = learn_rng.below(mdp.n_actions);
    for (long t = 0; t < df_steps; ++t) {
      const int s2 = sample_next(mdp, s, a, learn_rng);
      const int a2 = learn_rng.below(mdp.n_actions);
      const bool done = mdp.is_terminal(s2);
      sa_df_td_update(zbar, mdp, {s, a, mdp.reward(s, a), s2, a2, done}, alpha, lambda);
      if (done) {
        s = sample_start(mdp, learn_rng);
        a = learn_rng.below(mdp.n_actions);
      } else {
        s = s2;
        a = a2;
      }
    }
    for (int c = 0; c < n_configs; ++c) {
      const Vector w = test_rewards(c);
      evaluate(df_transfer_q(zbar, mdp, w, lambda), c, w);
    }
    return out;
  }

  if (method.rfind("sf", 0) == 0) {
    const int n_sources = static_cast<int>(parse_long_or_throw("method", method.substr(2)));
    if (n_sources < 1 || n_sources > 16)
      throw ConfigError("method '" + method + "': source-policy count must be in [1, 16]");
    const Matrix phi = cell_type_features(*envr.map, mdp);
    std::vector<Matrix> psis;
    for (int i = 0; i < n_sources; ++i) {
      // Each source task is its own reward draw; its exact optimal policy is
      // the evaluation policy for this feature table.
      Vector ws(T);
      for (int g = 0; g < T; ++g) ws[g] = 50.0 * learn_rng.normal();
      const Matrix qsrc = ssp_q_from_values(mdp, ssp_value_iteration(mdp, ws));
      Matrix psi = sf_init(mdp, phi);
      int s = sample_start(mdp, learn_rng);
      for (long t = 0; t < sf_steps; ++t) {
        const int a =
            learn_rng.uniform() < epsilon ? learn_rng.below(mdp.n_actions) : greedy_src(qsrc, s);
        const int s2 = sample_next(mdp, s, a, learn_rng);
        const bool done = mdp.is_terminal(s2);
        sf_td_update(psi, mdp, {s, a, 0.0, s2, done}, greedy_src(qsrc, s2), alpha, gamma, phi);
        s = done ? sample_start(mdp, learn_rng) : s2;
      }
      psis.push_back(std::move(psi));
    }
    for (int c = 0; c < n_configs; ++c) {
      const Vector wt = test_rewards(c);
      Vector w(2 + T);
      w[0] = envr.map->reward_empty;
      w[1] = envr.map->reward_low;
      for (int g = 0; g < T; ++g) w[2 + g] = wt[g];
      evaluate(sf_gpi_q(psis, mdp, w), c, wt);
    }
    return out;
  }

  throw ConfigError("unknown transfer method '" + method +
                    "' (expected oracle, df or sf<count>)");
}

TaskResult run_repr_task(const ExperimentPlan& plan, const KvConfig& cfg, const CellSpec& cell) {
  const Environment envr = make_environment(plan.env, plan.variant);
  const TabularMdp& mdp = envr.mdp;
  const Matrix pol = uniform_policy(mdp);
  const std::string kind = cfg.get_string("kind", "dr");
  const double lambda = cfg.get_double("lambda", 1.3);
  const double gamma = cfg.get_double("gamma", 0.99);
  const int bits = cfg.get_int("bits", 256);
  if (bits < 32 || bits > 16384) throw ConfigError("bits must be in [32, 16384]");

  auto log_top = [](const HpMatrix& hp, int n) {
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    return dr_top_eigenvector(LogNonNegMatrix::from_hp(hp), all, n).eigenvalue;
  };

  ProtoRep rep;
  double eig = 0.0;
  if (kind == "sr") {
    rep = sr_closed_form(mdp, pol, gamma);
    std::vector<int> all(static_cast<size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) all[static_cast<size_t>(s)] = s;
    eig = sr_top_eigenvector(rep.dense, all, mdp.n_states).eigenvalue;
  } else if (kind == "dr") {
    rep = dr_closed_form(mdp, pol, lambda, bits);
    eig = log_top(*rep.hp, mdp.n_states);
  } else if (kind == "dr_sa") {
    rep = dr_sa_closed_form(mdp, pol, lambda, bits);
    eig = log_top(*rep.hp, mdp.n_states * mdp.n_actions);
  } else if (kind == "mer") {
    rep = mer_closed_form(state_rewards_under(mdp, pol), adjacency_matrix(mdp), lambda, bits);
    eig = log_top(*rep.hp, mdp.n_states);
  } else {
    throw ConfigError("unknown representation kind '" + kind +
                      "' (expected sr, dr, dr_sa or mer)");
  }

  write_representation(plan.out_dir / "representations" / ("cell" + std::to_string(cell.index)),
                       rep);
  TaskResult out;
  out.table.extra_columns = {"lossy"};
  out.table.rows.push_back({0.0, eig, rep.lossy_dense ? 1.0 : 0.0});
  return out;
}

TaskResult run_task(const ExperimentPlan& plan, const CellSpec& cell, int seed_index,
                    ShapingCtx& ctx) {
  const KvConfig cfg = merged_config(plan.config, cell);
  const std::uint64_t seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(cell.index),
                                         static_cast<std::uint64_t>(seed_index));
  if (plan.experiment == "shaping") return run_shaping_task(plan, cfg, ctx, seed);
  if (plan.experiment == "rod") return run_rod_task(plan, cfg, seed);
  if (plan.experiment == "count") return run_count_task(plan, cfg, seed);
  if (plan.experiment == "transfer") return run_transfer_task(plan, cfg, seed);
  if (plan.experiment == "repr_analysis") return run_repr_task(plan, cfg, cell);
  throw ConfigError("unknown experiment '" + plan.experiment + "'");
}

// --- serialization ----------------------------------------------------------

std::string table_to_csv(const RunTable& t) {
  std::string out = "x,y";
  for (const std::string& c : t.extra_columns) out += "," + c;
  out += '\n';
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    const size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Reads the leading x and y columns of a raw run CSV.
std::vector<std::pair<double, double>> parse_xy_csv(const std::string& text,
                                                    const std::string& origin) {
  std::vector<std::pair<double, double>> out;
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    const std::string line =
        text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (header) {
      if (fields.size() < 2 || fields[0] != "x" || fields[1] != "y")
        throw ConfigError(origin + ": expected an x,y header, got '" + line + "'");
      header = false;
      continue;
    }
    if (fields.size() < 2) throw ConfigError(origin + ": short row '" + line + "'");
    out.emplace_back(parse_double_or_throw("x", fields[0]),
                     parse_double_or_throw("y", fields[1]));
  }
  if (header) throw ConfigError(origin + ": empty file");
  return out;
}

std::string build_summary(
    const std::map<int, std::map<double, std::vector<double>>>& by_cell) {
  std::string out = "cell,x,mean,ci_half,n,ci_defined\n";
  for (const auto& [cell, by_x] : by_cell)
    for (const auto& [x, ys] : by_x) {
      const MeanCi mc = mean_ci(ys);
      out += std::to_string(cell) + ',' + format_double(x) + ',' + format_double(mc.mean) +
             ',' + format_double(mc.half_width) + ',' + std::to_string(mc.n) + ',' +
             (mc.ci_defined ? '1' : '0');
      out += '\n';
    }
  return out;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

struct PhaseResult {
  // Task order: cell-major, seed ascending; index = cell_pos * runs + seed_pos.
  std::vector<RunTable> tables;
};

PhaseResult run_phase(const ExperimentPlan& plan, int workers, int seed_offset) {
  if (plan.runs < 1) throw ConfigError("config needs runs >= 1");
  const fs::path raw_dir = plan.out_dir / "raw";
  const fs::path repr_dir = plan.out_dir / "representations";
  try {
    fs::create_directories(plan.out_dir);
    fs::remove_all(raw_dir);
    fs::create_directories(raw_dir);
    if (plan.experiment == "shaping" || plan.experiment == "repr_analysis") {
      fs::remove_all(repr_dir);
      fs::create_directories(repr_dir);
    }
  } catch (const fs::filesystem_error& e) {
    throw ConfigError(std::string("cannot prepare output directory: ") + e.what());
  }
  write_text_file(plan.out_dir / "config_echo.cfg", plan.config.echo());

  struct Task {
    int cell_pos;
    int seed_index;
  };
  std::vector<Task> tasks;
  for (int c = 0; c < static_cast<int>(plan.cells.size()); ++c)
    for (int i = 0; i < plan.runs; ++i) tasks.push_back({c, seed_offset + i});

  std::vector<TaskResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  ShapingCtx ctx;
  std::atomic<size_t> next{0};
  auto body = [&]() {
    while (true) {
      const size_t t = next.fetch_add(1);
      if (t >= tasks.size()) break;
      try {
        results[t] =
            run_task(plan, plan.cells[static_cast<size_t>(tasks[t].cell_pos)],
                     tasks[t].seed_index, ctx);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (workers <= 1 || tasks.size() <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(tasks.size()));
    for (int i = 0; i < n; ++i) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  // All file writes happen on this thread, in task order.
  json manifest;
  manifest["experiment"] = plan.experiment;
  manifest["env"] = plan.env;
  manifest["variant"] = plan.variant;
  manifest["master_seed"] = std::to_string(plan.master_seed);
  manifest["runs"] = plan.runs;
  manifest["seed_offset"] = seed_offset;
  manifest["x_axis"] = plan.x_axis;
  manifest["y_axis"] = plan.y_axis;
  manifest["config_fnv1a64"] = hex64(fnv1a64(plan.config.echo()));
  json cells_json = json::array();
  for (const CellSpec& cell : plan.cells) {
    json c;
    c["index"] = cell.index;
    c["label"] = cell.label();
    json assign;
    for (const auto& [k, v] : cell.assignment) assign[k] = v;
    c["assignment"] = assign;
    cells_json.push_back(c);
  }
  manifest["cells"] = cells_json;

  json seeds_json = json::array();
  json files_json = json::array();
  std::map<int, std::map<double, std::vector<double>>> by_cell;
  for (size_t t = 0; t < tasks.size(); ++t) {
    const CellSpec& cell = plan.cells[static_cast<size_t>(tasks[t].cell_pos)];
    const int seed_index = tasks[t].seed_index;
    const std::string stem =
        "cell" + std::to_string(cell.index) + "_seed" + std::to_string(seed_index);
    const std::string csv = table_to_csv(results[t].table);
    write_text_file(raw_dir / (stem + ".csv"), csv);
    json f;
    f["path"] = "raw/" + stem + ".csv";
    f["fnv1a64"] = hex64(fnv1a64(csv));
    files_json.push_back(f);
    for (const auto& [suffix, bytes] : results[t].aux) {
      write_text_file(raw_dir / (stem + suffix), bytes);
      json g;
      g["path"] = "raw/" + stem + suffix;
      g["fnv1a64"] = hex64(fnv1a64(bytes));
      files_json.push_back(g);
    }
    json s;
    s["cell"] = cell.index;
    s["index"] = seed_index;
    s["seed"] = std::to_string(derive_seed(plan.master_seed,
                                           static_cast<std::uint64_t>(cell.index),
                                           static_cast<std::uint64_t>(seed_index)));
    seeds_json.push_back(s);
    for (const auto& row : results[t].table.rows) by_cell[cell.index][row[0]].push_back(row[1]);
  }
  manifest["seeds"] = seeds_json;

  const std::string summary = build_summary(by_cell);
  write_text_file(plan.out_dir / "summary.csv", summary);
  manifest["summary_fnv1a64"] = hex64(fnv1a64(summary));

  json repr_json = json::array();
  if (fs::exists(repr_dir)) {
    std::vector<fs::path> repr_files;
    for (const auto& entry : fs::directory_iterator(repr_dir))
      if (entry.is_regular_file()) repr_files.push_back(entry.path());
    std::sort(repr_files.begin(), repr_files.end());
    for (const fs::path& p : repr_files) {
      json g;
      g["path"] = "representations/" + p.filename().string();
      g["fnv1a64"] = hex64(fnv1a64(read_text_file(p)));
      repr_json.push_back(g);
    }
  }
  manifest["representations"] = repr_json;
  manifest["files"] = files_json;
  write_text_file(plan.out_dir / "manifest.json", manifest.dump(2) + "\n");

  PhaseResult out;
  out.tables.reserve(results.size());
  for (auto& r : results) out.tables.push_back(std::move(r.table));
  return out;
}

}  // namespace

// --- public entry points ------------------------------------------------------

ExperimentPlan make_plan(const KvConfig& cfg,
                         const std::optional<fs::path>& out_override) {
  ExperimentPlan plan;
  plan.experiment = cfg.get_string("experiment");
  const Schema& schema = schema_for(plan.experiment);
  cfg.expect_only(schema.known);
  plan.env = cfg.get_string("env");
  plan.variant = cfg.get_string("variant", "standard");
  make_environment(plan.env, plan.variant);  // fail fast on bad names
  plan.config = cfg;
  plan.master_seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
  plan.runs = plan.experiment == "repr_analysis" ? 1 : cfg.get_int("runs", 0);
  if (out_override.has_value())
    plan.out_dir = *out_override;
  else if (cfg.has("out"))
    plan.out_dir = fs::path(cfg.get_string("out"));
  else
    throw ConfigError("output directory missing: set out = <dir> or pass --out");
  plan.x_axis = schema.x_axis;
  plan.y_axis = schema.y_axis;
  if (plan.experiment == "rod" && cfg.get_bool("with_q", false)) plan.y_axis = "eval_return";

  plan.cells.push_back({0, {}});
  for (const std::string& key : schema.axes) {
    if (!cfg.has(key)) continue;
    const std::vector<std::string> values = cfg.get_list(key);
    std::vector<CellSpec> expanded;
    for (const CellSpec& cell : plan.cells)
      for (const std::string& v : values) {
        CellSpec next = cell;
        next.assignment.emplace_back(key, v);
        expanded.push_back(std::move(next));
      }
    plan.cells = std::move(expanded);
  }
  for (size_t i = 0; i < plan.cells.size(); ++i) plan.cells[i].index = static_cast<int>(i);
  return plan;
}

double final_performance(const std::string& experiment, const RunTable& table) {
  if (table.rows.empty()) return -std::numeric_limits<double>::infinity();
  if (experiment == "shaping") {
    const size_t n = table.rows.size();
    const size_t k = std::max<size_t>(1, n / 10);
    double sum = 0.0;
    for (size_t i = n - k; i < n; ++i) sum += table.rows[i][1];
    return sum / static_cast<double>(k);
  }
  if (experiment == "transfer") {
    double sum = 0.0;
    for (const auto& row : table.rows) sum += row[1];
    return sum / static_cast<double>(table.rows.size());
  }
  return table.rows.back()[1];
}

void run_experiment(const ExperimentPlan& plan, int workers) {
  run_phase(plan, workers, 0);
  std::cout << "wrote " << (plan.out_dir / "summary.csv").string() << " ("
            << plan.cells.size() << " cells x " << plan.runs << " runs)\n";
}

void sweep_experiment(const ExperimentPlan& plan, int workers) {
  const int default_n1 = plan.experiment == "rod" ? 10 : 20;
  const int n1 = plan.config.get_int("sweep_runs", default_n1);
  const int n2 = plan.config.get_int("final_runs", 50);
  if (n1 < 1 || n2 < 1) throw ConfigError("sweep_runs and final_runs must be >= 1");

  ExperimentPlan search = plan;
  search.out_dir = plan.out_dir / "search";
  search.runs = n1;
  const PhaseResult phase1 = run_phase(search, workers, 0);

  json cells_json = json::array();
  int winner_pos = 0;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> cell_means(plan.cells.size(), 0.0);
  for (size_t c = 0; c < plan.cells.size(); ++c) {
    std::vector<double> finals;
    for (int i = 0; i < n1; ++i)
      finals.push_back(
          final_performance(plan.experiment, phase1.tables[c * static_cast<size_t>(n1) +
                                                           static_cast<size_t>(i)]));
    const MeanCi mc = mean_ci(finals);
    cell_means[c] = mc.mean;
    json cj;
    cj["index"] = plan.cells[c].index;
    cj["label"] = plan.cells[c].label();
    cj["mean_final"] = mc.mean;
    cj["ci_half"] = mc.half_width;
    cj["n"] = mc.n;
    cells_json.push_back(cj);
    if (mc.mean > best) {
      best = mc.mean;
      winner_pos = static_cast<int>(c);
    }
  }

  ExperimentPlan final_plan = plan;
  final_plan.cells = {plan.cells[static_cast<size_t>(winner_pos)]};
  final_plan.runs = n2;
  run_phase(final_plan, workers, n1);

  json sel;
  sel["sweep_runs"] = n1;
  sel["final_runs"] = n2;
  sel["cells"] = cells_json;
  sel["winner"] = plan.cells[static_cast<size_t>(winner_pos)].index;
  sel["winner_label"] = plan.cells[static_cast<size_t>(winner_pos)].label();
  write_text_file(plan.out_dir / "selection.json", sel.dump(2) + "\n");

  if (plan.experiment == "rod") {
    // Scatter of final visitation vs mean step reward per cell (search phase).
    std::string scatter = "cell,label,visited_frac,mean_step_reward,mean_final\n";
    for (size_t c = 0; c < plan.cells.size(); ++c) {
      double visit = 0.0, reward = 0.0;
      for (int i = 0; i < n1; ++i) {
        const RunTable& t =
            phase1.tables[c * static_cast<size_t>(n1) + static_cast<size_t>(i)];
        if (!t.rows.empty()) {
          visit += t.rows.back()[2];
          reward += t.rows.back()[3];
        }
      }
      scatter += std::to_string(plan.cells[c].index) + ',' + plan.cells[c].label() + ',' +
                 format_double(visit / n1) + ',' + format_double(reward / n1) + ',' +
                 format_double(cell_means[c]) + '\n';
    }
    write_text_file(plan.out_dir / "scatter.csv", scatter);
  }

  std::cout << "sweep winner: cell " << plan.cells[static_cast<size_t>(winner_pos)].index
            << " (" << plan.cells[static_cast<size_t>(winner_pos)].label() << "), mean "
            << format_double(best) << "; final artifacts in " << plan.out_dir.string() << "\n";
}

void summarize_dir(const fs::path& dir) {
  const fs::path raw = dir / "raw";
  if (!fs::is_directory(raw))
    throw ConfigError("no raw/ directory under '" + dir.string() + "'");
  // (cell, seed, name) triples sorted numerically for a deterministic
  // aggregation order.
  std::vector<std::tuple<long, long, fs::path>> inputs;
  for (const auto& entry : fs::directory_iterator(raw)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("cell", 0) != 0 || name.size() < 5) continue;
    const size_t us = name.find("_seed");
    if (us == std::string::npos) continue;
    const std::string cell_part = name.substr(4, us - 4);
    const std::string tail = name.substr(us + 5);
    if (tail.size() <= 4 || tail.substr(tail.size() - 4) != ".csv") continue;
    const std::string seed_part = tail.substr(0, tail.size() - 4);
    auto all_digits = [](const std::string& s) {
      if (s.empty()) return false;
      for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
      return true;
    };
    if (!all_digits(cell_part) || !all_digits(seed_part)) continue;
    inputs.emplace_back(std::stol(cell_part), std::stol(seed_part), entry.path());
  }
  if (inputs.empty())
    throw ConfigError("no raw/cell<K>_seed<I>.csv files under '" + dir.string() + "'");
  std::sort(inputs.begin(), inputs.end());

  std::map<int, std::map<double, std::vector<double>>> by_cell;
  for (const auto& [cell, seed, path] : inputs) {
    (void)seed;
    for (const auto& [x, y] : parse_xy_csv(read_text_file(path), path.filename().string()))
      by_cell[static_cast<int>(cell)][x].push_back(y);
  }
  const std::string summary = build_summary(by_cell);
  write_text_file(dir / "summary.csv", summary);
  std::cout << "wrote " << (dir / "summary.csv").string() << " (" << inputs.size()
            << " raw series)\n";
}

void heatmap_file(const fs::path& csv_path, const std::string& env_name,
                  const std::string& variant, int row) {
  const Environment envr = make_environment(env_name, variant);
  if (!envr.map.has_value())
    throw ConfigError("'" + env_name + "' is not a grid environment");
  const Matrix m = matrix_from_csv(read_text_file(csv_path));
  Vector values;
  if (m.rows() == 1) {
    values = m.row(0).transpose();
  } else if (m.cols() == 1) {
    values = m.col(0);
  } else if (m.rows() == m.cols()) {
    if (row < 0 || row >= m.rows())
      throw ConfigError("--row " + std::to_string(row) + " out of range for a " +
                        std::to_string(m.rows()) + "-row matrix");
    values = m.row(row).transpose();
  } else {
    throw ConfigError("expected a vector CSV or a square matrix, got " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }

  fs::path base = csv_path;
  base.replace_extension();
  const fs::path out_csv = fs::path(base.string() + ".heat.csv");
  const fs::path out_svg = fs::path(base.string() + ".heat.svg");
  write_text_file(out_csv, heatmap_csv(*envr.map, values));
  write_text_file(out_svg, heatmap_svg(*envr.map, values));
  std::cout << "wrote " << out_csv.string() << " and " << out_svg.string() << "\n";
}

int resolve_workers(int cli_value) {
  if (cli_value > 0) return cli_value;
  const char* env = std::getenv("PROTOREP_WORKERS");
  if (env != nullptr && *env != '\0') {
    const long v = parse_long_or_throw("PROTOREP_WORKERS", env);
    if (v < 1) throw ConfigError("PROTOREP_WORKERS must be >= 1");
    return static_cast<int>(v);
  }
  return 1;
}

}  // namespace protorep
