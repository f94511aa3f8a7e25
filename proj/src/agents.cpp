#include "protorep/agents.hpp"

#include <cmath>

#include "protorep/errors.hpp"

namespace protorep {

QTable make_q_table(const TabularMdp& mdp, double init_value) {
  QTable t;
  t.init_value = init_value;
  t.q = Matrix::Constant(mdp.n_states, mdp.n_actions, init_value);
  return t;
}

int epsilon_greedy(const Matrix& q, int s, double epsilon, Rng& rng) {
  const int n = static_cast<int>(q.cols());
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.below(n);
  int best = 0;
  for (int a = 1; a < n; ++a)
    if (q(s, a) > q(s, best)) best = a;
  return best;
}

void q_learning_update(Matrix& q, const TransitionSample& x, double alpha, double gamma) {
  const double boot = x.done ? 0.0 : q.row(x.s2).maxCoeff();
  q(x.s, x.a) += alpha * (x.r + gamma * boot - q(x.s, x.a));
}

void sarsa_update(Matrix& q, const TransitionSample& x, int a2, double alpha, double gamma) {
  const double boot = x.done ? 0.0 : q(x.s2, a2);
  q(x.s, x.a) += alpha * (x.r + gamma * boot - q(x.s, x.a));
}

ShapingKind shaping_kind_from_name(const std::string& name) {
  if (name == "none") return ShapingKind::None;
  if (name == "dr_pot") return ShapingKind::DrPotential;
  if (name == "sr_pot") return ShapingKind::SrPotential;
  if (name == "sr_prior") return ShapingKind::SrPrior;
  throw ConfigError("unknown shaping method '" + name +
                    "' (expected none, dr_pot, sr_pot, sr_prior)");
}

std::string shaping_kind_name(ShapingKind kind) {
  switch (kind) {
    case ShapingKind::None: return "none";
    case ShapingKind::DrPotential: return "dr_pot";
    case ShapingKind::SrPotential: return "sr_pot";
    case ShapingKind::SrPrior: return "sr_prior";
  }
  return "?";
}

double shaped_reward(const ShapingConfig& cfg, double r_env, int s, int s2) {
  double rhat = 0.0;
  switch (cfg.kind) {
    case ShapingKind::None: return r_env;
    case ShapingKind::DrPotential:
    case ShapingKind::SrPotential:
      rhat = cfg.gamma * cfg.e[s2] - cfg.e[s];
      break;
    case ShapingKind::SrPrior: {
      if (cfg.goal_state < 0) throw ConfigError("sr_prior shaping requires a goal state");
      const double d = cfg.e[cfg.goal_state] - cfg.e[s2];
      rhat = -d * d;
      break;
    }
  }
  return (1.0 - cfg.beta) * r_env + cfg.beta * rhat;
}

double count_bonus(const Matrix& zbar, int sa_row, double beta) {
  const double norm = zbar.row(sa_row).norm();
  if (norm <= 0.0)
    throw NumericError("count_bonus: representation row " + std::to_string(sa_row) +
                       " has zero norm");
  return beta * std::log(norm);
}

AgentRunResult run_control_loop(const TabularMdp& mdp, const AgentSpec& agent,
                                const ShapingConfig* shaping, const BonusConfig* bonus,
                                const RunSpec& run, std::uint64_t seed) {
  if (shaping && bonus)
    throw ConfigError("run_control_loop: shaping and bonus are mutually exclusive");
  if (shaping && shaping->kind != ShapingKind::None &&
      shaping->e.size() != mdp.n_states)
    throw ConfigError("run_control_loop: shaping vector size mismatch");

  Rng rng(seed);
  QTable table = make_q_table(mdp, agent.q_init);
  Matrix& q = table.q;

  // Bonus path state: pair-level DR updated from rescaled rewards.
  Matrix zbar;
  TabularMdp rescaled;
  if (bonus) {
    rescaled = mdp;
    rescale_rewards(rescaled, bonus->rescale_lo, bonus->rescale_hi);
    zbar = dr_sa_td_init(mdp, bonus->lambda);
  }

  AgentRunResult out;
  const bool continuing = run.total_steps > 0;
  const bool pair_rewards = mdp.reward_on == TabularMdp::RewardOn::StateAction;
  const int n_episodes = continuing ? 1 : run.episodes;
  long remaining = continuing ? run.total_steps : 0;

  for (int ep = 0; ep < n_episodes; ++ep) {
    int s = sample_start(mdp, rng);
    // State-attached rewards are collected on occupancy (start included);
    // pair-attached rewards accrue once per action taken.
    double ret = pair_rewards ? 0.0 : mdp.reward_state[s];
    long steps = 0;
    bool reached = false;
    int a = epsilon_greedy(q, s, agent.epsilon, rng);
    while (continuing ? remaining > 0 : steps < run.step_cap) {
      const int s2 = sample_next(mdp, s, a, rng);
      const double r_env = mdp.reward(s, a);
      const bool done = mdp.is_terminal(s2);
      const int a2 = done ? 0 : epsilon_greedy(q, s2, agent.epsilon, rng);
      ++steps;
      if (continuing) --remaining;
      if (pair_rewards) ret += r_env;

      double r_learn = r_env;
      if (shaping) r_learn = shaped_reward(*shaping, r_env, s, s2);
      if (bonus) {
        dr_sa_td_update(zbar, mdp,
                        {s, a, rescaled.reward(s, a), s2, a2, done}, bonus->eta,
                        bonus->lambda);
        r_learn = r_env + count_bonus(zbar, sa_index(mdp, s, a), bonus->beta);
      }
      const TransitionSample x{s, a, r_learn, s2, done};
      if (agent.algo == ControlAlgo::QLearning) {
        q_learning_update(q, x, agent.alpha, agent.gamma);
      } else {
        sarsa_update(q, x, a2, agent.alpha, agent.gamma);
      }

      if (done) {
        if (!pair_rewards) ret += mdp.reward_state[s2];
        reached = true;
        break;
      }
      if (!pair_rewards) ret += mdp.reward_state[s2];
      s = s2;
      a = a2;
    }
    out.episodes.push_back({ep, steps, ret, reached});
    out.total_steps += steps;
    out.total_return += ret;
    if (continuing && remaining <= 0) break;
  }
  out.q = std::move(q);
  return out;
}

EpisodeRow greedy_rollout(const TabularMdp& mdp, const Matrix& q, int step_cap, Rng& rng) {
  EpisodeRow row;
  int s = sample_start(mdp, rng);
  row.return_env = mdp.reward_on == TabularMdp::RewardOn::State ? mdp.reward_state[s] : 0.0;
  while (row.steps < step_cap) {
    int a = 0;
    for (int b = 1; b < mdp.n_actions; ++b)
      if (q(s, b) > q(s, a)) a = b;
    const int s2 = sample_next(mdp, s, a, rng);
    if (mdp.reward_on == TabularMdp::RewardOn::StateAction) row.return_env += mdp.reward(s, a);
    ++row.steps;
    if (mdp.is_terminal(s2)) {
      if (mdp.reward_on == TabularMdp::RewardOn::State) row.return_env += mdp.reward_state[s2];
      row.reached_terminal = true;
      break;
    }
    if (mdp.reward_on == TabularMdp::RewardOn::State) row.return_env += mdp.reward_state[s2];
    s = s2;
  }
  return row;
}

}  // namespace protorep
