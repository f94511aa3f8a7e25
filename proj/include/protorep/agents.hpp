#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "protorep/mdp.hpp"
#include "protorep/represent.hpp"

namespace protorep {

/// Action-value table plus its recorded initialization constant (manifests
/// report it; optimistic/pessimistic initialization is part of a method's
/// identity).
struct QTable {
  Matrix q;
  double init_value = 0.0;
};

QTable make_q_table(const TabularMdp& mdp, double init_value);

/// Uniform random action with probability epsilon, else the greedy action
/// (ties break to the lowest index).
int epsilon_greedy(const Matrix& q, int s, double epsilon, Rng& rng);

/// Off-policy target: r + gamma max_b q(s',b), truncated to r on done.
void q_learning_update(Matrix& q, const TransitionSample& x, double alpha, double gamma);

/// On-policy target: r + gamma q(s',a'), truncated to r on done.
void sarsa_update(Matrix& q, const TransitionSample& x, int a2, double alpha, double gamma);

/// --- Reward shaping ---------------------------------------------------------

enum class ShapingKind { None, DrPotential, SrPotential, SrPrior };
ShapingKind shaping_kind_from_name(const std::string& name);
std::string shaping_kind_name(ShapingKind kind);

/// Shaped reward (1-beta) r + beta rhat, where rhat is
///   DrPotential/SrPotential: gamma e(s') - e(s)   (e: the eigenvector
///     summary's usable vector: entrywise log for the DR, raw sign-fixed for
///     the SR), or
///   SrPrior: -(e(goal) - e(s'))^2.
struct ShapingConfig {
  ShapingKind kind = ShapingKind::None;
  double beta = 0.5;
  double gamma = 0.99;
  Vector e;            // one entry per state
  int goal_state = -1; // required by SrPrior
};

double shaped_reward(const ShapingConfig& cfg, double r_env, int s, int s2);

/// --- Visitation bonus through the pair-level DR ------------------------------

/// beta * ln ||zbar(sa,:)||_2.  The identity-initialized row has norm 1, so
/// the first bonus is exactly zero; an all-zero row is a numeric failure.
double count_bonus(const Matrix& zbar, int sa_row, double beta);

struct BonusConfig {
  double beta = 100.0;   // bonus scale
  double eta = 0.25;     // representation TD step size
  double lambda = 1.0;   // representation scale
  double rescale_lo = -1.0;
  double rescale_hi = 0.0;
};

/// --- Control loop -------------------------------------------------------------

enum class ControlAlgo { QLearning, Sarsa };

struct AgentSpec {
  ControlAlgo algo = ControlAlgo::QLearning;
  double alpha = 0.1;
  double gamma = 0.99;
  double epsilon = 0.05;
  double q_init = 0.0;
};

struct RunSpec {
  int episodes = 100;     // episodic mode: number of episodes
  int step_cap = 500;     // per-episode step limit
  long total_steps = 0;   // > 0 switches to continuing mode for that many steps
};

struct EpisodeRow {
  int episode = 0;
  long steps = 0;
  double return_env = 0.0;  // un-shaped, bonus-free environment return
  bool reached_terminal = false;
};

struct AgentRunResult {
  std::vector<EpisodeRow> episodes;
  Matrix q;
  long total_steps = 0;
  double total_return = 0.0;
};

/// Tabular control with optional reward shaping or a DR visitation bonus
/// (mutually exclusive).  Returns per state occupied: R_t = r(S_t), plus the
/// terminal's reward on arrival.  Learning sees shaped/bonused rewards;
/// logged returns never do.  The bonus path keeps a pair-level DR updated
/// from rescaled rewards and adds the bonus of the just-updated row.
AgentRunResult run_control_loop(const TabularMdp& mdp, const AgentSpec& agent,
                                const ShapingConfig* shaping, const BonusConfig* bonus,
                                const RunSpec& run, std::uint64_t seed);

/// One greedy episode (epsilon = 0, no learning); returns the environment
/// return and whether a terminal was reached within the cap.
EpisodeRow greedy_rollout(const TabularMdp& mdp, const Matrix& q, int step_cap, Rng& rng);

}  // namespace protorep
