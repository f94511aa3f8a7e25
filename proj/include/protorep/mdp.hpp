#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "protorep/rng.hpp"

namespace protorep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One environment step as consumed by the TD learners and replay datasets.
struct TransitionSample {
  int s = 0;
  int a = 0;
  double r = 0.0;  // reward attached to this step (convention: r(s) or r(s,a))
  int s2 = 0;
  bool done = false;  // s2 is terminal
};

/// Finite MDP with per-action transition matrices.  Rows of terminal states
/// are identically zero in every P[a]: nothing is ever sampled from them.
/// Rewards attach either to states or to state-action pairs, never both.
struct TabularMdp {
  enum class RewardOn { State, StateAction };

  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> P;  // one S-by-S right-substochastic matrix per action
  RewardOn reward_on = RewardOn::State;
  Vector reward_state;  // size S when reward_on == State
  Matrix reward_sa;     // S-by-A when reward_on == StateAction
  std::vector<std::uint8_t> terminal;  // size S, 1 where absorbing
  Vector start;                        // start distribution over states
  std::vector<std::string> state_names;  // optional display labels

  double reward(int s, int a) const {
    return reward_on == RewardOn::State ? reward_state[s] : reward_sa(s, a);
  }
  bool is_terminal(int s) const { return terminal[static_cast<size_t>(s)] != 0; }
  std::vector<int> terminal_states() const;
  std::vector<int> nonterminal_states() const;

  /// Structural checks: shapes, row sums (1 for non-terminal, 0 for
  /// terminal), start distribution, reward storage matching reward_on.
  /// Throws ConfigError with a precise message on the first violation.
  void validate() const;
};

/// Uniform policy over actions, including at terminal states (harmless there).
Matrix uniform_policy(const TabularMdp& mdp);

/// Expected one-step reward per state under a policy: r(s) itself for
/// state-attached rewards, sum_a pi(a|s) r(s,a) otherwise.
Vector state_rewards_under(const TabularMdp& mdp, const Matrix& policy);

/// State chain P^pi(s,s') = sum_a pi(a|s) p(s'|s,a); terminal rows are zero.
Matrix transition_matrix(const TabularMdp& mdp, const Matrix& policy);

/// Pair chain over state-action indices sa = s * n_actions + a:
/// Pbar(sa, s'a') = p(s'|s,a) * pi(a'|s').  Rows of terminal-state pairs are
/// zero.
Matrix sa_transition_matrix(const TabularMdp& mdp, const Matrix& policy);

/// Pair-level rewards rbar(sa) = r(s) (broadcast) or r(s,a).
Vector sa_rewards(const TabularMdp& mdp);

/// Pair-level terminal mask: every pair of a terminal state is terminal.
std::vector<std::uint8_t> sa_terminal(const TabularMdp& mdp);

inline int sa_index(const TabularMdp& mdp, int s, int a) {
  return s * mdp.n_actions + a;
}

int sample_start(const TabularMdp& mdp, Rng& rng);
int sample_action(const Matrix& policy, int s, Rng& rng);
int sample_next(const TabularMdp& mdp, int s, int a, Rng& rng);

/// Affine map of all rewards onto [lo, hi]: min -> lo, max -> hi.  A constant
/// reward function maps everything to hi.
void rescale_rewards(TabularMdp& mdp, double lo = -1.0, double hi = 0.0);

/// Flat deterministic CSV export (one transition edge per line plus reward
/// and terminal blocks); stable across runs for checksumming.
std::string mdp_to_csv(const TabularMdp& mdp);

}  // namespace protorep
