#pragma once

#include <vector>

#include "protorep/mdp.hpp"
#include "protorep/represent.hpp"

namespace protorep {

/// --- Terminal-reward planning through the DR -----------------------------
///
/// With N the non-terminal and T the terminal states, optimal soft values
/// satisfy exp(v*(s)/lambda) = [Z_NN P_NT exp(r_T/lambda)](s).  Everything
/// below runs in log domain end to end, so terminal rewards up to hundreds
/// of lambda-units stay finite.  Entries of v* are -inf for states that
/// cannot reach any terminal.  Returned vectors cover all states; terminal
/// entries hold the terminal reward itself.
Vector optimal_values_from_dr(const ProtoRep& dr, const TabularMdp& mdp, const Matrix& policy,
                              double lambda);

/// State-action analog through the pair-level DR: exp(q*(s,a)/lambda) =
/// [Zbar_NN Pbar_NT exp(rbar_T/lambda)](sa).  Terminal entries hold the
/// terminal reward.  Returned as an S-by-A matrix.
Matrix optimal_q_from_dr(const ProtoRep& dr_sa, const TabularMdp& mdp, const Matrix& policy,
                         double lambda);

/// Same pipeline with the MER in place of the DR and the adjacency in place
/// of the transition matrix: deterministic shortest-path (max-reward) values.
Vector optimal_values_from_mer(const ProtoRep& mer, const TabularMdp& mdp,
                               const Matrix& adjacency, double lambda);

/// Policy recovery: pi*(a|s) proportional to pi_d(a|s) exp(q(s,a)/lambda),
/// normalized per state via logsumexp.  A state whose row is all -inf (no
/// terminal reachable) is a numeric failure naming that state.  Terminal
/// rows are returned as the default policy's rows.
Matrix optimal_policy_from_q(const Matrix& q, const TabularMdp& mdp, const Matrix& policy_d,
                             double lambda);

/// --- Default features -----------------------------------------------------
///
/// zeta(s) = [Z_NN P_NT Phi](s,:) for non-terminal s and zeta(t) = phi(t) at
/// terminals; the table is S-by-d.  Phi has one row per terminal state in
/// terminal-state order.
struct DefaultFeatureTable {
  Matrix zeta;          // S x d
  Matrix phi_terminal;  // T x d, the pinned terminal features
};

DefaultFeatureTable default_features_closed(const ProtoRep& dr, const TabularMdp& mdp,
                                            const Matrix& phi_terminal, double lambda);

/// Zero-initialized table with terminal rows pinned to phi(t).
DefaultFeatureTable default_features_init(const TabularMdp& mdp, const Matrix& phi_terminal);

/// TD rule: zeta(s) += alpha (exp(r/lambda) zeta(s') - zeta(s)); the stored
/// next row is read directly (pinned phi(t) at terminals).
void df_td_update(DefaultFeatureTable& table, const TransitionSample& x, double alpha,
                  double lambda);

/// State-action default features zbar(sa) = [Zbar_NN Pbar_NT Phibar](sa,:),
/// where Phibar broadcasts phi(t) over the terminal's actions; terminal-pair
/// rows are pinned to phi(t).  Table is (S*A) x d.
Matrix sa_default_features_closed(const ProtoRep& dr_sa, const TabularMdp& mdp,
                                  const Matrix& policy, const Matrix& phi_terminal,
                                  double lambda);
Matrix sa_default_features_init(const TabularMdp& mdp, const Matrix& phi_terminal);
void sa_df_td_update(Matrix& zeta_sa, const TabularMdp& mdp, const SaTransitionSample& x,
                     double alpha, double lambda);

/// --- Successor features ----------------------------------------------------
///
/// psi(s,a) ~ E[sum_t gamma^t phi(S_t) | S_0=s, A_0=a, pi], stored per pair
/// ((S*A) x d).  Terminal-pair rows are pinned to phi(t) so the fixed point
/// solves psi = phi + gamma Pbar^pi psi.
Matrix sf_init(const TabularMdp& mdp, const Matrix& phi_states);

/// a2 must be the action the *evaluated* policy takes at x.s2 (the behavior
/// policy may differ); the update is
/// psi(s,a) += alpha (phi(s) + gamma psi(s2,a2) - psi(s,a)).
void sf_td_update(Matrix& psi_sa, const TabularMdp& mdp, const TransitionSample& x, int a2,
                  double alpha, double gamma, const Matrix& phi_states);

/// --- Transfer across terminal rewards --------------------------------------

/// q(s,a) = lambda log sum_g zbar(sa,g) exp(r_g/lambda), log-domain.
/// goal_rewards follows terminal-state order; zeta_sa columns must too.
Matrix df_transfer_q(const Matrix& zeta_sa, const TabularMdp& mdp,
                     const Vector& goal_rewards, double lambda);

/// Generalized policy improvement: q(s,a) = max_i psi_i(s,a) . w.
Matrix sf_gpi_q(const std::vector<Matrix>& psi_tables, const TabularMdp& mdp,
                const Vector& w);

/// One-hot greedy policy from a q table; ties break to the lowest action.
Matrix greedy_policy_from_q(const Matrix& q);

/// --- Exact dynamic-programming solvers --------------------------------------

/// Undiscounted stochastic-shortest-path value iteration with per-state
/// rewards: v(s) = r(s) + max_a sum_s' p(s'|s,a) v(s'), v(t) fixed to
/// terminal_values in terminal-state order.  Suits episodic maps whose
/// non-terminal rewards are negative.
Vector ssp_value_iteration(const TabularMdp& mdp, const Vector& terminal_values,
                           double tol = 1e-9, int max_iters = 1000000);

/// q(s,a) = r(s) + sum_s' p(s'|s,a) v(s') for the undiscounted SSP values
/// above; terminal rows hold v(t).
Matrix ssp_q_from_values(const TabularMdp& mdp, const Vector& v);

/// Discounted Q iteration: q(s,a) = r(s,a or s) + gamma sum p max_b q(s',b);
/// terminal rows hold the terminal reward.
Matrix q_iteration(const TabularMdp& mdp, double gamma, double tol = 1e-12,
                   int max_iters = 1000000);

}  // namespace protorep
