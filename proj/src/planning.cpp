#include "protorep/planning.hpp"

#include <cmath>

#include "protorep/errors.hpp"
#include "protorep/logdomain.hpp"

namespace protorep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Entrywise log of the representation, exact from the high-precision matrix
/// when available (dense may have underflowed).
Matrix log_of_rep(const ProtoRep& rep) {
  if (rep.hp) return rep.hp->log_to_double();
  return LogNonNegMatrix::from_linear(rep.dense).log_entries;
}

/// log(B exp(u)) for a non-negative block B given in linear doubles:
/// out_i = logsumexp_j(log B(i,j) + u_j).
Vector log_block_apply(const Matrix& B, const Vector& u) {
  Vector out(B.rows());
  Vector row(B.cols());
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      row[j] = B(i, j) > 0.0 ? std::log(B(i, j)) + u[j] : kNegInf;
    out[i] = logsumexp(row);
  }
  return out;
}

}  // namespace

Vector optimal_values_from_dr(const ProtoRep& dr, const TabularMdp& mdp, const Matrix& policy,
                              double lambda) {
  if (dr.kind != ReprKind::DR) throw ConfigError("optimal_values_from_dr: need a state DR");
  if (dr.size() != mdp.n_states) throw ConfigError("optimal_values_from_dr: size mismatch");
  const auto N = mdp.nonterminal_states();
  const auto T = mdp.terminal_states();
  if (T.empty()) throw ConfigError("optimal_values_from_dr: environment has no terminals");

  const Matrix P = transition_matrix(mdp, policy);
  Matrix P_NT(N.size(), T.size());
  for (size_t i = 0; i < N.size(); ++i)
    for (size_t j = 0; j < T.size(); ++j) P_NT(i, j) = P(N[i], T[j]);

  Vector u(T.size());
  for (size_t j = 0; j < T.size(); ++j) {
    const int t = T[j];
    const double r_t =
        mdp.reward_on == TabularMdp::RewardOn::State ? mdp.reward_state[t] : mdp.reward(t, 0);
    u[static_cast<Eigen::Index>(j)] = r_t / lambda;
  }
  const Vector w = log_block_apply(P_NT, u);  // log(P_NT exp(r_T/lambda))

  const Matrix logZ = log_of_rep(dr);
  Vector v = Vector::Zero(mdp.n_states);
  Vector row(N.size());
  for (size_t i = 0; i < N.size(); ++i) {
    for (size_t j = 0; j < N.size(); ++j)
      row[static_cast<Eigen::Index>(j)] = logZ(N[i], N[j]) + w[static_cast<Eigen::Index>(j)];
    v[N[i]] = lambda * logsumexp(row);
  }
  for (size_t j = 0; j < T.size(); ++j)
    v[T[j]] = mdp.reward_on == TabularMdp::RewardOn::State ? mdp.reward_state[T[j]]
                                                           : mdp.reward(T[j], 0);
  return v;
}

Matrix optimal_q_from_dr(const ProtoRep& dr_sa, const TabularMdp& mdp, const Matrix& policy,
                         double lambda) {
  if (dr_sa.kind != ReprKind::DR_SA)
    throw ConfigError("optimal_q_from_dr: need a state-action DR");
  const int n_pairs = mdp.n_states * mdp.n_actions;
  if (dr_sa.size() != n_pairs) throw ConfigError("optimal_q_from_dr: size mismatch");
  const auto term = sa_terminal(mdp);
  std::vector<int> N, T;
  for (int i = 0; i < n_pairs; ++i) (term[static_cast<size_t>(i)] ? T : N).push_back(i);
  if (T.empty()) throw ConfigError("optimal_q_from_dr: environment has no terminals");

  const Matrix Pbar = sa_transition_matrix(mdp, policy);
  Matrix P_NT(N.size(), T.size());
  for (size_t i = 0; i < N.size(); ++i)
    for (size_t j = 0; j < T.size(); ++j) P_NT(i, j) = Pbar(N[i], T[j]);

  const Vector rbar = sa_rewards(mdp);
  Vector u(T.size());
  for (size_t j = 0; j < T.size(); ++j) u[static_cast<Eigen::Index>(j)] = rbar[T[j]] / lambda;
  const Vector w = log_block_apply(P_NT, u);

  const Matrix logZ = log_of_rep(dr_sa);
  Matrix q(mdp.n_states, mdp.n_actions);
  Vector row(N.size());
  for (size_t i = 0; i < N.size(); ++i) {
    for (size_t j = 0; j < N.size(); ++j)
      row[static_cast<Eigen::Index>(j)] = logZ(N[i], N[j]) + w[static_cast<Eigen::Index>(j)];
    const int s = N[i] / mdp.n_actions, a = N[i] % mdp.n_actions;
    q(s, a) = lambda * logsumexp(row);
  }
  for (int j : T) q(j / mdp.n_actions, j % mdp.n_actions) = rbar[j];
  return q;
}

Vector optimal_values_from_mer(const ProtoRep& mer, const TabularMdp& mdp,
                               const Matrix& adjacency, double lambda) {
  if (mer.kind != ReprKind::MER) throw ConfigError("optimal_values_from_mer: need a MER");
  const auto N = mdp.nonterminal_states();
  const auto T = mdp.terminal_states();
  if (T.empty()) throw ConfigError("optimal_values_from_mer: environment has no terminals");

  Matrix A_NT(N.size(), T.size());
  for (size_t i = 0; i < N.size(); ++i)
    for (size_t j = 0; j < T.size(); ++j) A_NT(i, j) = adjacency(N[i], T[j]);
  Vector u(T.size());
  for (size_t j = 0; j < T.size(); ++j) {
    const int t = T[j];
    u[static_cast<Eigen::Index>(j)] =
        (mdp.reward_on == TabularMdp::RewardOn::State ? mdp.reward_state[t]
                                                      : mdp.reward(t, 0)) /
        lambda;
  }
  const Vector w = log_block_apply(A_NT, u);

  const Matrix logM = log_of_rep(mer);
  Vector v = Vector::Zero(mdp.n_states);
  Vector row(N.size());
  for (size_t i = 0; i < N.size(); ++i) {
    for (size_t j = 0; j < N.size(); ++j)
      row[static_cast<Eigen::Index>(j)] = logM(N[i], N[j]) + w[static_cast<Eigen::Index>(j)];
    v[N[i]] = lambda * logsumexp(row);
  }
  for (size_t j = 0; j < T.size(); ++j)
    v[T[j]] = mdp.reward_on == TabularMdp::RewardOn::State ? mdp.reward_state[T[j]]
                                                           : mdp.reward(T[j], 0);
  return v;
}

Matrix optimal_policy_from_q(const Matrix& q, const TabularMdp& mdp, const Matrix& policy_d,
                             double lambda) {
  Matrix pi(mdp.n_states, mdp.n_actions);
  Vector row(mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) {
      pi.row(s) = policy_d.row(s);
      continue;
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pd = policy_d(s, a);
      row[a] = pd > 0.0 ? std::log(pd) + q(s, a) / lambda : kNegInf;
    }
    const double lse = logsumexp(row);
    if (lse == kNegInf)
      throw NumericError("optimal_policy_from_q: no terminal reachable from state " +
                         std::to_string(s));
    for (int a = 0; a < mdp.n_actions; ++a) pi(s, a) = std::exp(row[a] - lse);
  }
  return pi;
}

DefaultFeatureTable default_features_closed(const ProtoRep& dr, const TabularMdp& mdp,
                                            const Matrix& phi_terminal, double lambda) {
  if (dr.kind != ReprKind::DR) throw ConfigError("default_features_closed: need a state DR");
  (void)lambda;
  const auto N = mdp.nonterminal_states();
  const auto T = mdp.terminal_states();
  if (phi_terminal.rows() != static_cast<Eigen::Index>(T.size()))
    throw ConfigError("default_features_closed: phi rows must match terminal count");
  const Matrix P = transition_matrix(mdp, uniform_policy(mdp));

  DefaultFeatureTable table;
  table.phi_terminal = phi_terminal;
  table.zeta = Matrix::Zero(mdp.n_states, phi_terminal.cols());

  // P_NT Phi first (small), then the Z_NN product, in high precision when
  // the DR carries it (its dense view may have underflowed).
  Matrix P_NT(N.size(), T.size());
  for (size_t i = 0; i < N.size(); ++i)
    for (size_t j = 0; j < T.size(); ++j) P_NT(i, j) = P(N[i], T[j]);
  const Matrix PPhi = P_NT * phi_terminal;

  if (dr.hp) {
    const mpfr_prec_t bits = dr.hp->bits();
    HpMatrix Z_NN(static_cast<int>(N.size()), static_cast<int>(N.size()), bits);
    for (size_t i = 0; i < N.size(); ++i)
      for (size_t j = 0; j < N.size(); ++j) Z_NN.at(static_cast<int>(i), static_cast<int>(j)) = dr.hp->at(N[i], N[j]);
    const HpMatrix prod = hp_matmul(Z_NN, HpMatrix::from_double(PPhi, bits));
    const Matrix zeta_N = prod.to_double();
    for (size_t i = 0; i < N.size(); ++i) table.zeta.row(N[i]) = zeta_N.row(static_cast<Eigen::Index>(i));
  } else {
    Matrix Z_NN(N.size(), N.size());
    for (size_t i = 0; i < N.size(); ++i)
      for (size_t j = 0; j < N.size(); ++j) Z_NN(i, j) = dr.dense(N[i], N[j]);
    const Matrix zeta_N = Z_NN * PPhi;
    for (size_t i = 0; i < N.size(); ++i) table.zeta.row(N[i]) = zeta_N.row(static_cast<Eigen::Index>(i));
  }
  for (size_t j = 0; j < T.size(); ++j)
    table.zeta.row(T[j]) = phi_terminal.row(static_cast<Eigen::Index>(j));
  return table;
}

DefaultFeatureTable default_features_init(const TabularMdp& mdp, const Matrix& phi_terminal) {
  const auto T = mdp.terminal_states();
  if (phi_terminal.rows() != static_cast<Eigen::Index>(T.size()))
    throw ConfigError("default_features_init: phi rows must match terminal count");
  DefaultFeatureTable table;
  table.phi_terminal = phi_terminal;
  table.zeta = Matrix::Zero(mdp.n_states, phi_terminal.cols());
  for (size_t j = 0; j < T.size(); ++j)
    table.zeta.row(T[j]) = phi_terminal.row(static_cast<Eigen::Index>(j));
  return table;
}

void df_td_update(DefaultFeatureTable& table, const TransitionSample& x, double alpha,
                  double lambda) {
  const double scale = std::exp(x.r / lambda);
  table.zeta.row(x.s) += alpha * (scale * table.zeta.row(x.s2) - table.zeta.row(x.s));
}

Matrix sa_default_features_closed(const ProtoRep& dr_sa, const TabularMdp& mdp,
                                  const Matrix& policy, const Matrix& phi_terminal,
                                  double lambda) {
  if (dr_sa.kind != ReprKind::DR_SA)
    throw ConfigError("sa_default_features_closed: need a state-action DR");
  (void)lambda;
  const auto T_states = mdp.terminal_states();
  if (phi_terminal.rows() != static_cast<Eigen::Index>(T_states.size()))
    throw ConfigError("sa_default_features_closed: phi rows must match terminal count");
  const int n_pairs = mdp.n_states * mdp.n_actions;
  const auto term = sa_terminal(mdp);
  std::vector<int> N, T;
  for (int i = 0; i < n_pairs; ++i) (term[static_cast<size_t>(i)] ? T : N).push_back(i);

  // Phibar over terminal pairs: the row of the pair's state.
  Matrix phibar(T.size(), phi_terminal.cols());
  for (size_t j = 0; j < T.size(); ++j) {
    const int s = T[j] / mdp.n_actions;
    const auto it = std::find(T_states.begin(), T_states.end(), s);
    phibar.row(static_cast<Eigen::Index>(j)) =
        phi_terminal.row(static_cast<Eigen::Index>(it - T_states.begin()));
  }

  const Matrix Pbar = sa_transition_matrix(mdp, policy);
  Matrix P_NT(N.size(), T.size());
  for (size_t i = 0; i < N.size(); ++i)
    for (size_t j = 0; j < T.size(); ++j) P_NT(i, j) = Pbar(N[i], T[j]);
  const Matrix PPhi = P_NT * phibar;

  Matrix zeta = Matrix::Zero(n_pairs, phi_terminal.cols());
  if (dr_sa.hp) {
    const mpfr_prec_t bits = dr_sa.hp->bits();
    HpMatrix Z_NN(static_cast<int>(N.size()), static_cast<int>(N.size()), bits);
    for (size_t i = 0; i < N.size(); ++i)
      for (size_t j = 0; j < N.size(); ++j)
        Z_NN.at(static_cast<int>(i), static_cast<int>(j)) = dr_sa.hp->at(N[i], N[j]);
    const Matrix zeta_N = hp_matmul(Z_NN, HpMatrix::from_double(PPhi, bits)).to_double();
    for (size_t i = 0; i < N.size(); ++i) zeta.row(N[i]) = zeta_N.row(static_cast<Eigen::Index>(i));
  } else {
    Matrix Z_NN(N.size(), N.size());
    for (size_t i = 0; i < N.size(); ++i)
      for (size_t j = 0; j < N.size(); ++j) Z_NN(i, j) = dr_sa.dense(N[i], N[j]);
    const Matrix zeta_N = Z_NN * PPhi;
    for (size_t i = 0; i < N.size(); ++i) zeta.row(N[i]) = zeta_N.row(static_cast<Eigen::Index>(i));
  }
  for (size_t j = 0; j < T.size(); ++j) zeta.row(T[j]) = phibar.row(static_cast<Eigen::Index>(j));
  return zeta;
}

Matrix sa_default_features_init(const TabularMdp& mdp, const Matrix& phi_terminal) {
  const auto T_states = mdp.terminal_states();
  if (phi_terminal.rows() != static_cast<Eigen::Index>(T_states.size()))
    throw ConfigError("sa_default_features_init: phi rows must match terminal count");
  Matrix zeta = Matrix::Zero(mdp.n_states * mdp.n_actions, phi_terminal.cols());
  for (size_t j = 0; j < T_states.size(); ++j)
    for (int a = 0; a < mdp.n_actions; ++a)
      zeta.row(sa_index(mdp, T_states[j], a)) = phi_terminal.row(static_cast<Eigen::Index>(j));
  return zeta;
}

void sa_df_td_update(Matrix& zeta_sa, const TabularMdp& mdp, const SaTransitionSample& x,
                     double alpha, double lambda) {
  const int i = sa_index(mdp, x.s, x.a);
  const int j = sa_index(mdp, x.s2, x.a2);
  const double scale = std::exp(x.r / lambda);
  zeta_sa.row(i) += alpha * (scale * zeta_sa.row(j) - zeta_sa.row(i));
}

Matrix sf_init(const TabularMdp& mdp, const Matrix& phi_states) {
  if (phi_states.rows() != mdp.n_states)
    throw ConfigError("sf_init: phi must have one row per state");
  Matrix psi = Matrix::Zero(mdp.n_states * mdp.n_actions, phi_states.cols());
  for (int t : mdp.terminal_states())
    for (int a = 0; a < mdp.n_actions; ++a) psi.row(sa_index(mdp, t, a)) = phi_states.row(t);
  return psi;
}

void sf_td_update(Matrix& psi_sa, const TabularMdp& mdp, const TransitionSample& x, int a2,
                  double alpha, double gamma, const Matrix& phi_states) {
  const int i = sa_index(mdp, x.s, x.a);
  const int j = sa_index(mdp, x.s2, a2);
  psi_sa.row(i) +=
      alpha * (phi_states.row(x.s) + gamma * psi_sa.row(j) - psi_sa.row(i));
}

Matrix df_transfer_q(const Matrix& zeta_sa, const TabularMdp& mdp, const Vector& goal_rewards,
                     double lambda) {
  const auto T = mdp.terminal_states();
  if (goal_rewards.size() != static_cast<Eigen::Index>(T.size()))
    throw ConfigError("df_transfer_q: one reward per terminal required");
  if (zeta_sa.cols() != static_cast<Eigen::Index>(T.size()))
    throw ConfigError("df_transfer_q: zeta columns must index terminals");
  Matrix q(mdp.n_states, mdp.n_actions);
  Vector row(T.size());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto i = static_cast<Eigen::Index>(sa_index(mdp, s, a));
      for (size_t g = 0; g < T.size(); ++g) {
        const double z = zeta_sa(i, static_cast<Eigen::Index>(g));
        // TD tables can dip below zero transiently; those carry no goal mass.
        row[static_cast<Eigen::Index>(g)] =
            z > 0.0 ? std::log(z) + goal_rewards[static_cast<Eigen::Index>(g)] / lambda
                    : kNegInf;
      }
      q(s, a) = lambda * logsumexp(row);
    }
  return q;
}

Matrix sf_gpi_q(const std::vector<Matrix>& psi_tables, const TabularMdp& mdp, const Vector& w) {
  if (psi_tables.empty()) throw ConfigError("sf_gpi_q: no policies");
  Matrix q = Matrix::Constant(mdp.n_states, mdp.n_actions, kNegInf);
  for (const Matrix& psi : psi_tables) {
    if (psi.cols() != w.size())
      throw ConfigError("sf_gpi_q: feature dimension mismatch");
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double v = psi.row(sa_index(mdp, s, a)).dot(w);
        q(s, a) = std::max(q(s, a), v);
      }
  }
  return q;
}

Matrix greedy_policy_from_q(const Matrix& q) {
  Matrix pi = Matrix::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    pi(s, best) = 1.0;
  }
  return pi;
}

Vector ssp_value_iteration(const TabularMdp& mdp, const Vector& terminal_values, double tol,
                           int max_iters) {
  const auto T = mdp.terminal_states();
  if (T.empty()) throw ConfigError("ssp_value_iteration: environment has no terminals");
  if (terminal_values.size() != static_cast<Eigen::Index>(T.size()))
    throw ConfigError("ssp_value_iteration: one value per terminal required");
  const Matrix policy_stub = uniform_policy(mdp);
  const Vector r = state_rewards_under(mdp, policy_stub);  // state rewards
  if (mdp.reward_on != TabularMdp::RewardOn::State)
    throw ConfigError("ssp_value_iteration: state-attached rewards required");

  Vector v = Vector::Zero(mdp.n_states);
  for (size_t j = 0; j < T.size(); ++j) v[T[j]] = terminal_values[static_cast<Eigen::Index>(j)];
  for (int k = 0; k < max_iters; ++k) {
    double delta = 0.0;
    Vector next = v;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) continue;
      double best = kNegInf;
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double ev = mdp.P[a].row(s).dot(v);
        best = std::max(best, ev);
      }
      next[s] = r[s] + best;
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v = std::move(next);
    if (delta < tol) return v;
  }
  throw ConvergenceError("ssp_value_iteration: no convergence (improper policy or dead end?)",
                         std::vector<double>(v.data(), v.data() + mdp.n_states), tol);
}

Matrix ssp_q_from_values(const TabularMdp& mdp, const Vector& v) {
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (mdp.is_terminal(s)) {
        q(s, a) = v[s];
        continue;
      }
      q(s, a) = mdp.reward_state[s] + mdp.P[a].row(s).dot(v);
    }
  return q;
}

Matrix q_iteration(const TabularMdp& mdp, double gamma, double tol, int max_iters) {
  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) q(s, a) = mdp.reward(s, a);
  Vector vmax(mdp.n_states);
  for (int k = 0; k < max_iters; ++k) {
    for (int s = 0; s < mdp.n_states; ++s) vmax[s] = q.row(s).maxCoeff();
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double next = mdp.reward(s, a) + gamma * mdp.P[a].row(s).dot(vmax);
        delta = std::max(delta, std::abs(next - q(s, a)));
        q(s, a) = next;
      }
    }
    if (delta < tol) return q;
  }
  throw ConvergenceError("q_iteration: no convergence", {}, tol);
}

}  // namespace protorep
