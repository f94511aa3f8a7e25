#include "protorep/mdp.hpp"

#include <cmath>

#include "protorep/csvio.hpp"
#include "protorep/errors.hpp"

namespace protorep {

std::vector<int> TabularMdp::terminal_states() const {
  std::vector<int> out;
  for (int s = 0; s < n_states; ++s)
    if (is_terminal(s)) out.push_back(s);
  return out;
}

std::vector<int> TabularMdp::nonterminal_states() const {
  std::vector<int> out;
  for (int s = 0; s < n_states; ++s)
    if (!is_terminal(s)) out.push_back(s);
  return out;
}

void TabularMdp::validate() const {
  if (n_states <= 0) throw ConfigError("mdp: n_states must be positive");
  if (n_actions <= 0) throw ConfigError("mdp: n_actions must be positive");
  if (static_cast<int>(P.size()) != n_actions)
    throw ConfigError("mdp: expected one transition matrix per action");
  if (static_cast<int>(terminal.size()) != n_states)
    throw ConfigError("mdp: terminal mask size mismatch");
  for (int a = 0; a < n_actions; ++a) {
    if (P[a].rows() != n_states || P[a].cols() != n_states)
      throw ConfigError("mdp: P[" + std::to_string(a) + "] has wrong shape");
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        const double p = P[a](s, t);
        if (p < 0.0 || !std::isfinite(p))
          throw ConfigError("mdp: negative or non-finite probability at (s=" +
                            std::to_string(s) + ",a=" + std::to_string(a) +
                            ",s'=" + std::to_string(t) + ")");
        sum += p;
      }
      const double want = is_terminal(s) ? 0.0 : 1.0;
      if (std::abs(sum - want) > 1e-9)
        throw ConfigError("mdp: row sum for state " + std::to_string(s) +
                          " action " + std::to_string(a) + " is " +
                          format_double(sum) + ", expected " + format_double(want));
    }
  }
  if (reward_on == RewardOn::State) {
    if (reward_state.size() != n_states)
      throw ConfigError("mdp: reward_state size mismatch");
  } else {
    if (reward_sa.rows() != n_states || reward_sa.cols() != n_actions)
      throw ConfigError("mdp: reward_sa shape mismatch");
  }
  if (start.size() != n_states) throw ConfigError("mdp: start distribution size mismatch");
  double ssum = 0.0;
  for (int s = 0; s < n_states; ++s) {
    if (start[s] < 0.0) throw ConfigError("mdp: negative start probability");
    if (start[s] > 0.0 && is_terminal(s))
      throw ConfigError("mdp: start mass on terminal state " + std::to_string(s));
    ssum += start[s];
  }
  if (std::abs(ssum - 1.0) > 1e-9)
    throw ConfigError("mdp: start distribution sums to " + format_double(ssum));
}

Matrix uniform_policy(const TabularMdp& mdp) {
  return Matrix::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
}

Vector state_rewards_under(const TabularMdp& mdp, const Matrix& policy) {
  if (mdp.reward_on == TabularMdp::RewardOn::State) return mdp.reward_state;
  Vector r(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) acc += policy(s, a) * mdp.reward_sa(s, a);
    r[s] = acc;
  }
  return r;
}

Matrix transition_matrix(const TabularMdp& mdp, const Matrix& policy) {
  Matrix P = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      P.row(s) += pa * mdp.P[a].row(s);
    }
  }
  return P;
}

Matrix sa_transition_matrix(const TabularMdp& mdp, const Matrix& policy) {
  const int n = mdp.n_states * mdp.n_actions;
  Matrix Pbar = Matrix::Zero(n, n);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int row = sa_index(mdp, s, a);
      for (int t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.P[a](s, t);
        if (p == 0.0) continue;
        for (int b = 0; b < mdp.n_actions; ++b) {
          const double pb = policy(t, b);
          if (pb == 0.0) continue;
          Pbar(row, sa_index(mdp, t, b)) += p * pb;
        }
      }
    }
  }
  return Pbar;
}

Vector sa_rewards(const TabularMdp& mdp) {
  Vector r(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) r[sa_index(mdp, s, a)] = mdp.reward(s, a);
  return r;
}

std::vector<std::uint8_t> sa_terminal(const TabularMdp& mdp) {
  std::vector<std::uint8_t> t(static_cast<size_t>(mdp.n_states) * mdp.n_actions, 0);
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.is_terminal(s))
      for (int a = 0; a < mdp.n_actions; ++a) t[static_cast<size_t>(sa_index(mdp, s, a))] = 1;
  return t;
}

int sample_start(const TabularMdp& mdp, Rng& rng) {
  return rng.categorical(mdp.start, mdp.n_states);
}

int sample_action(const Matrix& policy, int s, Rng& rng) {
  const int n = static_cast<int>(policy.cols());
  double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < n; ++a) {
    acc += policy(s, a);
    if (u < acc) return a;
  }
  return n - 1;
}

int sample_next(const TabularMdp& mdp, int s, int a, Rng& rng) {
  if (mdp.is_terminal(s))
    throw NumericError("sample_next called on terminal state " + std::to_string(s));
  const auto& row = mdp.P[a].row(s);
  double u = rng.uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (int t = 0; t < mdp.n_states; ++t) {
    const double p = row[t];
    if (p <= 0.0) continue;
    last_positive = t;
    acc += p;
    if (u < acc) return t;
  }
  return last_positive;  // rounding guard; row sums to 1 for non-terminals
}

void rescale_rewards(TabularMdp& mdp, double lo, double hi) {
  double rmin, rmax;
  if (mdp.reward_on == TabularMdp::RewardOn::State) {
    rmin = mdp.reward_state.minCoeff();
    rmax = mdp.reward_state.maxCoeff();
  } else {
    rmin = mdp.reward_sa.minCoeff();
    rmax = mdp.reward_sa.maxCoeff();
  }
  const double span = rmax - rmin;
  auto map = [&](double r) {
    if (span == 0.0) return hi;  // constant rewards collapse to the high end
    return lo + (r - rmin) / span * (hi - lo);
  };
  if (mdp.reward_on == TabularMdp::RewardOn::State) {
    for (int s = 0; s < mdp.n_states; ++s) mdp.reward_state[s] = map(mdp.reward_state[s]);
  } else {
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) mdp.reward_sa(s, a) = map(mdp.reward_sa(s, a));
  }
}

std::string mdp_to_csv(const TabularMdp& mdp) {
  std::string out;
  out += "section,s,a,s2,value\n";
  for (int a = 0; a < mdp.n_actions; ++a)
    for (int s = 0; s < mdp.n_states; ++s)
      for (int t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.P[a](s, t);
        if (p == 0.0) continue;
        out += "p," + std::to_string(s) + ',' + std::to_string(a) + ',' +
               std::to_string(t) + ',' + format_double(p) + '\n';
      }
  if (mdp.reward_on == TabularMdp::RewardOn::State) {
    for (int s = 0; s < mdp.n_states; ++s)
      out += "r," + std::to_string(s) + ",,," + format_double(mdp.reward_state[s]) + '\n';
  } else {
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a)
        out += "r," + std::to_string(s) + ',' + std::to_string(a) + ",," +
               format_double(mdp.reward_sa(s, a)) + '\n';
  }
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.is_terminal(s)) out += "terminal," + std::to_string(s) + ",,,1\n";
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.start[s] > 0.0)
      out += "start," + std::to_string(s) + ",,," + format_double(mdp.start[s]) + '\n';
  return out;
}

}  // namespace protorep
