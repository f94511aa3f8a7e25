#include "protorep/rod.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "protorep/errors.hpp"
#include "protorep/logdomain.hpp"
#include "protorep/rng.hpp"

namespace protorep {

RodKind rod_kind_from_name(const std::string& name) {
  if (name == "race") return RodKind::RACE;
  if (name == "ceo") return RodKind::CEO;
  if (name == "rw") return RodKind::RW;
  throw ConfigError("unknown discovery kind '" + name + "' (expected race, ceo or rw)");
}

std::string rod_kind_name(RodKind kind) {
  switch (kind) {
    case RodKind::RACE: return "race";
    case RodKind::CEO: return "ceo";
    case RodKind::RW: return "rw";
  }
  throw ConfigError("unknown discovery kind value");
}

namespace {

// Per-iteration eigensolve budget.  The warm start threads refinement through
// the whole run, so a stalled (near-degenerate) solve just resumes next
// iteration instead of eating an unbounded number of matvecs now.
constexpr double kEigTol = 1e-10;
constexpr int kEigIters = 5000;

void validate_rod(const TabularMdp& explore, const RodConfig& cfg,
                  const TabularMdp* episodic) {
  for (int s = 0; s < explore.n_states; ++s)
    if (explore.is_terminal(s))
      throw ConfigError("discovery runs need a terminal-free environment; state " +
                        std::to_string(s) + " is terminal");
  if (cfg.n_iter <= 0 || cfg.n_steps <= 0)
    throw ConfigError("discovery needs positive n_iter and n_steps");
  if (cfg.kind != RodKind::RW && cfg.n_learn < 1)
    throw ConfigError("representation learning needs n_learn >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw ConfigError("representation step size must be in (0, 1]");
  if (cfg.p_option < 0.0 || cfg.p_option > 1.0)
    throw ConfigError("p_option must be in [0, 1]");
  if (cfg.n_option < 0) throw ConfigError("n_option must be >= 0");
  if (cfg.kind == RodKind::RACE && cfg.lambda <= 0.0)
    throw ConfigError("lambda must be positive");
  if (cfg.kind == RodKind::CEO && !(cfg.gamma >= 0.0 && cfg.gamma < 1.0))
    throw ConfigError("gamma must be in [0, 1)");
  if (cfg.with_q) {
    if (episodic == nullptr)
      throw ConfigError("with_q requires the episodic environment");
    if (episodic->n_states != explore.n_states || episodic->n_actions != explore.n_actions)
      throw ConfigError("episodic environment layout does not match the exploration one");
  }
}

/// Greedy argmax with lowest-index tie break.
int greedy_action(const Matrix& q, int s) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.cols()); ++a)
    if (q(s, a) > q(s, best)) best = a;
  return best;
}

bool option_terminates_at(const EigenOption& opt, int s, const std::vector<char>& visited) {
  if (!visited[static_cast<size_t>(s)]) return true;
  return opt.q_int(s, greedy_action(opt.q_int, s)) <= 0.0;
}

/// Offline Q-learning against the eigenvector-difference reward, backward
/// sweeps so late transitions seed the targets of earlier ones.
Matrix train_option(const std::vector<TransitionSample>& data, const Vector& e,
                    int n_states, int n_actions, const RodConfig& cfg) {
  Matrix q = Matrix::Zero(n_states, n_actions);
  for (int sweep = 0; sweep < cfg.option_sweeps; ++sweep) {
    for (size_t i = data.size(); i-- > 0;) {
      const TransitionSample& x = data[i];
      const double ri = e[x.s2] - e[x.s];
      const double boot = q(x.s2, greedy_action(q, x.s2));
      q(x.s, x.a) += cfg.alpha0 * (ri + cfg.gamma0 * boot - q(x.s, x.a));
    }
  }
  return q;
}

std::vector<int> visited_list(const std::vector<char>& visited) {
  std::vector<int> v;
  for (size_t s = 0; s < visited.size(); ++s)
    if (visited[s]) v.push_back(static_cast<int>(s));
  return v;
}

}  // namespace

RodResult run_rod(const TabularMdp& explore, const RodConfig& cfg, std::uint64_t seed,
                  const TabularMdp* episodic) {
  validate_rod(explore, cfg, episodic);
  const int S = explore.n_states;
  const int A = explore.n_actions;

  Rng env_rng(derive_seed(seed, 0, 0));
  Rng eig_rng(derive_seed(seed, 1, 0));

  RodResult out;
  out.visit_counts.assign(static_cast<size_t>(S), 0);
  out.visited.assign(static_cast<size_t>(S), 0);

  Matrix repr;
  if (cfg.kind == RodKind::RACE) repr = dr_td_init(explore, cfg.lambda);
  if (cfg.kind == RodKind::CEO) repr = sr_td_init(explore);
  if (cfg.with_q) out.q_ctrl = Matrix::Zero(S, A);

  std::deque<EigenOption> options;
  // Full-length log warm start for the RACE power iteration; entries of
  // states visited later stay at log 1 until first used.
  Vector warm = Vector::Zero(S);

  long total_steps = 0;
  double reward_sum = 0.0;
  for (int iter = 0; iter < cfg.n_iter; ++iter) {
    // One fixed-length episode from the start distribution.  The
    // representation trains on this episode's samples only; option policies
    // train on everything collected so far.
    const size_t curr_begin = out.dataset.size();
    int s = sample_start(explore, env_rng);
    out.visited[static_cast<size_t>(s)] = 1;
    ++out.visit_counts[static_cast<size_t>(s)];
    int steps = 0;
    while (steps < cfg.n_steps) {
      const EigenOption* running = nullptr;
      if (!options.empty() && cfg.p_option > 0.0 && env_rng.uniform() < cfg.p_option) {
        const EigenOption& cand =
            options[static_cast<size_t>(env_rng.below(static_cast<int>(options.size())))];
        // An option already terminated where it was invoked degenerates to
        // one primitive step.
        if (!option_terminates_at(cand, s, out.visited)) running = &cand;
      }
      if (running != nullptr) {
        int opt_steps = 0;
        while (steps < cfg.n_steps && opt_steps < cfg.option_step_cap) {
          const int a = greedy_action(running->q_int, s);
          const int s2 = sample_next(explore, s, a, env_rng);
          out.dataset.push_back({s, a, explore.reward(s, a), s2, false});
          reward_sum += out.dataset.back().r;
          ++steps;
          ++opt_steps;
          ++total_steps;
          const bool fresh = !out.visited[static_cast<size_t>(s2)];
          out.visited[static_cast<size_t>(s2)] = 1;
          ++out.visit_counts[static_cast<size_t>(s2)];
          s = s2;
          if (fresh || option_terminates_at(*running, s, out.visited)) break;
        }
      } else {
        const int a = env_rng.below(A);
        const int s2 = sample_next(explore, s, a, env_rng);
        out.dataset.push_back({s, a, explore.reward(s, a), s2, false});
        reward_sum += out.dataset.back().r;
        ++steps;
        ++total_steps;
        out.visited[static_cast<size_t>(s2)] = 1;
        ++out.visit_counts[static_cast<size_t>(s2)];
        s = s2;
      }
    }

    if (cfg.kind != RodKind::RW) {
      // Refresh the representation: backward sweeps so that rows near the
      // episode tail are consistent before earlier rows bootstrap from them.
      for (int sweep = 0; sweep < cfg.n_learn; ++sweep) {
        for (size_t i = out.dataset.size(); i-- > curr_begin;) {
          const TransitionSample& x = out.dataset[i];
          if (cfg.kind == RodKind::RACE)
            dr_td_update(repr, x, cfg.alpha, cfg.lambda);
          else
            sr_td_update(repr, x, cfg.alpha, cfg.gamma);
        }
      }

      const std::vector<int> vis = visited_list(out.visited);
      const int nv = static_cast<int>(vis.size());
      Matrix sub(nv, nv);
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < nv; ++j) sub(i, j) = repr(vis[static_cast<size_t>(i)], vis[static_cast<size_t>(j)]);

      EigenSummary summary;
      if (cfg.kind == RodKind::RACE) {
        Vector warm_sub(nv);
        for (int i = 0; i < nv; ++i) warm_sub[i] = warm[vis[static_cast<size_t>(i)]];
        summary = dr_top_eigenvector(LogNonNegMatrix::from_linear(sub), vis, S, kEigTol,
                                     kEigIters, &eig_rng, &warm_sub, /*accept_last=*/true);
        for (int i = 0; i < nv; ++i) warm[vis[static_cast<size_t>(i)]] = summary.vector[vis[static_cast<size_t>(i)]];
      } else {
        summary = sr_top_eigenvector(sub, vis, S, kEigTol, kEigIters, /*accept_last=*/true);
      }

      if (cfg.n_option > 0) {
        // Options climb a potential derived from the top eigenvector.  The
        // log DR eigenvector already peaks at poorly developed (fresh) rows
        // and dips in costly regions, so it is climbed as is.  The SR
        // eigenvector instead tracks how developed a row is, so covering
        // unvisited ground means descending it; once coverage equalizes the
        // potential flattens and options degenerate to primitive steps.
        Vector potential = summary.vector;
        if (cfg.kind == RodKind::CEO) potential = -potential;
        options.push_back({train_option(out.dataset, potential, S, A, cfg), iter});
        if (static_cast<int>(options.size()) > cfg.n_option) options.pop_front();
      }
    }

    double eval_return = std::numeric_limits<double>::quiet_NaN();
    if (cfg.with_q) {
      // Task learning reuses the dataset with rewards and termination taken
      // from the episodic layout; transitions out of its terminals never
      // happen there, so those samples are dropped.
      for (int sweep = 0; sweep < cfg.q_sweeps; ++sweep) {
        for (size_t i = out.dataset.size(); i-- > 0;) {
          const TransitionSample& x = out.dataset[i];
          if (episodic->is_terminal(x.s)) continue;
          const TransitionSample y{x.s, x.a, episodic->reward(x.s, x.a), x.s2,
                                   episodic->is_terminal(x.s2)};
          q_learning_update(out.q_ctrl, y, cfg.q_alpha, cfg.q_gamma);
        }
      }
      Rng eval_rng(derive_seed(seed, 2, static_cast<std::uint64_t>(iter)));
      eval_return = greedy_rollout(*episodic, out.q_ctrl, cfg.q_eval_cap, eval_rng).return_env;
    }

    const int nv = static_cast<int>(visited_list(out.visited).size());
    out.rows.push_back({iter, total_steps, nv, static_cast<double>(nv) / S,
                        reward_sum / static_cast<double>(total_steps),
                        static_cast<int>(options.size()), eval_return});
  }

  out.repr = repr;
  out.final_options = static_cast<int>(options.size());
  return out;
}

}  // namespace protorep
