#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "protorep/envs.hpp"
#include "protorep/errors.hpp"
#include "protorep/represent.hpp"
#include "protorep/rod.hpp"
#include "support/oracles.hpp"

using namespace protorep;

namespace {

/// Checks every cross-cutting contract of a finished run: one logged sample
/// per environment interaction, in-episode continuity, per-cycle metrics that
/// match a recomputation from the log.
void check_run_consistency(const TabularMdp& explore, const RodConfig& cfg,
                           const RodResult& res) {
  const int S = explore.n_states;
  REQUIRE(static_cast<int>(res.rows.size()) == cfg.n_iter);
  REQUIRE(res.dataset.size() ==
          static_cast<size_t>(cfg.n_iter) * static_cast<size_t>(cfg.n_steps));

  for (size_t k = 0; k < res.dataset.size(); ++k) {
    const TransitionSample& x = res.dataset[k];
    CHECK_FALSE(x.done);  // fixed-length episodes never terminate
    CHECK(x.r == explore.reward(x.s, x.a));
    CHECK(explore.P[static_cast<size_t>(x.a)](x.s, x.s2) > 0.0);
    // Within an episode the walk is continuous; a new start is sampled only
    // at cycle boundaries.
    if ((k + 1) % static_cast<size_t>(cfg.n_steps) != 0 && k + 1 < res.dataset.size())
      CHECK(res.dataset[k + 1].s == x.s2);
  }

  // Every arrival increments exactly one counter, plus one start per cycle.
  long count_sum = 0;
  for (long c : res.visit_counts) count_sum += c;
  CHECK(count_sum == static_cast<long>(res.dataset.size()) + cfg.n_iter);
  REQUIRE(static_cast<int>(res.visited.size()) == S);
  int flagged = 0;
  for (int s = 0; s < S; ++s) {
    CHECK((res.visited[static_cast<size_t>(s)] != 0) ==
          (res.visit_counts[static_cast<size_t>(s)] > 0));
    if (res.visited[static_cast<size_t>(s)]) ++flagged;
  }
  CHECK(res.rows.back().n_visited == flagged);

  double run_sum = 0.0;
  size_t k = 0;
  int prev_visited = 0;
  for (int i = 0; i < cfg.n_iter; ++i) {
    const RodIterationRow& row = res.rows[static_cast<size_t>(i)];
    CHECK(row.iter == i);
    CHECK(row.env_steps == static_cast<long>(i + 1) * cfg.n_steps);
    while (k < static_cast<size_t>(row.env_steps)) run_sum += res.dataset[k++].r;
    // Same summands in the same order: the stored mean must match exactly.
    CHECK(row.mean_step_reward == run_sum / static_cast<double>(row.env_steps));
    CHECK(row.n_visited >= prev_visited);
    prev_visited = row.n_visited;
    CHECK(row.visited_frac == static_cast<double>(row.n_visited) / S);
  }
  CHECK(res.final_options == res.rows.back().options);
}

}  // namespace

TEST_CASE("discovery kind names round trip and reject unknowns") {
  CHECK(rod_kind_from_name("race") == RodKind::RACE);
  CHECK(rod_kind_from_name("ceo") == RodKind::CEO);
  CHECK(rod_kind_from_name("rw") == RodKind::RW);
  for (RodKind kind : {RodKind::RACE, RodKind::CEO, RodKind::RW})
    CHECK(rod_kind_from_name(rod_kind_name(kind)) == kind);
  CHECK_THROWS_AS(rod_kind_from_name("dfs"), ConfigError);
  CHECK_THROWS_AS(rod_kind_from_name(""), ConfigError);
}

TEST_CASE("discovery validates environment and configuration up front") {
  const TabularMdp walk = testing::two_state_walk();
  const RodConfig base;  // defaults are valid

  // Fixed-length episodes cannot accommodate absorbing states.
  const TabularMdp episodic = make_environment("grid_task").mdp;
  try {
    run_rod(episodic, base, 1);
    FAIL("expected a config error for a terminal-bearing environment");
  } catch (const ConfigError& err) {
    CHECK(std::strstr(err.what(), "terminal") != nullptr);
  }

  auto reject = [&](auto mutate) {
    RodConfig cfg = base;
    mutate(cfg);
    CHECK_THROWS_AS(run_rod(walk, cfg, 1), ConfigError);
  };
  reject([](RodConfig& c) { c.n_iter = 0; });
  reject([](RodConfig& c) { c.n_steps = 0; });
  reject([](RodConfig& c) { c.n_learn = 0; });  // RACE needs at least one sweep
  reject([](RodConfig& c) { c.alpha = 0.0; });
  reject([](RodConfig& c) { c.alpha = 1.5; });
  reject([](RodConfig& c) { c.p_option = -0.1; });
  reject([](RodConfig& c) { c.p_option = 1.5; });
  reject([](RodConfig& c) { c.n_option = -1; });
  reject([](RodConfig& c) { c.lambda = 0.0; });
  reject([](RodConfig& c) {
    c.kind = RodKind::CEO;
    c.gamma = 1.0;
  });
  reject([](RodConfig& c) {
    c.kind = RodKind::CEO;
    c.gamma = -0.1;
  });
  reject([](RodConfig& c) { c.with_q = true; });  // episodic layout missing
}

TEST_CASE("random walk baseline explores without building a representation") {
  const TabularMdp explore = make_environment("grid_task", "no_terminals").mdp;
  RodConfig cfg;
  cfg.kind = RodKind::RW;
  cfg.n_iter = 6;
  cfg.n_steps = 25;
  cfg.n_learn = 0;  // ignored for the baseline, must not be rejected
  const RodResult res = run_rod(explore, cfg, 7);

  check_run_consistency(explore, cfg, res);
  CHECK(res.repr.size() == 0);
  CHECK(res.q_ctrl.size() == 0);
  CHECK(res.final_options == 0);
  for (const RodIterationRow& row : res.rows) {
    CHECK(row.options == 0);
    CHECK(std::isnan(row.eval_return));
  }
}

TEST_CASE("interaction log and per-cycle metrics stay mutually consistent") {
  // Heavy option traffic with a short execution cap exercises both action
  // sources; the log contract must not depend on who picked the action.
  const TabularMdp explore = make_environment("grid_task", "no_terminals").mdp;
  RodConfig cfg;
  cfg.kind = RodKind::RACE;
  cfg.n_iter = 6;
  cfg.n_steps = 120;
  cfg.p_option = 0.9;
  cfg.n_option = 4;
  cfg.option_step_cap = 7;
  cfg.n_learn = 2;
  cfg.lambda = 1.3;
  const RodResult res = run_rod(explore, cfg, 11);

  check_run_consistency(explore, cfg, res);
  REQUIRE(res.repr.rows() == explore.n_states);
  REQUIRE(res.repr.cols() == explore.n_states);
  CHECK(res.repr.minCoeff() >= 0.0);
  CHECK(res.q_ctrl.size() == 0);
  for (int i = 0; i < cfg.n_iter; ++i) {
    CHECK(res.rows[static_cast<size_t>(i)].options == std::min(i + 1, cfg.n_option));
    CHECK(std::isnan(res.rows[static_cast<size_t>(i)].eval_return));
  }
}

TEST_CASE("option set growth respects the configured capacity") {
  const TabularMdp walk = testing::two_state_walk();
  RodConfig cfg;
  cfg.kind = RodKind::RACE;
  cfg.n_iter = 7;
  cfg.n_steps = 10;
  cfg.p_option = 0.3;
  cfg.n_option = 3;
  cfg.n_learn = 5;
  cfg.alpha = 0.2;
  cfg.lambda = 1.0;
  const RodResult res = run_rod(walk, cfg, 31);

  check_run_consistency(walk, cfg, res);
  CHECK(res.final_options == 3);
  for (int i = 0; i < cfg.n_iter; ++i)
    CHECK(res.rows[static_cast<size_t>(i)].options == std::min(i + 1, cfg.n_option));
  // Both states are inside the cycle from the first step on.
  CHECK(res.rows.front().n_visited == 2);
  for (const RodIterationRow& row : res.rows) CHECK(row.mean_step_reward == -1.0);

  SUBCASE("a zero capacity disables options but not learning") {
    RodConfig none = cfg;
    none.n_option = 0;
    const RodResult bare = run_rod(walk, none, 31);
    CHECK(bare.final_options == 0);
    for (const RodIterationRow& row : bare.rows) CHECK(row.options == 0);
    CHECK(bare.repr(0, 1) > 0.0);
    CHECK(bare.repr(1, 0) > 0.0);
  }
}

TEST_CASE("representation refresh replays each cycle with backward sweeps") {
  const TabularMdp walk = testing::two_state_walk();
  RodConfig cfg;
  cfg.n_iter = 5;
  cfg.n_steps = 8;
  cfg.p_option = 0.0;  // execution off; discovery bookkeeping still runs
  cfg.n_option = 2;
  cfg.n_learn = 3;
  cfg.alpha = 0.1;
  cfg.lambda = 1.3;
  cfg.gamma = 0.9;

  SUBCASE("positive-table flavour") {
    cfg.kind = RodKind::RACE;
    const RodResult res = run_rod(walk, cfg, 5);
    check_run_consistency(walk, cfg, res);
    for (const RodIterationRow& row : res.rows)
      CHECK(row.options == std::min(row.iter + 1, cfg.n_option));

    Matrix z = dr_td_init(walk, cfg.lambda);
    for (int e = 0; e < cfg.n_iter; ++e)
      for (int sweep = 0; sweep < cfg.n_learn; ++sweep)
        for (size_t i = static_cast<size_t>(e + 1) * static_cast<size_t>(cfg.n_steps);
             i-- > static_cast<size_t>(e) * static_cast<size_t>(cfg.n_steps);)
          dr_td_update(z, res.dataset[i], cfg.alpha, cfg.lambda);
    CHECK(z == res.repr);  // identical update schedule, bit for bit
    CHECK(res.repr(0, 1) > 0.0);
    CHECK(res.repr(1, 0) > 0.0);
  }

  SUBCASE("discounted-occupancy flavour") {
    cfg.kind = RodKind::CEO;
    const RodResult res = run_rod(walk, cfg, 5);
    check_run_consistency(walk, cfg, res);

    Matrix psi = sr_td_init(walk);
    for (int e = 0; e < cfg.n_iter; ++e)
      for (int sweep = 0; sweep < cfg.n_learn; ++sweep)
        for (size_t i = static_cast<size_t>(e + 1) * static_cast<size_t>(cfg.n_steps);
             i-- > static_cast<size_t>(e) * static_cast<size_t>(cfg.n_steps);)
          sr_td_update(psi, res.dataset[i], cfg.alpha, cfg.gamma);
    CHECK(psi == res.repr);
    // Expected revisits keep the diagonal at or above the immediate visit.
    CHECK(res.repr.minCoeff() >= 0.0);
    CHECK(res.repr.diagonal().minCoeff() >= 1.0);
    CHECK(res.repr(0, 1) > 0.0);
    CHECK(res.repr(1, 0) > 0.0);
  }
}

TEST_CASE("identical seeds reproduce a run bit for bit and seeds matter") {
  const TabularMdp explore = make_environment("grid_task", "no_terminals").mdp;
  RodConfig cfg;
  cfg.kind = RodKind::RACE;
  cfg.n_iter = 4;
  cfg.n_steps = 60;
  cfg.p_option = 0.1;
  cfg.n_option = 4;
  cfg.n_learn = 2;
  const RodResult a = run_rod(explore, cfg, 99);
  const RodResult b = run_rod(explore, cfg, 99);

  REQUIRE(a.dataset.size() == b.dataset.size());
  for (size_t k = 0; k < a.dataset.size(); ++k) {
    CHECK(a.dataset[k].s == b.dataset[k].s);
    CHECK(a.dataset[k].a == b.dataset[k].a);
    CHECK(a.dataset[k].r == b.dataset[k].r);
    CHECK(a.dataset[k].s2 == b.dataset[k].s2);
  }
  CHECK(a.visit_counts == b.visit_counts);
  CHECK(a.repr == b.repr);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].n_visited == b.rows[i].n_visited);
    CHECK(a.rows[i].mean_step_reward == b.rows[i].mean_step_reward);
    CHECK(a.rows[i].options == b.rows[i].options);
  }

  const RodResult c = run_rod(explore, cfg, 100);
  int diffs = 0;
  for (size_t k = 0; k < a.dataset.size(); ++k)
    if (a.dataset[k].s != c.dataset[k].s || a.dataset[k].a != c.dataset[k].a) ++diffs;
  CHECK(diffs > 0);
}

TEST_CASE("task values are learned from the relabeled exploration log") {
  const Environment explore = make_environment("grid_task", "no_terminals");
  const Environment episodic = make_environment("grid_task");
  RodConfig cfg;
  cfg.kind = RodKind::RACE;
  cfg.n_iter = 10;
  cfg.n_steps = 150;
  cfg.p_option = 0.05;
  cfg.n_option = 8;
  cfg.n_learn = 10;
  cfg.with_q = true;
  cfg.q_alpha = 0.2;
  cfg.q_eval_cap = 300;

  // The two layouts must agree; a mismatched task environment is rejected.
  {
    RodConfig bad = cfg;
    const TabularMdp walk = testing::two_state_walk();
    CHECK_THROWS_AS(run_rod(explore.mdp, bad, 1, &walk), ConfigError);
  }

  const RodResult res = run_rod(explore.mdp, cfg, 17, &episodic.mdp);
  check_run_consistency(explore.mdp, cfg, res);
  REQUIRE(res.q_ctrl.rows() == episodic.mdp.n_states);
  REQUIRE(res.q_ctrl.cols() == episodic.mdp.n_actions);
  CHECK(res.q_ctrl.minCoeff() < 0.0);
  // Samples departing the task's absorbing states are dropped on relabeling,
  // so their action values never move.
  for (int t : episodic.mdp.terminal_states())
    CHECK(res.q_ctrl.row(t).cwiseAbs().maxCoeff() == 0.0);
  for (const RodIterationRow& row : res.rows) {
    CHECK(std::isfinite(row.eval_return));
    CHECK(row.eval_return <= 0.0);
  }
}
