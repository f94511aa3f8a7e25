#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "protorep/csvio.hpp"
#include "protorep/envs.hpp"
#include "protorep/errors.hpp"
#include "protorep/represent.hpp"
#include "protorep/rng.hpp"
#include "support/oracles.hpp"

using namespace protorep;

namespace {
const double kE1 = std::exp(-1.0);
const double kE2 = std::exp(-2.0);
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Expected-update residual of the state DR TD rule at a candidate Z:
/// R^{-1}(I + P Z) - Z, which the fixed point must annihilate.
Matrix dr_expected_update(const TabularMdp& mdp, const Matrix& policy, const Matrix& z,
                          double lambda) {
  const Matrix P = transition_matrix(mdp, policy);
  const Vector r = state_rewards_under(mdp, policy);
  Matrix target = P * z;
  for (int s = 0; s < mdp.n_states; ++s) {
    target(s, s) += 1.0;
    target.row(s) *= std::exp(r[s] / lambda);
  }
  return target - z;
}

Matrix sr_expected_update(const TabularMdp& mdp, const Matrix& policy, const Matrix& psi,
                          double gamma) {
  const Matrix P = transition_matrix(mdp, policy);
  return Matrix::Identity(mdp.n_states, mdp.n_states) + gamma * (P * psi) - psi;
}
}  // namespace

TEST_CASE("sr_closed_form: identity at gamma 0, two-cell chain, terminal rows") {
  Rng rng(31);
  TabularMdp any = testing::random_mdp(rng, 6, 2, -2.0, -0.3, false);
  CHECK(sr_closed_form(any, uniform_policy(any), 0.0).dense.isApprox(Matrix::Identity(6, 6)));

  TabularMdp c2 = testing::chain_mdp(2);
  Matrix psi = sr_closed_form(c2, uniform_policy(c2), 0.99).dense;
  CHECK(psi(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(psi(0, 1) == doctest::Approx(0.99).epsilon(1e-14));
  CHECK(psi(1, 0) == 0.0);
  CHECK(psi(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sr_closed_form: symmetric walk eigenvalues are 1/(1-g), 1/(1+g)") {
  TabularMdp walk = testing::two_state_walk();
  const double gamma = 0.99;
  Matrix psi = sr_closed_form(walk, uniform_policy(walk), gamma).dense;
  auto spec = testing::jacobi_spectrum(psi, 192);
  CHECK(spec.eigenvalues(0) == doctest::Approx(1.0 / (1.0 - gamma)).epsilon(1e-12));
  CHECK(spec.eigenvalues(1) == doctest::Approx(1.0 / (1.0 + gamma)).epsilon(1e-12));
}

TEST_CASE("sr_closed_form satisfies its defining equation on random MDPs") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    TabularMdp mdp = testing::random_mdp(rng, 3 + rng.below(6), 1 + rng.below(3), -3.0,
                                         -0.1, false);
    Matrix policy = uniform_policy(mdp);
    Matrix psi = sr_closed_form(mdp, policy, 0.95).dense;
    CHECK(sr_expected_update(mdp, policy, psi, 0.95).cwiseAbs().maxCoeff() < 1e-10);
    for (int t : mdp.terminal_states()) {
      CHECK(psi(t, t) == doctest::Approx(1.0));
      CHECK(psi.row(t).sum() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("sr_td_update: single-sample and terminal conventions") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix zero = Matrix::Zero(3, 3);
  sr_td_update(zero, {0, 0, -1.0, 1, false}, 0.25, 0.99);
  CHECK(zero(0, 0) == doctest::Approx(0.25));
  CHECK(zero(0, 1) == 0.0);
  CHECK(zero(0, 2) == 0.0);
  CHECK(zero.row(1).cwiseAbs().sum() == 0.0);

  Matrix init = sr_td_init(c3);
  CHECK(init == Matrix::Identity(3, 3));
  // A terminal arrival bootstraps from the stored terminal row e_t.
  Matrix psi = sr_td_init(c3);
  sr_td_update(psi, {1, 0, -1.0, 2, true}, 1.0, 0.5);
  CHECK(psi(1, 1) == doctest::Approx(1.0));
  CHECK(psi(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("sr_td_update: zero expected update at the closed form") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix policy = uniform_policy(c3);
  Matrix psi = sr_closed_form(c3, policy, 0.99).dense;
  CHECK(sr_expected_update(c3, policy, psi, 0.99).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sr_td_update: sweeps over a deterministic chain reach the closed form") {
  TabularMdp c5 = testing::chain_mdp(5);
  Matrix policy = uniform_policy(c5);
  Matrix want = sr_closed_form(c5, policy, 0.9).dense;
  Matrix psi = sr_td_init(c5);
  for (int sweep = 0; sweep < 120; ++sweep)
    for (int s = 0; s < 4; ++s)
      sr_td_update(psi, {s, 0, c5.reward_state(s), s + 1, s + 1 == 4}, 0.5, 0.9);
  CHECK((psi - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("dr_closed_form: two-cell chain hand inverse") {
  TabularMdp c2 = testing::chain_mdp(2);
  ProtoRep z = dr_closed_form(c2, uniform_policy(c2), 1.0);
  CHECK(z.kind == ReprKind::DR);
  CHECK(z.param == 1.0);
  CHECK(z.hp.has_value());
  CHECK_FALSE(z.lossy_dense);
  CHECK(z.dense(0, 0) == doctest::Approx(kE1).epsilon(1e-14));
  CHECK(z.dense(0, 1) == doctest::Approx(kE1).epsilon(1e-14));
  CHECK(z.dense(1, 0) == 0.0);
  CHECK(z.dense(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("dr_closed_form: three-chain entries and terminal rows") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix z = dr_closed_form(c3, uniform_policy(c3), 1.0).dense;
  CHECK(z(0, 1) == doctest::Approx(kE2).epsilon(1e-14));
  CHECK(z(0, 2) == doctest::Approx(kE2).epsilon(1e-14));

  // Terminal row is exp(r(t)/lambda) on the diagonal, zero elsewhere; use a
  // nonzero terminal reward so the factor is visible.
  TabularMdp paid = testing::chain_mdp(3);
  paid.reward_state(2) = -0.5;
  Matrix zp = dr_closed_form(paid, uniform_policy(paid), 2.0).dense;
  CHECK(zp(2, 2) == doctest::Approx(std::exp(-0.25)).epsilon(1e-14));
  CHECK(zp(2, 0) == 0.0);
  CHECK(zp(2, 1) == 0.0);
}

TEST_CASE("dr_closed_form: nonnegative entries, diagonal floor, fixed point") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const double lambda = trial % 2 == 0 ? 1.0 : 1.3;
    TabularMdp mdp = testing::random_mdp(rng, 3 + rng.below(8), 1 + rng.below(3), -3.0,
                                         -0.1, false);
    Matrix policy = uniform_policy(mdp);
    Matrix z = dr_closed_form(mdp, policy, lambda).dense;
    CHECK(z.minCoeff() >= 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
      CHECK(z(s, s) >= std::exp(mdp.reward_state(s) / lambda) - 1e-12);
    CHECK(dr_expected_update(mdp, policy, z, lambda).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dr_dp_solve: first iterates on the two-cell chain and convergence") {
  TabularMdp c2 = testing::chain_mdp(2);
  std::vector<Matrix> iterates;
  DpResult res = dr_dp_solve(c2, uniform_policy(c2), 1.0, 1e-12, 1000,
                             [&](int, const Matrix& z) { iterates.push_back(z); });
  REQUIRE(iterates.size() >= 2);
  Matrix z0 = iterates[0];
  CHECK(z0(0, 0) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(z0(0, 1) == 0.0);
  CHECK(z0(1, 1) == doctest::Approx(1.0));
  Matrix z1 = iterates[1];
  CHECK(z1(0, 0) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(z1(0, 1) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(z1(1, 1) == doctest::Approx(1.0));
  // Chain of length one: Z_1 is already exact.
  Matrix closed = dr_closed_form(c2, uniform_policy(c2), 1.0).dense;
  CHECK((z1 - closed).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(res.final_delta < 1e-12);
  CHECK(res.iterations >= 1);
}

TEST_CASE("dr_dp_solve: contraction toward the closed form on random MDPs") {
  Rng rng(303);
  for (int trial = 0; trial < 10; ++trial) {
    const double lambda = 1.0 + 0.3 * rng.uniform();
    TabularMdp mdp = testing::random_mdp(rng, 6, 1 + rng.below(3), -3.0, -0.2, false);
    Matrix policy = uniform_policy(mdp);
    // Terminal rows are already at their fixed point after the first
    // iterate, so contraction is governed by the non-terminal factors.
    double c = 0.0;
    Vector r = state_rewards_under(mdp, policy);
    for (int s : mdp.nonterminal_states()) c = std::max(c, std::exp(r[s] / lambda));

    Matrix closed = dr_closed_form(mdp, policy, lambda).dense;
    std::vector<double> errors;
    DpResult res = dr_dp_solve(mdp, policy, lambda, 1e-12, 100000,
                               [&](int, const Matrix& z) {
                                 errors.push_back((z - closed).cwiseAbs().maxCoeff());
                               });
    CHECK(res.contraction_estimate <= c + 1e-12);
    // Error-to-limit sequence contracts at rate c until it reaches the
    // double-rounding floor of the comparison itself.
    const double floor_err = 1e-13 * std::max(1.0, closed.cwiseAbs().maxCoeff());
    for (size_t k = 0; k + 1 < errors.size(); ++k) {
      if (errors[k] < floor_err) break;
      CHECK(errors[k + 1] <= c * errors[k] + 1e-12);
    }
    CHECK(dr_expected_update(mdp, policy, res.rep.dense, lambda).cwiseAbs().maxCoeff() <
          10.0 * 1e-12);
  }
}

TEST_CASE("dr fixed-point residual stays under ten times the tolerance, 100 trials") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    TabularMdp mdp = testing::random_mdp(rng, 3 + rng.below(8), 1 + rng.below(3), -3.0,
                                         -0.1, false);
    Matrix policy = uniform_policy(mdp);
    DpResult res = dr_dp_solve(mdp, policy, 1.3, 1e-12);
    CHECK(dr_expected_update(mdp, policy, res.rep.dense, 1.3).cwiseAbs().maxCoeff() <
          1e-11);
  }
}

TEST_CASE("dr_td_update: single hand update and init conventions") {
  TabularMdp c2 = testing::chain_mdp(2);
  Matrix z = Matrix::Identity(2, 2);
  dr_td_update(z, {0, 0, -1.0, 1, true}, 1.0, 1.0);
  CHECK(z(0, 0) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(z(0, 1) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(z.row(1) == Matrix::Identity(2, 2).row(1));

  TabularMdp paid = testing::chain_mdp(2);
  paid.reward_state(1) = -2.0;
  Matrix init = dr_td_init(paid, 1.0);
  CHECK(init(0, 0) == 1.0);  // unvisited non-terminal rows start at identity
  CHECK(init(1, 1) == doctest::Approx(std::exp(-2.0)));
  CHECK(init(1, 0) == 0.0);
}

TEST_CASE("dr_td_update: zero expected update at the closed form") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix policy = uniform_policy(c3);
  Matrix z = dr_closed_form(c3, policy, 1.0).dense;
  CHECK(dr_expected_update(c3, policy, z, 1.0).cwiseAbs().maxCoeff() < 1e-14);

  // And the update really is the TD rule: apply it at the closed form on the
  // chain's own transitions and verify the rows do not move.
  Matrix moved = z;
  dr_td_update(moved, {0, 0, -1.0, 1, false}, 0.7, 1.0);
  dr_td_update(moved, {1, 0, -1.0, 2, true}, 0.7, 1.0);
  CHECK((moved - z).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("dr_td_update: one backward sweep lights up the start row") {
  Environment env = make_environment("four_rooms");
  const TabularMdp& mdp = env.mdp;
  Matrix policy = uniform_policy(mdp);
  Rng rng(55);
  int s = sample_start(mdp, rng);
  std::vector<TransitionSample> traj;
  std::vector<char> visited(static_cast<size_t>(mdp.n_states), 0);
  visited[static_cast<size_t>(s)] = 1;
  for (int step = 0; step < 400 && !mdp.is_terminal(s); ++step) {
    int a = sample_action(policy, s, rng);
    int s2 = sample_next(mdp, s, a, rng);
    traj.push_back({s, a, mdp.reward(s, a), s2, mdp.is_terminal(s2)});
    visited[static_cast<size_t>(s2)] = 1;
    s = s2;
  }
  REQUIRE(traj.size() >= 10);
  Matrix z = dr_td_init(mdp, 1.3);
  for (size_t i = traj.size(); i-- > 0;) dr_td_update(z, traj[i], 0.1, 1.3);
  const int s0 = traj.front().s;
  for (int j = 0; j < mdp.n_states; ++j)
    if (visited[static_cast<size_t>(j)]) CHECK(z(s0, j) > 0.0);
}

TEST_CASE("dr_sa_closed_form: one-action reduction and terminal pairs") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix policy = uniform_policy(c3);
  Matrix zbar = dr_sa_closed_form(c3, policy, 1.0).dense;
  Matrix z = dr_closed_form(c3, policy, 1.0).dense;
  CHECK(zbar.rows() == 3);
  CHECK((zbar - z).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(9);
  TabularMdp sam = testing::random_sa_mdp(rng, 3, 2, -2.0, -0.5);
  sam.terminal[2] = 1;
  for (auto& P : sam.P) P.row(2).setZero();
  sam.validate();
  Matrix zb = dr_sa_closed_form(sam, uniform_policy(sam), 1.0).dense;
  for (int a = 0; a < 2; ++a) {
    int i = sa_index(sam, 2, a);
    CHECK(zb(i, i) == doctest::Approx(std::exp(sam.reward_sa(2, a))).epsilon(1e-13));
    CHECK(zb.row(i).sum() == doctest::Approx(zb(i, i)));
  }
}

TEST_CASE("dr_sa_closed_form: row sums match pair-level trajectory enumeration") {
  // Two states, two actions, all moves land on the terminal state, so the
  // pair chain is acyclic and the series is a short exact sum.
  TabularMdp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.P.assign(2, Matrix::Zero(2, 2));
  m.P[0](0, 1) = 1.0;
  m.P[1](0, 1) = 1.0;
  m.reward_on = TabularMdp::RewardOn::StateAction;
  m.reward_sa = Matrix(2, 2);
  m.reward_sa << -1.0, -0.5, 0.0, 0.0;
  m.terminal = {0, 1};
  m.start = Vector::Zero(2);
  m.start(0) = 1.0;
  m.validate();

  Matrix policy = uniform_policy(m);
  Matrix zbar = dr_sa_closed_form(m, policy, 1.0).dense;

  // The pair process is itself a state MDP over sa indices.
  TabularMdp pair;
  pair.n_states = 4;
  pair.n_actions = 1;
  pair.P.assign(1, sa_transition_matrix(m, policy));
  pair.reward_state = sa_rewards(m);
  auto tbar = sa_terminal(m);
  pair.terminal.assign(tbar.begin(), tbar.end());
  pair.start = Vector::Zero(4);
  pair.start(0) = 1.0;

  Matrix ones = Matrix::Ones(4, 1);
  for (int i = 0; i < 4; ++i) {
    double traj_sum = 0.0;
    for (int j = 0; j < 4; ++j)
      traj_sum += dr_trajectory_value(pair, ones, i, j, 1.0, 6);
    CHECK(zbar.row(i).sum() == doctest::Approx(traj_sum).epsilon(1e-8));
  }
}

TEST_CASE("dr_sa_td_update: mirrors the state rule and fixes the closed form") {
  TabularMdp c2 = testing::chain_mdp(2);
  Matrix zbar = dr_sa_td_init(c2, 1.0);
  CHECK(zbar == Matrix::Identity(2, 2));
  for (int i = 0; i < 2; ++i) CHECK(zbar.row(i).norm() == doctest::Approx(1.0));
  dr_sa_td_update(zbar, c2, {0, 0, -1.0, 1, 0, true}, 1.0, 1.0);
  CHECK(zbar(0, 0) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(zbar(0, 1) == doctest::Approx(kE1).epsilon(1e-15));

  Rng rng(41);
  TabularMdp sam = testing::random_sa_mdp(rng, 2, 2, -2.0, -0.5);
  Matrix policy = uniform_policy(sam);
  Matrix closed = dr_sa_closed_form(sam, policy, 1.3).dense;
  // Analytic expected update over the pair chain.
  Matrix Pbar = sa_transition_matrix(sam, policy);
  Vector rbar = sa_rewards(sam);
  Matrix target = Pbar * closed;
  for (int i = 0; i < 4; ++i) {
    target(i, i) += 1.0;
    target.row(i) *= std::exp(rbar[i] / 1.3);
  }
  CHECK((target - closed).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mer_closed_form: single edge, zero adjacency, divergence") {
  Vector r(2);
  r << -1.0, 0.0;
  Matrix adj = Matrix::Zero(2, 2);
  adj(0, 1) = 1.0;
  Matrix m = mer_closed_form(r, adj, 1.0).dense;
  CHECK(m(0, 0) == doctest::Approx(kE1).epsilon(1e-14));
  CHECK(m(0, 1) == doctest::Approx(kE1).epsilon(1e-14));
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == doctest::Approx(1.0));

  Matrix none = Matrix::Zero(2, 2);
  Matrix m0 = mer_closed_form(r, none, 1.0).dense;
  CHECK(m0(0, 0) == doctest::Approx(kE1));
  CHECK(m0(1, 1) == doctest::Approx(1.0));
  CHECK(m0(0, 1) == 0.0);

  // Branching 4 at reward -1: the series diverges and the solve must refuse.
  Environment fr = make_environment("four_rooms");
  Matrix adj_fr = adjacency_matrix(fr.mdp);
  CHECK_THROWS_AS(mer_closed_form(fr.mdp.reward_state, adj_fr, 1.3), NumericError);
}

TEST_CASE("adjacency_matrix: one-step reachability with zero terminal rows") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix adj = adjacency_matrix(c3);
  Matrix want = Matrix::Zero(3, 3);
  want(0, 1) = 1.0;
  want(1, 2) = 1.0;
  CHECK(adj == want);
}

TEST_CASE("trajectory oracles: pinned small-chain values") {
  TabularMdp c2 = testing::chain_mdp(2);
  Matrix p2 = uniform_policy(c2);
  CHECK(dr_trajectory_value(c2, p2, 0, 1, 1.0, 1) == doctest::Approx(kE1).epsilon(1e-15));
  CHECK(dr_trajectory_value(c2, p2, 0, 0, 1.0, 0) == doctest::Approx(kE1).epsilon(1e-15));

  TabularMdp c3 = testing::chain_mdp(3);
  Matrix p3 = uniform_policy(c3);
  CHECK(sr_trajectory_value(c3, p3, 0, 2, 0.5, 4) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("trajectory oracles: full horizon equals closed form on acyclic MDPs") {
  Rng rng(202);
  for (int trial = 0; trial < 8; ++trial) {
    TabularMdp mdp = testing::random_mdp(rng, 4 + rng.below(4), 1 + rng.below(3), -3.0,
                                         -0.1, true);
    Matrix policy = uniform_policy(mdp);
    const int H = mdp.n_states;  // longest acyclic path
    Matrix z = dr_closed_form(mdp, policy, 1.3).dense;
    Matrix psi = sr_closed_form(mdp, policy, 0.9).dense;
    for (int s = 0; s < mdp.n_states; ++s)
      for (int j = 0; j < mdp.n_states; ++j) {
        double zdr = dr_trajectory_value(mdp, policy, s, j, 1.3, H);
        double zsr = sr_trajectory_value(mdp, policy, s, j, 0.9, H);
        CHECK(zdr == doctest::Approx(z(s, j)).epsilon(1e-10));
        CHECK(zsr == doctest::Approx(psi(s, j)).epsilon(1e-10));
        // Finite path set: horizons past the longest path change nothing.
        CHECK(dr_trajectory_value(mdp, policy, s, j, 1.3, H + 1) == zdr);
      }
  }
}

TEST_CASE("trajectory oracles: cyclic partial sums rise to the closed form") {
  TabularMdp walk = testing::two_state_walk();
  Matrix policy = uniform_policy(walk);
  Matrix z = dr_closed_form(walk, policy, 1.0).dense;
  const double c = kE1;  // contraction factor at r=-1, lambda=1
  double prev = -1.0;
  for (int H : {2, 4, 8, 16, 32}) {
    double v = dr_trajectory_value(walk, policy, 0, 0, 1.0, H);
    CHECK(v >= prev);
    prev = v;
    double err = z(0, 0) - v;
    CHECK(err >= -1e-14);
    CHECK(err <= std::pow(c, H + 1) / (1.0 - c) + 1e-12);
  }
}

TEST_CASE("trajectory oracles: node budget guards the blow-up") {
  Rng rng(66);
  TabularMdp dense = testing::random_mdp(rng, 8, 3, -1.0, -0.5, false);
  Matrix policy = uniform_policy(dense);
  CHECK_THROWS_AS(dr_trajectory_value(dense, policy, 0, 0, 1.0, 64, 1000), NumericError);
}

TEST_CASE("dr_top_eigenvector: log-domain summary on the three-chain") {
  TabularMdp c3 = testing::chain_mdp(3);
  ProtoRep z = dr_closed_form(c3, uniform_policy(c3), 1.0);
  std::vector<int> all{0, 1, 2};
  EigenSummary s = dr_top_eigenvector(LogNonNegMatrix::from_hp(*z.hp), all, 3);
  CHECK(s.kind == ReprKind::DR);
  CHECK(s.log_domain);
  CHECK(s.vector.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::isfinite(s.vector(i)));

  auto spec = testing::jacobi_spectrum(symmetrize(z.dense), 256);
  Vector lin = s.vector.array().exp();
  CHECK(testing::abs_cosine(lin, spec.eigenvectors.col(0)) >= 1.0 - 1e-9);
  CHECK(s.eigenvalue == doctest::Approx(std::log(spec.eigenvalues(0))).epsilon(1e-9));
}

TEST_CASE("dr_top_eigenvector: unvisited states pad with log zero") {
  TabularMdp c3 = testing::chain_mdp(3);
  Matrix z = dr_closed_form(c3, uniform_policy(c3), 1.0).dense;
  std::vector<int> vis{0, 1};
  Matrix sub = z.topLeftCorner(2, 2);
  EigenSummary s = dr_top_eigenvector(LogNonNegMatrix::from_linear(sub), vis, 3);
  CHECK(std::isfinite(s.vector(0)));
  CHECK(std::isfinite(s.vector(1)));
  CHECK(s.vector(2) == -kInf);
  CHECK(s.visited == vis);
}

TEST_CASE("dr_top_eigenvector: vanished entry raises a positivity failure") {
  Matrix blocky = Matrix::Zero(2, 2);
  blocky(0, 0) = 1.0;
  blocky(1, 1) = 0.25;  // reducible: top eigenvector is e_0, entry 1 vanishes
  std::vector<int> vis{4, 7};
  bool threw = false;
  try {
    dr_top_eigenvector(LogNonNegMatrix::from_linear(blocky), vis, 9);
  } catch (const PositivityError& err) {
    threw = true;
    CHECK(err.state == 7);  // named in the caller's indexing
  }
  CHECK(threw);
}

TEST_CASE("sr_top_eigenvector: sign convention and zero padding") {
  TabularMdp walk = testing::two_state_walk();
  Matrix psi = sr_closed_form(walk, uniform_policy(walk), 0.99).dense;
  std::vector<int> vis{0, 1};
  EigenSummary s = sr_top_eigenvector(psi, vis, 4);
  CHECK_FALSE(s.log_domain);
  CHECK(s.vector.size() == 4);
  CHECK(s.vector(2) == 0.0);
  CHECK(s.vector(3) == 0.0);
  double mx = s.vector.cwiseAbs().maxCoeff();
  for (int i = 0; i < 4; ++i)
    if (std::abs(s.vector(i)) == mx) CHECK(s.vector(i) > 0.0);
  CHECK(s.eigenvalue == doctest::Approx(1.0 / (1.0 - 0.99)).epsilon(1e-9));
}

TEST_CASE("theorem mapping: eigenvectors collinear, eigenvalues mapped") {
  TabularMdp walk = testing::two_state_walk();
  Matrix policy = uniform_policy(walk);
  const double gamma = 0.99, lambda = 1.0, r = -1.0, e = std::exp(1.0);

  std::vector<int> vis{0, 1};
  ProtoRep z = dr_closed_form(walk, policy, lambda);
  Matrix psi = sr_closed_form(walk, policy, gamma).dense;
  EigenSummary sdr = dr_top_eigenvector(LogNonNegMatrix::from_hp(*z.hp), vis, 2);
  EigenSummary ssr = sr_top_eigenvector(psi, vis, 2);
  Vector vdr = sdr.vector.array().exp();
  CHECK(testing::abs_cosine(vdr, ssr.vector) >= 1.0 - 1e-8);

  // Analytic spectra: mu_DR in {1/(e-1), 1/(e+1)} map onto 1/(1-g), 1/(1+g).
  CHECK(sr_eigenvalue_from_dr(1.0 / (e - 1.0), gamma, r, lambda) ==
        doctest::Approx(1.0 / (1.0 - gamma)).epsilon(1e-12));
  CHECK(sr_eigenvalue_from_dr(1.0 / (e + 1.0), gamma, r, lambda) ==
        doctest::Approx(1.0 / (1.0 + gamma)).epsilon(1e-12));
  CHECK(std::exp(sdr.eigenvalue) == doctest::Approx(1.0 / (e - 1.0)).epsilon(1e-10));
}

TEST_CASE("theorem mapping: five-state spectrum transported within 1e-10") {
  Rng rng(505);
  const double gamma = 0.97, lambda = 1.3, r = -1.0;
  TabularMdp walk = testing::random_symmetric_walk(rng, 5, r);
  Matrix policy = uniform_policy(walk);
  Matrix z = dr_closed_form(walk, policy, lambda).dense;
  Matrix psi = sr_closed_form(walk, policy, gamma).dense;
  auto zspec = testing::jacobi_spectrum(z, 256);
  auto pspec = testing::jacobi_spectrum(psi, 256);
  for (int i = 0; i < 5; ++i) {
    double mapped = sr_eigenvalue_from_dr(zspec.eigenvalues(i), gamma, r, lambda);
    CHECK(mapped == doctest::Approx(pspec.eigenvalues(i)).epsilon(1e-10));
    CHECK(testing::abs_cosine(zspec.eigenvectors.col(i), pspec.eigenvectors.col(i)) >=
          1.0 - 1e-8);
  }
}

TEST_CASE("sr_eigenvalue_from_dr refuses its pole") {
  const double gamma = 0.99, lambda = 1.0, r = -1.0;
  const double pole = gamma / (gamma * std::exp(-r / lambda) - 1.0);
  CHECK_THROWS_AS(sr_eigenvalue_from_dr(pole, gamma, r, lambda), NumericError);
}

TEST_CASE("representation files: write/read round trip with checksum guard") {
  TabularMdp c3 = testing::chain_mdp(3);
  ProtoRep z = dr_closed_form(c3, uniform_policy(c3), 1.3);
  auto dir = std::filesystem::temp_directory_path() / "protorep_test_repr";
  std::filesystem::create_directories(dir);
  auto base = dir / "dr_c3";
  write_representation(base, z);
  ProtoRep back = read_representation(base);
  CHECK(back.kind == ReprKind::DR);
  CHECK(back.param == 1.3);
  CHECK(back.dense == z.dense);  // shortest round-trip rendering is exact

  // Tampering with the CSV must be caught by the sidecar checksum.
  auto csv = base;
  csv += ".csv";
  std::string text = read_text_file(csv);
  text[0] = text[0] == '0' ? '1' : '0';
  write_text_file(csv, text);
  CHECK_THROWS_AS(read_representation(base), ConfigError);
  std::filesystem::remove_all(dir);
}
