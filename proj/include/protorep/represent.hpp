#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "protorep/linalg_hp.hpp"
#include "protorep/logdomain.hpp"
#include "protorep/mdp.hpp"

namespace protorep {

enum class ReprKind { SR, DR, MER, DR_SA };
std::string repr_kind_name(ReprKind kind);
ReprKind repr_kind_from_name(const std::string& name);

/// A computed proto-representation.  `dense` always holds a double view;
/// closed forms computed in high precision also carry the exact `hp` matrix,
/// and `lossy_dense` records whether rounding to double under- or
/// overflowed any nonzero entry.
struct ProtoRep {
  ReprKind kind = ReprKind::SR;
  double param = 0.0;  // gamma for SR, lambda for DR/MER/DR_SA
  Matrix dense;
  std::optional<HpMatrix> hp;
  bool lossy_dense = false;

  int size() const { return static_cast<int>(dense.rows()); }
};

/// --- Closed forms -----------------------------------------------------

/// SR under a policy: Psi = (I - gamma P^pi)^{-1} with terminal rows of P
/// zeroed (so Psi(t,.) = e_t).  gamma in [0, 1).
ProtoRep sr_closed_form(const TabularMdp& mdp, const Matrix& policy, double gamma);

/// DR under a default policy: Z = [diag(exp(-r/lambda)) - P^pi]^{-1},
/// solved at `bits` precision (entries span e^(sum of rewards) and routinely
/// leave double range).
ProtoRep dr_closed_form(const TabularMdp& mdp, const Matrix& policy, double lambda,
                        mpfr_prec_t bits = 256);

/// Pair-level DR over state-action indices sa = s*A + a on the chain
/// Pbar(sa,s'a') = p(s'|s,a) pi(a'|s').
ProtoRep dr_sa_closed_form(const TabularMdp& mdp, const Matrix& policy, double lambda,
                           mpfr_prec_t bits = 256);

/// Unweighted successor adjacency A(s,s') = 1 iff some action moves s to s'
/// with positive probability; terminal rows zero.
Matrix adjacency_matrix(const TabularMdp& mdp);

/// Max-entropy representation M = [diag(exp(-r/lambda)) - A]^{-1} for an
/// adjacency matrix A.  Fails (SingularMatrixError / NumericError) when the
/// series diverges, e.g. branching too high for the reward level.
ProtoRep mer_closed_form(const Vector& reward, const Matrix& adjacency, double lambda,
                         mpfr_prec_t bits = 256);

/// --- Dynamic programming ----------------------------------------------

struct DpResult {
  ProtoRep rep;
  int iterations = 0;
  double final_delta = 0.0;          // sup-norm of the last iterate change
  double contraction_estimate = 0.0;  // max observed delta ratio
};

/// Iterates Z_{k+1} = R^{-1} + R^{-1} P^pi Z_k from Z_0 = R^{-1},
/// R^{-1} = diag(exp(r/lambda)), until the sup-norm change drops below tol.
/// The per-state factors exp(r(s)/lambda) < 1 make the map a contraction;
/// the observed ratio is reported.  `observer` (if set) sees every iterate.
DpResult dr_dp_solve(const TabularMdp& mdp, const Matrix& policy, double lambda,
                     double tol = 1e-12, int max_iters = 100000,
                     const std::function<void(int, const Matrix&)>& observer = nullptr);

/// --- Temporal-difference learning --------------------------------------
///
/// All TD tables pin terminal rows to their fixed-point values at
/// initialization (e_t for SR, exp(r(t)/lambda) e_t for DR) and always
/// bootstrap from the stored next-row, so the expected update is exactly
/// zero at the corresponding closed form.

Matrix sr_td_init(const TabularMdp& mdp);
void sr_td_update(Matrix& psi, const TransitionSample& x, double alpha, double gamma);

Matrix dr_td_init(const TabularMdp& mdp, double lambda);
void dr_td_update(Matrix& z, const TransitionSample& x, double alpha, double lambda);

/// State-action TD sample: (s,a) pair, its reward, and the successor pair.
struct SaTransitionSample {
  int s = 0, a = 0;
  double r = 0.0;
  int s2 = 0, a2 = 0;
  bool done = false;
};

Matrix dr_sa_td_init(const TabularMdp& mdp, double lambda);
void dr_sa_td_update(Matrix& zbar, const TabularMdp& mdp, const SaTransitionSample& x,
                     double alpha, double lambda);

/// --- Series (trajectory-sum) evaluators --------------------------------
///
/// Direct enumeration of the defining series up to `horizon` steps:
/// SR: sum_tau gamma^{|tau|} P(tau); DR: sum_tau P(tau) exp(r(tau)/lambda)
/// with r(tau) the summed rewards of every state on tau including both
/// endpoints (the zero-length trajectory contributes when s == j).
/// Exponential in branching; guarded by a node budget.
double sr_trajectory_value(const TabularMdp& mdp, const Matrix& policy, int s, int j,
                           double gamma, int horizon, long node_budget = 50'000'000);
double dr_trajectory_value(const TabularMdp& mdp, const Matrix& policy, int s, int j,
                           double lambda, int horizon, long node_budget = 50'000'000);

/// --- Spectral summaries -------------------------------------------------

/// Dominant eigenvector of a symmetrized representation restricted to
/// `visited` states, padded back to n_states.  For the DR the whole
/// computation runs in log domain and `vector` holds entrywise logs
/// (padding is -inf = log 0); `eigenvalue` is then also a log.  For the SR
/// everything is linear, the vector is sign-fixed so its largest-magnitude
/// entry is positive, and padding is 0.
struct EigenSummary {
  ReprKind kind = ReprKind::SR;
  bool log_domain = false;
  double eigenvalue = 0.0;
  Vector vector;
  std::vector<int> visited;
  int iterations = 0;
};

/// With `accept_last` the iteration budget is a soft limit: instead of
/// throwing ConvergenceError the last iterate is returned.  Near-degenerate
/// top modes (symmetric subgraphs) stall power iteration, and for option
/// discovery any vector in their span is as good as the limit.
EigenSummary dr_top_eigenvector(const LogNonNegMatrix& z_visited,
                                const std::vector<int>& visited, int n_states,
                                double tol = 1e-12, int max_iters = 50000,
                                Rng* rng = nullptr, const Vector* warm_start = nullptr,
                                bool accept_last = false);

EigenSummary sr_top_eigenvector(const Matrix& psi_visited, const std::vector<int>& visited,
                                int n_states, double tol = 1e-12, int max_iters = 50000,
                                bool accept_last = false);

/// Eigenvalue correspondence for constant-reward symmetric-chain MDPs:
/// both representations share eigenvectors and
/// mu_SR = 1 / (1 - gamma (exp(-r/lambda) - 1/mu_DR)).
double sr_eigenvalue_from_dr(double mu_dr, double gamma, double r, double lambda);

/// --- Serialization -------------------------------------------------------

/// Writes `<base>.csv` (dense matrix; DR family entries as logs wouldn't
/// round-trip, so the dense linear view is written) and `<base>.json`
/// (kind, param, shape, lossy flag, FNV-1a checksum of the CSV bytes).
void write_representation(const std::filesystem::path& base, const ProtoRep& rep);
ProtoRep read_representation(const std::filesystem::path& base);

}  // namespace protorep
