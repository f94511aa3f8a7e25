#include "protorep/represent.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "protorep/csvio.hpp"
#include "protorep/errors.hpp"

namespace protorep {

std::string repr_kind_name(ReprKind kind) {
  switch (kind) {
    case ReprKind::SR: return "sr";
    case ReprKind::DR: return "dr";
    case ReprKind::MER: return "mer";
    case ReprKind::DR_SA: return "dr_sa";
  }
  return "?";
}

ReprKind repr_kind_from_name(const std::string& name) {
  if (name == "sr") return ReprKind::SR;
  if (name == "dr") return ReprKind::DR;
  if (name == "mer") return ReprKind::MER;
  if (name == "dr_sa") return ReprKind::DR_SA;
  throw ConfigError("unknown representation kind '" + name + "'");
}

ProtoRep sr_closed_form(const TabularMdp& mdp, const Matrix& policy, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("sr_closed_form: gamma must lie in [0, 1)");
  const Matrix P = transition_matrix(mdp, policy);
  const Matrix A = Matrix::Identity(mdp.n_states, mdp.n_states) - gamma * P;
  ProtoRep rep;
  rep.kind = ReprKind::SR;
  rep.param = gamma;
  rep.dense = A.partialPivLu().solve(Matrix::Identity(mdp.n_states, mdp.n_states));
  return rep;
}

namespace {

/// diag(exp(-r/lambda)) - P at `bits` precision.
HpMatrix dr_system(const Vector& reward, const Matrix& P, double lambda, mpfr_prec_t bits) {
  const int n = static_cast<int>(P.rows());
  HpMatrix A(n, n, bits);
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t)
      if (P(s, t) != 0.0) A.at(s, t) = HpReal(-P(s, t), bits);
    HpReal d = HpReal::exp(HpReal(-reward[s] / lambda, bits));
    A.at(s, s) += d;
  }
  return A;
}

ProtoRep dr_from_system(ReprKind kind, double lambda, const HpMatrix& A) {
  ProtoRep rep;
  rep.kind = kind;
  rep.param = lambda;
  rep.hp = hp_solve(A, HpMatrix::identity(A.rows(), A.bits()));
  rep.dense = rep.hp->to_double(&rep.lossy_dense);
  return rep;
}

}  // namespace

ProtoRep dr_closed_form(const TabularMdp& mdp, const Matrix& policy, double lambda,
                        mpfr_prec_t bits) {
  if (lambda <= 0.0) throw ConfigError("dr_closed_form: lambda must be positive");
  const Vector r = state_rewards_under(mdp, policy);
  const Matrix P = transition_matrix(mdp, policy);
  return dr_from_system(ReprKind::DR, lambda, dr_system(r, P, lambda, bits));
}

ProtoRep dr_sa_closed_form(const TabularMdp& mdp, const Matrix& policy, double lambda,
                           mpfr_prec_t bits) {
  if (lambda <= 0.0) throw ConfigError("dr_sa_closed_form: lambda must be positive");
  const Vector rbar = sa_rewards(mdp);
  const Matrix Pbar = sa_transition_matrix(mdp, policy);
  return dr_from_system(ReprKind::DR_SA, lambda, dr_system(rbar, Pbar, lambda, bits));
}

Matrix adjacency_matrix(const TabularMdp& mdp) {
  Matrix A = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int t = 0; t < mdp.n_states; ++t)
        if (mdp.P[a](s, t) > 0.0) A(s, t) = 1.0;
  }
  return A;
}

ProtoRep mer_closed_form(const Vector& reward, const Matrix& adjacency, double lambda,
                         mpfr_prec_t bits) {
  if (lambda <= 0.0) throw ConfigError("mer_closed_form: lambda must be positive");
  const int n = static_cast<int>(adjacency.rows());
  if (adjacency.cols() != n) throw ConfigError("mer_closed_form: adjacency not square");
  if (reward.size() != n) throw ConfigError("mer_closed_form: reward size mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (adjacency(i, j) != 0.0 && adjacency(i, j) != 1.0)
        throw ConfigError("mer_closed_form: adjacency entries must be 0 or 1");
  ProtoRep rep = dr_from_system(ReprKind::MER, lambda, dr_system(reward, adjacency, lambda, bits));
  // The series sum_k (R^{-1} A)^k R^{-1} has non-negative terms; a negative
  // entry in the resolvent means the spectral radius passed 1 and the
  // inverse no longer equals the series (adjacency is not substochastic).
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (rep.hp->at(i, j).is_negative())
        throw NumericError(
            "mer_closed_form: series diverges for this reward level / branching "
            "(negative resolvent entry at (" +
            std::to_string(i) + "," + std::to_string(j) + "))");
  return rep;
}

DpResult dr_dp_solve(const TabularMdp& mdp, const Matrix& policy, double lambda, double tol,
                     int max_iters, const std::function<void(int, const Matrix&)>& observer) {
  if (lambda <= 0.0) throw ConfigError("dr_dp_solve: lambda must be positive");
  const Vector r = state_rewards_under(mdp, policy);
  const Matrix P = transition_matrix(mdp, policy);
  const int n = mdp.n_states;
  Vector rinv(n);  // exp(r/lambda), the inverse of the diagonal system
  for (int s = 0; s < n; ++s) rinv[s] = std::exp(r[s] / lambda);

  Matrix Z = rinv.asDiagonal();
  if (observer) observer(0, Z);
  double prev_delta = -1.0;
  double contraction = 0.0;
  for (int k = 1; k <= max_iters; ++k) {
    Matrix Znext = rinv.asDiagonal() * (P * Z);
    Znext += Matrix(rinv.asDiagonal());
    const double delta = (Znext - Z).cwiseAbs().maxCoeff();
    Z = std::move(Znext);
    if (observer) observer(k, Z);
    if (prev_delta > 0.0) contraction = std::max(contraction, delta / prev_delta);
    prev_delta = delta > 0.0 ? delta : -1.0;
    if (delta < tol) {
      DpResult out;
      out.rep.kind = ReprKind::DR;
      out.rep.param = lambda;
      out.rep.dense = std::move(Z);
      out.iterations = k;
      out.final_delta = delta;
      out.contraction_estimate = contraction;
      return out;
    }
  }
  throw ConvergenceError("dr_dp_solve: no convergence in " + std::to_string(max_iters) +
                             " iterations",
                         {}, prev_delta);
}

Matrix sr_td_init(const TabularMdp& mdp) {
  return Matrix::Identity(mdp.n_states, mdp.n_states);
}

void sr_td_update(Matrix& psi, const TransitionSample& x, double alpha, double gamma) {
  // Terminal rows stay at their pinned e_t, so reading the stored next row
  // already realizes the terminal bootstrap.
  Eigen::RowVectorXd target = gamma * psi.row(x.s2);
  target[x.s] += 1.0;
  psi.row(x.s) += alpha * (target - psi.row(x.s));
}

namespace {

double mean_reward_at(const TabularMdp& mdp, int s) {
  if (mdp.reward_on == TabularMdp::RewardOn::State) return mdp.reward_state[s];
  double acc = 0.0;
  for (int a = 0; a < mdp.n_actions; ++a) acc += mdp.reward_sa(s, a);
  return acc / mdp.n_actions;
}

}  // namespace

Matrix dr_td_init(const TabularMdp& mdp, double lambda) {
  Matrix z = Matrix::Identity(mdp.n_states, mdp.n_states);
  // Terminal rows hold their closed-form value exp(r(t)/lambda) e_t (the
  // identity row when the terminal reward is zero) and are never updated.
  for (int t : mdp.terminal_states()) z(t, t) = std::exp(mean_reward_at(mdp, t) / lambda);
  return z;
}

void dr_td_update(Matrix& z, const TransitionSample& x, double alpha, double lambda) {
  const double scale = std::exp(x.r / lambda);
  Eigen::RowVectorXd target = scale * z.row(x.s2);
  target[x.s] += scale;
  z.row(x.s) += alpha * (target - z.row(x.s));
}

Matrix dr_sa_td_init(const TabularMdp& mdp, double lambda) {
  const int n = mdp.n_states * mdp.n_actions;
  Matrix z = Matrix::Identity(n, n);
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.is_terminal(s))
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int i = sa_index(mdp, s, a);
        z(i, i) = std::exp(mdp.reward(s, a) / lambda);
      }
  return z;
}

void dr_sa_td_update(Matrix& zbar, const TabularMdp& mdp, const SaTransitionSample& x,
                     double alpha, double lambda) {
  const int i = sa_index(mdp, x.s, x.a);
  const int j = sa_index(mdp, x.s2, x.a2);
  const double scale = std::exp(x.r / lambda);
  Eigen::RowVectorXd target = scale * zbar.row(j);
  target[i] += scale;
  zbar.row(i) += alpha * (target - zbar.row(i));
}

namespace {

struct TrajectoryEnumerator {
  const Matrix& P;
  const Vector* reward = nullptr;  // null for SR mode
  int target;
  double discount_or_lambda;
  int horizon;
  long budget;
  long nodes = 0;
  double total = 0.0;

  void run_sr(int u, double w, int depth) {
    if (++nodes > budget)
      throw NumericError("trajectory enumeration exceeded its node budget");
    if (u == target) total += std::pow(discount_or_lambda, depth) * w;
    if (depth == horizon) return;
    for (int t = 0; t < P.cols(); ++t) {
      const double p = P(u, t);
      if (p > 0.0) run_sr(t, w * p, depth + 1);
    }
  }

  void run_dr(int u, double w, double cum, int depth) {
    if (++nodes > budget)
      throw NumericError("trajectory enumeration exceeded its node budget");
    if (u == target) total += w * std::exp(cum / discount_or_lambda);
    if (depth == horizon) return;
    for (int t = 0; t < P.cols(); ++t) {
      const double p = P(u, t);
      if (p > 0.0) run_dr(t, w * p, cum + (*reward)[t], depth + 1);
    }
  }
};

}  // namespace

double sr_trajectory_value(const TabularMdp& mdp, const Matrix& policy, int s, int j,
                           double gamma, int horizon, long node_budget) {
  const Matrix P = transition_matrix(mdp, policy);
  TrajectoryEnumerator e{P, nullptr, j, gamma, horizon, node_budget};
  e.run_sr(s, 1.0, 0);
  return e.total;
}

double dr_trajectory_value(const TabularMdp& mdp, const Matrix& policy, int s, int j,
                           double lambda, int horizon, long node_budget) {
  const Matrix P = transition_matrix(mdp, policy);
  const Vector r = state_rewards_under(mdp, policy);
  TrajectoryEnumerator e{P, &r, j, lambda, horizon, node_budget};
  e.run_dr(s, 1.0, r[s], 0);
  return e.total;
}

EigenSummary dr_top_eigenvector(const LogNonNegMatrix& z_visited,
                                const std::vector<int>& visited, int n_states, double tol,
                                int max_iters, Rng* rng, const Vector* warm_start,
                                bool accept_last) {
  if (static_cast<int>(visited.size()) != z_visited.rows())
    throw NumericError("dr_top_eigenvector: visited set does not match matrix size");
  const LogNonNegMatrix sym = log_symmetrize(z_visited);
  LogEigResult res;
  try {
    res = log_power_iteration(sym, tol, max_iters, rng, warm_start);
  } catch (const ConvergenceError& err) {
    if (!accept_last) throw;
    res.log_vector =
        Eigen::Map<const Vector>(err.last_iterate.data(),
                                 static_cast<Eigen::Index>(err.last_iterate.size()));
    res.iterations = max_iters;
    Vector prod(res.log_vector.size());
    const Vector mv = log_matvec(sym, res.log_vector);
    for (Eigen::Index i = 0; i < prod.size(); ++i) prod[i] = res.log_vector[i] + mv[i];
    res.log_eigenvalue = logsumexp(prod);
    // Clamped entries are only known to sit far below the peak; pin them
    // there instead of propagating log 0 into downstream arithmetic.
    const double floor = res.log_vector.maxCoeff() - 800.0;
    for (Eigen::Index i = 0; i < res.log_vector.size(); ++i)
      if (std::isinf(res.log_vector[i]) && res.log_vector[i] < 0) res.log_vector[i] = floor;
  }
  for (int i = 0; i < static_cast<int>(visited.size()); ++i)
    if (std::isinf(res.log_vector[i]) && res.log_vector[i] < 0)
      throw PositivityError("dr_top_eigenvector: eigenvector entry vanished at state " +
                                std::to_string(visited[static_cast<size_t>(i)]),
                            visited[static_cast<size_t>(i)]);
  EigenSummary out;
  out.kind = ReprKind::DR;
  out.log_domain = true;
  out.eigenvalue = res.log_eigenvalue;
  out.iterations = res.iterations;
  out.visited = visited;
  out.vector = Vector::Constant(n_states, -std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < visited.size(); ++i)
    out.vector[visited[i]] = res.log_vector[static_cast<Eigen::Index>(i)];
  return out;
}

EigenSummary sr_top_eigenvector(const Matrix& psi_visited, const std::vector<int>& visited,
                                int n_states, double tol, int max_iters, bool accept_last) {
  if (static_cast<int>(visited.size()) != psi_visited.rows())
    throw NumericError("sr_top_eigenvector: visited set does not match matrix size");
  const Matrix sym = symmetrize(psi_visited);
  const int n = static_cast<int>(sym.rows());
  Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  int iterations = 0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    Vector w = sym * v;
    const double norm = w.norm();
    if (norm == 0.0)
      throw NumericError("sr_top_eigenvector: iterate annihilated (zero matrix?)");
    w /= norm;
    if (w.dot(v) < 0.0) w = -w;  // fix the sign before measuring the gap
    const double gap = (w - v).cwiseAbs().maxCoeff();
    v = std::move(w);
    iterations = iter;
    if (gap < tol) break;
    if (iter == max_iters && !accept_last)
      throw ConvergenceError("sr_top_eigenvector: no convergence in " +
                                 std::to_string(max_iters) + " iterations",
                             std::vector<double>(v.data(), v.data() + n), gap);
  }
  // Sign convention: the largest-magnitude entry (first on ties) is positive.
  int arg = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0) v = -v;

  EigenSummary out;
  out.kind = ReprKind::SR;
  out.log_domain = false;
  out.eigenvalue = v.dot(sym * v);
  out.iterations = iterations;
  out.visited = visited;
  out.vector = Vector::Zero(n_states);
  for (size_t i = 0; i < visited.size(); ++i)
    out.vector[visited[i]] = v[static_cast<Eigen::Index>(i)];
  return out;
}

double sr_eigenvalue_from_dr(double mu_dr, double gamma, double r, double lambda) {
  const double denom = 1.0 - gamma * (std::exp(-r / lambda) - 1.0 / mu_dr);
  // The map has a pole where the denominator vanishes; admissible DR
  // eigenvalues stay clear of it, so hitting it means bad inputs.
  if (std::abs(denom) < 1e-12)
    throw NumericError("sr_eigenvalue_from_dr: eigenvalue at the mapping's pole");
  return 1.0 / denom;
}

void write_representation(const std::filesystem::path& base, const ProtoRep& rep) {
  const std::string csv = matrix_to_csv(rep.dense);
  std::filesystem::path csv_path = base;
  csv_path += ".csv";
  std::filesystem::path json_path = base;
  json_path += ".json";
  write_text_file(csv_path, csv);
  nlohmann::json meta;
  meta["kind"] = repr_kind_name(rep.kind);
  meta["param"] = rep.param;
  meta["rows"] = rep.dense.rows();
  meta["cols"] = rep.dense.cols();
  meta["lossy_dense"] = rep.lossy_dense;
  meta["checksum_fnv1a64"] = fnv1a64(csv);
  write_text_file(json_path, meta.dump(2) + "\n");
}

ProtoRep read_representation(const std::filesystem::path& base) {
  std::filesystem::path csv_path = base;
  csv_path += ".csv";
  std::filesystem::path json_path = base;
  json_path += ".json";
  const std::string csv = read_text_file(csv_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad representation sidecar " + json_path.string() + ": " + e.what());
  }
  ProtoRep rep;
  rep.kind = repr_kind_from_name(meta.at("kind").get<std::string>());
  rep.param = meta.at("param").get<double>();
  rep.lossy_dense = meta.value("lossy_dense", false);
  if (meta.at("checksum_fnv1a64").get<std::uint64_t>() != fnv1a64(csv))
    throw ConfigError("representation CSV does not match its recorded checksum: " +
                      csv_path.string());
  rep.dense = matrix_from_csv(csv);
  if (rep.dense.rows() != meta.at("rows").get<Eigen::Index>() ||
      rep.dense.cols() != meta.at("cols").get<Eigen::Index>())
    throw ConfigError("representation CSV shape does not match its sidecar: " +
                      csv_path.string());
  return rep;
}

}  // namespace protorep
