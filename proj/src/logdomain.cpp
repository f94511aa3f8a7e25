#include "protorep/logdomain.hpp"

#include <cmath>

#include "protorep/errors.hpp"

namespace protorep {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// exp(-800) is below double's denormal floor relative to any unit-scale
// maximum, so a component this far down is an exact zero of the limit.
constexpr double kZeroClampWindow = 800.0;
}  // namespace

double logsumexp(const double* v, int n) {
  double m = kNegInf;
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  if (std::isinf(m) && m > 0) return m;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

double logsumexp(std::initializer_list<double> v) {
  return logsumexp(v.begin(), static_cast<int>(v.size()));
}

double logsumexp(const Vector& v) {
  return logsumexp(v.data(), static_cast<int>(v.size()));
}

LogNonNegMatrix LogNonNegMatrix::from_linear(const Matrix& m) {
  LogNonNegMatrix out;
  out.log_entries.resize(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (v < 0.0)
        throw NumericError("log-domain matrix given negative entry at (" +
                           std::to_string(i) + "," + std::to_string(j) + ")");
      out.log_entries(i, j) = v == 0.0 ? kNegInf : std::log(v);
    }
  return out;
}

LogNonNegMatrix LogNonNegMatrix::from_hp(const HpMatrix& m) {
  LogNonNegMatrix out;
  out.log_entries = m.log_to_double();
  return out;
}

Matrix LogNonNegMatrix::to_linear() const {
  Matrix out(log_entries.rows(), log_entries.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = std::exp(log_entries(i, j));
  return out;
}

Vector log_matvec(const LogNonNegMatrix& m, const Vector& logv) {
  if (m.cols() != logv.size()) throw NumericError("log_matvec: dimension mismatch");
  Vector out(m.rows());
  Vector row(m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) row[j] = m.log_entries(i, j) + logv[j];
    out[i] = logsumexp(row);
  }
  return out;
}

LogNonNegMatrix log_symmetrize(const LogNonNegMatrix& m) {
  if (m.rows() != m.cols()) throw NumericError("log_symmetrize: matrix not square");
  LogNonNegMatrix out;
  out.log_entries.resize(m.rows(), m.cols());
  const double log_half = -std::log(2.0);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      out.log_entries(i, j) =
          logsumexp({m.log_entries(i, j), m.log_entries(j, i)}) + log_half;
  return out;
}

namespace {

/// Unit-2-norm normalization in log space; returns the log norm.
double log_normalize(Vector& logv) {
  Vector doubled = 2.0 * logv;
  const double log_norm = 0.5 * logsumexp(doubled);
  logv.array() -= log_norm;
  return log_norm;
}

}  // namespace

LogEigResult log_power_iteration(const LogNonNegMatrix& m, double tol, int max_iters,
                                 Rng* rng, const Vector* warm_start) {
  if (m.rows() != m.cols()) throw NumericError("log_power_iteration: matrix not square");
  const int n = m.rows();
  if (n == 0) throw NumericError("log_power_iteration: empty matrix");

  Vector v(n);
  if (warm_start && warm_start->size() == n) {
    v = *warm_start;
  } else {
    // Flat start plus a small deterministic jitter to break symmetric ties.
    for (int i = 0; i < n; ++i) {
      const double jitter = rng ? 1e-3 * rng->uniform() : 0.0;
      v[i] = jitter;
    }
  }
  log_normalize(v);

  double gap = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= max_iters; ++iter) {
    Vector w = log_matvec(m, v);
    const double wmax = w.maxCoeff();
    if (wmax == kNegInf)
      throw NumericError("log_power_iteration: matrix annihilated the iterate (zero matrix?)");
    for (int i = 0; i < n; ++i)
      if (w[i] < wmax - kZeroClampWindow) w[i] = kNegInf;
    log_normalize(w);

    gap = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = w[i], b = v[i];
      if (a == kNegInf && b == kNegInf) continue;
      const double d = std::abs(a - b);
      gap = std::max(gap, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
    }
    v = std::move(w);
    if (gap < tol) {
      Vector mv = log_matvec(m, v);
      Vector prod(n);
      for (int i = 0; i < n; ++i) prod[i] = v[i] + mv[i];
      LogEigResult res;
      res.log_eigenvalue = logsumexp(prod);  // Rayleigh quotient, unit 2-norm
      res.log_vector = std::move(v);
      res.iterations = iter;
      return res;
    }
  }
  throw ConvergenceError(
      "log_power_iteration: no convergence in " + std::to_string(max_iters) +
          " iterations (last gap " + std::to_string(gap) + ")",
      std::vector<double>(v.data(), v.data() + n), gap);
}

}  // namespace protorep
