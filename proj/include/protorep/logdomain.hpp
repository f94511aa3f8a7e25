#pragma once

#include <initializer_list>

#include "protorep/linalg_hp.hpp"
#include "protorep/mdp.hpp"
#include "protorep/rng.hpp"

namespace protorep {

/// Overflow-safe log(sum(exp(v))) via max shift; empty input and all -inf
/// both give -inf.
double logsumexp(const double* v, int n);
double logsumexp(std::initializer_list<double> v);
double logsumexp(const Vector& v);

/// A non-negative matrix stored as entrywise natural logs (-inf encodes an
/// exact zero), so products of astronomically scaled factors stay exact in
/// the exponent.
struct LogNonNegMatrix {
  Matrix log_entries;

  int rows() const { return static_cast<int>(log_entries.rows()); }
  int cols() const { return static_cast<int>(log_entries.cols()); }

  /// From a linear-domain matrix; throws NumericError on negative entries.
  static LogNonNegMatrix from_linear(const Matrix& m);
  /// From a high-precision matrix (log taken at full precision, then
  /// rounded), so sub-double-range magnitudes survive.
  static LogNonNegMatrix from_hp(const HpMatrix& m);
  Matrix to_linear() const;
};

/// (M v) in log domain: out_i = logsumexp_j(M_ij + v_j).
Vector log_matvec(const LogNonNegMatrix& m, const Vector& logv);

/// Log-domain symmetrization: out_ij = log((exp(a_ij) + exp(a_ji)) / 2).
LogNonNegMatrix log_symmetrize(const LogNonNegMatrix& m);

struct LogEigResult {
  double log_eigenvalue = 0.0;  // log of the dominant eigenvalue
  Vector log_vector;            // unit 2-norm eigenvector, entrywise logs
  int iterations = 0;
};

/// Power iteration on a symmetric non-negative matrix carried entirely in
/// log space.  Normalization uses the 2-norm (0.5 * logsumexp(2 w)); the
/// eigenvalue is the Rayleigh quotient at the fixed point.  Components that
/// fall 800 nats below the running maximum are exact zeros of the limit
/// (decoupled or sub-dominant blocks) and are clamped to -inf.  Convergence
/// is sup-norm on the log vector (two -inf entries count as equal); failure
/// to converge throws ConvergenceError carrying the last iterate and the
/// last sup-norm gap.
LogEigResult log_power_iteration(const LogNonNegMatrix& m, double tol = 1e-12,
                                 int max_iters = 50000, Rng* rng = nullptr,
                                 const Vector* warm_start = nullptr);

}  // namespace protorep
