#include "protorep/linalg_hp.hpp"

#include <cmath>

#include "protorep/errors.hpp"

namespace protorep {

HpMatrix::HpMatrix(int rows, int cols, mpfr_prec_t bits)
    : rows_(rows), cols_(cols), bits_(bits) {
  d_.reserve(static_cast<size_t>(rows) * cols);
  for (size_t i = 0; i < static_cast<size_t>(rows) * cols; ++i) d_.emplace_back(bits);
}

HpMatrix HpMatrix::identity(int n, mpfr_prec_t bits) {
  HpMatrix m(n, n, bits);
  for (int i = 0; i < n; ++i) m.at(i, i).set(1.0);
  return m;
}

HpMatrix HpMatrix::from_double(const Matrix& src, mpfr_prec_t bits) {
  HpMatrix m(static_cast<int>(src.rows()), static_cast<int>(src.cols()), bits);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m.at(i, j).set(src(i, j));
  return m;
}

Matrix HpMatrix::to_double(bool* lossy) const {
  Matrix out(rows_, cols_);
  bool flag = false;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) {
      const HpReal& v = at(i, j);
      const double d = v.to_double();
      if (!v.is_zero()) {
        if (d == 0.0 || std::abs(d) < std::numeric_limits<double>::min() || std::isinf(d))
          flag = true;
      }
      out(i, j) = d;
    }
  if (lossy) *lossy = flag;
  return out;
}

Matrix HpMatrix::log_to_double() const {
  Matrix out(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) {
      const HpReal& v = at(i, j);
      if (v.is_negative())
        throw NumericError("log of negative matrix entry at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      out(i, j) = HpReal::log_to_double(v);
    }
  return out;
}

double HpMatrix::inf_norm() const {
  double best = 0.0;
  for (int i = 0; i < rows_; ++i) {
    HpReal acc(bits_);
    for (int j = 0; j < cols_; ++j) acc += HpReal::abs(at(i, j));
    best = std::max(best, acc.to_double());
  }
  return best;
}

HpMatrix hp_matmul(const HpMatrix& a, const HpMatrix& b) {
  if (a.cols() != b.rows()) throw NumericError("hp_matmul: inner dimensions differ");
  const mpfr_prec_t bits = std::max(a.bits(), b.bits());
  HpMatrix out(a.rows(), b.cols(), bits);
  HpReal tmp(bits);
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const HpReal& aik = a.at(i, k);
      if (aik.is_zero()) continue;
      for (int j = 0; j < b.cols(); ++j) {
        mpfr_mul(tmp.raw(), aik.raw(), b.at(k, j).raw(), MPFR_RNDN);
        mpfr_add(out.at(i, j).raw(), out.at(i, j).raw(), tmp.raw(), MPFR_RNDN);
      }
    }
  return out;
}

HpMatrix hp_sub(const HpMatrix& a, const HpMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericError("hp_sub: shape mismatch");
  HpMatrix out(a.rows(), a.cols(), std::max(a.bits(), b.bits()));
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      mpfr_sub(out.at(i, j).raw(), a.at(i, j).raw(), b.at(i, j).raw(), MPFR_RNDN);
  return out;
}

HpMatrix hp_symmetrize(const HpMatrix& a) {
  if (a.rows() != a.cols()) throw NumericError("symmetrize: matrix not square");
  HpMatrix out(a.rows(), a.cols(), a.bits());
  HpReal half(0.5, a.bits());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      mpfr_add(out.at(i, j).raw(), a.at(i, j).raw(), a.at(j, i).raw(), MPFR_RNDN);
      mpfr_mul(out.at(i, j).raw(), out.at(i, j).raw(), half.raw(), MPFR_RNDN);
    }
  return out;
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw NumericError("symmetrize: matrix not square");
  return 0.5 * (a + a.transpose());
}

HpMatrix hp_solve(const HpMatrix& A, const HpMatrix& B) {
  if (A.rows() != A.cols()) throw NumericError("hp_solve: A not square");
  if (B.rows() != A.rows()) throw NumericError("hp_solve: B row count mismatch");
  const int n = A.rows();
  const mpfr_prec_t bits = std::max(A.bits(), B.bits());

  HpMatrix lu(n, n, bits);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) lu.at(i, j) = A.at(i, j);
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;

  double max_pivot = 0.0, min_pivot = std::numeric_limits<double>::infinity();
  HpReal tmp(bits);
  for (int k = 0; k < n; ++k) {
    int p = k;
    HpReal best = HpReal::abs(lu.at(k, k));
    for (int i = k + 1; i < n; ++i) {
      HpReal cand = HpReal::abs(lu.at(i, k));
      if (cand.compare(best) > 0) {
        best = cand;
        p = i;
      }
    }
    if (best.is_zero())
      throw SingularMatrixError("hp_solve: exactly singular at column " + std::to_string(k),
                                std::numeric_limits<double>::infinity());
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu.at(k, j), lu.at(p, j));
      std::swap(perm[static_cast<size_t>(k)], perm[static_cast<size_t>(p)]);
    }
    const double pv = best.to_double();
    max_pivot = std::max(max_pivot, pv);
    min_pivot = std::min(min_pivot, pv);
    for (int i = k + 1; i < n; ++i) {
      if (lu.at(i, k).is_zero()) continue;
      mpfr_div(lu.at(i, k).raw(), lu.at(i, k).raw(), lu.at(k, k).raw(), MPFR_RNDN);
      const HpReal& lik = lu.at(i, k);
      for (int j = k + 1; j < n; ++j) {
        if (lu.at(k, j).is_zero()) continue;
        mpfr_mul(tmp.raw(), lik.raw(), lu.at(k, j).raw(), MPFR_RNDN);
        mpfr_sub(lu.at(i, j).raw(), lu.at(i, j).raw(), tmp.raw(), MPFR_RNDN);
      }
    }
  }
  const double cond_estimate =
      min_pivot > 0.0 ? max_pivot / min_pivot : std::numeric_limits<double>::infinity();
  if (cond_estimate > std::ldexp(1.0, static_cast<int>(bits) - 12))
    throw SingularMatrixError(
        "hp_solve: pivot-growth ratio exceeds precision budget (estimate " +
            std::to_string(cond_estimate) + ")",
        cond_estimate);

  HpMatrix X(n, B.cols(), bits);
  for (int c = 0; c < B.cols(); ++c) {
    // Forward substitution on the permuted right-hand side (L has unit diag).
    std::vector<HpReal> y;
    y.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) y.emplace_back(bits);
    for (int i = 0; i < n; ++i) {
      y[static_cast<size_t>(i)] = B.at(perm[static_cast<size_t>(i)], c);
      for (int j = 0; j < i; ++j) {
        if (lu.at(i, j).is_zero()) continue;
        mpfr_mul(tmp.raw(), lu.at(i, j).raw(), y[static_cast<size_t>(j)].raw(), MPFR_RNDN);
        mpfr_sub(y[static_cast<size_t>(i)].raw(), y[static_cast<size_t>(i)].raw(), tmp.raw(),
                 MPFR_RNDN);
      }
    }
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) {
        if (lu.at(i, j).is_zero() || X.at(j, c).is_zero()) continue;
        mpfr_mul(tmp.raw(), lu.at(i, j).raw(), X.at(j, c).raw(), MPFR_RNDN);
        mpfr_sub(y[static_cast<size_t>(i)].raw(), y[static_cast<size_t>(i)].raw(), tmp.raw(),
                 MPFR_RNDN);
      }
      mpfr_div(X.at(i, c).raw(), y[static_cast<size_t>(i)].raw(), lu.at(i, i).raw(),
               MPFR_RNDN);
    }
  }
  return X;
}

}  // namespace protorep
