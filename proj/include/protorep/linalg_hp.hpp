#pragma once

#include <mpfr.h>

#include <string>
#include <vector>

#include "protorep/mdp.hpp"

namespace protorep {

/// RAII scalar over MPFR with explicit mantissa precision in bits.  All
/// operations round to nearest; binary results carry the wider operand's
/// precision.
class HpReal {
 public:
  explicit HpReal(mpfr_prec_t bits) { mpfr_init2(v_, bits); mpfr_set_zero(v_, 1); }
  HpReal(double x, mpfr_prec_t bits) { mpfr_init2(v_, bits); mpfr_set_d(v_, x, MPFR_RNDN); }
  HpReal(const HpReal& o) { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
  HpReal(HpReal&& o) noexcept {
    v_[0] = o.v_[0];
    o.v_[0]._mpfr_d = nullptr;
  }
  HpReal& operator=(const HpReal& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }
  HpReal& operator=(HpReal&& o) noexcept {
    if (this != &o) {
      if (v_[0]._mpfr_d) mpfr_clear(v_);
      v_[0] = o.v_[0];
      o.v_[0]._mpfr_d = nullptr;
    }
    return *this;
  }
  ~HpReal() {
    if (v_[0]._mpfr_d) mpfr_clear(v_);
  }

  mpfr_prec_t bits() const { return mpfr_get_prec(v_); }
  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  void set(double x) { mpfr_set_d(v_, x, MPFR_RNDN); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  bool is_negative() const { return mpfr_sgn(v_) < 0; }
  int compare(const HpReal& o) const { return mpfr_cmp(v_, o.v_); }

  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }

  friend HpReal operator+(const HpReal& a, const HpReal& b) {
    HpReal r(std::max(a.bits(), b.bits()));
    mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend HpReal operator-(const HpReal& a, const HpReal& b) {
    HpReal r(std::max(a.bits(), b.bits()));
    mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend HpReal operator*(const HpReal& a, const HpReal& b) {
    HpReal r(std::max(a.bits(), b.bits()));
    mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend HpReal operator/(const HpReal& a, const HpReal& b) {
    HpReal r(std::max(a.bits(), b.bits()));
    mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  HpReal operator-() const {
    HpReal r(bits());
    mpfr_neg(r.v_, v_, MPFR_RNDN);
    return r;
  }
  HpReal& operator+=(const HpReal& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
  HpReal& operator-=(const HpReal& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
  HpReal& operator*=(const HpReal& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }

  static HpReal exp(const HpReal& x) {
    HpReal r(x.bits());
    mpfr_exp(r.v_, x.v_, MPFR_RNDN);
    return r;
  }
  /// Natural log rounded directly to double; the safe route from huge or
  /// tiny high-precision magnitudes into log-domain doubles.
  static double log_to_double(const HpReal& x) {
    if (x.is_zero()) return -std::numeric_limits<double>::infinity();
    HpReal r(x.bits());
    mpfr_log(r.v_, x.v_, MPFR_RNDN);
    return r.to_double();
  }
  static HpReal abs(const HpReal& x) {
    HpReal r(x.bits());
    mpfr_abs(r.v_, x.v_, MPFR_RNDN);
    return r;
  }

 private:
  mpfr_t v_;
};

/// Dense matrix of HpReal, all entries sharing one precision.
class HpMatrix {
 public:
  HpMatrix(int rows, int cols, mpfr_prec_t bits);
  static HpMatrix identity(int n, mpfr_prec_t bits);
  static HpMatrix from_double(const Matrix& m, mpfr_prec_t bits);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  mpfr_prec_t bits() const { return bits_; }
  HpReal& at(int i, int j) { return d_[static_cast<size_t>(i) * cols_ + j]; }
  const HpReal& at(int i, int j) const { return d_[static_cast<size_t>(i) * cols_ + j]; }

  /// Conversion to doubles; sets *lossy when a nonzero entry falls outside
  /// double's normal range (underflows to 0/subnormal or overflows to inf).
  Matrix to_double(bool* lossy = nullptr) const;

  /// Entrywise natural log to double (requires non-negative entries; zero
  /// maps to -inf).  Throws NumericError on a negative entry.
  Matrix log_to_double() const;

  double inf_norm() const;

 private:
  int rows_, cols_;
  mpfr_prec_t bits_;
  std::vector<HpReal> d_;
};

HpMatrix hp_matmul(const HpMatrix& a, const HpMatrix& b);
HpMatrix hp_sub(const HpMatrix& a, const HpMatrix& b);

/// Averages a square matrix with its transpose.
HpMatrix hp_symmetrize(const HpMatrix& a);
Matrix symmetrize(const Matrix& a);

/// Solves A X = B by LU with partial pivoting at A's precision.  Throws
/// SingularMatrixError when a pivot vanishes or the pivot-growth ratio
/// max|pivot|/min|pivot| exceeds 2^(bits-12), carrying that ratio as the
/// condition estimate.
HpMatrix hp_solve(const HpMatrix& A, const HpMatrix& B);

}  // namespace protorep
