#pragma once

#include <string>
#include <vector>

#include "gbt/dd.hpp"
#include "gbt/errors.hpp"

namespace gbt {

// Additive mask sentinel for score matrices (64-bit path). Anything at or
// below kMaskThreshold is treated as a blocked score: excluded from the
// softmax and given weight exactly 0.
inline constexpr double kMaskSentinel = -1e30;
inline constexpr double kMaskThreshold = -1e29;

// Dense row-major matrix. Row vectors are 1 x n, column vectors n x 1.
template <class S>
struct BasicMat {
  int rows = 0;
  int cols = 0;
  std::vector<S> a;

  BasicMat() = default;
  BasicMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, S(0.0)) {
    if (r < 0 || c < 0) throw ShapeMismatch("negative dimension");
  }
  BasicMat(int r, int c, std::vector<S> data) : rows(r), cols(c), a(std::move(data)) {
    if (a.size() != static_cast<size_t>(r) * c)
      throw ShapeMismatch("data length does not match " + std::to_string(r) + "x" + std::to_string(c));
  }

  S& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const S& operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  S* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const S* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
  size_t size() const { return a.size(); }

  std::string shape() const { return std::to_string(rows) + "x" + std::to_string(cols); }
  bool same_shape(const BasicMat& o) const { return rows == o.rows && cols == o.cols; }
};

using Mat = BasicMat<double>;

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}
}  // namespace detail

// C = A * B
template <class S>
BasicMat<S> mm(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.cols == B.rows, "mm " + A.shape() + " * " + B.shape());
  BasicMat<S> C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    const S* ai = A.row(i);
    S* ci = C.row(i);
    for (int k = 0; k < A.cols; ++k) {
      S aik = ai[k];
      const S* bk = B.row(k);
      for (int j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return C;
}

// C = A * B^T
template <class S>
BasicMat<S> mm_nt(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.cols == B.cols, "mm_nt " + A.shape() + " * " + B.shape() + "^T");
  BasicMat<S> C(A.rows, B.rows);
  for (int i = 0; i < A.rows; ++i) {
    const S* ai = A.row(i);
    for (int j = 0; j < B.rows; ++j) {
      const S* bj = B.row(j);
      S s(0.0);
      for (int k = 0; k < A.cols; ++k) s += ai[k] * bj[k];
      C(i, j) = s;
    }
  }
  return C;
}

// C = A^T * B
template <class S>
BasicMat<S> mm_tn(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.rows == B.rows, "mm_tn " + A.shape() + "^T * " + B.shape());
  BasicMat<S> C(A.cols, B.cols);
  for (int k = 0; k < A.rows; ++k) {
    const S* ak = A.row(k);
    const S* bk = B.row(k);
    for (int i = 0; i < A.cols; ++i) {
      S aki = ak[i];
      S* ci = C.row(i);
      for (int j = 0; j < B.cols; ++j) ci[j] += aki * bk[j];
    }
  }
  return C;
}

template <class S>
BasicMat<S> transpose(const BasicMat<S>& A) {
  BasicMat<S> T(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

template <class S>
BasicMat<S> add(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.same_shape(B), "add " + A.shape() + " + " + B.shape());
  BasicMat<S> C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
  return C;
}

template <class S>
BasicMat<S> sub(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.same_shape(B), "sub " + A.shape() + " - " + B.shape());
  BasicMat<S> C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
  return C;
}

template <class S>
BasicMat<S> hadamard(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.same_shape(B), "hadamard " + A.shape() + " * " + B.shape());
  BasicMat<S> C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] *= B.a[i];
  return C;
}

template <class S>
BasicMat<S> scale(const BasicMat<S>& A, S c) {
  BasicMat<S> C = A;
  for (auto& x : C.a) x *= c;
  return C;
}

// Adds row vector b (1 x cols) to every row of A.
template <class S>
BasicMat<S> add_row(const BasicMat<S>& A, const BasicMat<S>& b) {
  detail::require(b.rows == 1 && b.cols == A.cols, "add_row " + A.shape() + " + " + b.shape());
  BasicMat<S> C = A;
  for (int i = 0; i < C.rows; ++i) {
    S* ci = C.row(i);
    for (int j = 0; j < C.cols; ++j) ci[j] += b.a[j];
  }
  return C;
}

// Row-wise softmax of scores / sqrt(d_q). Entries at or below the mask
// threshold are excluded and come out exactly 0. A fully masked row is a
// contract violation, not a NaN.
template <class S>
BasicMat<S> scaled_softmax(const BasicMat<S>& scores, int d_q) {
  if (d_q <= 0) throw BadArgument("scaled_softmax requires d_q > 0");
  const S inv_scale = S(1.0) / s_sqrt(S(static_cast<double>(d_q)));
  const S thresh(kMaskThreshold);
  BasicMat<S> W(scores.rows, scores.cols);
  for (int i = 0; i < scores.rows; ++i) {
    const S* si = scores.row(i);
    S* wi = W.row(i);
    bool any = false;
    S m(0.0);
    for (int j = 0; j < scores.cols; ++j) {
      if (si[j] <= thresh) continue;
      if (!any || m < si[j]) m = si[j];
      any = true;
    }
    if (!any) throw RowFullyMasked("softmax row " + std::to_string(i) + " has no unmasked entries");
    S sum(0.0);
    for (int j = 0; j < scores.cols; ++j) {
      if (si[j] <= thresh) {
        wi[j] = S(0.0);
      } else {
        wi[j] = s_exp((si[j] - m) * inv_scale);
        sum += wi[j];
      }
    }
    S inv = S(1.0) / sum;
    for (int j = 0; j < scores.cols; ++j)
      if (!(si[j] <= thresh)) wi[j] *= inv;
  }
  return W;
}

// Per-row standardization followed by elementwise gain and bias.
template <class S>
BasicMat<S> layer_norm(const BasicMat<S>& M, const BasicMat<S>& gain, const BasicMat<S>& bias, S eps) {
  detail::require(gain.rows == 1 && gain.cols == M.cols, "layer_norm gain " + gain.shape());
  detail::require(bias.rows == 1 && bias.cols == M.cols, "layer_norm bias " + bias.shape());
  if (!(eps > S(0.0))) throw BadArgument("layer_norm requires eps > 0");
  BasicMat<S> Y(M.rows, M.cols);
  const S n(static_cast<double>(M.cols));
  for (int i = 0; i < M.rows; ++i) {
    const S* x = M.row(i);
    S* y = Y.row(i);
    S mean(0.0);
    for (int j = 0; j < M.cols; ++j) mean += x[j];
    mean /= n;
    S var(0.0);
    for (int j = 0; j < M.cols; ++j) {
      S d = x[j] - mean;
      var += d * d;
    }
    var /= n;
    S inv = S(1.0) / s_sqrt(var + eps);
    for (int j = 0; j < M.cols; ++j) y[j] = (x[j] - mean) * inv * gain.a[j] + bias.a[j];
  }
  return Y;
}

template <class S>
double max_abs_diff(const BasicMat<S>& A, const BasicMat<S>& B) {
  detail::require(A.same_shape(B), "max_abs_diff " + A.shape() + " vs " + B.shape());
  double m = 0.0;
  for (size_t i = 0; i < A.a.size(); ++i) {
    double d = s_double(s_abs(A.a[i] - B.a[i]));
    if (d > m) m = d;
  }
  return m;
}

template <class S>
bool all_finite(const BasicMat<S>& A) {
  for (const auto& x : A.a)
    if (!s_isfinite(x)) return false;
  return true;
}

// Exact widening copy; used by the compensated gradient-check path.
inline BasicMat<dd> widen(const Mat& A) {
  BasicMat<dd> B(A.rows, A.cols);
  for (size_t i = 0; i < A.a.size(); ++i) B.a[i] = dd(A.a[i]);
  return B;
}

}  // namespace gbt
