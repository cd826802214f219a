#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gbt/mat.hpp"
#include "gbt/param_store.hpp"

namespace gbt {

// Handle into a GraphT tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Eager reverse-mode tape. Each op computes its value immediately and
// records a closure that scatters the incoming adjoint to its inputs.
// Parameter leaves are cached by canonical name, so tied tensors map to one
// node and their gradients accumulate automatically.
template <class S>
class GraphT {
public:
  using Scalar = S;

  explicit GraphT(BasicParamStore<S>* params = nullptr) : params_(params) {}

  const BasicMat<S>& value(Var v) const { return nodes_[v.id].value; }
  const BasicMat<S>& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const {
    const auto& m = nodes_[v.id].value;
    if (m.rows != 1 || m.cols != 1) throw NonScalarLoss("expected 1x1, got " + m.shape());
    return s_double(m.a[0]);
  }

  // Constant input (no gradient tracked beyond the tape).
  Var input(BasicMat<S> m) { return push(std::move(m)); }

  Var constant(int rows, int cols, S fill) {
    BasicMat<S> m(rows, cols);
    for (auto& x : m.a) x = fill;
    return push(std::move(m));
  }

  // Parameter leaf; backward adds into the tensor's .grad.
  Var param(const std::string& name) {
    if (!params_) throw BadArgument("graph has no parameter store");
    const std::string& canon = params_->canonical(name);
    auto it = param_vars_.find(canon);
    if (it != param_vars_.end()) return it->second;
    auto& t = params_->get(canon);
    Var v = push(t.value);
    BasicTensor<S>* tp = &t;
    nodes_[v.id].backward = [this, v, tp] {
      const auto& g = nodes_[v.id].grad;
      for (size_t i = 0; i < g.a.size(); ++i) tp->grad.a[i] += g.a[i];
    };
    param_vars_.emplace(canon, v);
    return v;
  }

  Var matmul(Var a, Var b) {
    Var c = push(mm(val(a), val(b)));
    nodes_[c.id].backward = [this, a, b, c] {
      const auto& g = nodes_[c.id].grad;
      acc(a, mm_nt(g, val(b)));
      acc(b, mm_tn(val(a), g));
    };
    return c;
  }

  // a * b^T
  Var matmul_nt(Var a, Var b) {
    Var c = push(mm_nt(val(a), val(b)));
    nodes_[c.id].backward = [this, a, b, c] {
      const auto& g = nodes_[c.id].grad;
      acc(a, mm(g, val(b)));
      acc(b, mm_tn(g, val(a)));
    };
    return c;
  }

  Var add(Var a, Var b) {
    Var c = push(gbt::add(val(a), val(b)));
    nodes_[c.id].backward = [this, a, b, c] {
      const auto& g = nodes_[c.id].grad;
      acc(a, g);
      acc(b, g);
    };
    return c;
  }

  // Matrix plus broadcast row vector (1 x cols).
  Var add_row(Var a, Var b) {
    Var c = push(gbt::add_row(val(a), val(b)));
    nodes_[c.id].backward = [this, a, b, c] {
      const auto& g = nodes_[c.id].grad;
      acc(a, g);
      BasicMat<S> gb(1, g.cols);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) gb.a[j] += g(i, j);
      acc(b, gb);
    };
    return c;
  }

  Var scale(Var a, S k) {
    Var c = push(gbt::scale(val(a), k));
    nodes_[c.id].backward = [this, a, c, k] { acc(a, gbt::scale(nodes_[c.id].grad, k)); };
    return c;
  }

  Var hadamard(Var a, Var b) {
    Var c = push(gbt::hadamard(val(a), val(b)));
    nodes_[c.id].backward = [this, a, b, c] {
      const auto& g = nodes_[c.id].grad;
      acc(a, gbt::hadamard(g, val(b)));
      acc(b, gbt::hadamard(g, val(a)));
    };
    return c;
  }

  Var relu(Var a) {
    BasicMat<S> y = val(a);
    for (auto& x : y.a)
      if (x < S(0.0)) x = S(0.0);
    Var c = push(std::move(y));
    nodes_[c.id].backward = [this, a, c] {
      const auto& g = nodes_[c.id].grad;
      const auto& x = val(a);
      BasicMat<S> gx(g.rows, g.cols);
      for (size_t i = 0; i < g.a.size(); ++i) gx.a[i] = x.a[i] > S(0.0) ? g.a[i] : S(0.0);
      acc(a, gx);
    };
    return c;
  }

  // tanh-form gelu, the BERT variant.
  Var gelu(Var a) {
    const S c0(0.7978845608028654);  // sqrt(2/pi)
    const S c1(0.044715);
    const auto& x = val(a);
    BasicMat<S> y(x.rows, x.cols);
    for (size_t i = 0; i < x.a.size(); ++i) {
      S u = c0 * (x.a[i] + c1 * x.a[i] * x.a[i] * x.a[i]);
      y.a[i] = S(0.5) * x.a[i] * (S(1.0) + s_tanh(u));
    }
    Var c = push(std::move(y));
    nodes_[c.id].backward = [this, a, c, c0, c1] {
      const auto& g = nodes_[c.id].grad;
      const auto& x = val(a);
      BasicMat<S> gx(g.rows, g.cols);
      for (size_t i = 0; i < g.a.size(); ++i) {
        S xi = x.a[i];
        S u = c0 * (xi + c1 * xi * xi * xi);
        S t = s_tanh(u);
        S du = c0 * (S(1.0) + S(3.0) * c1 * xi * xi);
        S d = S(0.5) * (S(1.0) + t) + S(0.5) * xi * (S(1.0) - t * t) * du;
        gx.a[i] = g.a[i] * d;
      }
      acc(a, gx);
    };
    return c;
  }

  // Row-wise masked softmax of scores / sqrt(d_q); see scaled_softmax.
  Var softmax_rows(Var a, int d_q) {
    Var c = push(scaled_softmax(val(a), d_q));
    const S inv_scale = S(1.0) / s_sqrt(S(static_cast<double>(d_q)));
    nodes_[c.id].backward = [this, a, c, inv_scale] {
      const auto& g = nodes_[c.id].grad;
      const auto& y = val(c);
      BasicMat<S> gx(g.rows, g.cols);
      for (int i = 0; i < g.rows; ++i) {
        const S* gi = g.row(i);
        const S* yi = y.row(i);
        S dot(0.0);
        for (int j = 0; j < g.cols; ++j) dot += gi[j] * yi[j];
        S* oi = gx.row(i);
        for (int j = 0; j < g.cols; ++j) oi[j] = yi[j] * (gi[j] - dot) * inv_scale;
      }
      acc(a, gx);
    };
    return c;
  }

  Var layer_norm(Var a, Var gain, Var bias, S eps) {
    Var c = push(gbt::layer_norm(val(a), val(gain), val(bias), eps));
    nodes_[c.id].backward = [this, a, gain, bias, c, eps] {
      const auto& g = nodes_[c.id].grad;
      const auto& x = val(a);
      const auto& gn = val(gain);
      const int n = x.cols;
      const S sn(static_cast<double>(n));
      BasicMat<S> gx(x.rows, x.cols);
      BasicMat<S> ggain(1, n);
      BasicMat<S> gbias(1, n);
      std::vector<S> xhat(static_cast<size_t>(n));
      for (int i = 0; i < x.rows; ++i) {
        const S* xi = x.row(i);
        const S* gi = g.row(i);
        S mean(0.0);
        for (int j = 0; j < n; ++j) mean += xi[j];
        mean /= sn;
        S var(0.0);
        for (int j = 0; j < n; ++j) {
          S d = xi[j] - mean;
          var += d * d;
        }
        var /= sn;
        S inv = S(1.0) / s_sqrt(var + eps);
        S m1(0.0), m2(0.0);
        for (int j = 0; j < n; ++j) {
          xhat[j] = (xi[j] - mean) * inv;
          S dxh = gi[j] * gn.a[j];
          m1 += dxh;
          m2 += dxh * xhat[j];
          ggain.a[j] += gi[j] * xhat[j];
          gbias.a[j] += gi[j];
        }
        m1 /= sn;
        m2 /= sn;
        S* oi = gx.row(i);
        for (int j = 0; j < n; ++j) oi[j] = (gi[j] * gn.a[j] - m1 - xhat[j] * m2) * inv;
      }
      acc(a, gx);
      acc(gain, ggain);
      acc(bias, gbias);
    };
    return c;
  }

  Var concat_rows(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    detail::require(A.cols == B.cols, "concat_rows " + A.shape() + " | " + B.shape());
    BasicMat<S> C(A.rows + B.rows, A.cols);
    std::copy(A.a.begin(), A.a.end(), C.a.begin());
    std::copy(B.a.begin(), B.a.end(), C.a.begin() + A.a.size());
    Var c = push(std::move(C));
    int ar = A.rows;
    nodes_[c.id].backward = [this, a, b, c, ar] {
      const auto& g = nodes_[c.id].grad;
      BasicMat<S> ga(ar, g.cols);
      BasicMat<S> gb(g.rows - ar, g.cols);
      std::copy(g.a.begin(), g.a.begin() + ga.a.size(), ga.a.begin());
      std::copy(g.a.begin() + ga.a.size(), g.a.end(), gb.a.begin());
      acc(a, ga);
      acc(b, gb);
    };
    return c;
  }

  Var concat_cols(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    detail::require(A.rows == B.rows, "concat_cols " + A.shape() + " | " + B.shape());
    BasicMat<S> C(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
      std::copy(A.row(i), A.row(i) + A.cols, C.row(i));
      std::copy(B.row(i), B.row(i) + B.cols, C.row(i) + A.cols);
    }
    Var c = push(std::move(C));
    int ac = A.cols;
    nodes_[c.id].backward = [this, a, b, c, ac] {
      const auto& g = nodes_[c.id].grad;
      BasicMat<S> ga(g.rows, ac);
      BasicMat<S> gb(g.rows, g.cols - ac);
      for (int i = 0; i < g.rows; ++i) {
        std::copy(g.row(i), g.row(i) + ac, ga.row(i));
        std::copy(g.row(i) + ac, g.row(i) + g.cols, gb.row(i));
      }
      acc(a, ga);
      acc(b, gb);
    };
    return c;
  }

  Var slice_rows(Var a, int begin, int count) {
    const auto& A = val(a);
    if (begin < 0 || count < 0 || begin + count > A.rows)
      throw ShapeMismatch("slice_rows [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " + A.shape());
    BasicMat<S> C(count, A.cols);
    std::copy(A.row(begin), A.row(begin) + C.a.size(), C.a.begin());
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, a, c, begin] {
      const auto& g = nodes_[c.id].grad;
      const auto& A2 = val(a);
      BasicMat<S> ga(A2.rows, A2.cols);
      std::copy(g.a.begin(), g.a.end(), ga.row(begin));
      acc(a, ga);
    };
    return c;
  }

  Var slice_cols(Var a, int begin, int count) {
    const auto& A = val(a);
    if (begin < 0 || count < 0 || begin + count > A.cols)
      throw ShapeMismatch("slice_cols [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " + A.shape());
    BasicMat<S> C(A.rows, count);
    for (int i = 0; i < A.rows; ++i) std::copy(A.row(i) + begin, A.row(i) + begin + count, C.row(i));
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, a, c, begin] {
      const auto& g = nodes_[c.id].grad;
      const auto& A2 = val(a);
      BasicMat<S> ga(A2.rows, A2.cols);
      for (int i = 0; i < g.rows; ++i) std::copy(g.row(i), g.row(i) + g.cols, ga.row(i) + begin);
      acc(a, ga);
    };
    return c;
  }

  // Rows of `a` selected by index; duplicate indices accumulate gradient.
  Var gather_rows(Var a, std::vector<int> idx) {
    const auto& A = val(a);
    for (int i : idx)
      if (i < 0 || i >= A.rows) throw IdOutOfRange("gather_rows index " + std::to_string(i) + " of " + A.shape());
    BasicMat<S> C(static_cast<int>(idx.size()), A.cols);
    for (size_t r = 0; r < idx.size(); ++r)
      std::copy(A.row(idx[r]), A.row(idx[r]) + A.cols, C.row(static_cast<int>(r)));
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, a, c, idx = std::move(idx)] {
      const auto& g = nodes_[c.id].grad;
      const auto& A2 = val(a);
      BasicMat<S> ga(A2.rows, A2.cols);
      for (size_t r = 0; r < idx.size(); ++r) {
        const S* gr = g.row(static_cast<int>(r));
        S* dst = ga.row(idx[r]);
        for (int j = 0; j < g.cols; ++j) dst[j] += gr[j];
      }
      acc(a, ga);
    };
    return c;
  }

  Var sum_all(Var a) {
    const auto& A = val(a);
    S s(0.0);
    for (const auto& x : A.a) s += x;
    BasicMat<S> C(1, 1);
    C.a[0] = s;
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, a, c] {
      const auto& g = nodes_[c.id].grad;
      const auto& A2 = val(a);
      BasicMat<S> ga(A2.rows, A2.cols);
      for (auto& x : ga.a) x = g.a[0];
      acc(a, ga);
    };
    return c;
  }

  // Sum over rows i of log-sum-exp(z_i) - z_i[target_i]; mean is applied by
  // the caller via scale(). Targets must be in range.
  Var cross_entropy_sum(Var logits, std::vector<int> targets) {
    const auto& Z = val(logits);
    if (static_cast<int>(targets.size()) != Z.rows)
      throw ShapeMismatch("cross_entropy_sum targets " + std::to_string(targets.size()) + " vs " + Z.shape());
    for (int t : targets)
      if (t < 0 || t >= Z.cols) throw IdOutOfRange("cross_entropy target " + std::to_string(t));
    S loss(0.0);
    BasicMat<S> soft(Z.rows, Z.cols);
    for (int i = 0; i < Z.rows; ++i) {
      const S* zi = Z.row(i);
      S m = zi[0];
      for (int j = 1; j < Z.cols; ++j)
        if (m < zi[j]) m = zi[j];
      S sum(0.0);
      S* si = soft.row(i);
      for (int j = 0; j < Z.cols; ++j) {
        si[j] = s_exp(zi[j] - m);
        sum += si[j];
      }
      S inv = S(1.0) / sum;
      for (int j = 0; j < Z.cols; ++j) si[j] *= inv;
      loss += s_log(sum) + m - zi[targets[i]];
    }
    BasicMat<S> C(1, 1);
    C.a[0] = loss;
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, logits, c, soft = std::move(soft), targets = std::move(targets)] {
      S g = nodes_[c.id].grad.a[0];
      BasicMat<S> gz = soft;
      for (size_t i = 0; i < targets.size(); ++i) gz(static_cast<int>(i), targets[i]) -= S(1.0);
      for (auto& x : gz.a) x *= g;
      acc(logits, gz);
    };
    return c;
  }

  // Sum over rows of KL(target_row || softmax(logit_row)). Target rows must
  // be distributions; zero target entries contribute zero.
  Var kl_sum(Var logits, BasicMat<S> targets) {
    const auto& Z = val(logits);
    detail::require(Z.rows == targets.rows && Z.cols == targets.cols,
                    "kl_sum " + Z.shape() + " vs targets " + targets.shape());
    for (int i = 0; i < targets.rows; ++i) {
      S sum(0.0);
      for (int j = 0; j < targets.cols; ++j) {
        if (targets(i, j) < S(0.0)) throw InvalidDistribution("negative target probability");
        sum += targets(i, j);
      }
      if (s_abs(sum - S(1.0)) > S(1e-6)) throw InvalidDistribution("target row does not sum to 1");
    }
    S loss(0.0);
    BasicMat<S> soft(Z.rows, Z.cols);
    for (int i = 0; i < Z.rows; ++i) {
      const S* zi = Z.row(i);
      S m = zi[0];
      for (int j = 1; j < Z.cols; ++j)
        if (m < zi[j]) m = zi[j];
      S sum(0.0);
      S* si = soft.row(i);
      for (int j = 0; j < Z.cols; ++j) {
        si[j] = s_exp(zi[j] - m);
        sum += si[j];
      }
      S lse = s_log(sum) + m;
      S inv = S(1.0) / sum;
      for (int j = 0; j < Z.cols; ++j) si[j] *= inv;
      for (int j = 0; j < Z.cols; ++j) {
        S t = targets(i, j);
        if (t > S(0.0)) loss += t * (s_log(t) - (zi[j] - lse));
      }
    }
    BasicMat<S> C(1, 1);
    C.a[0] = loss;
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, logits, c, soft = std::move(soft), targets = std::move(targets)] {
      S g = nodes_[c.id].grad.a[0];
      BasicMat<S> gz(soft.rows, soft.cols);
      for (size_t i = 0; i < gz.a.size(); ++i) gz.a[i] = g * (soft.a[i] - targets.a[i]);
      acc(logits, gz);
    };
    return c;
  }

  // Binary cross-entropy of sigmoid(z) against label, for a 1x1 logit.
  Var bce_with_logit(Var logit, bool label) {
    const auto& Z = val(logit);
    if (Z.rows != 1 || Z.cols != 1) throw ShapeMismatch("bce_with_logit expects 1x1, got " + Z.shape());
    S z = Z.a[0];
    S y(label ? 1.0 : 0.0);
    S az = s_abs(z);
    S loss = (z > S(0.0) ? z : S(0.0)) - z * y + s_log1p(s_exp(-az));
    BasicMat<S> C(1, 1);
    C.a[0] = loss;
    Var c = push(std::move(C));
    nodes_[c.id].backward = [this, logit, c, z, y] {
      S g = nodes_[c.id].grad.a[0];
      S sig = S(1.0) / (S(1.0) + s_exp(-z));
      BasicMat<S> gz(1, 1);
      gz.a[0] = g * (sig - y);
      acc(logit, gz);
    };
    return c;
  }

  // Seeds d(out)/d(out) = seed and runs the tape backward. Node adjoints are
  // reset on every call; parameter tensor gradients accumulate across calls.
  void backward(Var out, S seed = S(1.0)) {
    const auto& m = nodes_[out.id].value;
    if (m.rows != 1 || m.cols != 1) throw NonScalarLoss("backward from non-scalar " + m.shape());
    for (auto& n : nodes_) {
      if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = BasicMat<S>(n.value.rows, n.value.cols);
      else
        for (auto& g : n.grad.a) g = S(0.0);
      n.touched = false;
    }
    nodes_[out.id].grad.a[0] = seed;
    nodes_[out.id].touched = true;
    for (int i = out.id; i >= 0; --i)
      if (nodes_[i].backward && nodes_[i].touched) nodes_[i].backward();
  }

  size_t n_nodes() const { return nodes_.size(); }

private:
  struct Node {
    BasicMat<S> value;
    BasicMat<S> grad;
    std::function<void()> backward;
    bool touched = false;  // received any adjoint; pruned in backward otherwise
  };

  const BasicMat<S>& val(Var v) const { return nodes_[v.id].value; }

  Var push(BasicMat<S> m) {
    Node n;
    n.value = std::move(m);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void acc(Var v, const BasicMat<S>& g) {
    Node& n = nodes_[v.id];
    if (n.grad.rows != g.rows || n.grad.cols != g.cols) n.grad = BasicMat<S>(g.rows, g.cols);
    for (size_t i = 0; i < g.a.size(); ++i) n.grad.a[i] += g.a[i];
    n.touched = true;
  }

  BasicParamStore<S>* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, Var> param_vars_;
};

using Graph = GraphT<double>;

}  // namespace gbt
