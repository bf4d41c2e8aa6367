#include "surfer/tensor/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "surfer/common/errors.hpp"

namespace surfer::tensor {
namespace {

// One BLAS thread keeps every reduction order fixed.
[[maybe_unused]] const bool kBlasSingleThread = [] {
  openblas_set_num_threads(1);
  return true;
}();

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == 0.0) {
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    return;
  }
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = vars.begin()->tape;
  for (const Var& v : vars) {
    if (v.tape != t || t == nullptr) throw Error("ops: inputs must live on the same tape");
  }
  return *t;
}

void axpy(Tensor& dst, const Tensor& src, double alpha = 1.0) {
  double* d = dst.ptr();
  const double* s = src.ptr();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += alpha * s[i];
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_string() + " x " +
                     bv.shape_string());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(m, n);
  gemm(false, false, m, n, k, 1.0, av.ptr(), k, bv.ptr(), n, 0.0, out.ptr(), n);
  return tape.record("matmul", {a, b}, std::move(out),
                     [&tape, ia = a.id, ib = b.id, m, k, n](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& A = tape.value(ia);
                       const Tensor& B = tape.value(ib);
                       if (gi[0]) gemm(false, true, m, k, n, 1.0, g.ptr(), n, B.ptr(), n, 1.0, gi[0]->ptr(), k);
                       if (gi[1]) gemm(true, false, k, n, m, 1.0, A.ptr(), k, g.ptr(), n, 1.0, gi[1]->ptr(), n);
                     });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("add", a.value(), b.value());
  Tensor out = a.value();
  axpy(out, b.value());
  return tape.record("add", {a, b}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) axpy(*gi[0], g);
    if (gi[1]) axpy(*gi[1], g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("sub", a.value(), b.value());
  Tensor out = a.value();
  axpy(out, b.value(), -1.0);
  return tape.record("sub", {a, b}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) axpy(*gi[0], g);
    if (gi[1]) axpy(*gi[1], g, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", {a, b}, std::move(out),
                     [&tape, ia = a.id, ib = b.id](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& A = tape.value(ia);
                       const Tensor& B = tape.value(ib);
                       if (gi[0]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * B[i];
                       if (gi[1]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * A[i];
                     });
}

Var scale(Var x, double factor) {
  Tape& tape = *x.tape;
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return tape.record("scale", {x}, std::move(out), [factor](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) axpy(*gi[0], g, factor);
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of({x, bias});
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_bias: bias " + bv.shape_string() + " does not fit " + xv.shape_string());
  }
  Tensor out = xv;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) += bv[c];
  return tape.record("add_bias", {x, bias}, std::move(out), [n](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) axpy(*gi[0], g);
    if (gi[1]) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) (*gi[1])[c] += g(r, c);
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of({x, weight, bias});
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.cols() != wv.rows()) {
    throw ShapeError("linear: inner dimensions differ, " + xv.shape_string() + " x " + wv.shape_string());
  }
  if (bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeError("linear: bias " + bv.shape_string() + " does not fit weight " + wv.shape_string());
  }
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  // Bias rows first, then accumulate the product on top.
  Tensor out(m, n);
  for (std::size_t r = 0; r < m; ++r) std::copy(bv.ptr(), bv.ptr() + n, out.ptr() + r * n);
  gemm(false, false, m, n, k, 1.0, xv.ptr(), k, wv.ptr(), n, 1.0, out.ptr(), n);
  return tape.record("linear", {x, weight, bias}, std::move(out),
                     [&tape, ix = x.id, iw = weight.id, m, k, n](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& X = tape.value(ix);
                       const Tensor& Wt = tape.value(iw);
                       if (gi[0]) gemm(false, true, m, k, n, 1.0, g.ptr(), n, Wt.ptr(), n, 1.0, gi[0]->ptr(), k);
                       if (gi[1]) gemm(true, false, k, n, m, 1.0, X.ptr(), k, g.ptr(), n, 1.0, gi[1]->ptr(), n);
                       if (gi[2]) {
                         double* db = gi[2]->ptr();
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t c = 0; c < n; ++c) db[c] += g(r, c);
                       }
                     });
}

Var gelu(Var x) {
  Tape& tape = *x.tape;
  Tensor out = x.value();
  // tanh of the inner argument is kept for the backward pass.
  std::vector<double> th(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    th[i] = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
    out[i] = 0.5 * v * (1.0 + th[i]);
  }
  return tape.record("gelu", {x}, std::move(out),
                     [&tape, ix = x.id, th = std::move(th)](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& X = tape.value(ix);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double v = X[i];
                         const double t = th[i];
                         const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
                         (*gi[0])[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
                       }
                     });
}

Var tanh(Var x) {
  Tape& tape = *x.tape;
  Tensor out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t self = tape.size();
  return tape.record("tanh", {x}, std::move(out), [&tape, self](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const Tensor& Y = tape.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& tape = tape_of({x, gamma, beta});
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), n = xv.cols();
  if (gamma.value().rows() != 1 || gamma.value().cols() != n || !gamma.value().same_shape(beta.value())) {
    throw ShapeError("layer_norm: scale/shift " + gamma.value().shape_string() + " do not fit " +
                     xv.shape_string());
  }
  Tensor xhat(rows, n);
  std::vector<double> inv_std(rows);
  Tensor out(rows, n);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xv(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xv(r, c) - mu) * (xv(r, c) - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (xv(r, c) - mu) * inv_std[r];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  return tape.record(
      "layer_norm", {x, gamma, beta}, std::move(out),
      [&tape, ig = gamma.id, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n](
          const Tensor& g, std::span<Tensor* const> gi) {
        const Tensor& G = tape.value(ig);
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = g(r, c) * G[c];
            m1 += dxhat[c];
            m2 += dxhat[c] * xhat(r, c);
          }
          m1 /= static_cast<double>(n);
          m2 /= static_cast<double>(n);
          if (gi[0]) {
            for (std::size_t c = 0; c < n; ++c)
              (*gi[0])(r, c) += inv_std[r] * (dxhat[c] - m1 - xhat(r, c) * m2);
          }
          if (gi[1]) for (std::size_t c = 0; c < n; ++c) (*gi[1])[c] += g(r, c) * xhat(r, c);
          if (gi[2]) for (std::size_t c = 0; c < n; ++c) (*gi[2])[c] += g(r, c);
        }
      });
}

namespace {

// Softmax over a strided lane: `count` elements starting at p with stride s.
void softmax_lane(const double* in, double* out, std::size_t count, std::size_t stride) {
  double mx = in[0];
  for (std::size_t i = 1; i < count; ++i) mx = std::max(mx, in[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    out[i * stride] = std::exp(in[i * stride] - mx);
    total += out[i * stride];
  }
  for (std::size_t i = 0; i < count; ++i) out[i * stride] /= total;
}

// d_in = y * (g - sum(g*y)) along a lane.
void softmax_lane_backward(const double* y, const double* g, double* din, std::size_t count,
                           std::size_t stride) {
  double dot = 0.0;
  for (std::size_t i = 0; i < count; ++i) dot += g[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < count; ++i) din[i * stride] += y[i * stride] * (g[i * stride] - dot);
}

Var segment_softmax_impl(Var x, std::size_t seg, const char* name) {
  Tape& tape = *x.tape;
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(rows, cols);
  for (std::size_t s = 0; s < rows; s += seg)
    for (std::size_t c = 0; c < cols; ++c)
      softmax_lane(xv.ptr() + s * cols + c, out.ptr() + s * cols + c, seg, cols);
  const std::size_t self = tape.size();
  return tape.record(name, {x}, std::move(out),
                     [&tape, self, seg, rows, cols](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& Y = tape.value(self);
                       for (std::size_t s = 0; s < rows; s += seg)
                         for (std::size_t c = 0; c < cols; ++c)
                           softmax_lane_backward(Y.ptr() + s * cols + c, g.ptr() + s * cols + c,
                                                 gi[0]->ptr() + s * cols + c, seg, cols);
                     });
}

}  // namespace

Var softmax(Var x, int axis) {
  const Tensor& xv = x.value();
  if (axis == 0) {
    if (xv.rows() == 0) throw ShapeError("softmax: empty axis");
    return segment_softmax_impl(x, xv.rows(), "softmax0");
  }
  if (axis != 1) throw ShapeError("softmax: axis must be 0 or 1, got " + std::to_string(axis));
  Tape& tape = *x.tape;
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (cols == 0) throw ShapeError("softmax: empty axis");
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) softmax_lane(xv.ptr() + r * cols, out.ptr() + r * cols, cols, 1);
  const std::size_t self = tape.size();
  return tape.record("softmax1", {x}, std::move(out),
                     [&tape, self, rows, cols](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& Y = tape.value(self);
                       for (std::size_t r = 0; r < rows; ++r)
                         softmax_lane_backward(Y.ptr() + r * cols, g.ptr() + r * cols,
                                               gi[0]->ptr() + r * cols, cols, 1);
                     });
}

Var segment_softmax(Var x, std::size_t rows_per_segment) {
  const Tensor& xv = x.value();
  if (rows_per_segment == 0 || xv.rows() % rows_per_segment != 0) {
    throw ShapeError("segment_softmax: " + std::to_string(xv.rows()) + " rows not divisible into segments of " +
                     std::to_string(rows_per_segment));
  }
  return segment_softmax_impl(x, rows_per_segment, "segment_softmax");
}

Var segment_matmul_tn(Var a, Var b, std::size_t seg) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (seg == 0 || av.rows() != bv.rows() || av.rows() % seg != 0) {
    throw ShapeError("segment_matmul_tn: " + av.shape_string() + " and " + bv.shape_string() +
                     " with segment " + std::to_string(seg));
  }
  const std::size_t groups = av.rows() / seg, m = av.cols(), d = bv.cols();
  Tensor out(groups * m, d);
  for (std::size_t g = 0; g < groups; ++g)
    gemm(true, false, m, d, seg, 1.0, av.ptr() + g * seg * m, m, bv.ptr() + g * seg * d, d, 0.0,
         out.ptr() + g * m * d, d);
  return tape.record("segment_matmul_tn", {a, b}, std::move(out),
                     [&tape, ia = a.id, ib = b.id, groups, seg, m, d](const Tensor& go, std::span<Tensor* const> gi) {
                       const Tensor& A = tape.value(ia);
                       const Tensor& B = tape.value(ib);
                       for (std::size_t g = 0; g < groups; ++g) {
                         const double* gog = go.ptr() + g * m * d;
                         // out_g = A_g^T B_g  =>  dA_g = B_g dO_g^T, dB_g = A_g dO_g
                         if (gi[0]) gemm(false, true, seg, m, d, 1.0, B.ptr() + g * seg * d, d, gog, d, 1.0,
                                         gi[0]->ptr() + g * seg * m, m);
                         if (gi[1]) gemm(false, false, seg, d, m, 1.0, A.ptr() + g * seg * m, m, gog, d, 1.0,
                                         gi[1]->ptr() + g * seg * d, d);
                       }
                     });
}

Var attention(Var q, Var k, Var v, std::size_t groups, std::size_t heads) {
  Tape& tape = tape_of({q, k, v});
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t d = qv.cols();
  if (d == 0) throw ShapeError("attention: model dimension is zero");
  if (kv.cols() != d || vv.cols() != d) {
    throw ShapeError("attention: feature dims differ, q " + qv.shape_string() + " k " + kv.shape_string() +
                     " v " + vv.shape_string());
  }
  if (kv.rows() != vv.rows()) {
    throw ShapeError("attention: key/value counts differ, k " + kv.shape_string() + " v " + vv.shape_string());
  }
  if (groups == 0 || heads == 0 || qv.rows() % groups != 0 || kv.rows() % groups != 0 || d % heads != 0) {
    throw ShapeError("attention: " + std::to_string(groups) + " groups / " + std::to_string(heads) +
                     " heads do not divide q " + qv.shape_string() + " k " + kv.shape_string());
  }
  const std::size_t nq = qv.rows() / groups, nk = kv.rows() / groups, dh = d / heads;
  if (nk == 0) throw ShapeError("attention: no keys");
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs holds softmax weights for every (group, head): [groups*heads] blocks of nq x nk
  std::vector<double> probs(groups * heads * nq * nk);
  Tensor out(groups * nq, d);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + (g * heads + h) * nq * nk;
      const double* qg = qv.ptr() + g * nq * d + h * dh;
      const double* kg = kv.ptr() + g * nk * d + h * dh;
      const double* vg = vv.ptr() + g * nk * d + h * dh;
      gemm(false, true, nq, nk, dh, inv, qg, d, kg, d, 0.0, p, nk);
      for (std::size_t r = 0; r < nq; ++r) softmax_lane(p + r * nk, p + r * nk, nk, 1);
      gemm(false, false, nq, dh, nk, 1.0, p, nk, vg, d, 0.0, out.ptr() + g * nq * d + h * dh, d);
    }
  }
  return tape.record(
      "attention", {q, k, v}, std::move(out),
      [&tape, iq = q.id, ik = k.id, iv = v.id, probs = std::move(probs), groups, heads, nq, nk, d, dh, inv](
          const Tensor& go, std::span<Tensor* const> gi) {
        const Tensor& Q = tape.value(iq);
        const Tensor& K = tape.value(ik);
        const Tensor& V = tape.value(iv);
        std::vector<double> dp(nq * nk);
        for (std::size_t g = 0; g < groups; ++g) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (g * heads + h) * nq * nk;
            const double* dog = go.ptr() + g * nq * d + h * dh;
            const std::size_t qoff = g * nq * d + h * dh, koff = g * nk * d + h * dh;
            // dV = P^T dO
            if (gi[2]) gemm(true, false, nk, dh, nq, 1.0, p, nk, dog, d, 1.0, gi[2]->ptr() + koff, d);
            if (!gi[0] && !gi[1]) continue;
            // dP = dO V^T, then dS = P * (dP - rowsum(dP * P))
            gemm(false, true, nq, nk, dh, 1.0, dog, d, V.ptr() + koff, d, 0.0, dp.data(), nk);
            for (std::size_t r = 0; r < nq; ++r) {
              double dot = 0.0;
              for (std::size_t c = 0; c < nk; ++c) dot += dp[r * nk + c] * p[r * nk + c];
              for (std::size_t c = 0; c < nk; ++c) dp[r * nk + c] = p[r * nk + c] * (dp[r * nk + c] - dot);
            }
            if (gi[0]) gemm(false, false, nq, dh, nk, inv, dp.data(), nk, K.ptr() + koff, d, 1.0, gi[0]->ptr() + qoff, d);
            if (gi[1]) gemm(true, false, nk, dh, nq, inv, dp.data(), nk, Q.ptr() + qoff, d, 1.0, gi[1]->ptr() + koff, d);
          }
        }
      });
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.cols() == 0) throw ShapeError("attention: model dimension is zero");
  if (q.cols() != k.cols()) throw ShapeError("attention: q " + q.shape_string() + " k " + k.shape_string());
  Tensor p(q.rows(), k.rows());
  gemm(false, true, q.rows(), k.rows(), q.cols(), 1.0 / std::sqrt(static_cast<double>(q.cols())), q.ptr(),
       q.cols(), k.ptr(), k.cols(), 0.0, p.ptr(), k.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) softmax_lane(p.ptr() + r * p.cols(), p.ptr() + r * p.cols(), p.cols(), 1);
  return p;
}

Var concat_rows(std::span<const Var> parts) { return concat_segments(parts, 1); }

Var concat_segments(std::span<const Var> parts, std::size_t groups) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& tape = *parts[0].tape;
  const std::size_t cols = parts[0].cols();
  std::vector<std::size_t> per_group;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape != &tape) throw Error("concat: inputs must live on the same tape");
    if (p.cols() != cols) {
      throw ShapeError("concat: column mismatch " + p.value().shape_string() + " vs " +
                       parts[0].value().shape_string());
    }
    if (groups == 0 || p.rows() % groups != 0) {
      throw ShapeError("concat: " + p.value().shape_string() + " not divisible into " +
                       std::to_string(groups) + " groups");
    }
    per_group.push_back(p.rows() / groups);
    total += p.rows();
  }
  Tensor out(total, cols);
  std::size_t row = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Tensor& src = parts[i].value();
      const std::size_t n = per_group[i];
      std::copy_n(src.ptr() + g * n * cols, n * cols, out.ptr() + row * cols);
      row += n;
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record("concat", std::move(inputs), std::move(out),
                     [per_group, groups, cols](const Tensor& go, std::span<Tensor* const> gi) {
                       std::size_t row = 0;
                       for (std::size_t g = 0; g < groups; ++g) {
                         for (std::size_t i = 0; i < per_group.size(); ++i) {
                           const std::size_t n = per_group[i];
                           if (gi[i]) {
                             double* dst = gi[i]->ptr() + g * n * cols;
                             const double* src = go.ptr() + row * cols;
                             for (std::size_t j = 0; j < n * cols; ++j) dst[j] += src[j];
                           }
                           row += n;
                         }
                       }
                     });
}

Var gather_rows(Var x, std::vector<std::size_t> index) {
  Tape& tape = *x.tape;
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  Tensor out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range for " + xv.shape_string());
    }
    std::copy_n(xv.ptr() + index[i] * cols, cols, out.ptr() + i * cols);
  }
  return tape.record("gather_rows", {x}, std::move(out),
                     [index = std::move(index), cols](const Tensor& go, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       for (std::size_t i = 0; i < index.size(); ++i) {
                         double* dst = gi[0]->ptr() + index[i] * cols;
                         const double* src = go.ptr() + i * cols;
                         for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                       }
                     });
}

Var segment_mean(Var x, std::vector<std::size_t> lengths) {
  Tape& tape = *x.tape;
  const Tensor& xv = x.value();
  const std::size_t cols = xv.cols();
  std::size_t total = 0;
  for (std::size_t n : lengths) {
    if (n == 0) throw ShapeError("segment_mean: empty segment");
    total += n;
  }
  if (total != xv.rows()) {
    throw ShapeError("segment_mean: segment lengths sum to " + std::to_string(total) + " but input is " +
                     xv.shape_string());
  }
  Tensor out(lengths.size(), cols);
  std::size_t row = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    for (std::size_t r = 0; r < lengths[s]; ++r, ++row)
      for (std::size_t c = 0; c < cols; ++c) out(s, c) += xv(row, c);
    for (std::size_t c = 0; c < cols; ++c) out(s, c) /= static_cast<double>(lengths[s]);
  }
  return tape.record("segment_mean", {x}, std::move(out),
                     [lengths = std::move(lengths), cols](const Tensor& go, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       std::size_t row = 0;
                       for (std::size_t s = 0; s < lengths.size(); ++s) {
                         const double w = 1.0 / static_cast<double>(lengths[s]);
                         for (std::size_t r = 0; r < lengths[s]; ++r, ++row)
                           for (std::size_t c = 0; c < cols; ++c) (*gi[0])(row, c) += w * go(s, c);
                       }
                     });
}

Var sum(Var x) {
  Tape& tape = *x.tape;
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return tape.record("sum", {x}, Tensor::scalar(total), [](const Tensor& go, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const double g = go[0];
    for (double& v : gi[0]->data()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var mse(Var prediction, Var target) {
  Tape& tape = tape_of({prediction, target});
  const Tensor& pv = prediction.value();
  const Tensor& tv = target.value();
  require_same("mse", pv, tv);
  if (pv.size() == 0) throw ShapeError("mse: empty tensor");
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) total += (pv[i] - tv[i]) * (pv[i] - tv[i]);
  const double n = static_cast<double>(pv.size());
  return tape.record("mse", {prediction, target}, Tensor::scalar(total / n),
                     [&tape, ip = prediction.id, it = target.id, n](const Tensor& go, std::span<Tensor* const> gi) {
                       const Tensor& P = tape.value(ip);
                       const Tensor& T = tape.value(it);
                       const double w = 2.0 * go[0] / n;
                       for (std::size_t i = 0; i < P.size(); ++i) {
                         const double diff = P[i] - T[i];
                         if (gi[0]) (*gi[0])[i] += w * diff;
                         if (gi[1]) (*gi[1])[i] -= w * diff;
                       }
                     });
}

Var mean_row_distance(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same("mean_row_distance", av, bv);
  const std::size_t rows = av.rows(), cols = av.cols();
  if (rows == 0) throw ShapeError("mean_row_distance: no rows");
  std::vector<double> dist(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (av(r, c) - bv(r, c)) * (av(r, c) - bv(r, c));
    dist[r] = std::sqrt(s);
    total += dist[r];
  }
  return tape.record("mean_row_distance", {a, b}, Tensor::scalar(total / static_cast<double>(rows)),
                     [&tape, ia = a.id, ib = b.id, dist = std::move(dist), rows, cols](
                         const Tensor& go, std::span<Tensor* const> gi) {
                       const Tensor& A = tape.value(ia);
                       const Tensor& B = tape.value(ib);
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (dist[r] == 0.0) continue;  // subgradient 0 at coincidence
                         const double w = go[0] / (static_cast<double>(rows) * dist[r]);
                         for (std::size_t c = 0; c < cols; ++c) {
                           const double diff = A(r, c) - B(r, c);
                           if (gi[0]) (*gi[0])(r, c) += w * diff;
                           if (gi[1]) (*gi[1])(r, c) -= w * diff;
                         }
                       }
                     });
}

}  // namespace surfer::tensor
