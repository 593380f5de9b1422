#pragma once

#include <algorithm>
#include <string>

#include "crossview/nn/param.hpp"
#include "crossview/tensor.hpp"

namespace crossview::nn {

// Reusable per-thread scratch for im2col/GEMM buffers. Forward and backward
// paths size these on demand; sharing one workspace across layers keeps the
// peak allocation bounded by the largest layer.
template <class S>
struct Workspace {
  Mat<S> cols;   // (out_h*out_w) x (in_c*kh*kw)
  Mat<S> ymat;   // (out_h*out_w) x out_c
  Mat<S> dymat;  // (out_h*out_w) x out_c
  Mat<S> dcols;  // (out_h*out_w) x (in_c*kh*kw)
};

// 2-D convolution with optional spectral weight normalization.
//
// The kernel is kept in GEMM layout: a (out_c) x (in_c*kh*kw) matrix whose
// column index is r = (ci*kh + ky)*kw + kx. Spectral normalization follows
// the power-iteration scheme: one iteration per refresh in training mode on
// the reshaped kernel, with the left singular vector estimate persisted.
// Forward always consumes the cached normalized kernel, so concurrent
// forwards over a batch never mutate layer state.
template <class S>
struct Conv2d {
  int in_c = 0, out_c = 0, kh = 0, kw = 0;
  int stride = 1;
  int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;
  bool spectral = false;

  Param<S> weight;  // out_c x (in_c*kh*kw)
  Param<S> bias;    // out_c x 1
  Vec<S> u;         // persisted power-iteration estimate

  // Refresh caches (read-only during forward/backward).
  Mat<S> w_used;
  Vec<S> v_cache;
  S sigma = S(1);

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad, bool spectral_norm)
      : Conv2d(in_channels, out_channels, kernel, kernel, stride_, pad, pad, pad, pad, spectral_norm) {}
  Conv2d(int in_channels, int out_channels, int kh_, int kw_, int stride_, int pt, int pb, int pl,
         int pr, bool spectral_norm)
      : in_c(in_channels),
        out_c(out_channels),
        kh(kh_),
        kw(kw_),
        stride(stride_),
        pad_t(pt),
        pad_b(pb),
        pad_l(pl),
        pad_r(pr),
        spectral(spectral_norm) {
    weight.value = Mat<S>::Zero(out_c, static_cast<long>(in_c) * kh * kw);
    bias.value = Mat<S>::Zero(out_c, 1);
    u = Vec<S>::Zero(out_c);
  }

  void init(Rng& rng, double stddev = 0.02) {
    weight.init_normal(rng, stddev);
    bias.value.setZero();
    for (int i = 0; i < out_c; ++i) u[i] = static_cast<S>(rng.normal());
    u.normalize();
    refresh(false);
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    f(prefix + ".w", weight);
    f(prefix + ".b", bias);
  }
  template <class F>
  void visit_state(const std::string& prefix, F&& f) {
    if (spectral) f(prefix + ".u", u);
  }

  Shape3 out_shape(Shape3 in) const {
    return Shape3{out_c, (in.h + pad_t + pad_b - kh) / stride + 1,
                  (in.w + pad_l + pad_r - kw) / stride + 1};
  }

  // Recompute the kernel used by forward. In training mode (update_u) this
  // advances the power iteration by one step first.
  void refresh(bool update_u) {
    if (!spectral) {
      w_used = weight.value;
      sigma = S(1);
      return;
    }
    const Mat<S>& w = weight.value;
    Vec<S> v = w.transpose() * u;
    v /= v.norm() + S(1e-12);
    if (update_u) {
      Vec<S> un = w * v;
      un /= un.norm() + S(1e-12);
      u = un;
      v = w.transpose() * u;
      v /= v.norm() + S(1e-12);
    }
    sigma = u.dot(w * v);
    v_cache = v;
    w_used = w / std::max(sigma, S(1e-12));
  }

  void forward(const Tensor3<S>& x, Tensor3<S>& y, Workspace<S>& ws) const {
    const Shape3 os = out_shape(x.shape());
    y.ensure_shape(os);
    const long n = static_cast<long>(os.h) * os.w;

    if (is_pointwise()) {
      // 1x1 stride-1 fast path: channels-x-pixels GEMM without im2col.
      Eigen::Map<const RowMat<S>> xm(x.data(), in_c, n);
      Eigen::Map<RowMat<S>> ym(y.data(), out_c, n);
      ym.noalias() = w_used * xm;
      ym.colwise() += Eigen::Map<const Vec<S>>(bias.value.data(), out_c);
      return;
    }

    im2col(x, ws.cols);
    ws.ymat.resize(n, out_c);
    ws.ymat.noalias() = ws.cols * w_used.transpose();
    ws.ymat.rowwise() += bias.value.col(0).transpose();
    for (int c = 0; c < out_c; ++c)
      Eigen::Map<Vec<S>>(y.data() + c * n, n) = ws.ymat.col(c);
  }

  // Accumulates parameter gradients into `g` (pass nullptr to skip) and
  // writes the input gradient into `dx` (pass nullptr to skip). With
  // spectral normalization the weight slot accumulates the gradient with
  // respect to the *normalized* kernel; finalize_grad() applies the chain
  // rule through the normalization once per reduced batch.
  void backward(const Tensor3<S>& x, const Tensor3<S>& dy, Tensor3<S>* dx, GradBuffer<S>* g,
                Workspace<S>& ws) const {
    const Shape3 os = dy.shape();
    const long n = static_cast<long>(os.h) * os.w;

    if (is_pointwise()) {
      Eigen::Map<const RowMat<S>> dym(dy.data(), out_c, n);
      Eigen::Map<const RowMat<S>> xm(x.data(), in_c, n);
      if (g) {
        g->of(weight).noalias() += dym * xm.transpose();
        g->of(bias).col(0).noalias() += dym.rowwise().sum();
      }
      if (dx) {
        dx->ensure_shape(x.shape());
        Eigen::Map<RowMat<S>> dxm(dx->data(), in_c, n);
        dxm.noalias() = w_used.transpose() * dym;
      }
      return;
    }

    ws.dymat.resize(n, out_c);
    for (int c = 0; c < out_c; ++c)
      ws.dymat.col(c) = Eigen::Map<const Vec<S>>(dy.data() + c * n, n);

    if (g) {
      im2col(x, ws.cols);
      g->of(weight).noalias() += ws.dymat.transpose() * ws.cols;
      g->of(bias).col(0).noalias() += ws.dymat.colwise().sum().transpose();
    }
    if (dx) {
      ws.dcols.resize(n, weight.value.cols());
      ws.dcols.noalias() = ws.dymat * w_used;
      dx->ensure_shape(x.shape());
      col2im_add(ws.dcols, *dx, os);
    }
  }

  // Chain rule through W_bar = W / sigma with the singular vector estimates
  // held fixed: dL/dW = (dL/dW_bar - <dL/dW_bar, W_bar> u v^T) / sigma.
  void finalize_grad(GradBuffer<S>& g) const {
    if (!spectral) return;
    Mat<S>& gw = g.of(weight);
    const S dot = gw.cwiseProduct(w_used).sum();
    gw.noalias() -= dot * (u * v_cache.transpose());
    gw /= std::max(sigma, S(1e-12));
  }

 private:
  bool is_pointwise() const {
    return kh == 1 && kw == 1 && stride == 1 && pad_t == 0 && pad_b == 0 && pad_l == 0 && pad_r == 0;
  }

  void im2col(const Tensor3<S>& x, Mat<S>& cols) const {
    const Shape3 os = out_shape(x.shape());
    const long n = static_cast<long>(os.h) * os.w;
    cols.resize(n, weight.value.cols());
    const int h = x.height(), w = x.width();

    long r = 0;
    for (int ci = 0; ci < in_c; ++ci) {
      const S* plane = x.data() + static_cast<long>(ci) * h * w;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx, ++r) {
          S* col = cols.col(r).data();
          for (int oy = 0; oy < os.h; ++oy) {
            S* drow = col + static_cast<long>(oy) * os.w;
            const int iy = oy * stride - pad_t + ky;
            if (iy < 0 || iy >= h) {
              std::fill(drow, drow + os.w, S(0));
              continue;
            }
            // valid ox satisfy 0 <= ox*stride - pad_l + kx < w
            const int lo = std::max(0, ceil_div(pad_l - kx, stride));
            const int hi = std::min(os.w, ceil_div(w - kx + pad_l, stride));
            std::fill(drow, drow + std::min(lo, os.w), S(0));
            if (hi < os.w) std::fill(drow + std::max(hi, 0), drow + os.w, S(0));
            const S* srow = plane + static_cast<long>(iy) * w;
            if (stride == 1) {
              if (hi > lo) std::copy(srow + lo - pad_l + kx, srow + hi - pad_l + kx, drow + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) drow[ox] = srow[ox * stride - pad_l + kx];
            }
          }
        }
      }
    }
  }

  void col2im_add(const Mat<S>& dcols, Tensor3<S>& dx, Shape3 os) const {
    dx.set_zero();
    const int h = dx.height(), w = dx.width();
    long r = 0;
    for (int ci = 0; ci < in_c; ++ci) {
      S* plane = dx.data() + static_cast<long>(ci) * h * w;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx, ++r) {
          const S* col = dcols.col(r).data();
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * stride - pad_t + ky;
            if (iy < 0 || iy >= h) continue;
            const S* srow = col + static_cast<long>(oy) * os.w;
            S* drow = plane + static_cast<long>(iy) * w;
            const int lo = std::max(0, ceil_div(pad_l - kx, stride));
            const int hi = std::min(os.w, ceil_div(w - kx + pad_l, stride));
            for (int ox = lo; ox < hi; ++ox) drow[ox * stride - pad_l + kx] += srow[ox];
          }
        }
      }
    }
  }

  static int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
};

}  // namespace crossview::nn
