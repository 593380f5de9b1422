#pragma once

#include <string>

#include "crossview/nn/conv.hpp"

namespace crossview::nn {

template <class S>
struct NonLocalActs {
  Mat<S> t, p, g;  // embeddings, (inter x N), column i = position i
  Mat<S> attn;     // row-softmaxed pairwise weights, (N x N)
  Mat<S> y;        // aggregated values, (inter x N)
  Tensor3<S> o;    // projected output before the residual scale
};

// Embedded-Gaussian non-local block with a residual connection. The output
// path is scaled by a learnable scalar initialized to zero, so the block
// starts as the identity while every convolution keeps unit spectral norm.
// theta/phi/g use half the input channels.
template <class S>
struct NonLocalBlock {
  int channels = 0, inter = 0;
  Conv2d<S> theta, phi, g, out;
  Param<S> scale;  // 1x1

  NonLocalBlock() = default;
  explicit NonLocalBlock(int c, bool spectral = true)
      : channels(c),
        inter(c / 2),
        theta(c, c / 2, 1, 1, 0, spectral),
        phi(c, c / 2, 1, 1, 0, spectral),
        g(c, c / 2, 1, 1, 0, spectral),
        out(c / 2, c, 1, 1, 0, spectral) {
    scale.value = Mat<S>::Zero(1, 1);
  }

  void init(Rng& rng, double stddev = 0.02) {
    theta.init(rng, stddev);
    phi.init(rng, stddev);
    g.init(rng, stddev);
    out.init(rng, stddev);
    scale.value.setZero();
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    theta.visit_params(prefix + ".theta", f);
    phi.visit_params(prefix + ".phi", f);
    g.visit_params(prefix + ".g", f);
    out.visit_params(prefix + ".out", f);
    f(prefix + ".scale", scale);
  }
  template <class F>
  void visit_state(const std::string& prefix, F&& f) {
    theta.visit_state(prefix + ".theta", f);
    phi.visit_state(prefix + ".phi", f);
    g.visit_state(prefix + ".g", f);
    out.visit_state(prefix + ".out", f);
  }

  void refresh(bool update_u) {
    theta.refresh(update_u);
    phi.refresh(update_u);
    g.refresh(update_u);
    out.refresh(update_u);
  }

  void forward(const Tensor3<S>& x, Tensor3<S>& y_out, NonLocalActs<S>& acts) const {
    const long n = x.plane();
    Eigen::Map<const RowMat<S>> xm(x.data(), channels, n);

    auto embed = [&](const Conv2d<S>& conv, Mat<S>& dst) {
      dst.resize(inter, n);
      dst.noalias() = conv.w_used * xm;
      dst.colwise() += conv.bias.value.col(0);
    };
    embed(theta, acts.t);
    embed(phi, acts.p);
    embed(g, acts.g);

    // attn(i, j) = softmax_j( theta_i . phi_j )
    acts.attn.resize(n, n);
    acts.attn.noalias() = acts.t.transpose() * acts.p;
    for (long i = 0; i < n; ++i) {
      auto row = acts.attn.row(i);
      const S m = row.maxCoeff();
      row.array() = (row.array() - m).exp();
      row /= row.sum();
    }

    acts.y.resize(inter, n);
    acts.y.noalias() = acts.g * acts.attn.transpose();

    acts.o.ensure_shape(x.shape());
    Eigen::Map<RowMat<S>> om(acts.o.data(), channels, n);
    om.noalias() = out.w_used * acts.y;
    om.colwise() += out.bias.value.col(0);

    y_out.ensure_shape(x.shape());
    y_out.array() = x.array() + scale.value(0, 0) * acts.o.array();
  }

  void backward(const Tensor3<S>& x, const NonLocalActs<S>& acts, const Tensor3<S>& dy,
                Tensor3<S>& dx, GradBuffer<S>* gbuf) const {
    const long n = x.plane();
    const S gamma = scale.value(0, 0);

    if (gbuf) gbuf->of(scale)(0, 0) += (dy.array() * acts.o.array()).sum();

    Eigen::Map<const RowMat<S>> dym(dy.data(), channels, n);
    Mat<S> do_mat = gamma * dym;

    Mat<S> dy_val(inter, n);
    dy_val.noalias() = out.w_used.transpose() * do_mat;
    if (gbuf) {
      gbuf->of(out.weight).noalias() += do_mat * acts.y.transpose();
      gbuf->of(out.bias).col(0) += do_mat.rowwise().sum();
    }

    // y = g * attn^T
    Mat<S> dg(inter, n);
    dg.noalias() = dy_val * acts.attn;
    Mat<S> dattn(n, n);
    dattn.noalias() = dy_val.transpose() * acts.g;

    for (long i = 0; i < n; ++i) {
      const S dot = dattn.row(i).dot(acts.attn.row(i));
      dattn.row(i).array() = (dattn.row(i).array() - dot) * acts.attn.row(i).array();
    }

    // scores = t^T p
    Mat<S> dt(inter, n), dp(inter, n);
    dt.noalias() = acts.p * dattn.transpose();
    dp.noalias() = acts.t * dattn;

    dx.ensure_shape(x.shape());
    Eigen::Map<const RowMat<S>> xm(x.data(), channels, n);
    Eigen::Map<RowMat<S>> dxm(dx.data(), channels, n);
    dxm = dym;  // residual path
    auto backprop_embed = [&](const Conv2d<S>& conv, const Mat<S>& demb) {
      dxm.noalias() += conv.w_used.transpose() * demb;
      if (gbuf) {
        gbuf->of(conv.weight).noalias() += demb * xm.transpose();
        gbuf->of(conv.bias).col(0) += demb.rowwise().sum();
      }
    };
    backprop_embed(theta, dt);
    backprop_embed(phi, dp);
    backprop_embed(g, dg);
  }

  void finalize_grad(GradBuffer<S>& gbuf) const {
    theta.finalize_grad(gbuf);
    phi.finalize_grad(gbuf);
    g.finalize_grad(gbuf);
    out.finalize_grad(gbuf);
  }
};

}  // namespace crossview::nn
