#pragma once

#include <limits>
#include <string>
#include <vector>

#include "crossview/nn/param.hpp"
#include "crossview/tensor.hpp"

namespace crossview::nn {

// ---- activations ------------------------------------------------------

template <class S>
void relu_forward(const Tensor3<S>& x, Tensor3<S>& y) {
  y.ensure_shape(x.shape());
  y.array() = x.array().max(S(0));
}

template <class S>
void relu_backward(const Tensor3<S>& y, const Tensor3<S>& dy, Tensor3<S>& dx) {
  dx.ensure_shape(y.shape());
  dx.array() = dy.array() * (y.array() > S(0)).template cast<S>();
}

template <class S>
void leaky_relu_forward(const Tensor3<S>& x, Tensor3<S>& y, S slope) {
  y.ensure_shape(x.shape());
  y.array() = x.array().max(x.array() * slope);
}

template <class S>
void leaky_relu_backward(const Tensor3<S>& y, const Tensor3<S>& dy, Tensor3<S>& dx, S slope) {
  dx.ensure_shape(y.shape());
  dx.array() =
      dy.array() * ((y.array() > S(0)).template cast<S>() * (S(1) - slope) + slope);
}

template <class S>
void tanh_forward(const Tensor3<S>& x, Tensor3<S>& y) {
  y.ensure_shape(x.shape());
  y.array() = x.array().tanh();
}

template <class S>
void tanh_backward(const Tensor3<S>& y, const Tensor3<S>& dy, Tensor3<S>& dx) {
  dx.ensure_shape(y.shape());
  dx.array() = dy.array() * (S(1) - y.array() * y.array());
}

// ---- instance normalization -------------------------------------------

template <class S>
struct InstanceNormCache {
  Vec<S> mean, inv_std;
};

// Per-sample, per-channel normalization with affine parameters.
template <class S>
struct InstanceNorm {
  int channels = 0;
  S eps = S(1e-5);
  Param<S> gamma, beta;

  InstanceNorm() = default;
  explicit InstanceNorm(int c) : channels(c) {
    gamma.value = Mat<S>::Ones(c, 1);
    beta.value = Mat<S>::Zero(c, 1);
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }

  void forward(const Tensor3<S>& x, Tensor3<S>& y, InstanceNormCache<S>& cache) const {
    y.ensure_shape(x.shape());
    cache.mean.resize(channels);
    cache.inv_std.resize(channels);
    const long n = x.plane();
    for (int c = 0; c < channels; ++c) {
      Eigen::Map<const Vec<S>> xc(x.data() + c * n, n);
      const S mu = xc.mean();
      const S var = (xc.array() - mu).square().mean();
      const S inv = S(1) / std::sqrt(var + eps);
      cache.mean[c] = mu;
      cache.inv_std[c] = inv;
      Eigen::Map<Vec<S>>(y.data() + c * n, n).array() =
          (xc.array() - mu) * inv * gamma.value(c, 0) + beta.value(c, 0);
    }
  }

  void backward(const Tensor3<S>& x, const InstanceNormCache<S>& cache, const Tensor3<S>& dy,
                Tensor3<S>& dx, GradBuffer<S>* g) const {
    dx.ensure_shape(x.shape());
    const long n = x.plane();
    for (int c = 0; c < channels; ++c) {
      Eigen::Map<const Vec<S>> xc(x.data() + c * n, n);
      Eigen::Map<const Vec<S>> dyc(dy.data() + c * n, n);
      const S mu = cache.mean[c], inv = cache.inv_std[c];
      Eigen::Array<S, Eigen::Dynamic, 1> xhat = (xc.array() - mu) * inv;
      if (g) {
        g->of(gamma)(c, 0) += (dyc.array() * xhat).sum();
        g->of(beta)(c, 0) += dyc.sum();
      }
      const S gs = gamma.value(c, 0);
      const S mean_dy = dyc.mean();
      const S mean_dy_xhat = (dyc.array() * xhat).mean();
      Eigen::Map<Vec<S>>(dx.data() + c * n, n).array() =
          gs * inv * (dyc.array() - mean_dy - xhat * mean_dy_xhat);
    }
  }
};

// ---- pooling ----------------------------------------------------------

// 2x2 average pooling with ceil semantics: a trailing odd row/column forms
// a partial window averaged over the valid samples only, so output sizes
// match a stride-2 padded convolution on the same input.
template <class S>
void avgpool2_forward(const Tensor3<S>& x, Tensor3<S>& y) {
  const int oh = (x.height() + 1) / 2, ow = (x.width() + 1) / 2;
  y.ensure_shape({x.channels(), oh, ow});
  for (int c = 0; c < x.channels(); ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        S sum = 0;
        int cnt = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dxx = 0; dxx < 2; ++dxx) {
            const int iy = 2 * oy + dy, ix = 2 * ox + dxx;
            if (iy < x.height() && ix < x.width()) {
              sum += x(c, iy, ix);
              ++cnt;
            }
          }
        y(c, oy, ox) = sum / S(cnt);
      }
}

template <class S>
void avgpool2_backward(const Tensor3<S>& dy, Shape3 in_shape, Tensor3<S>& dx) {
  dx.ensure_shape(in_shape);
  dx.set_zero();
  for (int c = 0; c < in_shape.c; ++c)
    for (int oy = 0; oy < dy.height(); ++oy)
      for (int ox = 0; ox < dy.width(); ++ox) {
        int cnt = 0;
        for (int dyy = 0; dyy < 2; ++dyy)
          for (int dxx = 0; dxx < 2; ++dxx)
            if (2 * oy + dyy < in_shape.h && 2 * ox + dxx < in_shape.w) ++cnt;
        const S share = dy(c, oy, ox) / S(cnt);
        for (int dyy = 0; dyy < 2; ++dyy)
          for (int dxx = 0; dxx < 2; ++dxx) {
            const int iy = 2 * oy + dyy, ix = 2 * ox + dxx;
            if (iy < in_shape.h && ix < in_shape.w) dx(c, iy, ix) += share;
          }
      }
}

// 3x3 stride-2 pad-1 max pooling (classifier stem). Tie-break: first hit in
// scan order, recorded for the backward scatter.
template <class S>
void maxpool3_forward(const Tensor3<S>& x, Tensor3<S>& y, std::vector<int>& argmax) {
  const int oh = (x.height() + 2 - 3) / 2 + 1, ow = (x.width() + 2 - 3) / 2 + 1;
  y.ensure_shape({x.channels(), oh, ow});
  argmax.assign(static_cast<std::size_t>(x.channels()) * oh * ow, -1);
  long o = 0;
  for (int c = 0; c < x.channels(); ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox, ++o) {
        S best = -std::numeric_limits<S>::infinity();
        int best_idx = -1;
        for (int dy = 0; dy < 3; ++dy)
          for (int dxx = 0; dxx < 3; ++dxx) {
            const int iy = 2 * oy - 1 + dy, ix = 2 * ox - 1 + dxx;
            if (iy < 0 || iy >= x.height() || ix < 0 || ix >= x.width()) continue;
            const S v = x(c, iy, ix);
            if (v > best) {
              best = v;
              best_idx = static_cast<int>((static_cast<long>(c) * x.height() + iy) * x.width() + ix);
            }
          }
        y.data()[o] = best;
        argmax[o] = best_idx;
      }
}

template <class S>
void maxpool3_backward(const Tensor3<S>& dy, const std::vector<int>& argmax, Shape3 in_shape,
                       Tensor3<S>& dx) {
  dx.ensure_shape(in_shape);
  dx.set_zero();
  for (long o = 0; o < dy.size(); ++o) dx.data()[argmax[o]] += dy.data()[o];
}

// ---- nearest-neighbor x2 upsampling ------------------------------------

// Doubles the spatial size, then crops bottom/right to the requested target
// (needed when the matching encoder level had an odd size).
template <class S>
void upsample2_forward(const Tensor3<S>& x, int target_h, int target_w, Tensor3<S>& y) {
  y.ensure_shape({x.channels(), target_h, target_w});
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < target_h; ++yy) {
      const S* src = x.data() + (static_cast<long>(c) * x.height() + yy / 2) * x.width();
      S* dst = y.data() + (static_cast<long>(c) * target_h + yy) * target_w;
      for (int xx = 0; xx < target_w; ++xx) dst[xx] = src[xx / 2];
    }
}

template <class S>
void upsample2_backward(const Tensor3<S>& dy, Shape3 in_shape, Tensor3<S>& dx) {
  dx.ensure_shape(in_shape);
  dx.set_zero();
  for (int c = 0; c < in_shape.c; ++c)
    for (int yy = 0; yy < dy.height(); ++yy) {
      const S* src = dy.data() + (static_cast<long>(c) * dy.height() + yy) * dy.width();
      S* dst = dx.data() + (static_cast<long>(c) * in_shape.h + yy / 2) * in_shape.w;
      for (int xx = 0; xx < dy.width(); ++xx) dst[xx / 2] += src[xx];
    }
}

// ---- fully connected ---------------------------------------------------

template <class S>
struct Linear {
  int in_dim = 0, out_dim = 0;
  Param<S> weight;  // out x in
  Param<S> bias;    // out x 1

  Linear() = default;
  Linear(int in, int out) : in_dim(in), out_dim(out) {
    weight.value = Mat<S>::Zero(out, in);
    bias.value = Mat<S>::Zero(out, 1);
  }

  void init(Rng& rng, double stddev = 0.02) {
    weight.init_normal(rng, stddev);
    bias.value.setZero();
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    f(prefix + ".w", weight);
    f(prefix + ".b", bias);
  }

  Vec<S> forward(const Vec<S>& x) const { return weight.value * x + bias.value.col(0); }

  void backward(const Vec<S>& x, const Vec<S>& dy, Vec<S>* dx, GradBuffer<S>* g) const {
    if (g) {
      g->of(weight).noalias() += dy * x.transpose();
      g->of(bias).col(0) += dy;
    }
    if (dx) dx->noalias() = weight.value.transpose() * dy;
  }
};

}  // namespace crossview::nn
