#pragma once

#include <cmath>
#include <vector>

#include "crossview/nn/param.hpp"

namespace crossview::nn {

template <class S>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamRegistry<S>& reg, S lr, S beta1, S beta2, S eps = S(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(reg.count());
    v_.reserve(reg.count());
    for (int i = 0; i < reg.count(); ++i) {
      m_.push_back(Mat<S>::Zero(reg.param(i).value.rows(), reg.param(i).value.cols()));
      v_.push_back(Mat<S>::Zero(reg.param(i).value.rows(), reg.param(i).value.cols()));
    }
  }

  void step(ParamRegistry<S>& reg, const GradBuffer<S>& grads) {
    ++t_;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1_), static_cast<double>(t_)));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2_), static_cast<double>(t_)));
    for (int i = 0; i < reg.count(); ++i) {
      const Mat<S>& g = grads.of(reg.param(i));
      m_[i] = beta1_ * m_[i] + (S(1) - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (S(1) - beta2_) * g.cwiseProduct(g);
      reg.param(i).value.array() -=
          lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  int slot_count() const { return static_cast<int>(m_.size()); }
  Mat<S>& moment1(int i) { return m_[i]; }
  Mat<S>& moment2(int i) { return v_[i]; }

 private:
  S lr_ = S(1e-4), beta1_ = S(0.5), beta2_ = S(0.999), eps_ = S(1e-8);
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

}  // namespace crossview::nn
