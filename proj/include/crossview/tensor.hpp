#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <utility>

#include "crossview/common.hpp"

namespace crossview {

// Dense channels-by-height-by-width activation / image container.
// Storage is channel-major with each channel a contiguous row-major grid,
// so channel(c) maps directly onto an Eigen matrix view.
template <class S>
class Tensor3 {
 public:
  using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;
  using ChannelMap = Eigen::Map<RowMat<S>>;
  using ConstChannelMap = Eigen::Map<const RowMat<S>>;
  using FlatMap = Eigen::Map<Vec<S>>;
  using ConstFlatMap = Eigen::Map<const Vec<S>>;

  Tensor3() = default;
  Tensor3(int c, int h, int w) : shape_{c, h, w}, data_(Storage::Zero(static_cast<long>(c) * h * w)) {}
  explicit Tensor3(Shape3 s) : Tensor3(s.c, s.h, s.w) {}

  static Tensor3 zeros(Shape3 s) { return Tensor3(s); }

  const Shape3& shape() const { return shape_; }
  int channels() const { return shape_.c; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  long size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  S& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  S operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  ChannelMap channel(int c) {
    return ChannelMap(data_.data() + static_cast<long>(c) * plane(), shape_.h, shape_.w);
  }
  ConstChannelMap channel(int c) const {
    return ConstChannelMap(data_.data() + static_cast<long>(c) * plane(), shape_.h, shape_.w);
  }

  FlatMap vec() { return FlatMap(data_.data(), data_.size()); }
  ConstFlatMap vec() const { return ConstFlatMap(data_.data(), data_.size()); }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  void set_zero() { data_.setZero(); }

  void resize(Shape3 s) {
    shape_ = s;
    data_ = Storage::Zero(s.size());
  }

  // Reallocate only when the shape changes; contents are unspecified.
  void ensure_shape(Shape3 s) {
    if (shape_ == s && data_.size() == s.size()) return;
    shape_ = s;
    data_.resize(s.size());
  }

  bool all_finite() const { return data_.isFinite().all(); }

  long plane() const { return static_cast<long>(shape_.h) * shape_.w; }

  template <class T>
  Tensor3<T> cast() const {
    Tensor3<T> out(shape_.c, shape_.h, shape_.w);
    out.array() = data_.template cast<T>();
    return out;
  }

 private:
  long index(int c, int y, int x) const {
    assert(c >= 0 && c < shape_.c && y >= 0 && y < shape_.h && x >= 0 && x < shape_.w);
    return (static_cast<long>(c) * shape_.h + y) * shape_.w + x;
  }

  Shape3 shape_{};
  Storage data_;
};

// Stack along the channel axis.
template <class S>
Tensor3<S> concat_channels(const Tensor3<S>& a, const Tensor3<S>& b) {
  assert(a.height() == b.height() && a.width() == b.width());
  Tensor3<S> out(a.channels() + b.channels(), a.height(), a.width());
  out.array().head(a.size()) = a.array();
  out.array().tail(b.size()) = b.array();
  return out;
}

template <class S>
void split_channels(const Tensor3<S>& joint, Tensor3<S>& a, Tensor3<S>& b) {
  assert(joint.size() == a.size() + b.size());
  a.array() = joint.array().head(a.size());
  b.array() = joint.array().tail(b.size());
}

template <class S>
Tensor3<S> flip_horizontal(const Tensor3<S>& t) {
  Tensor3<S> out(t.shape());
  for (int c = 0; c < t.channels(); ++c) out.channel(c) = t.channel(c).rowwise().reverse();
  return out;
}

}  // namespace crossview
