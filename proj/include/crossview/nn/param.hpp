#pragma once

#include <string>
#include <vector>

#include "crossview/common.hpp"
#include "crossview/rng.hpp"

namespace crossview::nn {

// A learnable array. Vectors are stored as n-by-1 matrices so every
// parameter lives in one container type. `id` is the slot assigned by the
// owning network's registry and indexes gradient/optimizer storage.
template <class S>
struct Param {
  Mat<S> value;
  int id = -1;

  void init_normal(Rng& rng, double stddev) {
    for (long j = 0; j < value.cols(); ++j)
      for (long i = 0; i < value.rows(); ++i) value(i, j) = static_cast<S>(rng.normal(0.0, stddev));
  }
  void init_constant(S c) { value.setConstant(c); }
};

// Flat, ordered view over a network's parameters. Order is the visitation
// order of the network, which is fixed by construction, so slot indices are
// stable across runs and checkpoints.
template <class S>
class ParamRegistry {
 public:
  void add(const std::string& name, Param<S>& p) {
    p.id = static_cast<int>(params_.size());
    params_.push_back(&p);
    names_.push_back(name);
  }

  int count() const { return static_cast<int>(params_.size()); }
  Param<S>& param(int id) { return *params_[id]; }
  const Param<S>& param(int id) const { return *params_[id]; }
  const std::string& name(int id) const { return names_[id]; }

  long total_size() const {
    long n = 0;
    for (auto* p : params_) n += p->value.size();
    return n;
  }

  // Order-stable content hash; used by the update-isolation checks.
  std::uint64_t value_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto* p : params_) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
      for (long i = 0; i < static_cast<long>(p->value.size() * sizeof(S)); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    }
    return h;
  }

 private:
  std::vector<Param<S>*> params_;
  std::vector<std::string> names_;
};

// Per-thread gradient accumulator, slot-parallel to a registry.
template <class S>
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamRegistry<S>& reg) {
    slots_.reserve(reg.count());
    for (int i = 0; i < reg.count(); ++i)
      slots_.push_back(Mat<S>::Zero(reg.param(i).value.rows(), reg.param(i).value.cols()));
  }

  Mat<S>& of(const Param<S>& p) { return slots_[p.id]; }
  const Mat<S>& of(const Param<S>& p) const { return slots_[p.id]; }
  Mat<S>& slot(int id) { return slots_[id]; }
  int count() const { return static_cast<int>(slots_.size()); }

  void set_zero() {
    for (auto& m : slots_) m.setZero();
  }

  void add(const GradBuffer& other) {
    for (std::size_t i = 0; i < slots_.size(); ++i) slots_[i] += other.slots_[i];
  }

  void scale(S s) {
    for (auto& m : slots_) m *= s;
  }

  S squared_norm() const {
    S n = 0;
    for (const auto& m : slots_) n += m.squaredNorm();
    return n;
  }

 private:
  std::vector<Mat<S>> slots_;
};

}  // namespace crossview::nn
