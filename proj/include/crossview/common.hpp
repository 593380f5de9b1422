#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crossview {

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error taxonomy mirrored by the CLI exit codes.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape3 {
  int c = 0, h = 0, w = 0;

  long size() const { return static_cast<long>(c) * h * w; }
  bool operator==(const Shape3&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << c << ", " << h << ", " << w << ")";
    return os.str();
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

// FNV-1a, used for config fingerprints in checkpoints and reports.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace crossview
