#pragma once

// 64-bit FNV-1a, used for split fingerprints and dictionary content hashes.

#include <cstdint>
#include <cstring>
#include <string_view>

#include <Eigen/Dense>

namespace srosr {

class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= kPrime;
    }
  }

  void u64(std::uint64_t v) {
    unsigned char le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(le, 8);
  }

  void f64(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }

  void text(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  /// Shape, then entries in row-major order.
  void matrix(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

}  // namespace srosr
