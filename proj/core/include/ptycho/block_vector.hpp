#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ptycho {

using cplx = std::complex<double>;

/// Compensated (Kahan) accumulator. Long measurement sums feed exact
/// comparisons in the line search, so we keep their roundoff near one ulp.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

/// A stack of `blocks` complex square grids of side `side`, stored
/// contiguously block-major with row-major grids. This is the vector type
/// every objective and solver in the library operates on; an object stack
/// and a probe stack are both BlockVectors.
class BlockVector {
 public:
  BlockVector() = default;

  BlockVector(int blocks, int side)
      : blocks_(blocks), side_(side), data_(total_size(blocks, side), cplx(0.0, 0.0)) {}

  static BlockVector filled(int blocks, int side, cplx v) {
    BlockVector out(blocks, side);
    for (auto& e : out.data_) e = v;
    return out;
  }

  int blocks() const { return blocks_; }
  int side() const { return side_; }
  std::size_t grid_size() const { return static_cast<std::size_t>(side_) * side_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const BlockVector& o) const { return blocks_ == o.blocks_ && side_ == o.side_; }

  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }

  std::span<cplx> block(int l) { return {data_.data() + grid_size() * l, grid_size()}; }
  std::span<const cplx> block(int l) const { return {data_.data() + grid_size() * l, grid_size()}; }

  cplx& at(int l, int row, int col) { return data_[grid_size() * l + static_cast<std::size_t>(row) * side_ + col]; }
  const cplx& at(int l, int row, int col) const {
    return data_[grid_size() * l + static_cast<std::size_t>(row) * side_ + col];
  }

  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  void fill(cplx v) {
    for (auto& e : data_) e = v;
  }

  BlockVector& operator+=(const BlockVector& o) {
    require_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  BlockVector& operator-=(const BlockVector& o) {
    require_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  BlockVector& operator*=(cplx s) {
    for (auto& e : data_) e *= s;
    return *this;
  }
  BlockVector& operator*=(double s) {
    for (auto& e : data_) e *= s;
    return *this;
  }

  /// this += a * o
  void axpy(cplx a, const BlockVector& o) {
    require_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
  }

  double norm_sq() const {
    KahanSum acc;
    for (const auto& e : data_) acc.add(std::norm(e));
    return acc.value();
  }
  double norm() const { return std::sqrt(norm_sq()); }

  bool all_finite() const {
    for (const auto& e : data_) {
      if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) return false;
    }
    return true;
  }

  friend BlockVector operator+(BlockVector a, const BlockVector& b) { return a += b; }
  friend BlockVector operator-(BlockVector a, const BlockVector& b) { return a -= b; }
  friend BlockVector operator*(cplx s, BlockVector a) { return a *= s; }
  friend BlockVector operator*(double s, BlockVector a) { return a *= s; }

 private:
  static std::size_t total_size(int blocks, int side) {
    if (blocks < 1 || side < 1) throw std::invalid_argument("BlockVector: blocks and side must be >= 1");
    return static_cast<std::size_t>(blocks) * side * side;
  }
  void require_shape(const BlockVector& o) const {
    if (!same_shape(o)) throw std::invalid_argument("BlockVector: shape mismatch");
  }

  int blocks_ = 0;
  int side_ = 0;
  std::vector<cplx> data_;
};

/// Inner product with conjugation on the first argument: sum conj(a_i) b_i.
inline cplx dot(const BlockVector& a, const BlockVector& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
  KahanSum re, im;
  const cplx* pa = a.data();
  const cplx* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cplx t = std::conj(pa[i]) * pb[i];
    re.add(t.real());
    im.add(t.imag());
  }
  return {re.value(), im.value()};
}

inline std::size_t grid_index(int row, int col, int side) {
  return static_cast<std::size_t>(row) * side + col;
}

}  // namespace ptycho
