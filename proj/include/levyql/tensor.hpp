#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace levyql {

// Small dense symmetric-capable tensors for the mixed jump moments.  Sizes
// here are the jump-driver dimension, typically 1 or 2, so flat storage with
// index arithmetic is plenty.

class Tensor3 {
 public:
  Tensor3() : dim_(0) {}
  explicit Tensor3(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim, 0.0) {}

  int dim() const { return dim_; }
  double& operator()(int i, int j, int k) { return data_[idx(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[idx(i, j, k)]; }

  bool is_symmetric() const {
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        for (int k = 0; k < dim_; ++k) {
          const double v = (*this)(i, j, k);
          if (v != (*this)(i, k, j) || v != (*this)(j, i, k) ||
              v != (*this)(j, k, i) || v != (*this)(k, i, j) ||
              v != (*this)(k, j, i))
            return false;
        }
    return true;
  }

 private:
  std::size_t idx(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k;
  }
  int dim_;
  std::vector<double> data_;
};

class Tensor4 {
 public:
  Tensor4() : dim_(0) {}
  explicit Tensor4(int dim)
      : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0) {}

  int dim() const { return dim_; }
  double& operator()(int i, int j, int k, int l) { return data_[idx(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[idx(i, j, k, l)]; }

  bool is_symmetric() const {
    int p[4];
    for (p[0] = 0; p[0] < dim_; ++p[0])
      for (p[1] = 0; p[1] < dim_; ++p[1])
        for (p[2] = 0; p[2] < dim_; ++p[2])
          for (p[3] = 0; p[3] < dim_; ++p[3]) {
            const double v = (*this)(p[0], p[1], p[2], p[3]);
            int q[4] = {p[0], p[1], p[2], p[3]};
            std::sort(q, q + 4);
            do {
              if ((*this)(q[0], q[1], q[2], q[3]) != v) return false;
            } while (std::next_permutation(q, q + 4));
          }
    return true;
  }

 private:
  std::size_t idx(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l;
  }
  int dim_;
  std::vector<double> data_;
};

// Compensated (Kahan) accumulator; quasi-likelihood sums run over up to 1e6
// terms of mixed magnitude.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace levyql
