#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace levyql {

// Streaming raw-moment accumulator up to order four, with the derived
// central moments and cumulants used by the sampler oracles.
class MomentAccumulator {
 public:
  void add(double x) {
    ++count_;
    const double x2 = x * x;
    s1_ += x;
    s2_ += x2;
    s3_ += x2 * x;
    s4_ += x2 * x2;
  }

  std::size_t count() const { return count_; }
  double mean() const { return s1_ / count_; }

  double central(int order) const {
    const double n = static_cast<double>(count_);
    const double m1 = s1_ / n;
    const double m2 = s2_ / n;
    const double m3 = s3_ / n;
    const double m4 = s4_ / n;
    switch (order) {
      case 2:
        return m2 - m1 * m1;
      case 3:
        return m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
      case 4:
        return m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
      default:
        return 0.0;
    }
  }

  double variance() const { return central(2); }

  // kappa_1..kappa_4; kappa_4 = mu_4 - 3 mu_2^2.
  double cumulant(int order) const {
    switch (order) {
      case 1:
        return mean();
      case 2:
        return central(2);
      case 3:
        return central(3);
      case 4: {
        const double mu2 = central(2);
        return central(4) - 3.0 * mu2 * mu2;
      }
      default:
        return 0.0;
    }
  }

 private:
  std::size_t count_ = 0;
  double s1_ = 0.0, s2_ = 0.0, s3_ = 0.0, s4_ = 0.0;
};

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample standard deviation.
inline double sample_sd(const std::vector<double>& xs) {
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double sample_corr(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  const double mx = sample_mean(xs), my = sample_mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Covariance matrix of row-vector samples.
inline Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& xs) {
  const int p = static_cast<int>(xs.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
  return cov / static_cast<double>(xs.size() - 1);
}

}  // namespace levyql
