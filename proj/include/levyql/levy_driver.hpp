#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "levyql/errors.hpp"
#include "levyql/random.hpp"
#include "levyql/tensor.hpp"

namespace levyql {

// Third and fourth mixed moments of the driving jump measure, normalized to
// the unit-covariance driver.  Fully symmetric under index permutation.
struct NuMoments {
  Tensor3 nu3;
  Tensor4 nu4;
};

// Centered, identity-covariance Levy increment source.
//
// Kinds:
//   Wiener           - standard Brownian motion in the jump slot.
//   NIG(delta)       - symmetric normal inverse Gaussian, sampled by
//                      inverse-Gaussian subordination: J_h = sqrt(S) Z with
//                      S ~ IG(mean h, shape (delta h)^2).  Unit variance per
//                      unit time, nu3 = 0, nu4 = 3 / delta^2.
//   CompoundPoisson  - rate lambda, jump law drawn from a named family and
//                      rescaled so the increment variance is h; the
//                      compensator lambda h E[z] is subtracted so the
//                      increment is centered even for asymmetric laws.
//
// Drivers are immutable after construction and safe to share across threads;
// sampling state lives entirely in the caller's RandomStream.
class LevyDriver {
 public:
  enum class Kind { Wiener, CompoundPoisson, NIG };

  // Closed-form moments (m1..m4) of a named compound-Poisson jump law.
  struct JumpLaw {
    std::string name;
    double m1 = 0.0, m2 = 1.0, m3 = 0.0, m4 = 1.0;
    std::function<double(RandomStream&)> draw;
    bool moments_known = true;
  };

  static LevyDriver wiener(int dim = 1) {
    LevyDriver d;
    d.kind_ = Kind::Wiener;
    d.dim_ = dim;
    return d;
  }

  static LevyDriver nig(double delta) {
    if (!(delta > 0.0)) throw ConfigError("nig: delta must be > 0");
    LevyDriver d;
    d.kind_ = Kind::NIG;
    d.dim_ = 1;
    d.delta_ = delta;
    return d;
  }

  static LevyDriver compound_poisson(double lambda, const std::string& jump) {
    if (!(lambda > 0.0)) throw ConfigError("cp: lambda must be > 0");
    LevyDriver d;
    d.kind_ = Kind::CompoundPoisson;
    d.dim_ = 1;
    d.lambda_ = lambda;
    d.law_ = named_jump_law(jump);
    // Rescale jumps so lambda E[(s z)^2] = 1.
    d.jump_scale_ = 1.0 / std::sqrt(lambda * d.law_.m2);
    return d;
  }

  // Compound Poisson with a user sampler and no closed-form moments;
  // nu_moments() throws MomentsUnavailableError for such drivers.  The
  // sampler is trusted to produce unit-variance centered jumps under the
  // supplied lambda.
  static LevyDriver compound_poisson_custom(
      double lambda, std::function<double(RandomStream&)> draw) {
    if (!(lambda > 0.0)) throw ConfigError("cp: lambda must be > 0");
    LevyDriver d;
    d.kind_ = Kind::CompoundPoisson;
    d.dim_ = 1;
    d.lambda_ = lambda;
    d.law_.name = "custom";
    d.law_.draw = std::move(draw);
    d.law_.moments_known = false;
    d.jump_scale_ = 1.0;
    return d;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double delta() const { return delta_; }
  double lambda() const { return lambda_; }

  std::string describe() const {
    switch (kind_) {
      case Kind::Wiener:
        return "wiener";
      case Kind::NIG:
        return "nig(" + std::to_string(delta_) + ")";
      case Kind::CompoundPoisson:
        return "cp(" + std::to_string(lambda_) + "," + law_.name + ")";
    }
    return "?";
  }

  // One increment J_h.  Centered with covariance h * I by construction.
  Eigen::VectorXd sample_increment(double h, RandomStream& rng) const {
    if (!(h > 0.0)) throw InvalidDurationError("sample_increment: h must be > 0");
    Eigen::VectorXd out(dim_);
    switch (kind_) {
      case Kind::Wiener: {
        const double s = std::sqrt(h);
        for (int i = 0; i < dim_; ++i) out[i] = s * rng.normal();
        return out;
      }
      case Kind::NIG: {
        const double subordinator =
            rng.inverse_gaussian(h, (delta_ * h) * (delta_ * h));
        out[0] = std::sqrt(subordinator) * rng.normal();
        return out;
      }
      case Kind::CompoundPoisson: {
        const std::uint64_t n_jumps = rng.poisson(lambda_ * h);
        double sum = 0.0;
        for (std::uint64_t i = 0; i < n_jumps; ++i)
          sum += jump_scale_ * law_.draw(rng);
        sum -= lambda_ * h * jump_scale_ * law_.m1;  // compensator
        out[0] = sum;
        return out;
      }
    }
    throw Error("sample_increment: unreachable");
  }

  // Exact nu(3), nu(4) tensors of the normalized driver.
  NuMoments nu_moments() const {
    NuMoments nu;
    nu.nu3 = Tensor3(dim_);
    nu.nu4 = Tensor4(dim_);
    switch (kind_) {
      case Kind::Wiener:
        return nu;  // no jump measure
      case Kind::NIG:
        nu.nu4(0, 0, 0, 0) = 3.0 / (delta_ * delta_);
        return nu;
      case Kind::CompoundPoisson: {
        if (!law_.moments_known)
          throw MomentsUnavailableError(
              "compound-Poisson jump law has no closed-form moments");
        const double s = jump_scale_;
        nu.nu3(0, 0, 0) = lambda_ * s * s * s * law_.m3;
        nu.nu4(0, 0, 0, 0) = lambda_ * s * s * s * s * law_.m4;
        return nu;
      }
    }
    throw Error("nu_moments: unreachable");
  }

 private:
  static JumpLaw named_jump_law(const std::string& name) {
    JumpLaw law;
    law.name = name;
    if (name == "rademacher") {
      law.m1 = 0.0;
      law.m2 = 1.0;
      law.m3 = 0.0;
      law.m4 = 1.0;
      law.draw = [](RandomStream& rng) {
        return rng.uniform() < 0.5 ? -1.0 : 1.0;
      };
    } else if (name == "normal") {
      law.m1 = 0.0;
      law.m2 = 1.0;
      law.m3 = 0.0;
      law.m4 = 3.0;
      law.draw = [](RandomStream& rng) { return rng.normal(); };
    } else {
      throw ConfigError("unknown compound-Poisson jump law: " + name);
    }
    return law;
  }

  Kind kind_ = Kind::Wiener;
  int dim_ = 1;
  double delta_ = 0.0;      // NIG
  double lambda_ = 0.0;     // compound Poisson
  double jump_scale_ = 1.0; // unit-covariance normalization
  JumpLaw law_;
};

}  // namespace levyql
