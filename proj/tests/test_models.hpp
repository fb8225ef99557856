// Ad-hoc models and data builders shared across the test suites.
#pragma once

#include <cmath>
#include <vector>

#include "levyql/levyql.hpp"

namespace testutil {

using levyql::MatrixXd;
using levyql::ModelSpec;
using levyql::Observations;
using levyql::ThetaPoint;
using levyql::VectorXd;

inline VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline ThetaPoint theta2(double alpha, double beta) {
  return ThetaPoint(vec({alpha}), vec({beta}));
}

// Linear mean reversion with pure-jump dispersion: a = -alpha x, c = sqrt(beta).
// V = beta, the simplest fully regular scalar model.
inline ModelSpec model_ou_jump(double beta_lower = 0.1) {
  ModelSpec m;
  m.id = "test-ou-jump";
  m.dim_x = 1;
  m.dim_w = 0;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 1;
  m.dispersion_state_free = true;
  m.drift_affine_in_alpha = true;
  m.drift = [](const VectorXd& x, const VectorXd& alpha) {
    VectorXd out(1);
    out[0] = -alpha[0] * x[0];
    return out;
  };
  m.drift_dalpha = [](const VectorXd& x, const VectorXd&) {
    MatrixXd out(1, 1);
    out(0, 0) = -x[0];
    return out;
  };
  m.jump_coef = [](const VectorXd&, const VectorXd& beta) {
    MatrixXd out(1, 1);
    out(0, 0) = std::sqrt(beta[0]);
    return out;
  };
  m.dbeta_V = [](const VectorXd&, const VectorXd&) {
    return std::vector<MatrixXd>{MatrixXd::Ones(1, 1)};
  };
  m.param_box.lower = vec({0.05, beta_lower});
  m.param_box.upper = vec({5.0, 5.0});
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

// Degenerate dynamics for simulator-only tests; V = 0 so the likelihood side
// must reject it.
inline ModelSpec model_zero_dynamics() {
  ModelSpec m;
  m.id = "test-zero";
  m.dim_x = 1;
  m.dim_w = 0;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 1;
  m.drift = [](const VectorXd&, const VectorXd&) { return VectorXd::Zero(1); };
  m.jump_coef = [](const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(1, 1);
  };
  m.param_box.lower = vec({-1.0, -1.0});
  m.param_box.upper = vec({1.0, 1.0});
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

// Pure drift a = -alpha x with no noise; used to generate noiseless Euler
// paths.
inline ModelSpec model_drift_only() {
  ModelSpec m = model_zero_dynamics();
  m.id = "test-drift-only";
  m.drift = [](const VectorXd& x, const VectorXd& alpha) {
    VectorXd out(1);
    out[0] = -alpha[0] * x[0];
    return out;
  };
  m.drift_dalpha = std::function<MatrixXd(const VectorXd&, const VectorXd&)>();
  m.param_box.lower = vec({0.05, -1.0});
  m.param_box.upper = vec({5.0, 1.0});
  m.drift_dalpha = [](const VectorXd& x, const VectorXd&) {
    MatrixXd out(1, 1);
    out(0, 0) = -x[0];
    return out;
  };
  return m;
}

// Two-dimensional diagonal diffusion, V = diag(beta1^2, beta2^2).
inline ModelSpec model_diag2() {
  ModelSpec m;
  m.id = "test-diag2";
  m.dim_x = 2;
  m.dim_w = 2;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 2;
  m.dispersion_state_free = true;
  m.drift_affine_in_alpha = true;
  m.drift = [](const VectorXd& x, const VectorXd& alpha) {
    return VectorXd(-alpha[0] * x);
  };
  m.drift_dalpha = [](const VectorXd& x, const VectorXd&) {
    MatrixXd out(2, 1);
    out.col(0) = -x;
    return out;
  };
  m.diff = [](const VectorXd&, const VectorXd& beta) {
    MatrixXd out = MatrixXd::Zero(2, 2);
    out(0, 0) = beta[0];
    out(1, 1) = beta[1];
    return out;
  };
  m.jump_coef = [](const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(2, 1);
  };
  m.param_box.lower = vec({0.05, 0.05, 0.05});
  m.param_box.upper = vec({5.0, 5.0, 5.0});
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

inline Observations make_obs(std::initializer_list<double> times,
                             std::initializer_list<double> states) {
  VectorXd t = vec(times);
  VectorXd x = vec(states);
  MatrixXd s(x.size(), 1);
  s.col(0) = x;
  return Observations::from_grid(t, s);
}

}  // namespace testutil
