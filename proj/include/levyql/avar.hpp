#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "levyql/errors.hpp"
#include "levyql/gql.hpp"
#include "levyql/model.hpp"
#include "levyql/simulate.hpp"

namespace levyql {

// Plug-in asymptotic covariance pieces evaluated at theta_hat.  Uses only the
// observed increments; no knowledge of the jump measure is required.
struct SigmaHat {
  MatrixXd g_prime_alpha_hat;  // p_alpha x p_alpha, negative semidefinite
  MatrixXd g_prime_beta_hat;   // p_beta x p_beta, negative semidefinite
  MatrixXd v_alpha_beta_hat;   // p_alpha x p_beta
  MatrixXd v_beta_beta_hat;    // p_beta x p_beta
  MatrixXd sigma_hat;          // p x p assembled covariance, exactly symmetric
};

namespace detail {

inline void require_negative_semidefinite(const MatrixXd& m, const char* name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    throw SingularInformationError(std::string(name) +
                                   " lost negative semidefiniteness");
}

// Inverse through an eigendecomposition with a condition-number guard.
inline MatrixXd guarded_inverse(const MatrixXd& m, const char* name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  const VectorXd ev = es.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev.cwiseAbs().minCoeff();
  if (!(largest > 0.0) || smallest * 1e12 < largest)
    throw SingularInformationError(std::string(name) +
                                   " is numerically singular");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

// Symmetric inverse square root with an eigenvalue floor at 1e-12 times the
// largest eigenvalue.
inline MatrixXd inverse_sqrt(const MatrixXd& m, const char* name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  VectorXd ev = es.eigenvalues();
  const double largest = ev.maxCoeff();
  if (!(largest > 0.0))
    throw SingularInformationError(std::string(name) + " is not positive");
  const double floor = 1e-12 * largest;
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace detail

// Sandwich covariance estimator: curvature blocks averaged per observation,
// noise blocks as the T_n^{-1}-weighted empirical second moments of the
// per-increment score summands in chi_j(alpha_hat).  Keeping the dt tr(V^{-1}
// dV) compensator inside the dispersion summand removes a first-order
// step-size bias: the raw (chi'dV^{-1}chi)^2 sum picks up the local-Gaussian
// fourth-moment chaos, which at step h inflates the dispersion block by
// roughly 2h relative to the jump-moment term and breaks Studentized
// coverage whenever the driver is close to Gaussian.
inline SigmaHat estimate_sigma(const Observations& obs, const ModelSpec& model,
                               const ThetaPoint& theta_hat) {
  const int n = obs.n();
  const int pa = model.dim_alpha;
  const int pb = model.dim_beta;

  MatrixXd ga = MatrixXd::Zero(pa, pa);
  MatrixXd gb = MatrixXd::Zero(pb, pb);
  MatrixXd vab = MatrixXd::Zero(pa, pb);
  MatrixXd vbb = MatrixXd::Zero(pb, pb);

  std::optional<DispersionCache> hoisted;
  if (model.dispersion_state_free)
    hoisted = make_dispersion_cache(model, obs.states.row(0).transpose(),
                                    theta_hat.beta);
  std::optional<MatrixXd> hoisted_tr;  // trace(A_i A_k) for state-free models
  if (hoisted) {
    MatrixXd tr(pb, pb);
    std::vector<MatrixXd> a(pb);
    for (int i = 0; i < pb; ++i) a[i] = hoisted->v_inv * hoisted->dv[i];
    for (int i = 0; i < pb; ++i)
      for (int k = 0; k < pb; ++k) tr(i, k) = (a[i] * a[k]).trace();
    hoisted_tr = std::move(tr);
  }

  VectorXd x_prev(obs.dim()), chi(obs.dim()), w(obs.dim());
  VectorXd u(pb), ga_term(pa);
  for (int j = 1; j <= n; ++j) {
    x_prev = obs.states.row(j - 1).transpose();
    const double dt = obs.dt[j - 1];
    const DispersionCache local =
        hoisted ? DispersionCache{}
                : make_dispersion_cache(model, x_prev, theta_hat.beta);
    const DispersionCache& disp = hoisted ? *hoisted : local;

    chi = (obs.states.row(j) - obs.states.row(j - 1)).transpose() -
          dt * model.drift(x_prev, theta_hat.alpha);
    w.noalias() = disp.v_inv * chi;

    const MatrixXd da = model.drift_dalpha(x_prev, theta_hat.alpha);
    ga.noalias() -= da.transpose() * disp.v_inv * da;

    if (hoisted_tr) {
      gb -= *hoisted_tr;
    } else {
      std::vector<MatrixXd> a(pb);
      for (int i = 0; i < pb; ++i) a[i] = disp.v_inv * disp.dv[i];
      for (int i = 0; i < pb; ++i)
        for (int k = 0; k < pb; ++k) gb(i, k) -= (a[i] * a[k]).trace();
    }

    // dispersion score summand: chi^T V^{-1}(dV_i)V^{-1} chi - dt tr(V^{-1} dV_i)
    for (int i = 0; i < pb; ++i)
      u[i] = w.dot(disp.dv[i] * w) - dt * disp.tr_vinv_dv[i];
    ga_term.noalias() = da.transpose() * w;
    vab.noalias() += ga_term * u.transpose();
    vbb.noalias() += u * u.transpose();
  }

  SigmaHat out;
  out.g_prime_alpha_hat = ga / static_cast<double>(n);
  out.g_prime_beta_hat = gb / static_cast<double>(n);
  out.v_alpha_beta_hat = vab / obs.horizon;
  out.v_beta_beta_hat = vbb / obs.horizon;

  detail::require_negative_semidefinite(out.g_prime_alpha_hat,
                                        "drift information block");
  detail::require_negative_semidefinite(out.g_prime_beta_hat,
                                        "dispersion information block");

  const MatrixXd ga_inv =
      detail::guarded_inverse(out.g_prime_alpha_hat, "drift information block");
  const MatrixXd gb_inv = detail::guarded_inverse(out.g_prime_beta_hat,
                                                  "dispersion information block");

  const int pt = pa + pb;
  MatrixXd sigma(pt, pt);
  sigma.topLeftCorner(pa, pa) = -ga_inv;
  const MatrixXd off = ga_inv * out.v_alpha_beta_hat * gb_inv;
  sigma.topRightCorner(pa, pb) = off;
  sigma.bottomLeftCorner(pb, pa) = off.transpose();
  sigma.bottomRightCorner(pb, pb) = gb_inv * out.v_beta_beta_hat * gb_inv;
  out.sigma_hat = 0.5 * (sigma + sigma.transpose());
  return out;
}

// Studentized deviation Sigma_hat^{-1/2} sqrt(T_n) (theta_hat - theta_ref).
inline VectorXd studentize(const Observations& obs, const ThetaPoint& theta_hat,
                           const SigmaHat& sigma, const ThetaPoint& theta_ref) {
  const VectorXd dev =
      std::sqrt(obs.horizon) * (theta_hat.stacked() - theta_ref.stacked());
  return detail::inverse_sqrt(sigma.sigma_hat, "sigma_hat") * dev;
}

struct ConfidenceInterval {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Inverse standard normal CDF, Acklam's rational approximation (relative
// error below 1.2e-9, ample for interval endpoints).
inline double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw ConfigError("normal_quantile: probability must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double q, r;
  if (prob < p_low) {
    q = std::sqrt(-2.0 * std::log(prob));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (prob <= 1.0 - p_low) {
    q = prob - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - prob));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Per-coordinate normal intervals theta_i +- z_{(1+level)/2} sqrt(Sigma_ii / T_n).
inline std::vector<ConfidenceInterval> confidence_intervals(
    const ThetaPoint& theta_hat, const SigmaHat& sigma, double horizon,
    double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("confidence_intervals: level must be in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const VectorXd theta = theta_hat.stacked();
  std::vector<ConfidenceInterval> out(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    const double se = std::sqrt(std::max(0.0, sigma.sigma_hat(i, i)) / horizon);
    out[i] = {theta[i], se, theta[i] - z * se, theta[i] + z * se};
  }
  return out;
}

}  // namespace levyql
