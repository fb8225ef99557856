#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "levyql/errors.hpp"
#include "levyql/model.hpp"
#include "levyql/simulate.hpp"
#include "levyql/tensor.hpp"

namespace levyql {

// Quasi-score pair: the drift block and the step-weighted dispersion block.
struct ScoreValue {
  VectorXd g_alpha;
  VectorXd g_beta;

  VectorXd stacked() const {
    VectorXd out(g_alpha.size() + g_beta.size());
    out << g_alpha, g_beta;
    return out;
  }
  double squared_norm() const {
    return g_alpha.squaredNorm() + g_beta.squaredNorm();
  }
};

// Contrast m = -|G|^2 / T_n together with the score and the quasi
// log-likelihood value it came from.
struct ContrastValue {
  double m = 0.0;
  ScoreValue score;
  double q = 0.0;
};

// Per-state dispersion quantities shared by the likelihood, score, and
// covariance loops.  For models with state-free dispersion this is computed
// once per parameter value and reused along the whole path.
struct DispersionCache {
  MatrixXd v;
  MatrixXd v_inv;
  double logdet = 0.0;
  std::vector<MatrixXd> dv;  // p_beta entries of d x d
  VectorXd tr_vinv_dv;       // p_beta, trace(V^{-1} dV_i)
};

inline DispersionCache make_dispersion_cache(const ModelSpec& model,
                                             const VectorXd& x,
                                             const VectorXd& beta) {
  DispersionCache c;
  c.v = eval_V(model, x, beta);
  auto inv_logdet = eval_V_inverse_and_logdet(model, x, beta);
  c.v_inv = std::move(inv_logdet.first);
  c.logdet = inv_logdet.second;
  c.dv = model.dbeta_V(x, beta);
  c.tr_vinv_dv.resize(model.dim_beta);
  for (int i = 0; i < model.dim_beta; ++i)
    c.tr_vinv_dv[i] = (c.v_inv * c.dv[i]).trace();
  return c;
}

// Euler residual chi_j(alpha) = X_{t_j} - X_{t_{j-1}} - dt_j a(X_{t_{j-1}}, alpha),
// j = 1..n.
inline VectorXd residual_chi(const Observations& obs, const ModelSpec& model,
                             int j, const VectorXd& alpha) {
  if (j < 1 || j > obs.n()) throw ConfigError("residual_chi: index out of range");
  const VectorXd x_prev = obs.states.row(j - 1).transpose();
  return (obs.states.row(j) - obs.states.row(j - 1)).transpose() -
         obs.dt[j - 1] * model.drift(x_prev, alpha);
}

namespace detail {

// One O(n) sweep producing the quasi log-likelihood and, optionally, the
// quasi-score.  Irregular grids use the per-increment step dt_j inside the
// sums; the max step only enters through the T_n normalization elsewhere.
struct GqlSweep {
  double q = 0.0;
  ScoreValue score;
};

inline GqlSweep eval_gql(const Observations& obs, const ModelSpec& model,
                         const ThetaPoint& theta, bool with_score) {
  if (theta.alpha.size() != model.dim_alpha ||
      theta.beta.size() != model.dim_beta)
    throw ConfigError("eval_gql: theta dimensions do not match model");
  if (obs.dim() != model.dim_x)
    throw ConfigError("eval_gql: observation dimension does not match model");

  const int n = obs.n();
  const int pa = model.dim_alpha;
  const int pb = model.dim_beta;

  KahanSum q_acc;
  std::vector<KahanSum> ga(pa), gb(pb);

  std::optional<DispersionCache> hoisted;
  if (model.dispersion_state_free)
    hoisted = make_dispersion_cache(model, obs.states.row(0).transpose(),
                                    theta.beta);

  VectorXd x_prev(obs.dim()), chi(obs.dim()), w(obs.dim());
  for (int j = 1; j <= n; ++j) {
    x_prev = obs.states.row(j - 1).transpose();
    const double dt = obs.dt[j - 1];
    const DispersionCache local =
        hoisted ? DispersionCache{} : make_dispersion_cache(model, x_prev, theta.beta);
    const DispersionCache& disp = hoisted ? *hoisted : local;

    chi = (obs.states.row(j) - obs.states.row(j - 1)).transpose() -
          dt * model.drift(x_prev, theta.alpha);
    w.noalias() = disp.v_inv * chi;
    q_acc.add(-(disp.logdet + chi.dot(w) / dt));

    if (with_score) {
      const MatrixXd da = model.drift_dalpha(x_prev, theta.alpha);
      for (int i = 0; i < pa; ++i) ga[i].add(da.col(i).dot(w));
      for (int i = 0; i < pb; ++i)
        gb[i].add(w.dot(disp.dv[i] * w) - dt * disp.tr_vinv_dv[i]);
    }
  }

  GqlSweep out;
  out.q = q_acc.value();
  if (with_score) {
    out.score.g_alpha.resize(pa);
    out.score.g_beta.resize(pb);
    for (int i = 0; i < pa; ++i) out.score.g_alpha[i] = ga[i].value();
    for (int i = 0; i < pb; ++i) out.score.g_beta[i] = gb[i].value();
  }
  return out;
}

// Repeated-evaluation workspace for one dataset.  Precomputes the state
// increments and, for affine-in-alpha drifts, the per-state drift basis, so
// the optimizer's inner loop runs without any callable indirection.  Results
// agree with the free functions up to floating-point association order.
class EvalWorkspace {
 public:
  EvalWorkspace(const Observations& obs, const ModelSpec& model)
      : obs_(obs), model_(model) {
    const int n = obs.n();
    const int d = model.dim_x;
    dx_.resize(n, d);
    for (int j = 1; j <= n; ++j)
      dx_.row(j - 1) = obs.states.row(j) - obs.states.row(j - 1);
    if (model.drift_affine_in_alpha) {
      const int pa = model.dim_alpha;
      drift_base_.resize(n, d);
      drift_jac_.resize(n, d * pa);
      const VectorXd alpha0 = VectorXd::Zero(pa);
      VectorXd x(d);
      for (int j = 1; j <= n; ++j) {
        x = obs.states.row(j - 1).transpose();
        drift_base_.row(j - 1) = model.drift(x, alpha0).transpose();
        const MatrixXd jac = model.drift_dalpha(x, alpha0);
        for (int c = 0; c < pa; ++c)
          for (int r = 0; r < d; ++r) drift_jac_(j - 1, c * d + r) = jac(r, c);
      }
    }
  }

  GqlSweep eval(const ThetaPoint& theta, bool with_score) const {
    if (!model_.drift_affine_in_alpha)
      return eval_gql(obs_, model_, theta, with_score);

    const int n = obs_.n();
    const int d = model_.dim_x;
    const int pa = model_.dim_alpha;
    const int pb = model_.dim_beta;

    KahanSum q_acc;
    std::vector<KahanSum> ga(pa), gb(pb);

    std::optional<DispersionCache> hoisted;
    if (model_.dispersion_state_free)
      hoisted = make_dispersion_cache(model_, obs_.states.row(0).transpose(),
                                      theta.beta);

    VectorXd a(d), chi(d), w(d);
    for (int j = 0; j < n; ++j) {
      const double dt = obs_.dt[j];
      const DispersionCache local =
          hoisted ? DispersionCache{}
                  : make_dispersion_cache(
                        model_, obs_.states.row(j).transpose(), theta.beta);
      const DispersionCache& disp = hoisted ? *hoisted : local;

      for (int r = 0; r < d; ++r) a[r] = drift_base_(j, r);
      for (int c = 0; c < pa; ++c)
        for (int r = 0; r < d; ++r) a[r] += drift_jac_(j, c * d + r) * theta.alpha[c];
      chi = dx_.row(j).transpose() - dt * a;
      w.noalias() = disp.v_inv * chi;
      q_acc.add(-(disp.logdet + chi.dot(w) / dt));

      if (with_score) {
        for (int c = 0; c < pa; ++c) {
          double dot = 0.0;
          for (int r = 0; r < d; ++r) dot += drift_jac_(j, c * d + r) * w[r];
          ga[c].add(dot);
        }
        for (int i = 0; i < pb; ++i)
          gb[i].add(w.dot(disp.dv[i] * w) - dt * disp.tr_vinv_dv[i]);
      }
    }

    GqlSweep out;
    out.q = q_acc.value();
    if (with_score) {
      out.score.g_alpha.resize(pa);
      out.score.g_beta.resize(pb);
      for (int i = 0; i < pa; ++i) out.score.g_alpha[i] = ga[i].value();
      for (int i = 0; i < pb; ++i) out.score.g_beta[i] = gb[i].value();
    }
    return out;
  }

  ContrastValue contrast(const ThetaPoint& theta) const {
    GqlSweep sweep = eval(theta, true);
    ContrastValue out;
    out.q = sweep.q;
    out.score = std::move(sweep.score);
    out.m = -out.score.squared_norm() / obs_.horizon;
    return out;
  }

  MatrixXd score_jacobian(const ThetaPoint& theta) const {
    const int pa = model_.dim_alpha;
    const int p = model_.dim_theta();
    const VectorXd base = theta.stacked();
    MatrixXd jac(p, p);
    for (int k = 0; k < p; ++k) {
      const double eps = 1e-6 * (1.0 + std::abs(base[k]));
      VectorXd hi = base, lo = base;
      hi[k] += eps;
      lo[k] -= eps;
      const VectorXd g_hi =
          eval(ThetaPoint::from_stacked(hi, pa), true).score.stacked();
      const VectorXd g_lo =
          eval(ThetaPoint::from_stacked(lo, pa), true).score.stacked();
      jac.col(k) = (g_hi - g_lo) / (2.0 * eps);
    }
    return jac;
  }

 private:
  const Observations& obs_;
  const ModelSpec& model_;
  MatrixXd dx_;          // n x d state increments
  MatrixXd drift_base_;  // n x d, drift at alpha = 0
  MatrixXd drift_jac_;   // n x (d * pa), Jacobian flattened per row
};

}  // namespace detail

// Gaussian quasi log-likelihood
//   Q_n(theta) = -sum_j { log|V_{j-1}(beta)| + dt_j^{-1} V_{j-1}^{-1}(beta)[chi_j(alpha)^2] }.
inline double quasi_loglik(const Observations& obs, const ModelSpec& model,
                           const ThetaPoint& theta) {
  return detail::eval_gql(obs, model, theta, false).q;
}

// Quasi-score
//   G^alpha = sum_j da_{j-1}^T V_{j-1}^{-1} chi_j
//   G^beta  = sum_j { chi_j^T V^{-1}(dV_i)V^{-1} chi_j - dt_j tr(V^{-1} dV_i) }.
// On equidistant grids this equals ((1/2) d_alpha Q_n, h_n d_beta Q_n).
inline ScoreValue quasi_score(const Observations& obs, const ModelSpec& model,
                              const ThetaPoint& theta) {
  return detail::eval_gql(obs, model, theta, true).score;
}

// Squared-quasi-score contrast M_n = -|G_n|^2 / T_n, maximized by the
// estimator; zero exactly at a root of the score.
inline ContrastValue contrast(const Observations& obs, const ModelSpec& model,
                              const ThetaPoint& theta) {
  detail::GqlSweep sweep = detail::eval_gql(obs, model, theta, true);
  ContrastValue out;
  out.q = sweep.q;
  out.score = std::move(sweep.score);
  out.m = -out.score.squared_norm() / obs.horizon;
  return out;
}

// Normalized contrast exponential Z_n(u) = exp{M_n(theta0 + u/sqrt(T_n)) - M_n(theta0)}.
// The shifted point must stay inside the parameter box.  Passing the cached
// M_n(theta0) skips its re-evaluation.
inline double random_field_Z(const Observations& obs, const ModelSpec& model,
                             const ThetaPoint& theta0, const VectorXd& u,
                             std::optional<double> m_at_theta0 = std::nullopt) {
  const double root_t = std::sqrt(obs.horizon);
  const VectorXd shifted = theta0.stacked() + u / root_t;
  if (!model.param_box.contains(shifted))
    throw DomainExceededError("random_field_Z: shifted point left the box");
  const double m0 =
      m_at_theta0 ? *m_at_theta0 : contrast(obs, model, theta0).m;
  const double m_shift = contrast(
      obs, model, ThetaPoint::from_stacked(shifted, model.dim_alpha)).m;
  return std::exp(m_shift - m0);
}

// d(theta) G_n(theta) by central differences of the quasi-score, step
// 1e-6 (1 + |theta_k|) per coordinate.  Used by Newton refinement and by the
// slope-limit checks.
inline MatrixXd score_jacobian(const Observations& obs, const ModelSpec& model,
                               const ThetaPoint& theta) {
  const int p = model.dim_theta();
  const VectorXd base = theta.stacked();
  MatrixXd jac(p, p);
  for (int k = 0; k < p; ++k) {
    const double eps = 1e-6 * (1.0 + std::abs(base[k]));
    VectorXd hi = base, lo = base;
    hi[k] += eps;
    lo[k] -= eps;
    const VectorXd g_hi =
        quasi_score(obs, model, ThetaPoint::from_stacked(hi, model.dim_alpha))
            .stacked();
    const VectorXd g_lo =
        quasi_score(obs, model, ThetaPoint::from_stacked(lo, model.dim_alpha))
            .stacked();
    jac.col(k) = (g_hi - g_lo) / (2.0 * eps);
  }
  return jac;
}

}  // namespace levyql
