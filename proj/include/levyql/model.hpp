#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "levyql/errors.hpp"

namespace levyql {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Bounded hyper-rectangle parameter domain, split into the drift block
// (first p_alpha coordinates) and the dispersion block.
struct ParamBox {
  VectorXd lower;
  VectorXd upper;
  int p_alpha = 0;

  int dim() const { return static_cast<int>(lower.size()); }
  int p_beta() const { return dim() - p_alpha; }

  void validate() const {
    if (lower.size() != upper.size() || p_alpha <= 0 || p_alpha >= dim())
      throw ConfigError("ParamBox: inconsistent dimensions");
    for (int i = 0; i < dim(); ++i)
      if (!(lower[i] < upper[i]))
        throw ConfigError("ParamBox: lower must be strictly below upper");
  }

  bool contains(const VectorXd& theta) const {
    for (int i = 0; i < dim(); ++i)
      if (theta[i] < lower[i] || theta[i] > upper[i]) return false;
    return true;
  }

  VectorXd clamp(const VectorXd& theta) const {
    return theta.cwiseMax(lower).cwiseMin(upper);
  }

  VectorXd alpha_lower() const { return lower.head(p_alpha); }
  VectorXd alpha_upper() const { return upper.head(p_alpha); }
  VectorXd beta_lower() const { return lower.tail(p_beta()); }
  VectorXd beta_upper() const { return upper.tail(p_beta()); }
};

// A parameter value split into the drift block alpha and dispersion block
// beta.
struct ThetaPoint {
  VectorXd alpha;
  VectorXd beta;

  ThetaPoint() = default;
  ThetaPoint(VectorXd a, VectorXd b) : alpha(std::move(a)), beta(std::move(b)) {}

  static ThetaPoint from_stacked(const VectorXd& theta, int p_alpha) {
    return ThetaPoint(theta.head(p_alpha), theta.tail(theta.size() - p_alpha));
  }

  VectorXd stacked() const {
    VectorXd out(alpha.size() + beta.size());
    out << alpha, beta;
    return out;
  }
};

// Parametric SDE  dX = a(X, alpha) dt + b(X, beta) dW + c(X-, beta) dJ.
//
// Coefficients are user callables.  Parameter derivatives may be supplied
// analytically; missing ones are replaced by central differences with step
// 1e-6 * (1 + |theta_i|) and the substitution is flagged on the ModelSpec.
struct ModelSpec {
  using DriftFn = std::function<VectorXd(const VectorXd&, const VectorXd&)>;
  using DriftJacFn = std::function<MatrixXd(const VectorXd&, const VectorXd&)>;
  using CoefFn = std::function<MatrixXd(const VectorXd&, const VectorXd&)>;
  using DbetaVFn =
      std::function<std::vector<MatrixXd>(const VectorXd&, const VectorXd&)>;

  std::string id;  // empty for anonymous user models
  int dim_x = 1;
  int dim_w = 0;   // 0 means b == 0
  int dim_j = 1;
  int dim_alpha = 1;
  int dim_beta = 1;

  DriftFn drift;
  DriftJacFn drift_dalpha;  // d x p_alpha
  CoefFn diff;              // d x r', ignored when dim_w == 0
  CoefFn jump_coef;         // d x r''
  DbetaVFn dbeta_V;         // p_beta entries of d x d

  bool fd_drift_dalpha = false;  // true when derivative was FD-substituted
  bool fd_dbeta_V = false;

  // V(x, beta) is independent of x; evaluation loops may hoist it.
  bool dispersion_state_free = false;

  // drift(x, alpha) = drift(x, 0) + drift_dalpha(x, .) alpha, with a Jacobian
  // free of alpha.  Lets repeated-evaluation paths precompute the per-state
  // drift basis once per dataset.
  bool drift_affine_in_alpha = false;

  ParamBox param_box;

  int dim_theta() const { return dim_alpha + dim_beta; }

  MatrixXd eval_diff(const VectorXd& x, const VectorXd& beta) const {
    if (dim_w == 0) return MatrixXd::Zero(dim_x, 0);
    return diff(x, beta);
  }

  // Fill in missing derivative callables with central differences and run
  // basic shape validation.  Call once after construction.
  void finalize() {
    param_box.validate();
    if (param_box.p_alpha != dim_alpha || param_box.p_beta() != dim_beta)
      throw ConfigError("ModelSpec: param_box does not match theta dimensions");
    if (!drift || !jump_coef)
      throw ConfigError("ModelSpec: drift and jump_coef are required");
    if (dim_w > 0 && !diff)
      throw ConfigError("ModelSpec: diff required when dim_w > 0");
    if (!drift_dalpha) {
      fd_drift_dalpha = true;
      const DriftFn a = drift;
      const int d = dim_x, pa = dim_alpha;
      drift_dalpha = [a, d, pa](const VectorXd& x, const VectorXd& alpha) {
        MatrixXd jac(d, pa);
        for (int i = 0; i < pa; ++i) {
          const double eps = 1e-6 * (1.0 + std::abs(alpha[i]));
          VectorXd ap = alpha, am = alpha;
          ap[i] += eps;
          am[i] -= eps;
          jac.col(i) = (a(x, ap) - a(x, am)) / (2.0 * eps);
        }
        return jac;
      };
    }
    if (!dbeta_V) {
      fd_dbeta_V = true;
      // Captured by value: ModelSpec has value semantics, so the lambda must
      // not hold a pointer back into the ModelSpec it lives in.
      const CoefFn diff_fn = diff;
      const CoefFn jump_fn = jump_coef;
      const int d = dim_x, pb = dim_beta, dw = dim_w;
      dbeta_V = [diff_fn, jump_fn, d, pb, dw](const VectorXd& x,
                                              const VectorXd& beta) {
        auto local_v = [&](const VectorXd& b) {
          MatrixXd v = MatrixXd::Zero(d, d);
          if (dw > 0) {
            const MatrixXd bm = diff_fn(x, b);
            v += bm * bm.transpose();
          }
          const MatrixXd cm = jump_fn(x, b);
          v += cm * cm.transpose();
          return MatrixXd(0.5 * (v + v.transpose()));
        };
        std::vector<MatrixXd> out;
        out.reserve(pb);
        for (int i = 0; i < pb; ++i) {
          const double eps = 1e-6 * (1.0 + std::abs(beta[i]));
          VectorXd bhi = beta, blo = beta;
          bhi[i] += eps;
          blo[i] -= eps;
          out.push_back((local_v(bhi) - local_v(blo)) / (2.0 * eps));
        }
        return out;
      };
    }
  }

  // Approximate local covariance b b^T + c c^T, symmetrized exactly.
  friend MatrixXd eval_V(const ModelSpec& model, const VectorXd& x,
                         const VectorXd& beta) {
    MatrixXd v = MatrixXd::Zero(model.dim_x, model.dim_x);
    if (model.dim_w > 0) {
      const MatrixXd b = model.diff(x, beta);
      v += b * b.transpose();
    }
    const MatrixXd c = model.jump_coef(x, beta);
    v += c * c.transpose();
    return 0.5 * (v + v.transpose());
  }
};

// V^{-1} and log|V| via Cholesky factorization; log|V| is twice the sum of
// log pivots.  Throws NonPositiveDefiniteError when the factorization fails,
// which signals a model whose local covariance is not positive definite.
inline std::pair<MatrixXd, double> eval_V_inverse_and_logdet(
    const ModelSpec& model, const VectorXd& x, const VectorXd& beta) {
  const MatrixXd v = eval_V(model, x, beta);
  Eigen::LLT<MatrixXd> llt(v);
  if (llt.info() != Eigen::Success)
    throw NonPositiveDefiniteError(
        "local covariance V(x, beta) is not positive definite");
  const MatrixXd l = llt.matrixL();
  double logdet = 0.0;
  for (int i = 0; i < model.dim_x; ++i) {
    if (!(l(i, i) > 0.0))
      throw NonPositiveDefiniteError(
          "local covariance V(x, beta) has a nonpositive pivot");
    logdet += 2.0 * std::log(l(i, i));
  }
  return {llt.solve(MatrixXd::Identity(model.dim_x, model.dim_x)), logdet};
}

namespace builtin {

// dX = -alpha X / sqrt(1 + X^2) dt + sqrt(beta) dJ.  Hyperbolic-type drift
// with a pure-jump dispersion; the standard test model of this library.
inline ModelSpec nig_hyperbolic() {
  ModelSpec m;
  m.id = "nig-hyperbolic";
  m.dim_x = 1;
  m.dim_w = 0;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 1;
  m.dispersion_state_free = true;
  m.drift_affine_in_alpha = true;
  m.drift = [](const VectorXd& x, const VectorXd& alpha) {
    VectorXd out(1);
    out[0] = -alpha[0] * x[0] / std::sqrt(1.0 + x[0] * x[0]);
    return out;
  };
  m.drift_dalpha = [](const VectorXd& x, const VectorXd&) {
    MatrixXd out(1, 1);
    out(0, 0) = -x[0] / std::sqrt(1.0 + x[0] * x[0]);
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
  m.param_box.lower = VectorXd::Constant(2, 0.1);
  m.param_box.upper = VectorXd::Constant(2, 5.0);
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

// Same drift, Wiener dispersion sqrt(beta) dW, no jump part.
inline ModelSpec diffusion_hyperbolic() {
  ModelSpec m;
  m.id = "diffusion-hyperbolic";
  m.dim_x = 1;
  m.dim_w = 1;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 1;
  m.dispersion_state_free = true;
  m.drift_affine_in_alpha = true;
  m.drift = [](const VectorXd& x, const VectorXd& alpha) {
    VectorXd out(1);
    out[0] = -alpha[0] * x[0] / std::sqrt(1.0 + x[0] * x[0]);
    return out;
  };
  m.drift_dalpha = [](const VectorXd& x, const VectorXd&) {
    MatrixXd out(1, 1);
    out(0, 0) = -x[0] / std::sqrt(1.0 + x[0] * x[0]);
    return out;
  };
  m.diff = [](const VectorXd&, const VectorXd& beta) {
    MatrixXd out(1, 1);
    out(0, 0) = std::sqrt(beta[0]);
    return out;
  };
  m.jump_coef = [](const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(1, 1);
  };
  m.dbeta_V = [](const VectorXd&, const VectorXd&) {
    return std::vector<MatrixXd>{MatrixXd::Ones(1, 1)};
  };
  m.param_box.lower = VectorXd::Constant(2, 0.1);
  m.param_box.upper = VectorXd::Constant(2, 5.0);
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

// Linear mean reversion with constant mixed dispersion:
// dX = -alpha X dt + beta_1 dW + beta_2 dJ.
// The dispersion parameters enter V only through beta_1^2 + beta_2^2, the
// canonical non-identifiable configuration.
inline ModelSpec ou_levy() {
  ModelSpec m;
  m.id = "ou-levy";
  m.dim_x = 1;
  m.dim_w = 1;
  m.dim_j = 1;
  m.dim_alpha = 1;
  m.dim_beta = 2;
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
  m.diff = [](const VectorXd&, const VectorXd& beta) {
    MatrixXd out(1, 1);
    out(0, 0) = beta[0];
    return out;
  };
  m.jump_coef = [](const VectorXd&, const VectorXd& beta) {
    MatrixXd out(1, 1);
    out(0, 0) = beta[1];
    return out;
  };
  m.dbeta_V = [](const VectorXd&, const VectorXd& beta) {
    std::vector<MatrixXd> out(2);
    out[0] = MatrixXd::Constant(1, 1, 2.0 * beta[0]);
    out[1] = MatrixXd::Constant(1, 1, 2.0 * beta[1]);
    return out;
  };
  m.param_box.lower = VectorXd::Constant(3, 0.1);
  m.param_box.upper = VectorXd::Constant(3, 5.0);
  m.param_box.p_alpha = 1;
  m.finalize();
  return m;
}

}  // namespace builtin

// Registry of named models.  Built-ins are preloaded; user models may be
// registered programmatically.  The registry itself is process-global and
// mutation is not synchronized; register models during setup, then treat it
// as read-only.
class ModelRegistry {
 public:
  static ModelRegistry& instance() {
    static ModelRegistry registry;
    return registry;
  }

  void register_model(const std::string& name,
                      std::function<ModelSpec()> factory) {
    factories_[name] = std::move(factory);
  }

  ModelSpec make(const std::string& name) const {
    auto it = factories_.find(name);
    if (it == factories_.end())
      throw ConfigError("unknown model id: " + name);
    return it->second();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& kv : factories_) out.push_back(kv.first);
    return out;
  }

 private:
  ModelRegistry() {
    factories_["nig-hyperbolic"] = builtin::nig_hyperbolic;
    factories_["diffusion-hyperbolic"] = builtin::diffusion_hyperbolic;
    factories_["ou-levy"] = builtin::ou_levy;
  }
  std::map<std::string, std::function<ModelSpec()>> factories_;
};

inline ModelSpec make_model(const std::string& name) {
  return ModelRegistry::instance().make(name);
}

}  // namespace levyql
