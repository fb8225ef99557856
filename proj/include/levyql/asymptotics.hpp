#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levyql/avar.hpp"
#include "levyql/errors.hpp"
#include "levyql/gql.hpp"
#include "levyql/levy_driver.hpp"
#include "levyql/model.hpp"
#include "levyql/simulate.hpp"

namespace levyql {

// Limit objects of the estimation problem, with stationary-law integrals
// replaced by long-path ergodic averages.
struct LimitReport {
  MatrixXd g_inf_prime_alpha;  // p_alpha x p_alpha
  MatrixXd g_inf_prime_beta;   // p_beta x p_beta
  MatrixXd v_alpha_beta;       // p_alpha x p_beta
  MatrixXd v_beta_beta;        // p_beta x p_beta
  MatrixXd sigma0;             // p x p assembled limit covariance
  double averaging_T = 0.0;
  NuMoments nu_moments_used;
};

struct Pi0Options {
  double averaging_T = 5000.0;
  double h_avg = 0.01;
  double burn_in = 50.0;
  double fine_div = 10.0;
  std::uint64_t seed = 1;
};

// One long path at theta0 whose sampled states stand in for the stationary
// law in all averages below.
inline Observations simulate_pi0_path(const ModelSpec& model,
                                      const ThetaPoint& theta0,
                                      const LevyDriver& driver,
                                      const Pi0Options& opt = {}) {
  RandomStream base(opt.seed, 0xA5EA11ULL);
  RandomStream wiener = base.split(1);
  RandomStream jumps = base.split(2);
  SimulateOptions sim;
  sim.fine_div = opt.fine_div;
  sim.burn_in = opt.burn_in;
  return simulate_observations(model, theta0, opt.averaging_T, opt.h_avg,
                               driver, wiener, jumps, sim);
}

// Path-averaged slope and noise blocks at theta0, contracted against the
// driver's exact nu(3), nu(4), then assembled into sigma0 with the same block
// formula as the plug-in estimator.  The jump-moment contractions vanish
// identically (not just in the limit) when the corresponding nu tensor is
// zero.
inline LimitReport population_limits(const ModelSpec& model,
                                     const ThetaPoint& theta0,
                                     const LevyDriver& driver,
                                     const Observations& pi0_path) {
  const NuMoments nu = driver.nu_moments();  // MomentsUnavailable for custom laws
  const int pa = model.dim_alpha;
  const int pb = model.dim_beta;
  const int r = model.dim_j;
  const int n = pi0_path.n();

  MatrixXd ga = MatrixXd::Zero(pa, pa);
  MatrixXd gb = MatrixXd::Zero(pb, pb);
  MatrixXd vab = MatrixXd::Zero(pa, pb);
  MatrixXd vbb = MatrixXd::Zero(pb, pb);

  VectorXd x(model.dim_x);
  for (int j = 1; j <= n; ++j) {
    x = pi0_path.states.row(j - 1).transpose();
    const DispersionCache disp = make_dispersion_cache(model, x, theta0.beta);
    const MatrixXd da = model.drift_dalpha(x, theta0.alpha);
    const MatrixXd c = model.jump_coef(x, theta0.beta);

    ga.noalias() -= da.transpose() * disp.v_inv * da;

    std::vector<MatrixXd> a(pb), bform(pb);
    for (int i = 0; i < pb; ++i) {
      a[i] = disp.v_inv * disp.dv[i];
      bform[i] = a[i] * disp.v_inv;  // V^{-1} dV_i V^{-1} = -d_beta V^{-1}
    }
    for (int i = 0; i < pb; ++i)
      for (int k = 0; k < pb; ++k) gb(i, k) -= (a[i] * a[k]).trace();

    // P_i = c^T V^{-1}(dV_i)V^{-1} c, the jump-column contraction of -dV^{-1}.
    std::vector<MatrixXd> pmat(pb);
    for (int i = 0; i < pb; ++i) pmat[i] = c.transpose() * bform[i] * c;
    const MatrixXd m1 = c.transpose() * disp.v_inv * da;  // r x pa

    for (int i = 0; i < pa; ++i)
      for (int k = 0; k < pb; ++k) {
        double acc = 0.0;
        for (int kk = 0; kk < r; ++kk)
          for (int ll = 0; ll < r; ++ll)
            for (int ss = 0; ss < r; ++ss)
              acc += nu.nu3(kk, ll, ss) * m1(ss, i) * pmat[k](kk, ll);
        vab(i, k) += acc;
      }
    for (int i = 0; i < pb; ++i)
      for (int k = 0; k < pb; ++k) {
        double acc = 0.0;
        for (int ss = 0; ss < r; ++ss)
          for (int tt = 0; tt < r; ++tt)
            for (int s2 = 0; s2 < r; ++s2)
              for (int t2 = 0; t2 < r; ++t2)
                acc += nu.nu4(ss, tt, s2, t2) * pmat[i](ss, tt) *
                       pmat[k](s2, t2);
        vbb(i, k) += acc;
      }
  }

  LimitReport out;
  out.g_inf_prime_alpha = ga / static_cast<double>(n);
  out.g_inf_prime_beta = gb / static_cast<double>(n);
  out.v_alpha_beta = vab / static_cast<double>(n);
  out.v_beta_beta = vbb / static_cast<double>(n);
  out.averaging_T = pi0_path.horizon;
  out.nu_moments_used = nu;

  // A singular slope block (non-identifiable model) leaves the blocks intact
  // and marks the assembled covariance unusable; the identifiability scan is
  // the tool that diagnoses the cause.
  try {
    const MatrixXd ga_inv =
        detail::guarded_inverse(out.g_inf_prime_alpha, "limit drift slope");
    const MatrixXd gb_inv =
        detail::guarded_inverse(out.g_inf_prime_beta, "limit dispersion slope");
    MatrixXd sigma(pa + pb, pa + pb);
    sigma.topLeftCorner(pa, pa) = -ga_inv;
    const MatrixXd off = ga_inv * out.v_alpha_beta * gb_inv;
    sigma.topRightCorner(pa, pb) = off;
    sigma.bottomLeftCorner(pb, pa) = off.transpose();
    sigma.bottomRightCorner(pb, pb) = gb_inv * out.v_beta_beta * gb_inv;
    out.sigma0 = 0.5 * (sigma + sigma.transpose());
  } catch (const SingularInformationError&) {
    out.sigma0 = MatrixXd::Constant(pa + pb, pa + pb,
                                    std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

inline LimitReport population_limits(const ModelSpec& model,
                                     const ThetaPoint& theta0,
                                     const LevyDriver& driver,
                                     const Pi0Options& opt = {}) {
  return population_limits(model, theta0, driver,
                           simulate_pi0_path(model, theta0, driver, opt));
}

struct IdentifiabilityRow {
  ThetaPoint theta_prime;
  ThetaPoint theta_second;
  double sv_min_drift = 0.0;       // smallest singular value of the drift form
  double sv_min_dispersion = 0.0;  // smallest singular value of the dispersion form
};

// Cross-parameter bilinear forms behind the identifiability condition,
// path-averaged over pi0_path and reported through their smallest singular
// values.  A near-zero value flags a configuration the contrast cannot
// separate.  At theta' == theta'' == theta0 the drift form equals the negated
// limit slope block.
inline std::vector<IdentifiabilityRow> identifiability_scan(
    const ModelSpec& model, const std::vector<ThetaPoint>& theta_grid,
    const Observations& pi0_path) {
  const int pa = model.dim_alpha;
  const int pb = model.dim_beta;
  const int n = pi0_path.n();
  std::vector<IdentifiabilityRow> rows;
  rows.reserve(theta_grid.size() * theta_grid.size());

  for (const ThetaPoint& tp : theta_grid) {
    for (const ThetaPoint& ts : theta_grid) {
      MatrixXd abar = MatrixXd::Zero(pa, pa);
      MatrixXd bbar = MatrixXd::Zero(pb, pb);
      VectorXd x(model.dim_x);
      for (int j = 1; j <= n; ++j) {
        x = pi0_path.states.row(j - 1).transpose();
        const DispersionCache disp = make_dispersion_cache(model, x, tp.beta);
        const MatrixXd da_p = model.drift_dalpha(x, tp.alpha);
        const MatrixXd da_s = model.drift_dalpha(x, ts.alpha);
        abar.noalias() += da_p.transpose() * disp.v_inv * da_s;
        const std::vector<MatrixXd> dv_s = model.dbeta_V(x, ts.beta);
        for (int i = 0; i < pb; ++i) {
          const MatrixXd bform = disp.v_inv * disp.dv[i] * disp.v_inv;
          for (int k = 0; k < pb; ++k)
            bbar(i, k) += (bform * dv_s[k]).trace();
        }
      }
      abar /= static_cast<double>(n);
      bbar /= static_cast<double>(n);
      IdentifiabilityRow row;
      row.theta_prime = tp;
      row.theta_second = ts;
      row.sv_min_drift =
          Eigen::JacobiSVD<MatrixXd>(abar).singularValues().minCoeff();
      row.sv_min_dispersion =
          Eigen::JacobiSVD<MatrixXd>(bbar).singularValues().minCoeff();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct EfficiencyLoss {
  double path_average = 0.0;  // averaged drift-information gap
  std::optional<double> closed_form;  // linear mean-reversion special case
};

// Gap between the efficient drift information and the quasi-likelihood one:
// average of (d_alpha a)^2 / b^2 * c^2 / (b^2 + c^2).  Scalar setting only,
// with nonvanishing diffusion coefficient.
inline EfficiencyLoss efficiency_loss(const ModelSpec& model,
                                      const ThetaPoint& theta0,
                                      const Observations& pi0_path) {
  if (model.dim_x != 1 || model.dim_alpha != 1 || model.dim_w != 1 ||
      model.dim_j != 1)
    throw UnsupportedError("efficiency_loss: requires scalar state, drift "
                           "parameter, and noise dimensions");
  const int n = pi0_path.n();
  double acc = 0.0;
  for (int j = 1; j <= n; ++j) {
    const VectorXd x = pi0_path.states.row(j - 1).transpose();
    const double b = model.diff(x, theta0.beta)(0, 0);
    const double c = model.jump_coef(x, theta0.beta)(0, 0);
    if (std::abs(b) < 1e-12)
      throw UnsupportedError("efficiency_loss: diffusion coefficient vanishes");
    const double da = model.drift_dalpha(x, theta0.alpha)(0, 0);
    acc += (da * da) / (b * b) * (c * c) / (b * b + c * c);
  }
  EfficiencyLoss out;
  out.path_average = acc / static_cast<double>(n);
  if (model.id == "ou-levy") {
    const double a0 = theta0.alpha[0];
    const double ratio = theta0.beta[1] / theta0.beta[0];
    out.closed_form = ratio * ratio / (2.0 * a0);
  }
  return out;
}

struct ErgodicityCheck {
  std::string name;
  double value = 0.0;
  bool pass = false;
  std::string note;
};

struct ErgodicityReport {
  std::vector<ErgodicityCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Numerical screen for the scalar stability conditions: drift decay ratios on
// a log-spaced grid, boundedness and Lipschitz probes of the dispersion
// coefficients, and nonvanishing of the jump coefficient.  Heuristic; a pass
// is evidence, not a proof.
inline ErgodicityReport ergodicity_diagnostics(const ModelSpec& model,
                                               const ThetaPoint& theta0,
                                               const LevyDriver& driver) {
  if (model.dim_x != 1)
    throw UnsupportedError("ergodicity_diagnostics: scalar state only");

  constexpr int kPoints = 200;
  const double lo = 10.0, hi = 1e4;
  std::vector<double> grid;
  grid.reserve(2 * kPoints);
  for (int i = 0; i < kPoints; ++i) {
    const double magnitude =
        lo * std::pow(hi / lo, static_cast<double>(i) / (kPoints - 1));
    grid.push_back(magnitude);
    grid.push_back(-magnitude);
  }
  const double top_decade = hi / 10.0;

  double ratio_max = -std::numeric_limits<double>::infinity();
  double sgn_max = -std::numeric_limits<double>::infinity();
  double b_max = 0.0, c_max = 0.0, c_min = std::numeric_limits<double>::infinity();
  double b_lip = 0.0, c_lip = 0.0;
  VectorXd xv(1);
  for (double x : grid) {
    xv[0] = x;
    const double a = model.drift(xv, theta0.alpha)[0];
    if (std::abs(x) >= top_decade) {
      ratio_max = std::max(ratio_max, a / x);
      sgn_max = std::max(sgn_max, (x > 0 ? a : -a));
    }
    const double b = model.dim_w > 0 ? model.diff(xv, theta0.beta)(0, 0) : 0.0;
    const double c = model.jump_coef(xv, theta0.beta)(0, 0);
    b_max = std::max(b_max, std::abs(b));
    c_max = std::max(c_max, std::abs(c));
    c_min = std::min(c_min, std::abs(c));
    const double dx = 1e-3 * (1.0 + std::abs(x));
    VectorXd xp(1);
    xp[0] = x + dx;
    if (model.dim_w > 0)
      b_lip = std::max(
          b_lip, std::abs(model.diff(xp, theta0.beta)(0, 0) - b) / dx);
    c_lip = std::max(c_lip,
                     std::abs(model.jump_coef(xp, theta0.beta)(0, 0) - c) / dx);
  }

  // A limsup strictly below zero is declared when the top-decade max clears
  // the cutoff -1e-3.
  constexpr double kCutoff = -1e-3;
  ErgodicityReport report;
  report.checks.push_back({"drift ratio a(x)/x", ratio_max, ratio_max < kCutoff,
                           "limsup a(x)/x < 0 screen (polynomial-moment route)"});
  report.checks.push_back({"signed drift sgn(x) a(x)", sgn_max, sgn_max < kCutoff,
                           "limsup sgn(x) a(x) < 0 screen (exponential-moment route)"});
  report.checks.push_back({"dispersion bounded, max(|b|,|c|)",
                           std::max(b_max, c_max),
                           std::isfinite(b_max) && std::isfinite(c_max),
                           "sampled magnitudes over the probe grid"});
  report.checks.push_back({"dispersion Lipschitz quotient",
                           std::max(b_lip, c_lip),
                           std::max(b_lip, c_lip) < 1e3,
                           "sampled difference quotients"});
  report.checks.push_back({"jump coefficient nonvanishing, min|c|", c_min,
                           c_min > 1e-12,
                           "jump noise must reach the whole line"});
  // Wiener, NIG, and the built-in compound-Poisson laws all carry
  // exponential moments; only user-supplied jump laws are unknown here.
  bool light_tail = true;
  if (driver.kind() == LevyDriver::Kind::CompoundPoisson) {
    try {
      driver.nu_moments();
    } catch (const MomentsUnavailableError&) {
      light_tail = false;
    }
  }
  report.checks.push_back({"driver exponential moment", light_tail ? 1.0 : 0.0,
                           light_tail,
                           light_tail ? driver.describe()
                                      : "custom jump law; tail unknown"});
  return report;
}

}  // namespace levyql
