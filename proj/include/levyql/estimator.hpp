#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "levyql/errors.hpp"
#include "levyql/gql.hpp"
#include "levyql/model.hpp"
#include "levyql/random.hpp"
#include "levyql/simulate.hpp"

namespace levyql {

struct TraceRow {
  std::string phase;  // "nm" or "newton"
  int start_index = 0;
  int iteration = 0;
  VectorXd theta;
  double q = 0.0;
  double m = 0.0;
  double score_norm = 0.0;  // |G| / sqrt(T_n)
};

struct FitOptions {
  enum class Objective { contrast, gql };

  int starts = 8;
  int max_iter = 400;          // simplex iterations per start
  double grad_tol = 1e-8;      // on |G| / sqrt(T_n)
  double simplex_tol = 1e-10;  // relative objective spread across the simplex
  bool newton_refine = true;
  int newton_max_iter = 30;
  Objective objective = Objective::contrast;
  std::uint64_t seed = 0;  // scrambling seed for the multistart point set
  std::function<void(const TraceRow&)> trace;

  void validate() const {
    if (starts < 1) throw ConfigError("FitOptions: starts must be >= 1");
    if (!(grad_tol > 0.0) || !(simplex_tol > 0.0))
      throw ConfigError("FitOptions: tolerances must be > 0");
  }
};

struct StartRecord {
  VectorXd start_point;
  VectorXd final_point;
  double m = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool nm_converged = false;
  bool ok = false;
  std::string error;
};

struct EstimateReport {
  ThetaPoint theta_hat;
  double m_at_hat = 0.0;
  double q_at_hat = 0.0;
  double score_norm = 0.0;  // |G(theta_hat)| / sqrt(T_n)
  bool converged = false;
  bool boundary_hit = false;
  int evaluations = 0;  // objective evaluations across the whole run
  std::vector<StartRecord> starts;
  bool used_fd_derivatives = false;
};

namespace detail {

inline double halton_radical_inverse(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Low-discrepancy start set over the box: Halton points with a random
// Cranley-Patterson rotation drawn from the scrambling seed.
inline std::vector<VectorXd> multistart_points(const ParamBox& box, int count,
                                               std::uint64_t seed) {
  static const std::uint64_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                         23, 29, 31, 37, 41, 43, 47, 53};
  const int p = box.dim();
  if (p > static_cast<int>(sizeof(primes) / sizeof(primes[0])))
    throw UnsupportedError("multistart_points: parameter dimension too large");
  RandomStream rng(seed, 0x5CA7E5ULL);
  VectorXd shift(p);
  for (int i = 0; i < p; ++i) shift[i] = rng.uniform();
  std::vector<VectorXd> points;
  points.reserve(count);
  for (int k = 0; k < count; ++k) {
    VectorXd u(p);
    for (int i = 0; i < p; ++i) {
      double v = halton_radical_inverse(static_cast<std::uint64_t>(k) + 1,
                                        primes[i]) +
                 shift[i];
      v -= std::floor(v);
      u[i] = box.lower[i] + v * (box.upper[i] - box.lower[i]);
    }
    points.push_back(std::move(u));
  }
  return points;
}

struct EvalOutcome {
  bool ok = false;
  double f = std::numeric_limits<double>::infinity();  // minimized objective
  ContrastValue cv;  // populated only by full evaluations
};

// Best candidate over every fully evaluated point, with the deterministic
// tie-break: largest objective, then smallest |G|, then lexicographically
// smallest theta.
struct BestTracker {
  explicit BestTracker(bool select_by_q) : by_q(select_by_q) {}

  bool by_q;
  bool has = false;
  VectorXd theta;
  ContrastValue cv;

  void offer(const VectorXd& t, const ContrastValue& c) {
    if (!has) {
      has = true;
      theta = t;
      cv = c;
      return;
    }
    const double key_new = by_q ? c.q : c.m;
    const double key_old = by_q ? cv.q : cv.m;
    if (key_new != key_old) {
      if (key_new > key_old) { theta = t; cv = c; }
      return;
    }
    const double gn_new = c.score.squared_norm();
    const double gn_old = cv.score.squared_norm();
    if (gn_new != gn_old) {
      if (gn_new < gn_old) { theta = t; cv = c; }
      return;
    }
    for (int i = 0; i < theta.size(); ++i) {
      if (t[i] != theta[i]) {
        if (t[i] < theta[i]) { theta = t; cv = c; }
        return;
      }
    }
  }
};

}  // namespace detail

// GQMLE over the closed box.
//
// The simplex phase descends the quasi log-likelihood, whose surface has one
// wide interior basin; descending the squared-score contrast directly is
// unreliable because large dispersion values shrink both score blocks and
// most of the box drains toward a ridge along the dispersion edge.  Each
// simplex endpoint is then polished by damped Newton steps on the score root
// (the critical points of both surfaces coincide), and the winner among all
// fully evaluated candidates is selected by the configured objective: the
// contrast by default, the quasi log-likelihood under objective = gql.  The
// selected point dominates every candidate evaluated during the run.
inline EstimateReport fit(const Observations& obs, const ModelSpec& model,
                          const FitOptions& options = {}) {
  options.validate();
  if (obs.n() < model.dim_theta())
    throw ConfigError("fit: need at least dim(theta) observations");

  const ParamBox& box = model.param_box;
  const int p = box.dim();
  const double root_t = std::sqrt(obs.horizon);
  const bool use_gql = options.objective == FitOptions::Objective::gql;

  detail::BestTracker best(use_gql);
  int evaluations = 0;
  const detail::EvalWorkspace workspace(obs, model);

  // Localization objective: -Q_n, no score needed.
  auto evaluate_q = [&](const VectorXd& theta) {
    detail::EvalOutcome out;
    ++evaluations;
    try {
      const double q =
          workspace.eval(ThetaPoint::from_stacked(theta, model.dim_alpha), false)
              .q;
      if (!std::isfinite(q)) return out;
      out.ok = true;
      out.f = -q;
    } catch (const Error&) {
    }
    return out;
  };

  // Full evaluation: contrast, score, and likelihood; feeds the selection.
  auto evaluate_full = [&](const VectorXd& theta) {
    detail::EvalOutcome out;
    ++evaluations;
    try {
      out.cv = workspace.contrast(ThetaPoint::from_stacked(theta, model.dim_alpha));
      if (!std::isfinite(out.cv.m) || !std::isfinite(out.cv.q)) return out;
      out.ok = true;
      out.f = use_gql ? -out.cv.q : -out.cv.m;
      best.offer(theta, out.cv);
    } catch (const Error&) {
    }
    return out;
  };

  auto emit_trace = [&](const char* phase, int start_index, int iter,
                        const VectorXd& theta, const detail::EvalOutcome& e) {
    if (!options.trace || !e.ok) return;
    TraceRow row;
    row.phase = phase;
    row.start_index = start_index;
    row.iteration = iter;
    row.theta = theta;
    row.q = e.cv.q;
    row.m = e.cv.m;
    row.score_norm = std::sqrt(e.cv.score.squared_norm()) / root_t;
    options.trace(row);
  };

  auto on_boundary = [&](const VectorXd& theta) {
    for (int i = 0; i < p; ++i) {
      const double range = box.upper[i] - box.lower[i];
      if (theta[i] - box.lower[i] <= 1e-9 * range ||
          box.upper[i] - theta[i] <= 1e-9 * range)
        return true;
    }
    return false;
  };

  // Damped Newton on G(theta) = 0 from an interior point; every accepted
  // iterate is a full candidate.  Returns true when |G|/sqrt(T) met grad_tol.
  auto newton_polish = [&](VectorXd theta, detail::EvalOutcome current) {
    VectorXd g = current.cv.score.stacked();
    double g_norm = g.norm();
    for (int it = 0; it < options.newton_max_iter; ++it) {
      if (g_norm / root_t < options.grad_tol) return true;
      MatrixXd jac;
      try {
        jac = workspace.score_jacobian(
            ThetaPoint::from_stacked(theta, model.dim_alpha));
      } catch (const Error&) {
        return false;
      }
      Eigen::FullPivLU<MatrixXd> lu(jac);
      if (!lu.isInvertible()) return false;
      const VectorXd step = lu.solve(-g);

      bool accepted = false;
      double damp = 1.0;
      for (int half = 0; half < 8; ++half, damp *= 0.5) {
        const VectorXd cand = box.clamp(theta + damp * step);
        detail::EvalOutcome e = evaluate_full(cand);
        if (!e.ok) continue;
        const VectorXd cand_g = e.cv.score.stacked();
        if (cand_g.norm() < g_norm) {
          theta = cand;
          g = cand_g;
          g_norm = g.norm();
          accepted = true;
          emit_trace("newton", -1, it, cand, e);
          break;
        }
      }
      if (!accepted || on_boundary(theta)) break;
    }
    return g_norm / root_t < options.grad_tol;
  };

  const std::vector<VectorXd> start_points =
      detail::multistart_points(box, options.starts, options.seed);

  EstimateReport report;
  report.used_fd_derivatives = model.fd_drift_dalpha || model.fd_dbeta_V;
  bool newton_converged = false;

  for (int s = 0; s < options.starts; ++s) {
    StartRecord rec;
    rec.start_point = start_points[s];

    // Initial simplex: start point plus a 10%-of-range step along each axis,
    // stepping inward when the nudge would leave the box.
    std::vector<VectorXd> simplex;
    simplex.push_back(box.clamp(rec.start_point));
    for (int i = 0; i < p; ++i) {
      VectorXd v = simplex[0];
      const double step = 0.1 * (box.upper[i] - box.lower[i]);
      v[i] = (v[i] + step <= box.upper[i]) ? v[i] + step : v[i] - step;
      simplex.push_back(std::move(v));
    }
    std::vector<detail::EvalOutcome> value(p + 1);
    bool any_ok = false;
    for (int i = 0; i <= p; ++i) {
      value[i] = evaluate_q(simplex[i]);
      any_ok = any_ok || value[i].ok;
    }
    if (!any_ok) {
      rec.error = "all simplex vertices failed to evaluate";
      report.starts.push_back(std::move(rec));
      continue;
    }

    auto order = [&]() {
      for (int i = 0; i <= p; ++i)
        for (int k = i + 1; k <= p; ++k)
          if (value[k].f < value[i].f) {
            std::swap(value[i], value[k]);
            std::swap(simplex[i], simplex[k]);
          }
    };

    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
      order();
      const double f_best = value[0].f;
      const double f_worst = value[p].f;
      if (std::isfinite(f_worst) &&
          f_worst - f_best < options.simplex_tol * (1.0 + std::abs(f_best))) {
        rec.nm_converged = true;
        break;
      }

      VectorXd centroid = VectorXd::Zero(p);
      for (int i = 0; i < p; ++i) centroid += simplex[i];
      centroid /= static_cast<double>(p);

      auto propose = [&](double coef) {
        return box.clamp(centroid + coef * (centroid - simplex[p]));
      };

      const VectorXd xr = propose(1.0);
      detail::EvalOutcome fr = evaluate_q(xr);
      if (fr.ok && fr.f < value[0].f) {
        const VectorXd xe = propose(2.0);
        detail::EvalOutcome fe = evaluate_q(xe);
        if (fe.ok && fe.f < fr.f) {
          simplex[p] = xe;
          value[p] = fe;
        } else {
          simplex[p] = xr;
          value[p] = fr;
        }
      } else if (fr.ok && fr.f < value[p - 1].f) {
        simplex[p] = xr;
        value[p] = fr;
      } else {
        const bool outside = fr.ok && fr.f < value[p].f;
        const VectorXd xc = outside
            ? box.clamp(centroid + 0.5 * (xr - centroid))
            : box.clamp(centroid - 0.5 * (centroid - simplex[p]));
        detail::EvalOutcome fc = evaluate_q(xc);
        if (fc.ok && fc.f < std::min(value[p].f, outside ? fr.f : value[p].f)) {
          simplex[p] = xc;
          value[p] = fc;
        } else {
          // shrink toward the best vertex
          for (int i = 1; i <= p; ++i) {
            simplex[i] = box.clamp(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
            value[i] = evaluate_q(simplex[i]);
          }
        }
      }
      if (options.trace) {
        order();
        emit_trace("nm", s, iter, simplex[0], evaluate_full(simplex[0]));
      }
    }

    order();
    rec.iterations = iter;
    const detail::EvalOutcome endpoint = evaluate_full(simplex[0]);
    if (endpoint.ok) {
      rec.ok = true;
      rec.final_point = simplex[0];
      rec.m = endpoint.cv.m;
      if (options.newton_refine && !on_boundary(simplex[0]))
        newton_converged =
            newton_polish(simplex[0], endpoint) || newton_converged;
    } else {
      rec.error = "no finite objective value at this start";
    }
    report.starts.push_back(std::move(rec));
  }

  if (!best.has)
    throw AllStartsFailedError("fit: every start failed to evaluate the objective");

  report.theta_hat = ThetaPoint::from_stacked(best.theta, model.dim_alpha);
  report.m_at_hat = best.cv.m;
  report.q_at_hat = best.cv.q;
  report.score_norm = std::sqrt(best.cv.score.squared_norm()) / root_t;
  report.boundary_hit = on_boundary(best.theta);
  report.evaluations = evaluations;
  bool best_start_converged = false;
  for (const StartRecord& rec : report.starts)
    if (rec.ok && rec.nm_converged &&
        (rec.final_point - best.theta).norm() <= 1e-6 * best.theta.norm())
      best_start_converged = true;
  report.converged = (newton_converged && report.score_norm < options.grad_tol) ||
                     report.score_norm < options.grad_tol ||
                     best_start_converged;
  return report;
}

struct ProfileRow {
  double value = 0.0;
  double m = 0.0;
  double q = 0.0;
};

// Deterministic one-axis scan of the contrast and quasi log-likelihood with
// the other coordinates held at theta_base.  A flat ridge across the grid
// signals a non-identifiable dispersion parameterization.
inline std::vector<ProfileRow> profile_scan(const Observations& obs,
                                            const ModelSpec& model,
                                            const ThetaPoint& theta_base,
                                            int axis,
                                            const std::vector<double>& grid) {
  if (axis < 0 || axis >= model.dim_theta())
    throw ConfigError("profile_scan: axis out of range");
  std::vector<ProfileRow> rows;
  rows.reserve(grid.size());
  VectorXd theta = theta_base.stacked();
  for (double v : grid) {
    theta[axis] = v;
    const ContrastValue cv =
        contrast(obs, model, ThetaPoint::from_stacked(theta, model.dim_alpha));
    rows.push_back({v, cv.m, cv.q});
  }
  return rows;
}

}  // namespace levyql
