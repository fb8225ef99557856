#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "levyql/errors.hpp"
#include "levyql/levy_driver.hpp"
#include "levyql/model.hpp"
#include "levyql/random.hpp"

namespace levyql {

// Discrete observations of one path: a strictly increasing time grid
// starting at 0 and the observed states.
struct Observations {
  VectorXd times;   // n + 1 entries, times[0] == 0
  MatrixXd states;  // (n + 1) x d
  VectorXd dt;      // n steps
  double h_max = 0.0;      // max_j dt_j, the normalizing step size
  double horizon = 0.0;    // T_n = times[n]
  double irregularity_ratio = 1.0;  // min dt / max dt
  bool irregular_warning = false;   // ratio below 0.5

  int n() const { return static_cast<int>(dt.size()); }
  int dim() const { return static_cast<int>(states.cols()); }

  static Observations from_grid(VectorXd times, MatrixXd states) {
    if (times.size() < 2 || states.rows() != times.size())
      throw ConfigError("Observations: need at least two aligned time points");
    if (times[0] != 0.0)
      throw ConfigError("Observations: time grid must start at 0");
    Observations obs;
    const int n = static_cast<int>(times.size()) - 1;
    obs.dt.resize(n);
    for (int j = 0; j < n; ++j) {
      obs.dt[j] = times[j + 1] - times[j];
      if (!(obs.dt[j] > 0.0))
        throw ConfigError("Observations: times must be strictly increasing");
    }
    obs.h_max = obs.dt.maxCoeff();
    obs.horizon = times[n];
    obs.irregularity_ratio = obs.dt.minCoeff() / obs.h_max;
    obs.irregular_warning = obs.irregularity_ratio < 0.5;
    obs.times = std::move(times);
    obs.states = std::move(states);
    return obs;
  }
};

// A path on the fine simulation grid k * step, k = 0..K.
struct FinePath {
  double step = 0.0;
  MatrixXd states;  // (K + 1) x d

  int steps() const { return static_cast<int>(states.rows()) - 1; }
  double horizon() const { return step * steps(); }
};

// Euler scheme on the fine grid:
//   X_{k+1} = X_k + a(X_k, alpha) step + b(X_k, beta) dW_k + c(X_k, beta) dJ_k
// with dW_k ~ N(0, step I) from wiener_rng and dJ_k from the driver on
// jump_rng.  Deterministic given seeds and inputs.  Throws NonFiniteError as
// an explosion diagnostic.
inline FinePath euler_path(const ModelSpec& model, const ThetaPoint& theta,
                           const VectorXd& x0, double horizon,
                           double fine_step, RandomStream& wiener_rng,
                           const LevyDriver& jump_driver,
                           RandomStream& jump_rng) {
  if (!(fine_step > 0.0))
    throw InvalidDurationError("euler_path: fine_step must be > 0");
  if (!(horizon > 0.0))
    throw InvalidDurationError("euler_path: horizon must be > 0");
  if (jump_driver.dim() != model.dim_j)
    throw ConfigError("euler_path: driver dimension does not match model");

  const int n_steps = static_cast<int>(std::llround(horizon / fine_step));
  if (n_steps < 1 ||
      std::abs(n_steps * fine_step - horizon) > 1e-9 * horizon)
    throw GridMismatchError("euler_path: horizon is not a multiple of fine_step");

  FinePath path;
  path.step = fine_step;
  path.states.resize(n_steps + 1, model.dim_x);
  path.states.row(0) = x0.transpose();

  const double sqrt_step = std::sqrt(fine_step);
  const bool hoist = model.dispersion_state_free;
  const MatrixXd b_const = hoist ? model.eval_diff(x0, theta.beta) : MatrixXd();
  const MatrixXd c_const = hoist ? model.jump_coef(x0, theta.beta) : MatrixXd();

  VectorXd x = x0;
  VectorXd dw(model.dim_w);
  for (int k = 0; k < n_steps; ++k) {
    VectorXd next = x + model.drift(x, theta.alpha) * fine_step;
    if (model.dim_w > 0) {
      for (int i = 0; i < model.dim_w; ++i) dw[i] = sqrt_step * wiener_rng.normal();
      next += (hoist ? b_const : model.diff(x, theta.beta)) * dw;
    }
    next += (hoist ? c_const : model.jump_coef(x, theta.beta)) *
            jump_driver.sample_increment(fine_step, jump_rng);
    if (!next.allFinite())
      throw NonFiniteError("euler_path: state became non-finite at step " +
                           std::to_string(k + 1));
    x = next;
    path.states.row(k + 1) = x.transpose();
  }
  return path;
}

// Keep every (h / fine_step)-th state of the fine path.
inline Observations subsample(const FinePath& path, double h) {
  if (!(h > 0.0)) throw InvalidDurationError("subsample: h must be > 0");
  const double ratio = h / path.step;
  const long stride = std::llround(ratio);
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw GridMismatchError("subsample: h is not an integer multiple of the fine step");
  const int n = path.steps() / static_cast<int>(stride);
  if (n < 1) throw GridMismatchError("subsample: fewer than one observation step");
  VectorXd times(n + 1);
  MatrixXd states(n + 1, path.states.cols());
  for (int j = 0; j <= n; ++j) {
    times[j] = h * j;
    states.row(j) = path.states.row(j * stride);
  }
  return Observations::from_grid(std::move(times), std::move(states));
}

// Subsample onto an explicit (possibly irregular) time grid; every time must
// sit on the fine grid within relative 1e-9.
inline Observations subsample_at_times(const FinePath& path,
                                       const VectorXd& times) {
  MatrixXd states(times.size(), path.states.cols());
  for (int j = 0; j < times.size(); ++j) {
    const double ratio = times[j] / path.step;
    const long k = std::llround(ratio);
    if (k < 0 || k > path.steps() ||
        std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio))
      throw GridMismatchError("subsample_at_times: time " +
                              std::to_string(times[j]) +
                              " is not on the fine grid");
    states.row(j) = path.states.row(k);
  }
  return Observations::from_grid(times, std::move(states));
}

struct SimulateOptions {
  double fine_div = 30.0;  // fine_step = h / fine_div
  double burn_in = 0.0;    // warm-up horizon simulated and discarded
  VectorXd x0;             // empty means zero start
};

// Simulate and subsample in one go.  When burn_in > 0 a warm-up segment is
// simulated first and its endpoint becomes the starting state, so the main
// path starts approximately stationary.
inline Observations simulate_observations(const ModelSpec& model,
                                          const ThetaPoint& theta, double horizon,
                                          double h, const LevyDriver& driver,
                                          RandomStream& wiener_rng,
                                          RandomStream& jump_rng,
                                          const SimulateOptions& opt = {}) {
  const double fine_step = h / opt.fine_div;
  VectorXd x0 = opt.x0.size() ? opt.x0 : VectorXd::Zero(model.dim_x);
  if (opt.burn_in > 0.0) {
    const double warm =
        std::ceil(opt.burn_in / fine_step) * fine_step;  // align to grid
    const FinePath warmup = euler_path(model, theta, x0, warm, fine_step,
                                       wiener_rng, driver, jump_rng);
    x0 = warmup.states.row(warmup.steps()).transpose();
  }
  const FinePath path = euler_path(model, theta, x0, horizon, fine_step,
                                   wiener_rng, driver, jump_rng);
  return subsample(path, h);
}

}  // namespace levyql
