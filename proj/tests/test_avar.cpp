#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "levyql/levyql.hpp"
#include "test_models.hpp"

using namespace levyql;
using testutil::theta2;
using testutil::vec;

namespace {

Observations nig_obs(std::uint64_t seed, double horizon, double h,
                     double delta = 10.0) {
  const ModelSpec m = make_model("nig-hyperbolic");
  RandomStream base(seed);
  RandomStream w = base.split(1), j = base.split(2);
  return simulate_observations(m, theta2(1.0, 1.0), horizon, h,
                               LevyDriver::nig(delta), w, j);
}

}  // namespace

TEST_CASE("normal quantile") {
  REQUIRE(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(normal_quantile(0.975) == Catch::Approx(1.959964).margin(1e-5));
  REQUIRE(normal_quantile(0.025) == Catch::Approx(-1.959964).margin(1e-5));
  REQUIRE(normal_quantile(0.995) == Catch::Approx(2.575829).margin(1e-5));
  REQUIRE_THROWS_AS(normal_quantile(0.0), ConfigError);
  REQUIRE_THROWS_AS(normal_quantile(1.0), ConfigError);
}

TEST_CASE("confidence interval arithmetic") {
  SigmaHat sigma;
  sigma.sigma_hat = MatrixXd::Identity(2, 2) * 0.04;  // Sigma_ii / T = 4e-4
  const ThetaPoint theta = theta2(1.0, 2.0);

  const auto cis = confidence_intervals(theta, sigma, 100.0, 0.95);
  REQUIRE(cis.size() == 2);
  const double half = 0.5 * (cis[0].upper - cis[0].lower);
  REQUIRE(half == Catch::Approx(0.0392).margin(1e-4));
  REQUIRE(cis[0].estimate == 1.0);
  REQUIRE(cis[1].estimate == 2.0);

  // width grows without bound as the level approaches one
  double previous = 0.0;
  for (double level : {0.5, 0.9, 0.99, 0.9999}) {
    const auto c = confidence_intervals(theta, sigma, 100.0, level);
    const double width = c[0].upper - c[0].lower;
    REQUIRE(width > previous);
    previous = width;
  }
  REQUIRE_THROWS_AS(confidence_intervals(theta, sigma, 100.0, 1.2), ConfigError);
}

TEST_CASE("studentize identity cases") {
  SigmaHat sigma;
  sigma.sigma_hat = MatrixXd::Identity(2, 2);
  const Observations obs = nig_obs(81, 4.0, 0.05);

  SECTION("self-reference gives zero") {
    const VectorXd s = studentize(obs, theta2(1.3, 0.8), sigma, theta2(1.3, 0.8));
    REQUIRE(s.norm() == 0.0);
  }
  SECTION("identity covariance passes the deviation through") {
    const ThetaPoint hat = theta2(1.5, 1.0);
    const ThetaPoint ref = theta2(1.0, 1.0);
    const VectorXd s = studentize(obs, hat, sigma, ref);
    const VectorXd expected = std::sqrt(obs.horizon) * (hat.stacked() - ref.stacked());
    REQUIRE(s.isApprox(expected, 1e-12));
  }
}

TEST_CASE("plug-in covariance on simulated data") {
  const ModelSpec m = make_model("nig-hyperbolic");
  const Observations obs = nig_obs(83, 100.0, 0.01);
  const EstimateReport report = fit(obs, m, {});
  const SigmaHat sigma = estimate_sigma(obs, m, report.theta_hat);

  SECTION("exact symmetry and block structure") {
    REQUIRE(sigma.sigma_hat == sigma.sigma_hat.transpose().eval());
    REQUIRE(sigma.sigma_hat.rows() == 2);
  }
  SECTION("information blocks are negative semidefinite") {
    REQUIRE(sigma.g_prime_alpha_hat(0, 0) <= 0.0);
    REQUIRE(sigma.g_prime_beta_hat(0, 0) <= 0.0);
  }
  SECTION("slope block matches its closed form for V = beta") {
    // G'^beta = -1 / beta^2, state-free here
    const double beta = report.theta_hat.beta[0];
    REQUIRE(sigma.g_prime_beta_hat(0, 0) ==
            Catch::Approx(-1.0 / (beta * beta)).epsilon(1e-10));
  }
  SECTION("dispersion standard error has the right scale") {
    // near beta^2 (3/delta^2 + 3h) / T at this design
    const double se = std::sqrt(sigma.sigma_hat(1, 1) / obs.horizon);
    REQUIRE(se > 0.01);
    REQUIRE(se < 0.04);
  }
  SECTION("studentized deviation at the truth is order one") {
    const VectorXd s = studentize(obs, report.theta_hat, sigma, theta2(1.0, 1.0));
    REQUIRE(s.norm() < 6.0);
  }
}

TEST_CASE("degenerate diffusion: the dispersion noise block shrinks with h") {
  // With c = 0 the fourth-moment block decays linearly in the step size; the
  // two subsamples of one fine path isolate exactly that factor.
  const ModelSpec m = make_model("diffusion-hyperbolic");
  RandomStream base(87);
  RandomStream w = base.split(1), j = base.split(2);
  const FinePath path =
      euler_path(m, theta2(1.0, 1.0), vec({0.0}), 50.0, 0.05 / 30.0, w,
                 LevyDriver::wiener(), j);
  const Observations coarse = subsample(path, 0.05);
  const Observations fine = subsample(path, 0.01);
  const SigmaHat sc = estimate_sigma(coarse, m, theta2(1.0, 1.0));
  const SigmaHat sf = estimate_sigma(fine, m, theta2(1.0, 1.0));
  const double ratio = sf.v_beta_beta_hat(0, 0) / sc.v_beta_beta_hat(0, 0);
  REQUIRE(ratio > 0.10);
  REQUIRE(ratio < 0.35);  // ideal value 0.2
}

TEST_CASE("non-identifiable dispersion yields a singular information block") {
  // constant b = beta1, c = beta2: the dispersion slope block is rank one
  const ModelSpec m = make_model("ou-levy");
  RandomStream base(89);
  RandomStream w = base.split(1), j = base.split(2);
  const Observations obs =
      simulate_observations(m, {vec({1.0}), vec({0.6, 0.8})}, 10.0, 0.02,
                            LevyDriver::nig(10.0), w, j);
  REQUIRE_THROWS_AS(
      estimate_sigma(obs, m, {vec({1.0}), vec({0.6, 0.8})}),
      SingularInformationError);
}
