#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "levyql/avar.hpp"
#include "levyql/errors.hpp"
#include "levyql/estimator.hpp"
#include "levyql/gql.hpp"
#include "levyql/io.hpp"
#include "levyql/levy_driver.hpp"
#include "levyql/model.hpp"
#include "levyql/random.hpp"
#include "levyql/simulate.hpp"
#include "levyql/stats.hpp"
#include "levyql/version.hpp"

namespace levyql {

struct Design {
  double horizon = 0.0;  // T_n
  double h = 0.0;        // step size
};

// One Monte Carlo experiment: a model with true parameter, one or more
// drivers, one or more (T, h) designs, M replications on substreams
// (base_seed, k).
struct ExperimentConfig {
  std::string model_id = "nig-hyperbolic";
  ThetaPoint theta0;
  std::vector<LevyDriver> drivers;
  std::vector<Design> designs;
  int replications = 1000;
  std::uint64_t base_seed = 1;
  double fine_div = 30.0;
  std::string out;  // output path prefix
  std::string study = "table1";  // table1 | coverage | fieldscan
  std::optional<ParamBox> box;   // overrides the model default when set
  int starts = 4;
  int threads = 0;  // 0 = hardware concurrency
  double burn_in = 0.0;
  VectorXd x0;  // empty = zero start
  // fieldscan settings
  std::vector<double> radii;
  int grid_points = 64;
  double m_exponent = 4.0;

  void validate() const {
    if (replications < 1) throw ConfigError("config: replications must be >= 1");
    if (drivers.empty()) throw ConfigError("config: at least one driver");
    if (designs.empty()) throw ConfigError("config: at least one design");
    if (study != "table1" && study != "coverage" && study != "fieldscan")
      throw ConfigError("config: unknown study kind " + study);
    for (const Design& d : designs) {
      if (!(d.horizon > 0.0) || !(d.h > 0.0))
        throw ConfigError("config: design T and h must be > 0");
      const double ratio = d.horizon / d.h;
      if (std::abs(ratio - std::llround(ratio)) > 1e-9)
        throw ConfigError("config: T/h must be integral");
    }
    if (study == "fieldscan" && radii.empty())
      throw ConfigError("config: fieldscan needs radii");
  }
};

struct RepRecord {
  bool failed = false;
  std::string error;
  bool boundary = false;
  bool optimizer_converged = false;
  VectorXd theta_hat;
  // coverage extras
  bool sigma_ok = false;
  VectorXd studentized;
  std::vector<int> ci_hit;  // per coordinate, 95% interval
};

struct CellResult {
  Design design;
  std::string driver;
  double delta = std::numeric_limits<double>::quiet_NaN();
  long n = 0;  // observations per replication
  int reps = 0;
  int converged = 0;  // reps - failed - boundary
  int boundary = 0;
  int failed = 0;
  int sigma_failed = 0;
  VectorXd mean_theta;
  VectorXd sd_theta;
  double corr_alpha_beta = std::numeric_limits<double>::quiet_NaN();
  VectorXd coverage95;       // per coordinate; empty unless coverage study
  MatrixXd studentized_cov;  // empty unless coverage study
  double wall_seconds = 0.0;
  std::vector<RepRecord> records;  // ordered by replication index
};

struct MCResult {
  std::vector<CellResult> cells;
};

namespace detail {

// Index-sharded parallel loop; results must be written to per-index slots so
// the outcome does not depend on the degree of parallelism.
inline void parallel_for(int count, int threads,
                         const std::function<void(int)>& body) {
  int n_threads = threads > 0
      ? threads
      : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min(n_threads, count);
  if (n_threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

inline ModelSpec configured_model(const ExperimentConfig& config) {
  ModelSpec model = make_model(config.model_id);
  if (config.box) {
    model.param_box = *config.box;
    model.param_box.validate();
    if (model.param_box.dim() != model.dim_theta() ||
        model.param_box.p_alpha != model.dim_alpha)
      throw ConfigError("config: box does not match model dimensions");
  }
  return model;
}

}  // namespace detail

// One replication: simulate, fit, optionally Studentize.  Exposed so tests
// and the acceptance suite can run single cells without the study wrapper.
inline RepRecord run_replication(const ModelSpec& model,
                                 const ExperimentConfig& config,
                                 const LevyDriver& driver, const Design& design,
                                 int k, bool with_sigma) {
  RepRecord rec;
  try {
    RandomStream rep_stream(config.base_seed, static_cast<std::uint64_t>(k));
    RandomStream wiener = rep_stream.split(1);
    RandomStream jumps = rep_stream.split(2);
    SimulateOptions sim;
    sim.fine_div = config.fine_div;
    sim.burn_in = config.burn_in;
    sim.x0 = config.x0;
    const Observations obs =
        simulate_observations(model, config.theta0, design.horizon, design.h,
                              driver, wiener, jumps, sim);
    FitOptions fopt;
    fopt.starts = config.starts;
    fopt.seed = rep_stream.split(3).next_u64();
    const EstimateReport fit_report = fit(obs, model, fopt);
    rec.theta_hat = fit_report.theta_hat.stacked();
    rec.boundary = fit_report.boundary_hit;
    rec.optimizer_converged = fit_report.converged;
    if (with_sigma && !rec.boundary) {
      try {
        const SigmaHat sigma = estimate_sigma(obs, model, fit_report.theta_hat);
        rec.studentized = studentize(obs, fit_report.theta_hat, sigma, config.theta0);
        const auto cis =
            confidence_intervals(fit_report.theta_hat, sigma, obs.horizon, 0.95);
        const VectorXd truth = config.theta0.stacked();
        rec.ci_hit.resize(cis.size());
        for (std::size_t i = 0; i < cis.size(); ++i)
          rec.ci_hit[i] =
              (truth[static_cast<int>(i)] >= cis[i].lower &&
               truth[static_cast<int>(i)] <= cis[i].upper)
                  ? 1
                  : 0;
        rec.sigma_ok = true;
      } catch (const SingularInformationError&) {
        rec.sigma_ok = false;
      }
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

inline CellResult run_cell(const ModelSpec& model, const ExperimentConfig& config,
                           const LevyDriver& driver, const Design& design,
                           bool with_sigma) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult cell;
  cell.design = design;
  cell.driver = driver.describe();
  if (driver.kind() == LevyDriver::Kind::NIG) cell.delta = driver.delta();
  cell.n = std::llround(design.horizon / design.h);
  cell.reps = config.replications;
  cell.records.resize(config.replications);

  detail::parallel_for(config.replications, config.threads, [&](int k) {
    cell.records[k] = run_replication(model, config, driver, design, k, with_sigma);
  });

  const int p = model.dim_theta();
  std::vector<VectorXd> kept;
  std::vector<VectorXd> studentized;
  VectorXd hits = VectorXd::Zero(p);
  int hit_reps = 0;
  for (const RepRecord& rec : cell.records) {
    if (rec.failed) {
      ++cell.failed;
      continue;
    }
    if (rec.boundary) {
      ++cell.boundary;
      continue;
    }
    kept.push_back(rec.theta_hat);
    if (with_sigma) {
      if (rec.sigma_ok) {
        studentized.push_back(rec.studentized);
        for (int i = 0; i < p; ++i) hits[i] += rec.ci_hit[i];
        ++hit_reps;
      } else {
        ++cell.sigma_failed;
      }
    }
  }
  cell.converged = cell.reps - cell.failed - cell.boundary;

  if (!kept.empty()) {
    cell.mean_theta = VectorXd::Zero(p);
    for (const VectorXd& t : kept) cell.mean_theta += t;
    cell.mean_theta /= static_cast<double>(kept.size());
    cell.sd_theta = VectorXd::Zero(p);
    if (kept.size() > 1) {
      for (const VectorXd& t : kept)
        cell.sd_theta += (t - cell.mean_theta).cwiseAbs2();
      cell.sd_theta =
          (cell.sd_theta / static_cast<double>(kept.size() - 1)).cwiseSqrt();
    }
    if (model.dim_alpha >= 1 && model.dim_beta >= 1 && kept.size() > 2) {
      std::vector<double> al, be;
      for (const VectorXd& t : kept) {
        al.push_back(t[0]);
        be.push_back(t[model.dim_alpha]);
      }
      cell.corr_alpha_beta = sample_corr(al, be);
    }
  }
  if (with_sigma && hit_reps > 0) {
    cell.coverage95 = hits / static_cast<double>(hit_reps);
    if (studentized.size() > 2)
      cell.studentized_cov = sample_covariance(studentized);
  }
  cell.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return cell;
}

// Finite-sample table study: per design and driver, simulate M paths, fit,
// and aggregate mean/sd over the non-boundary, non-failed replications.
inline MCResult run_table1(const ExperimentConfig& config) {
  config.validate();
  const ModelSpec model = detail::configured_model(config);
  MCResult result;
  for (const Design& design : config.designs)
    for (const LevyDriver& driver : config.drivers)
      result.cells.push_back(run_cell(model, config, driver, design, false));
  return result;
}

// Coverage study: additionally Studentize each replication and record 95%
// interval hits and the empirical covariance of the Studentized vector.
inline MCResult run_coverage(const ExperimentConfig& config) {
  config.validate();
  const ModelSpec model = detail::configured_model(config);
  MCResult result;
  for (const Design& design : config.designs)
    for (const LevyDriver& driver : config.drivers)
      result.cells.push_back(run_cell(model, config, driver, design, true));
  return result;
}

struct FieldScanRow {
  double radius = 0.0;
  double probability = 0.0;
  double weighted = 0.0;  // radius^m_exponent * probability
  long skipped_cells = 0;
};

// Tail scan of the normalized contrast field: Monte Carlo estimate of
// P[sup over the sampled shells of radius >= r of Z_n >= exp(-r)].  Shell
// points leaving the box are skipped and counted.  The r = 0 anchor row is
// always present with probability one since Z_n(0) = 1.
inline std::vector<FieldScanRow> run_fieldscan(const ExperimentConfig& config) {
  config.validate();
  const ModelSpec model = detail::configured_model(config);
  const LevyDriver& driver = config.drivers.front();
  const Design& design = config.designs.front();
  const int p = model.dim_theta();

  std::vector<double> radii = config.radii;
  std::sort(radii.begin(), radii.end());

  // Fixed direction set shared by every replication.
  std::vector<VectorXd> directions;
  if (p == 1) {
    directions.push_back(VectorXd::Constant(1, 1.0));
    directions.push_back(VectorXd::Constant(1, -1.0));
  } else if (p == 2) {
    for (int i = 0; i < config.grid_points; ++i) {
      const double angle = 2.0 * M_PI * i / config.grid_points;
      VectorXd dir(2);
      dir << std::cos(angle), std::sin(angle);
      directions.push_back(std::move(dir));
    }
  } else {
    RandomStream dir_rng(config.base_seed, 0xD17ULL);
    for (int i = 0; i < config.grid_points; ++i) {
      VectorXd dir(p);
      for (int j = 0; j < p; ++j) dir[j] = dir_rng.normal();
      directions.push_back(dir.normalized());
    }
  }

  const int n_radii = static_cast<int>(radii.size());
  std::vector<std::vector<int>> events(config.replications);
  std::vector<std::vector<long>> skipped(config.replications);

  detail::parallel_for(config.replications, config.threads, [&](int k) {
    events[k].assign(n_radii, -1);  // -1: no evaluable cell
    skipped[k].assign(n_radii, 0);
    RandomStream rep_stream(config.base_seed, static_cast<std::uint64_t>(k));
    RandomStream wiener = rep_stream.split(1);
    RandomStream jumps = rep_stream.split(2);
    SimulateOptions sim;
    sim.fine_div = config.fine_div;
    sim.burn_in = config.burn_in;
    sim.x0 = config.x0;
    Observations obs;
    try {
      obs = simulate_observations(model, config.theta0, design.horizon, design.h,
                                  driver, wiener, jumps, sim);
    } catch (const Error&) {
      return;  // counted as unavailable for every shell
    }
    const double m0 = contrast(obs, model, config.theta0).m;
    std::vector<double> shell_max(n_radii,
                                  -std::numeric_limits<double>::infinity());
    std::vector<bool> shell_any(n_radii, false);
    for (int r = 0; r < n_radii; ++r) {
      for (const VectorXd& dir : directions) {
        try {
          const double z =
              random_field_Z(obs, model, config.theta0, radii[r] * dir, m0);
          shell_max[r] = std::max(shell_max[r], z);
          shell_any[r] = true;
        } catch (const DomainExceededError&) {
          ++skipped[k][r];
        }
      }
    }
    // sup over |u| > r approximated by the max over all sampled shells >= r
    double tail = -std::numeric_limits<double>::infinity();
    bool tail_any = false;
    for (int r = n_radii - 1; r >= 0; --r) {
      if (shell_any[r]) {
        tail = std::max(tail, shell_max[r]);
        tail_any = true;
      }
      if (tail_any) events[k][r] = (tail >= std::exp(-radii[r])) ? 1 : 0;
    }
  });

  std::vector<FieldScanRow> rows;
  rows.push_back({0.0, 1.0, 0.0, 0});
  for (int r = 0; r < n_radii; ++r) {
    long count = 0, total = 0, skip_total = 0;
    for (int k = 0; k < config.replications; ++k) {
      if (events[k][r] >= 0) {
        ++total;
        count += events[k][r];
      }
      skip_total += skipped[k][r];
    }
    FieldScanRow row;
    row.radius = radii[r];
    row.probability = total > 0 ? static_cast<double>(count) / total : 0.0;
    row.weighted = std::pow(radii[r], config.m_exponent) * row.probability;
    row.skipped_cells = skip_total;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Config parsing and result serialization

inline ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig config;
  config.model_id = doc.value("model", config.model_id);
  if (doc.contains("theta0")) {
    config.theta0.alpha = vector_from_json(doc["theta0"].at("alpha"));
    config.theta0.beta = vector_from_json(doc["theta0"].at("beta"));
  } else {
    throw ConfigError("config: theta0 is required");
  }
  if (doc.contains("drivers"))
    for (const json& d : doc["drivers"]) config.drivers.push_back(driver_from_json(d));
  else if (doc.contains("driver"))
    config.drivers.push_back(driver_from_json(doc["driver"]));
  if (doc.contains("designs"))
    for (const json& d : doc["designs"])
      config.designs.push_back({d.at("T").get<double>(), d.at("h").get<double>()});
  config.replications = doc.value("replications", config.replications);
  config.base_seed = doc.value("base_seed", config.base_seed);
  config.fine_div = doc.value("fine_div", config.fine_div);
  config.out = doc.value("out", config.out);
  config.study = doc.value("study", config.study);
  config.starts = doc.value("starts", config.starts);
  config.threads = doc.value("threads", config.threads);
  config.burn_in = doc.value("burn_in", config.burn_in);
  if (doc.contains("x0")) config.x0 = vector_from_json(doc["x0"]);
  if (doc.contains("box")) {
    ParamBox box;
    box.lower = vector_from_json(doc["box"].at("lower"));
    box.upper = vector_from_json(doc["box"].at("upper"));
    box.p_alpha = static_cast<int>(config.theta0.alpha.size());
    config.box = box;
  }
  if (doc.contains("fieldscan")) {
    const json& fs = doc["fieldscan"];
    if (fs.contains("radii"))
      for (const json& r : fs["radii"]) config.radii.push_back(r.get<double>());
    config.grid_points = fs.value("grid_points", config.grid_points);
    config.m_exponent = fs.value("m_exponent", config.m_exponent);
  }
  return config;
}

inline json config_to_json(const ExperimentConfig& config) {
  json doc;
  doc["model"] = config.model_id;
  doc["theta0"] = {{"alpha", to_json(config.theta0.alpha)},
                   {"beta", to_json(config.theta0.beta)}};
  json drivers = json::array();
  for (const LevyDriver& d : config.drivers) drivers.push_back(driver_to_json(d));
  doc["drivers"] = drivers;
  json designs = json::array();
  for (const Design& d : config.designs)
    designs.push_back({{"T", d.horizon}, {"h", d.h}});
  doc["designs"] = designs;
  doc["replications"] = config.replications;
  doc["base_seed"] = config.base_seed;
  doc["fine_div"] = config.fine_div;
  doc["study"] = config.study;
  doc["starts"] = config.starts;
  doc["threads"] = config.threads;
  doc["burn_in"] = config.burn_in;
  if (config.x0.size()) doc["x0"] = to_json(config.x0);
  if (config.box)
    doc["box"] = {{"lower", to_json(config.box->lower)},
                  {"upper", to_json(config.box->upper)}};
  if (!config.radii.empty())
    doc["fieldscan"] = {{"radii", config.radii},
                        {"grid_points", config.grid_points},
                        {"m_exponent", config.m_exponent}};
  return doc;
}

// Fixed header: design columns first, then statistics.  Coverage columns stay
// empty for plain table studies.
inline void write_mc_csv(const std::string& path, const MCResult& result,
                         int p_alpha, int p_beta) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << std::setprecision(12);
  out << "driver,delta,T,h,n,reps,converged,boundary,failed,sigma_failed";
  for (int i = 1; i <= p_alpha; ++i) out << ",mean_alpha" << i << ",sd_alpha" << i;
  for (int i = 1; i <= p_beta; ++i) out << ",mean_beta" << i << ",sd_beta" << i;
  out << ",corr_alpha1_beta1";
  for (int i = 1; i <= p_alpha; ++i) out << ",cover95_alpha" << i;
  for (int i = 1; i <= p_beta; ++i) out << ",cover95_beta" << i;
  out << ",wall_s\n";
  for (const CellResult& cell : result.cells) {
    out << cell.driver << "," << cell.delta << "," << cell.design.horizon << ","
        << cell.design.h << "," << cell.n << "," << cell.reps << ","
        << cell.converged << "," << cell.boundary << "," << cell.failed << ","
        << cell.sigma_failed;
    const int p = p_alpha + p_beta;
    for (int i = 0; i < p; ++i) {
      if (cell.mean_theta.size() == p)
        out << "," << cell.mean_theta[i] << "," << cell.sd_theta[i];
      else
        out << ",,";
    }
    out << "," << cell.corr_alpha_beta;
    for (int i = 0; i < p; ++i) {
      if (cell.coverage95.size() == p)
        out << "," << cell.coverage95[i];
      else
        out << ",";
    }
    out << "," << cell.wall_seconds << "\n";
  }
}

inline void write_fieldscan_csv(const std::string& path,
                                const std::vector<FieldScanRow>& rows,
                                double m_exponent) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << std::setprecision(12);
  out << "r,prob,r_pow_" << m_exponent << "_times_prob,skipped_cells\n";
  for (const FieldScanRow& row : rows)
    out << row.radius << "," << row.probability << "," << row.weighted << ","
        << row.skipped_cells << "\n";
}

inline json run_manifest(const ExperimentConfig& config, double total_seconds) {
  json doc;
  doc["config"] = config_to_json(config);
  doc["seed"] = config.base_seed;
  doc["versions"] = {{"levyql", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
  doc["timings"] = {{"total_s", total_seconds}};
  return doc;
}

}  // namespace levyql
