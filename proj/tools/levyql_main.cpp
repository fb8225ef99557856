// levyql command-line tool: simulate paths of Levy-driven SDEs, fit the
// Gaussian quasi-likelihood estimator, and run Monte Carlo studies.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levyql/levyql.hpp"

namespace {

using namespace levyql;

VectorXd parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  VectorXd out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i];
  return out;
}

ThetaPoint parse_theta(const std::string& text, const ModelSpec& model) {
  const VectorXd stacked = parse_list(text);
  if (stacked.size() != model.dim_theta())
    throw ConfigError("--theta needs " + std::to_string(model.dim_theta()) +
                      " comma-separated values");
  return ThetaPoint::from_stacked(stacked, model.dim_alpha);
}

// "l1,l2;u1,u2"
ParamBox parse_box(const std::string& text, const ModelSpec& model) {
  const auto split = text.find(';');
  if (split == std::string::npos)
    throw ConfigError("--box format is lower1,..;upper1,..");
  ParamBox box;
  box.lower = parse_list(text.substr(0, split));
  box.upper = parse_list(text.substr(split + 1));
  box.p_alpha = model.dim_alpha;
  box.validate();
  return box;
}

LevyDriver parse_driver(const std::string& text) {
  return driver_from_json(json::parse(text));
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json doc;
  in >> doc;
  return doc;
}

int cmd_simulate(const std::string& model_id, const std::string& theta_text,
                 double horizon, double h, double fine_div, std::uint64_t seed,
                 const std::string& driver_text, const std::string& out_path,
                 const std::string& irregular_path, double burn_in,
                 const std::string& x0_text) {
  const ModelSpec model = make_model(model_id);
  const ThetaPoint theta = parse_theta(theta_text, model);
  const LevyDriver driver = parse_driver(driver_text);
  RandomStream base(seed);
  RandomStream wiener = base.split(1);
  RandomStream jumps = base.split(2);

  const double fine_step = h / fine_div;
  VectorXd x0 = x0_text.empty() ? VectorXd::Zero(model.dim_x).eval()
                                : parse_list(x0_text);
  if (burn_in > 0.0) {
    const double warm = std::ceil(burn_in / fine_step) * fine_step;
    const FinePath warmup =
        euler_path(model, theta, x0, warm, fine_step, wiener, driver, jumps);
    x0 = warmup.states.row(warmup.steps()).transpose();
  }

  Observations obs;
  if (!irregular_path.empty()) {
    const VectorXd times = read_times_file(irregular_path);
    const double t_max = times[times.size() - 1];
    const FinePath path =
        euler_path(model, theta, x0, t_max, fine_step, wiener, driver, jumps);
    obs = subsample_at_times(path, times);
  } else {
    const FinePath path =
        euler_path(model, theta, x0, horizon, fine_step, wiener, driver, jumps);
    obs = subsample(path, h);
  }
  if (obs.irregular_warning)
    std::cerr << "warning: irregularity ratio " << obs.irregularity_ratio
              << " below 0.5; the asymptotic theory wants it near 1\n";
  write_path_csv(out_path, obs);
  std::cout << "wrote " << obs.n() << " observation steps to " << out_path
            << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& model_id,
            const std::string& box_text, int starts, std::uint64_t seed,
            const std::string& out_path, const std::string& trace_path) {
  ModelSpec model = make_model(model_id);
  if (!box_text.empty()) model.param_box = parse_box(box_text, model);
  const Observations obs = read_path_csv(data_path);

  std::ofstream trace_file;
  FitOptions options;
  options.starts = starts;
  options.seed = seed;
  if (!trace_path.empty()) {
    trace_file.open(trace_path);
    if (!trace_file) throw ConfigError("cannot open for writing: " + trace_path);
    trace_file << "phase,start,iter";
    for (int i = 1; i <= model.dim_theta(); ++i) trace_file << ",theta" << i;
    trace_file << ",q,m,score_norm\n";
    trace_file << std::setprecision(12);
    options.trace = [&](const TraceRow& row) {
      trace_file << row.phase << "," << row.start_index << "," << row.iteration;
      for (int i = 0; i < row.theta.size(); ++i) trace_file << "," << row.theta[i];
      trace_file << "," << row.q << "," << row.m << "," << row.score_norm << "\n";
    };
  }

  const EstimateReport report = fit(obs, model, options);
  json doc = report_to_json(report);
  doc["model"] = model_id;
  doc["n"] = obs.n();
  doc["T"] = obs.horizon;
  try {
    const SigmaHat sigma = estimate_sigma(obs, model, report.theta_hat);
    doc["sigma"] = sigma_to_json(sigma, report.theta_hat, obs.horizon);
  } catch (const Error& e) {
    doc["sigma_error"] = e.what();
  }
  write_json_file(out_path.empty() ? "fit_report.json" : out_path, doc);
  std::cout << "theta_hat:";
  const VectorXd stacked = report.theta_hat.stacked();
  for (int i = 0; i < stacked.size(); ++i) std::cout << " " << stacked[i];
  std::cout << "  (m = " << report.m_at_hat
            << ", |G|/sqrt(T) = " << report.score_norm
            << (report.boundary_hit ? ", boundary" : "") << ")\n";
  return 0;
}

int cmd_mc(const std::string& config_path, const std::string& study_override,
           const std::string& out_override) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig config = config_from_json(load_config(config_path));
  if (!study_override.empty()) config.study = study_override;
  if (!out_override.empty()) config.out = out_override;
  const std::string prefix = config.out.empty() ? "mc_results" : config.out;
  const ModelSpec model = make_model(config.model_id);

  if (config.study == "fieldscan") {
    const std::vector<FieldScanRow> rows = run_fieldscan(config);
    write_fieldscan_csv(prefix + ".csv", rows, config.m_exponent);
  } else {
    const MCResult result = config.study == "coverage" ? run_coverage(config)
                                                       : run_table1(config);
    write_mc_csv(prefix + ".csv", result, model.dim_alpha, model.dim_beta);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_json_file(prefix + "_manifest.json", run_manifest(config, elapsed));
  std::cout << "wrote " << prefix << ".csv and " << prefix
            << "_manifest.json in " << elapsed << " s\n";
  return 0;
}

int cmd_limits(const std::string& model_id, const std::string& theta_text,
               const std::string& driver_text, double averaging_T, double h_avg,
               double burn_in, std::uint64_t seed, const std::string& out_path,
               bool with_efficiency) {
  const ModelSpec model = make_model(model_id);
  const ThetaPoint theta0 = parse_theta(theta_text, model);
  const LevyDriver driver = parse_driver(driver_text);
  Pi0Options opt;
  opt.averaging_T = averaging_T;
  opt.h_avg = h_avg;
  opt.burn_in = burn_in;
  opt.seed = seed;
  const Observations path = simulate_pi0_path(model, theta0, driver, opt);
  const LimitReport report = population_limits(model, theta0, driver, path);

  json doc;
  doc["model"] = model_id;
  doc["averaging_T"] = report.averaging_T;
  doc["g_inf_prime_alpha"] = to_json(report.g_inf_prime_alpha);
  doc["g_inf_prime_beta"] = to_json(report.g_inf_prime_beta);
  doc["v_alpha_beta"] = to_json(report.v_alpha_beta);
  doc["v_beta_beta"] = to_json(report.v_beta_beta);
  doc["sigma0"] = to_json(report.sigma0);
  if (with_efficiency) {
    try {
      const EfficiencyLoss loss = efficiency_loss(model, theta0, path);
      doc["efficiency_loss"] = loss.path_average;
      if (loss.closed_form) doc["efficiency_loss_closed_form"] = *loss.closed_form;
    } catch (const UnsupportedError& e) {
      doc["efficiency_loss_error"] = e.what();
    }
  }
  write_json_file(out_path.empty() ? "limits.json" : out_path, doc);
  std::cout << "wrote limit report\n";
  return 0;
}

int cmd_diagnose(const std::string& model_id, const std::string& theta_text,
                 const std::string& driver_text, const std::string& out_path) {
  const ModelSpec model = make_model(model_id);
  const ThetaPoint theta0 = parse_theta(theta_text, model);
  const LevyDriver driver = parse_driver(driver_text);
  const ErgodicityReport report = ergodicity_diagnostics(model, theta0, driver);
  json doc;
  doc["model"] = model_id;
  json checks = json::array();
  for (const ErgodicityCheck& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"pass", c.pass},
                      {"note", c.note}});
    std::cout << (c.pass ? "[pass] " : "[warn] ") << c.name << " = " << c.value
              << "\n";
  }
  doc["checks"] = checks;
  doc["all_pass"] = report.all_pass();
  write_json_file(out_path.empty() ? "diagnose.json" : out_path, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian quasi-likelihood estimation for Levy-driven SDEs"};
  app.require_subcommand(1);
  // --h is the observation-step flag, so help stays on --help only
  app.set_help_flag("--help", "print help");
  app.option_defaults()->ignore_case(false);

  // simulate
  std::string model_id = "nig-hyperbolic", theta_text = "1,1";
  std::string driver_text = R"({"kind":"nig","delta":10.0})";
  std::string out_path, irregular_path, x0_text;
  double horizon = 100.0, h = 0.01, fine_div = 30.0, burn_in = 0.0;
  std::uint64_t seed = 1;
  auto* sim = app.add_subcommand("simulate", "simulate one path to CSV");
  sim->set_help_flag("--help", "print help");
  sim->add_option("--model", model_id, "model id");
  sim->add_option("--theta", theta_text, "comma-separated alpha,beta");
  sim->add_option("--T", horizon, "observation horizon");
  sim->add_option("--h", h, "observation step");
  sim->add_option("--fine-div", fine_div, "fine-grid divisor");
  sim->add_option("--seed", seed, "stream seed");
  sim->add_option("--driver", driver_text, "driver JSON");
  sim->add_option("--out", out_path, "output CSV (t,x1..xd)")->required();
  sim->add_option("--irregular", irregular_path, "file of explicit times");
  sim->add_option("--burn", burn_in, "warm-up horizon");
  sim->add_option("--x0", x0_text, "starting state");

  // fit
  std::string data_path, box_text, trace_path, fit_out;
  int starts = 8;
  std::uint64_t fit_seed = 0;
  auto* fit_cmd = app.add_subcommand("fit", "fit the estimator to a CSV path");
  fit_cmd->set_help_flag("--help", "print help");
  fit_cmd->add_option("--data", data_path, "input CSV (t,x1..xd)")->required();
  fit_cmd->add_option("--model", model_id, "model id");
  fit_cmd->add_option("--box", box_text, "parameter box lower1,..;upper1,..");
  fit_cmd->add_option("--starts", starts, "multistart count");
  fit_cmd->add_option("--seed", fit_seed, "multistart scrambling seed");
  fit_cmd->add_option("--out", fit_out, "output JSON report");
  fit_cmd->add_option("--trace", trace_path, "CSV of optimizer iterates");

  // mc / coverage / fieldscan
  std::string config_path, mc_out;
  auto* mc = app.add_subcommand("mc", "Monte Carlo study from a JSON config");
  mc->set_help_flag("--help", "print help");
  mc->add_option("--config", config_path, "config JSON")->required();
  mc->add_option("--out", mc_out, "output prefix override");
  auto* coverage = app.add_subcommand("coverage", "coverage study (forces study=coverage)");
  coverage->set_help_flag("--help", "print help");
  coverage->add_option("--config", config_path, "config JSON")->required();
  coverage->add_option("--out", mc_out, "output prefix override");
  auto* fieldscan = app.add_subcommand("fieldscan", "contrast-field tail scan");
  fieldscan->set_help_flag("--help", "print help");
  fieldscan->add_option("--config", config_path, "config JSON")->required();
  fieldscan->add_option("--out", mc_out, "output prefix override");

  // limits
  double averaging_T = 5000.0, h_avg = 0.01, limits_burn = 50.0;
  std::uint64_t limits_seed = 1;
  std::string limits_out;
  bool with_efficiency = false;
  auto* limits = app.add_subcommand("limits", "limit covariance by long-path averaging");
  limits->set_help_flag("--help", "print help");
  limits->add_option("--model", model_id, "model id");
  limits->add_option("--theta", theta_text, "true parameter");
  limits->add_option("--driver", driver_text, "driver JSON");
  limits->add_option("--T", averaging_T, "averaging horizon");
  limits->add_option("--h", h_avg, "averaging step");
  limits->add_option("--burn", limits_burn, "warm-up horizon");
  limits->add_option("--seed", limits_seed, "stream seed");
  limits->add_option("--out", limits_out, "output JSON");
  limits->add_flag("--effloss", with_efficiency, "include drift efficiency loss");

  // diagnose
  std::string diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "stability condition screen");
  diagnose->set_help_flag("--help", "print help");
  diagnose->add_option("--model", model_id, "model id");
  diagnose->add_option("--theta", theta_text, "true parameter");
  diagnose->add_option("--driver", driver_text, "driver JSON");
  diagnose->add_option("--out", diag_out, "output JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(model_id, theta_text, horizon, h, fine_div, seed,
                          driver_text, out_path, irregular_path, burn_in,
                          x0_text);
    if (fit_cmd->parsed())
      return cmd_fit(data_path, model_id, box_text, starts, fit_seed, fit_out,
                     trace_path);
    if (mc->parsed()) return cmd_mc(config_path, "", mc_out);
    if (coverage->parsed()) return cmd_mc(config_path, "coverage", mc_out);
    if (fieldscan->parsed()) return cmd_mc(config_path, "fieldscan", mc_out);
    if (limits->parsed())
      return cmd_limits(model_id, theta_text, driver_text, averaging_T, h_avg,
                        limits_burn, limits_seed, limits_out, with_efficiency);
    if (diagnose->parsed())
      return cmd_diagnose(model_id, theta_text, driver_text, diag_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
