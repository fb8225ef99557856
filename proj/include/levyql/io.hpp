#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "levyql/avar.hpp"
#include "levyql/errors.hpp"
#include "levyql/estimator.hpp"
#include "levyql/levy_driver.hpp"
#include "levyql/model.hpp"
#include "levyql/simulate.hpp"

namespace levyql {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

inline void write_path_csv(const std::string& path, const Observations& obs) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << std::setprecision(17);
  out << "t";
  for (int i = 1; i <= obs.dim(); ++i) out << ",x" << i;
  out << "\n";
  for (int j = 0; j < obs.times.size(); ++j) {
    out << obs.times[j];
    for (int i = 0; i < obs.dim(); ++i) out << "," << obs.states(j, i);
    out << "\n";
  }
}

// Reads a t,x1..xd table; a leading header row is detected and skipped.
inline Observations read_path_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ConfigError("non-numeric cell in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ConfigError("too few rows in " + path);
  const int d = static_cast<int>(rows.front().size()) - 1;
  if (d < 1) throw ConfigError("need a time column and at least one state column");
  VectorXd times(rows.size());
  MatrixXd states(rows.size(), d);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (static_cast<int>(rows[j].size()) != d + 1)
      throw ConfigError("ragged row in " + path);
    times[j] = rows[j][0];
    for (int i = 0; i < d; ++i) states(j, i) = rows[j][i + 1];
  }
  return Observations::from_grid(std::move(times), std::move(states));
}

// One time value per line (or first CSV column); header tolerated.
inline VectorXd read_times_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<double> times;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    try {
      times.push_back(std::stod(cell));
    } catch (...) {
      if (times.empty()) continue;
      throw ConfigError("non-numeric time in " + path);
    }
  }
  VectorXd out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = times[i];
  return out;
}

// ---------------------------------------------------------------------------
// JSON adapters

inline json to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline VectorXd vector_from_json(const json& arr) {
  VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

inline LevyDriver driver_from_json(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "wiener") return LevyDriver::wiener(spec.value("dim", 1));
  if (kind == "nig") return LevyDriver::nig(spec.at("delta").get<double>());
  if (kind == "cp")
    return LevyDriver::compound_poisson(spec.at("lambda").get<double>(),
                                        spec.value("jump", "rademacher"));
  throw ConfigError("unknown driver kind: " + kind);
}

inline json driver_to_json(const LevyDriver& d) {
  json out;
  switch (d.kind()) {
    case LevyDriver::Kind::Wiener:
      out["kind"] = "wiener";
      out["dim"] = d.dim();
      break;
    case LevyDriver::Kind::NIG:
      out["kind"] = "nig";
      out["delta"] = d.delta();
      break;
    case LevyDriver::Kind::CompoundPoisson:
      out["kind"] = "cp";
      out["lambda"] = d.lambda();
      break;
  }
  return out;
}

inline json report_to_json(const EstimateReport& report) {
  json out;
  out["theta_hat"] = {{"alpha", to_json(report.theta_hat.alpha)},
                      {"beta", to_json(report.theta_hat.beta)}};
  out["m"] = report.m_at_hat;
  out["q"] = report.q_at_hat;
  out["score_norm"] = report.score_norm;
  out["converged"] = report.converged;
  out["boundary_hit"] = report.boundary_hit;
  out["evaluations"] = report.evaluations;
  out["used_fd_derivatives"] = report.used_fd_derivatives;
  json starts = json::array();
  for (const StartRecord& s : report.starts) {
    json row;
    row["start"] = to_json(s.start_point);
    row["ok"] = s.ok;
    row["iterations"] = s.iterations;
    row["nm_converged"] = s.nm_converged;
    if (s.ok) {
      row["final"] = to_json(s.final_point);
      row["m"] = s.m;
    } else {
      row["error"] = s.error;
    }
    starts.push_back(std::move(row));
  }
  out["starts"] = starts;
  return out;
}

inline json sigma_to_json(const SigmaHat& s, const ThetaPoint& theta_hat,
                          double horizon) {
  json out;
  out["g_prime_alpha_hat"] = to_json(s.g_prime_alpha_hat);
  out["g_prime_beta_hat"] = to_json(s.g_prime_beta_hat);
  out["v_alpha_beta_hat"] = to_json(s.v_alpha_beta_hat);
  out["v_beta_beta_hat"] = to_json(s.v_beta_beta_hat);
  out["sigma_hat"] = to_json(s.sigma_hat);
  json se = json::array();
  for (int i = 0; i < s.sigma_hat.rows(); ++i)
    se.push_back(std::sqrt(std::max(0.0, s.sigma_hat(i, i)) / horizon));
  out["std_error"] = se;
  for (double level : {0.90, 0.95, 0.99}) {
    json intervals = json::array();
    for (const ConfidenceInterval& ci :
         confidence_intervals(theta_hat, s, horizon, level)) {
      intervals.push_back({{"estimate", ci.estimate},
                           {"std_error", ci.std_error},
                           {"lower", ci.lower},
                           {"upper", ci.upper}});
    }
    out["ci" + std::to_string(static_cast<int>(level * 100))] = intervals;
  }
  return out;
}

inline void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace levyql
