// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabcone/common.hpp"
#include "stabcone/metrics.hpp"

namespace stabcone {

struct FitDiagnostics {
  std::size_t count_omega1 = 0;
  std::size_t count_omega2 = 0;
  std::size_t count_omega3 = 0;
  std::size_t misclassified_omega1 = 0;
  std::size_t misclassified_omega2 = 0;
  std::size_t misclassified_omega3 = 0;
  double omega2_rms = std::numeric_limits<double>::quiet_NaN();
  double repair_shift = 0.0;
  double mu_final = 0.0;
  long iterations = 0;
  int nu_attempts = 0;
  bool exact = false;
  std::uint64_t seed = 0;
};

// Second-order-cone surrogate g~(X) = c.X + d - |A X + b|. The scheduler-side
// constraint is |A X + b| <= c.X + (d - g_lim).
struct SocSurrogate {
  std::string metric;
  std::vector<std::string> variables;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double d = 0.0;
  double g_lim = 0.0;
  double nu = 0.0;
  FitDiagnostics diagnostics;

  int rows() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }

  double evaluate(const Eigen::VectorXd& x) const {
    if (x.size() != A.cols()) throw DomainError("surrogate input dimension mismatch");
    return c.dot(x) + d - (A * x + b).norm();
  }

  double margin(const Eigen::VectorXd& x) const { return evaluate(x) - g_lim; }

  bool is_feasible(const Eigen::VectorXd& x) const { return evaluate(x) >= g_lim; }
};

// ---------------------------------------------------------------------------
// Exact transforms. g5 and g6 are already cones; no data is involved.
// ---------------------------------------------------------------------------

// (Q_hat + Gamma)^2 >= P_hat^2 + Q_hat^2  <=>  |(P_hat, Q_hat)| <= Q_hat + Gamma.
// The right side is automatically nonnegative whenever the squared form holds.
inline SocSurrogate exact_soc_voltage() {
  SocSurrogate s;
  s.metric = to_string(MetricId::g5);
  s.variables = {"P_hat", "Q_hat", "Gamma"};
  s.A = Eigen::MatrixXd::Zero(2, 3);
  s.A(0, 0) = 1.0;
  s.A(1, 1) = 1.0;
  s.b = Eigen::VectorXd::Zero(2);
  s.c = Eigen::Vector3d(0.0, 1.0, 1.0);
  s.d = 0.0;
  s.g_lim = 0.0;
  s.nu = 0.0;
  s.diagnostics.exact = true;
  return s;
}

// Nadir constraint over (H, R, H_s): with x1^2 = dP^2 T/(4 df) - dP T D/4,
//   |(2 x1, sqrt(dP T) sqrt(gamma_j) H_sj ..., H - R)| <= H + R
// which squares to H R >= x1^2 + dP T sum_j gamma_j H_sj^2 / 4.
inline SocSurrogate exact_soc_nadir(const FrequencyParams& fp) {
  fp.validate();
  const double x1_sq = fp.ancillary_squared();
  if (x1_sq < 0.0) throw DomainError("nadir cone needs dP_L/df_lim > D");
  const int farms = static_cast<int>(fp.gamma.size());
  const int dim = 2 + farms;

  SocSurrogate s;
  s.metric = to_string(MetricId::g6);
  s.variables = {"H", "R"};
  for (int j = 0; j < farms; ++j) s.variables.push_back("H_s[" + std::to_string(j + 1) + "]");
  s.A = Eigen::MatrixXd::Zero(farms + 2, dim);
  s.b = Eigen::VectorXd::Zero(farms + 2);
  s.b(0) = 2.0 * std::sqrt(x1_sq);
  const double scale = fp.disturbance * fp.delivery_time;
  for (int j = 0; j < farms; ++j) {
    s.A(1 + j, 2 + j) = std::sqrt(scale * fp.gamma[static_cast<std::size_t>(j)]);
  }
  s.A(farms + 1, 0) = 1.0;
  s.A(farms + 1, 1) = -1.0;
  s.c = Eigen::VectorXd::Zero(dim);
  s.c(0) = 1.0;
  s.c(1) = 1.0;
  s.d = 0.0;
  s.g_lim = 0.0;
  s.nu = 0.0;
  s.diagnostics.exact = true;
  return s;
}

// ---------------------------------------------------------------------------
// JSON export/import. Key order is fixed so identical fits serialize to
// identical bytes.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const SocSurrogate& s) {
  nlohmann::ordered_json j;
  j["metric"] = s.metric;
  j["variables"] = s.variables;
  auto rows = nlohmann::ordered_json::array();
  for (int r = 0; r < s.A.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (int k = 0; k < s.A.cols(); ++k) row.push_back(s.A(r, k));
    rows.push_back(row);
  }
  j["A"] = rows;
  j["b"] = std::vector<double>(s.b.data(), s.b.data() + s.b.size());
  j["c"] = std::vector<double>(s.c.data(), s.c.data() + s.c.size());
  j["d"] = s.d;
  j["g_lim"] = s.g_lim;
  j["nu"] = s.nu;
  nlohmann::ordered_json diag;
  diag["exact"] = s.diagnostics.exact;
  diag["cone_rows"] = s.A.rows();
  diag["counts"] = {{"omega1", s.diagnostics.count_omega1},
                    {"omega2", s.diagnostics.count_omega2},
                    {"omega3", s.diagnostics.count_omega3}};
  diag["misclassified"] = {{"omega1", s.diagnostics.misclassified_omega1},
                           {"omega2", s.diagnostics.misclassified_omega2},
                           {"omega3", s.diagnostics.misclassified_omega3}};
  if (std::isfinite(s.diagnostics.omega2_rms)) {
    diag["omega2_rms"] = s.diagnostics.omega2_rms;
  } else {
    diag["omega2_rms"] = nullptr;
  }
  diag["repair_shift"] = s.diagnostics.repair_shift;
  diag["mu_final"] = s.diagnostics.mu_final;
  diag["iterations"] = s.diagnostics.iterations;
  diag["nu_attempts"] = s.diagnostics.nu_attempts;
  diag["seed"] = s.diagnostics.seed;
  j["diagnostics"] = diag;
  return j;
}

inline SocSurrogate surrogate_from_json(const nlohmann::json& j) {
  SocSurrogate s;
  try {
    s.metric = j.at("metric").get<std::string>();
    s.variables = j.at("variables").get<std::vector<std::string>>();
    const auto& rows = j.at("A");
    const int nr = static_cast<int>(rows.size());
    const int nc = nr > 0 ? static_cast<int>(rows.at(0).size())
                          : static_cast<int>(s.variables.size());
    s.A = Eigen::MatrixXd::Zero(nr, nc);
    for (int r = 0; r < nr; ++r) {
      if (static_cast<int>(rows.at(r).size()) != nc) {
        throw SchemaError("constraint A matrix is ragged");
      }
      for (int k = 0; k < nc; ++k) s.A(r, k) = rows.at(r).at(k).get<double>();
    }
    const auto bv = j.at("b").get<std::vector<double>>();
    const auto cv = j.at("c").get<std::vector<double>>();
    if (static_cast<int>(bv.size()) != nr) throw SchemaError("constraint b size mismatch");
    if (static_cast<int>(cv.size()) != nc) throw SchemaError("constraint c size mismatch");
    s.b = Eigen::Map<const Eigen::VectorXd>(bv.data(), nr);
    s.c = Eigen::Map<const Eigen::VectorXd>(cv.data(), nc);
    s.d = j.at("d").get<double>();
    s.g_lim = j.at("g_lim").get<double>();
    s.nu = j.at("nu").get<double>();
    if (j.contains("diagnostics")) {
      const auto& diag = j.at("diagnostics");
      s.diagnostics.exact = diag.value("exact", false);
      s.diagnostics.seed = diag.value("seed", 0ULL);
      if (diag.contains("counts")) {
        s.diagnostics.count_omega1 = diag["counts"].value("omega1", 0ULL);
        s.diagnostics.count_omega2 = diag["counts"].value("omega2", 0ULL);
        s.diagnostics.count_omega3 = diag["counts"].value("omega3", 0ULL);
      }
      if (diag.contains("misclassified")) {
        s.diagnostics.misclassified_omega1 = diag["misclassified"].value("omega1", 0ULL);
        s.diagnostics.misclassified_omega2 = diag["misclassified"].value("omega2", 0ULL);
        s.diagnostics.misclassified_omega3 = diag["misclassified"].value("omega3", 0ULL);
      }
    }
    if (static_cast<int>(s.variables.size()) != s.A.cols()) {
      throw SchemaError("constraint variables/A dimension mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("constraint JSON: ") + e.what());
  }
  return s;
}

}  // namespace stabcone
