// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "stabcone/admittance.hpp"
#include "stabcone/common.hpp"
#include "stabcone/scenario.hpp"

namespace stabcone {

struct ResidualStats {
  double rms = 0.0;
  double max_abs = 0.0;
  double mean_target_magnitude = 0.0;
  double normal_equation_residual = 0.0;  // |X^T r|_inf
};

// Affine surrogate for one impedance-derived target over the commitment
// features (x_g, alpha_cm, eta_m).
struct LinearSurrogate {
  std::string target;
  std::string kind;  // "impedance_ratio" or "short_circuit_capacity"
  std::vector<std::string> features;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  ResidualStats residuals;
  bool ridge_fallback = false;

  double predict(const Eigen::VectorXd& feature_values) const {
    if (feature_values.size() != coefficients.size()) {
      throw DomainError("feature vector size mismatch");
    }
    return coefficients.dot(feature_values) + intercept;
  }
};

struct EqualityTarget {
  std::string name;
  std::string kind;
  Eigen::VectorXd values;  // one per retained scenario
};

struct EqualityDataset {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd features;  // rows: scenarios kept; cols: feature_names
  std::vector<std::int64_t> scenario_ids;
  std::vector<EqualityTarget> targets;
  std::size_t skipped_singular = 0;
};

// Samples the impedance ratios |Z_cc'|/|Z_cc| (ordered GFL pairs) and the
// short-circuit capacities Gamma_c = 1/(2|Z_cc|) across the scenario set.
inline EqualityDataset build_equality_targets(const NetworkModel& model,
                                              const std::vector<Scenario>& scenarios) {
  EqualityDataset ds;
  ds.feature_names = equality_feature_names(model);
  const auto gfl_buses = model.gfl_bus_indices();
  const std::size_t n_gfl = gfl_buses.size();

  std::vector<std::string> target_names;
  for (std::size_t k = 0; k < n_gfl; ++k) {
    for (std::size_t l = 0; l < n_gfl; ++l) {
      if (k == l) continue;
      EqualityTarget t;
      t.name = "zratio[" + model.gfl_units[k].id + "|" + model.gfl_units[l].id + "]";
      t.kind = "impedance_ratio";
      ds.targets.push_back(std::move(t));
    }
  }
  for (std::size_t k = 0; k < n_gfl; ++k) {
    EqualityTarget t;
    t.name = "gamma[" + model.gfl_units[k].id + "]";
    t.kind = "short_circuit_capacity";
    ds.targets.push_back(std::move(t));
  }

  std::vector<Eigen::VectorXd> feature_rows;
  std::vector<std::vector<double>> target_rows(ds.targets.size());
  for (const auto& sc : scenarios) {
    ImpedanceMatrix z;
    try {
      z = invert_to_impedance(smallsignal_admittance(model, sc));
    } catch (const SingularNetworkError&) {
      ++ds.skipped_singular;
      continue;
    }
    const auto fv = interaction_features(model, sc);
    feature_rows.push_back(Eigen::Map<const Eigen::VectorXd>(
        fv.values.data(), static_cast<Eigen::Index>(fv.values.size())));
    ds.scenario_ids.push_back(sc.id);
    std::size_t t = 0;
    for (std::size_t k = 0; k < n_gfl; ++k) {
      const double self = z.magnitude(gfl_buses[k], gfl_buses[k]);
      for (std::size_t l = 0; l < n_gfl; ++l) {
        if (k == l) continue;
        target_rows[t++].push_back(z.magnitude(gfl_buses[k], gfl_buses[l]) / self);
      }
    }
    for (std::size_t k = 0; k < n_gfl; ++k) {
      target_rows[t++].push_back(1.0 / (2.0 * z.magnitude(gfl_buses[k], gfl_buses[k])));
    }
  }

  ds.features.resize(static_cast<Eigen::Index>(feature_rows.size()),
                     static_cast<Eigen::Index>(ds.feature_names.size()));
  for (std::size_t r = 0; r < feature_rows.size(); ++r) {
    ds.features.row(static_cast<Eigen::Index>(r)) = feature_rows[r];
  }
  for (std::size_t t = 0; t < ds.targets.size(); ++t) {
    ds.targets[t].values = Eigen::Map<const Eigen::VectorXd>(
        target_rows[t].data(), static_cast<Eigen::Index>(target_rows[t].size()));
  }
  return ds;
}

// Ordinary least squares with an intercept column; falls back to a small
// ridge shift when the design matrix is rank deficient.
inline LinearSurrogate fit_equality_linear(const EqualityDataset& ds, std::size_t target_index,
                                           double ridge_lambda = 1e-8) {
  if (target_index >= ds.targets.size()) throw DomainError("target index out of range");
  const auto& target = ds.targets[target_index];
  const Eigen::Index rows = ds.features.rows();
  if (rows == 0) throw DomainError("equality regression needs a nonempty dataset");
  const Eigen::Index p = ds.features.cols();

  Eigen::MatrixXd design(rows, p + 1);
  design.leftCols(p) = ds.features;
  design.col(p).setOnes();

  LinearSurrogate s;
  s.target = target.name;
  s.kind = target.kind;
  s.features = ds.feature_names;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd beta;
  if (qr.rank() < design.cols()) {
    s.ridge_fallback = true;
    const Eigen::MatrixXd gram =
        design.transpose() * design +
        ridge_lambda * Eigen::MatrixXd::Identity(design.cols(), design.cols());
    beta = gram.ldlt().solve(design.transpose() * target.values);
  } else {
    beta = qr.solve(target.values);
  }
  s.coefficients = beta.head(p);
  s.intercept = beta(p);

  const Eigen::VectorXd residual = design * beta - target.values;
  s.residuals.rms = std::sqrt(residual.squaredNorm() / static_cast<double>(rows));
  s.residuals.max_abs = residual.cwiseAbs().maxCoeff();
  s.residuals.mean_target_magnitude = target.values.cwiseAbs().mean();
  s.residuals.normal_equation_residual =
      (design.transpose() * residual).cwiseAbs().maxCoeff();
  return s;
}

inline std::vector<LinearSurrogate> fit_all_equality_surrogates(const EqualityDataset& ds) {
  std::vector<LinearSurrogate> out;
  out.reserve(ds.targets.size());
  for (std::size_t t = 0; t < ds.targets.size(); ++t) out.push_back(fit_equality_linear(ds, t));
  return out;
}

}  // namespace stabcone
