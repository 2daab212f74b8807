// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabcone/common.hpp"
#include "stabcone/metrics.hpp"
#include "stabcone/scenario.hpp"

namespace stabcone {

enum class OmegaLabel : int { omega1 = 1, omega2 = 2, omega3 = 3 };

inline const char* to_string(OmegaLabel label) {
  switch (label) {
    case OmegaLabel::omega1: return "omega1";
    case OmegaLabel::omega2: return "omega2";
    case OmegaLabel::omega3: return "omega3";
  }
  return "?";
}

struct StabilitySample {
  std::int64_t scenario_id = -1;
  Eigen::VectorXd x;                      // frozen variable layout
  double g = std::numeric_limits<double>::quiet_NaN();
  bool structurally_infeasible = false;   // metric undefined; forced into omega1
  OmegaLabel label = OmegaLabel::omega1;
};

struct DatasetCounts {
  std::size_t omega1 = 0;
  std::size_t omega2 = 0;
  std::size_t omega3 = 0;
  std::size_t infeasible = 0;

  std::size_t total() const { return omega1 + omega2 + omega3; }
};

struct StabilityDataset {
  std::string metric;                  // "g1".."g6"
  std::vector<std::string> variables;  // frozen X layout
  std::vector<StabilitySample> samples;
  double g_lim = 0.0;
  double nu = 0.0;

  DatasetCounts counts() const {
    DatasetCounts c;
    for (const auto& s : samples) {
      if (s.structurally_infeasible) ++c.infeasible;
      switch (s.label) {
        case OmegaLabel::omega1: ++c.omega1; break;
        case OmegaLabel::omega2: ++c.omega2; break;
        case OmegaLabel::omega3: ++c.omega3; break;
      }
    }
    return c;
  }
};

// Half-open band labeling: omega1 below the limit, omega2 in [lim, lim+nu),
// omega3 at and above lim+nu. Structurally infeasible samples always land in
// omega1 so the fitted surrogate is forced to reject them.
inline void partition(StabilityDataset& dataset, double g_lim, double nu) {
  if (nu < 0.0) throw DomainError("band width nu must be >= 0");
  dataset.g_lim = g_lim;
  dataset.nu = nu;
  for (auto& s : dataset.samples) {
    if (s.structurally_infeasible || s.g < g_lim) {
      s.label = OmegaLabel::omega1;
    } else if (s.g < g_lim + nu) {
      s.label = OmegaLabel::omega2;
    } else {
      s.label = OmegaLabel::omega3;
    }
  }
}

// ---------------------------------------------------------------------------
// Variable layouts. Blocks appear in file order: SG commitments, GFM shares,
// then the metric-specific tail.
// ---------------------------------------------------------------------------

inline std::vector<std::string> metric_variable_layout(const NetworkModel& model, MetricId id) {
  std::vector<std::string> names;
  const auto add_x = [&] {
    for (const auto& u : model.sg_units) names.push_back("x[" + u.id + "]");
  };
  const auto add_alpha_gfm = [&] {
    for (const auto& u : model.gfm_units) names.push_back("alpha[" + u.id + "]");
  };
  switch (id) {
    case MetricId::g1:
      add_x();
      add_alpha_gfm();
      break;
    case MetricId::g2:
      add_x();
      add_alpha_gfm();
      for (const auto& u : model.gfl_units) names.push_back("P[" + u.id + "]");
      break;
    case MetricId::g3:
    case MetricId::g4:
      add_x();
      add_alpha_gfm();
      for (const auto& u : model.gfl_units) names.push_back("alpha[" + u.id + "]");
      break;
    case MetricId::g5:
      names = {"P_hat", "Q_hat", "Gamma"};
      break;
    case MetricId::g6:
      // wind-farm columns are appended by the dataset builder, which knows |F|
      names = {"H", "R"};
      break;
  }
  return names;
}

inline Eigen::VectorXd metric_feature_vector(const NetworkModel& model, const Scenario& s,
                                             MetricId id) {
  s.validate(model);
  std::vector<double> v;
  const auto add_x = [&] {
    for (auto xg : s.x) v.push_back(static_cast<double>(xg));
  };
  switch (id) {
    case MetricId::g1:
      add_x();
      v.insert(v.end(), s.alpha_gfm.begin(), s.alpha_gfm.end());
      break;
    case MetricId::g2:
      add_x();
      v.insert(v.end(), s.alpha_gfm.begin(), s.alpha_gfm.end());
      v.insert(v.end(), s.gfl_p.begin(), s.gfl_p.end());
      break;
    case MetricId::g3:
    case MetricId::g4:
      add_x();
      v.insert(v.end(), s.alpha_gfm.begin(), s.alpha_gfm.end());
      v.insert(v.end(), s.alpha_gfl.begin(), s.alpha_gfl.end());
      break;
    default:
      throw DomainError("metric has no scenario feature layout");
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Dataset generation. One sample per scenario for g1-g4 (worst case over the
// metric's instances); per (scenario, GFL unit) for g5 with the cone's own
// coordinates; a single nominal row for g6.
// ---------------------------------------------------------------------------

inline StabilityDataset evaluate_metric_dataset(const NetworkModel& model,
                                                const std::vector<Scenario>& scenarios,
                                                MetricId id,
                                                const ScenarioEvalSettings& settings) {
  StabilityDataset ds;
  ds.metric = to_string(id);
  ds.g_lim = settings.limits.limit_for(id);

  if (id == MetricId::g5) {
    ds.variables = metric_variable_layout(model, id);
    const auto buses = model.gfl_bus_indices();
    for (const auto& sc : scenarios) {
      try {
        const auto z = invert_to_impedance(smallsignal_admittance(model, sc));
        for (std::size_t k = 0; k < buses.size(); ++k) {
          const auto inj = equivalent_injection(z, buses, sc.gfl_p, sc.gfl_q, k);
          const double gamma = short_circuit_capacity_gamma(z, buses[k]);
          StabilitySample sample;
          sample.scenario_id = sc.id;
          sample.x = Eigen::Vector3d(inj.p_hat, inj.q_hat, gamma);
          sample.g = eval_voltage_stability(inj.p_hat, inj.q_hat, gamma).value;
          ds.samples.push_back(std::move(sample));
        }
      } catch (const Error& e) {
        // The cone coordinates themselves are undefined without a voltage
        // source; there is nothing to record for this scenario.
        log_debug("g5: scenario %lld skipped: %s", static_cast<long long>(sc.id), e.what());
      }
    }
    return ds;
  }

  if (id == MetricId::g6) {
    if (!settings.frequency) throw DomainError("frequency parameters not configured");
    const auto& fp = *settings.frequency;
    ds.variables = {"H", "R"};
    for (std::size_t j = 0; j < fp.h_s.size(); ++j) {
      ds.variables.push_back("H_s[" + std::to_string(j + 1) + "]");
    }
    StabilitySample sample;
    sample.scenario_id = 0;
    Eigen::VectorXd x(2 + static_cast<Eigen::Index>(fp.h_s.size()));
    x(0) = fp.inertia;
    x(1) = fp.reserve;
    for (std::size_t j = 0; j < fp.h_s.size(); ++j) x(2 + static_cast<Eigen::Index>(j)) = fp.h_s[j];
    sample.x = x;
    sample.g = eval_nadir_margin(fp).value;
    ds.samples.push_back(std::move(sample));
    return ds;
  }

  ds.variables = metric_variable_layout(model, id);
  for (const auto& sc : scenarios) {
    StabilitySample sample;
    sample.scenario_id = sc.id;
    sample.x = metric_feature_vector(model, sc, id);
    const auto outcome = evaluate_scenario_metric(model, sc, id, settings);
    if (outcome.defined) {
      sample.g = outcome.value;
    } else {
      sample.structurally_infeasible = true;
      log_debug("%s: scenario %lld structurally infeasible: %s", to_string(id),
                static_cast<long long>(sc.id), outcome.note.c_str());
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence: CSV with a JSON sidecar carrying the layout metadata.
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const StabilityDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "scenario_id";
  for (const auto& v : ds.variables) out << "," << v;
  out << ",g_value,label\n";
  for (const auto& s : ds.samples) {
    out << s.scenario_id;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) out << "," << format_double(s.x(i));
    out << "," << format_double(s.g) << "," << to_string(s.label) << "\n";
  }
}

inline void write_dataset_sidecar(const StabilityDataset& ds, const std::string& path,
                                  std::uint64_t seed, int n_c, std::int64_t budget) {
  nlohmann::ordered_json j;
  j["metric"] = ds.metric;
  j["variables"] = ds.variables;
  j["g_lim"] = ds.g_lim;
  j["nu"] = ds.nu;
  j["seed"] = seed;
  j["n_c"] = n_c;
  j["budget"] = budget;
  const auto c = ds.counts();
  j["counts"] = {{"omega1", c.omega1}, {"omega2", c.omega2}, {"omega3", c.omega3}};
  j["structurally_infeasible"] = c.infeasible;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

inline StabilityDataset read_dataset(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream meta_in(sidecar_path);
  if (!meta_in) throw Error("cannot open '" + sidecar_path + "'");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(sidecar_path + ": " + e.what());
  }

  StabilityDataset ds;
  ds.metric = meta.at("metric").get<std::string>();
  ds.variables = meta.at("variables").get<std::vector<std::string>>();
  ds.g_lim = meta.at("g_lim").get<double>();
  ds.nu = meta.at("nu").get<double>();

  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(csv_path + ": empty file");
  {
    std::string expected = "scenario_id";
    for (const auto& v : ds.variables) expected += "," + v;
    expected += ",g_value,label";
    if (line != expected) throw SchemaError(csv_path + ": header does not match sidecar layout");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != ds.variables.size() + 3) {
      throw SchemaError(csv_path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    StabilitySample s;
    s.scenario_id = std::stoll(cells[0]);
    s.x.resize(static_cast<Eigen::Index>(ds.variables.size()));
    for (std::size_t i = 0; i < ds.variables.size(); ++i) {
      s.x(static_cast<Eigen::Index>(i)) = std::strtod(cells[1 + i].c_str(), nullptr);
    }
    s.g = std::strtod(cells[cells.size() - 2].c_str(), nullptr);
    s.structurally_infeasible = std::isnan(s.g);
    const std::string& label = cells.back();
    if (label == "omega1") {
      s.label = OmegaLabel::omega1;
    } else if (label == "omega2") {
      s.label = OmegaLabel::omega2;
    } else if (label == "omega3") {
      s.label = OmegaLabel::omega3;
    } else {
      throw SchemaError(csv_path + ":" + std::to_string(line_no) + ": unknown label '" + label +
                        "'");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace stabcone
