// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabcone/dataset.hpp"
#include "stabcone/fit.hpp"
#include "stabcone/netio.hpp"
#include "stabcone/regression.hpp"
#include "stabcone/soc.hpp"

namespace stabcone {

struct MetricRunInfo {
  std::string metric;
  bool ok = false;
  bool exact = false;
  std::string error;
  DatasetCounts counts;
  std::size_t misclassified_omega1 = 0;
  std::size_t misclassified_omega2 = 0;
  std::size_t misclassified_omega3 = 0;
  double omega2_rms = std::numeric_limits<double>::quiet_NaN();
  double nu = 0.0;
  int nu_attempts = 0;
  double wall_ms = 0.0;
  std::string constraint_file;
  std::string dataset_file;
};

struct EqualityRunInfo {
  bool ran = false;
  bool ok = false;
  std::string error;
  std::size_t n_targets = 0;
  double worst_relative_residual = 0.0;  // max |residual| / mean |target| over targets
  double wall_ms = 0.0;
};

struct RunResult {
  std::vector<MetricRunInfo> metrics;
  EqualityRunInfo equality;
  bool ok = true;
  std::string out_dir;
  double wall_ms = 0.0;
};

namespace pipedetail {

class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  }

  void line(const std::string& text) {
    out_ << text << "\n";
    out_.flush();
    log_info("%s", text.c_str());
  }

 private:
  std::ofstream out_;
};

inline ScenarioEvalSettings eval_settings(const PipelineConfig& cfg, const NetworkModel& model) {
  ScenarioEvalSettings settings;
  settings.limits = cfg.limits;
  for (const auto& fb : cfg.fault_buses) settings.fault_buses.push_back(model.index_of(fb));
  settings.respect_caps = cfg.respect_caps;
  settings.frequency = cfg.frequency;
  return settings;
}

inline std::vector<MetricId> selected_g_metrics(const PipelineConfig& cfg) {
  std::vector<MetricId> out;
  for (MetricId id : {MetricId::g1, MetricId::g2, MetricId::g3, MetricId::g4, MetricId::g5,
                      MetricId::g6}) {
    if (cfg.wants(to_string(id))) out.push_back(id);
  }
  return out;
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
}

}  // namespace pipedetail

// ---------------------------------------------------------------------------
// Streaming metric CSV: one row per (scenario, metric) with the aggregated
// worst-case value.
// ---------------------------------------------------------------------------

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, StabilityDataset>>& sets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "scenario_id,metric,value,limit,feasible\n";
  for (const auto& [metric, ds] : sets) {
    if (metric == "g5") {
      // per-unit rows aggregate to the scenario's worst case
      std::map<std::int64_t, double> worst;
      for (const auto& s : ds.samples) {
        auto [it, inserted] = worst.emplace(s.scenario_id, s.g);
        if (!inserted) it->second = std::min(it->second, s.g);
      }
      for (const auto& [sid, value] : worst) {
        out << sid << "," << metric << "," << format_double(value) << ","
            << format_double(ds.g_lim) << "," << (value >= ds.g_lim ? "true" : "false") << "\n";
      }
      continue;
    }
    for (const auto& s : ds.samples) {
      const bool feasible = !s.structurally_infeasible && s.g >= ds.g_lim;
      out << s.scenario_id << "," << metric << "," << format_double(s.g) << ","
          << format_double(ds.g_lim) << "," << (feasible ? "true" : "false") << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Equality-surrogate export.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json equality_to_json(const EqualityDataset& ds,
                                               const std::vector<LinearSurrogate>& fits) {
  nlohmann::ordered_json j;
  j["metric"] = "h";
  j["features"] = ds.feature_names;
  auto targets = nlohmann::ordered_json::array();
  for (const auto& s : fits) {
    nlohmann::ordered_json t;
    t["target"] = s.target;
    t["kind"] = s.kind;
    nlohmann::ordered_json coeff;
    for (std::size_t i = 0; i < s.features.size(); ++i) {
      coeff[s.features[i]] = s.coefficients(static_cast<Eigen::Index>(i));
    }
    t["coefficients"] = coeff;
    t["intercept"] = s.intercept;
    t["residuals"] = {{"rms", s.residuals.rms},
                      {"max_abs", s.residuals.max_abs},
                      {"mean_target_magnitude", s.residuals.mean_target_magnitude},
                      {"normal_equation_residual", s.residuals.normal_equation_residual}};
    t["ridge_fallback"] = s.ridge_fallback;
    targets.push_back(t);
  }
  j["targets"] = targets;
  return j;
}

inline void write_equality_targets_csv(const std::filesystem::path& path,
                                       const EqualityDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "scenario_id";
  for (const auto& f : ds.feature_names) out << "," << f;
  for (const auto& t : ds.targets) out << "," << t.name;
  out << "\n";
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    out << ds.scenario_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      out << "," << format_double(ds.features(r, c));
    }
    for (const auto& t : ds.targets) out << "," << format_double(t.values(r));
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// The compile pipeline: evaluate -> partition -> fit (or exact transform or
// regression) -> repair -> verify -> export, per selected metric. Failures
// are isolated per metric; the exit flag goes false if any metric is
// unfittable.
// ---------------------------------------------------------------------------

inline RunResult run_pipeline(const NetworkModel& model, const PipelineConfig& cfg,
                              const std::string& out_dir, bool fit_stage = true) {
  namespace fs = std::filesystem;
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();

  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "datasets", ec);
  fs::create_directories(root / "constraints", ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
  pipedetail::RunLog log(root / "run_log.txt");

  RunResult result;
  result.out_dir = out_dir;

  {
    std::string metrics_line = "metrics:";
    for (const auto& m : cfg.metrics) metrics_line += " " + m;
    log.line(metrics_line);
    log.line("n_c=" + std::to_string(cfg.n_c) + " budget=" + std::to_string(cfg.budget) +
             " seed=" + std::to_string(cfg.seed) +
             " power_factor=" + format_double(cfg.power_factor) +
             " respect_current_caps=" + (cfg.respect_caps ? std::string("true") : std::string("false")));
    log.line("limits: g1=" + format_double(cfg.limits.sync) + " gscr=" + format_double(cfg.limits.gscr) +
             " scc=" + format_double(cfg.limits.scc) + " delta_v=" + format_double(cfg.limits.dv));
    log.line(cfg.fault_buses.empty() ? "fault_buses: all"
                                     : "fault_buses: " + std::to_string(cfg.fault_buses.size()) +
                                           " selected");
  }

  ScenarioOptions sopts;
  sopts.n_c = cfg.n_c;
  sopts.budget = cfg.budget;
  sopts.seed = cfg.seed;
  sopts.power_factor = cfg.power_factor;
  const auto scenarios = enumerate_scenarios(model, sopts);
  log.line("scenarios: " + std::to_string(scenarios.size()));

  const auto settings = pipedetail::eval_settings(cfg, model);

  FitOptions fit_options;
  fit_options.cone_rows = cfg.cone_rows;
  fit_options.seed = cfg.seed;
  fit_options.max_iterations = cfg.fit_iterations;

  std::vector<std::pair<std::string, StabilityDataset>> all_sets;

  for (MetricId id : pipedetail::selected_g_metrics(cfg)) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricRunInfo info;
    info.metric = to_string(id);
    try {
      StabilityDataset ds = evaluate_metric_dataset(model, scenarios, id, settings);
      const bool exact_metric = (id == MetricId::g5 || id == MetricId::g6);

      if (!fit_stage) {
        const double label_nu = exact_metric ? 0.0 : default_initial_nu(ds);
        partition(ds, ds.g_lim, label_nu);
        info.counts = ds.counts();
        info.nu = label_nu;
        info.ok = true;
      } else if (exact_metric) {
        partition(ds, ds.g_lim, 0.0);
        SocSurrogate cone =
            id == MetricId::g5 ? exact_soc_voltage() : exact_soc_nadir(*cfg.frequency);
        const auto rep = verify(cone, ds);
        cone.diagnostics.count_omega1 = rep.counts.omega1;
        cone.diagnostics.count_omega2 = rep.counts.omega2;
        cone.diagnostics.count_omega3 = rep.counts.omega3;
        cone.diagnostics.misclassified_omega1 = rep.misclassified_omega1;
        cone.diagnostics.misclassified_omega2 = rep.misclassified_omega2;
        cone.diagnostics.misclassified_omega3 = rep.misclassified_omega3;
        cone.diagnostics.seed = cfg.seed;
        const fs::path cpath = root / "constraints" / (info.metric + "_constraint.json");
        pipedetail::write_json(cpath, to_json(cone));
        info.constraint_file = cpath.string();
        info.exact = true;
        info.ok = rep.conservative;
        info.counts = rep.counts;
        info.misclassified_omega1 = rep.misclassified_omega1;
        info.misclassified_omega2 = rep.misclassified_omega2;
        info.misclassified_omega3 = rep.misclassified_omega3;
        info.omega2_rms = rep.omega2_rms;
        log.line(info.metric + ": exact cone, no fitting step");
      } else {
        TunedFit tuned = tune_nu(ds, cfg.nu, fit_options);
        partition(ds, ds.g_lim, tuned.nu);
        const fs::path cpath = root / "constraints" / (info.metric + "_constraint.json");
        pipedetail::write_json(cpath, to_json(tuned.surrogate));
        info.constraint_file = cpath.string();
        info.ok = true;
        info.nu = tuned.nu;
        info.nu_attempts = tuned.attempts;
        info.counts = ds.counts();
        info.misclassified_omega1 = tuned.surrogate.diagnostics.misclassified_omega1;
        info.misclassified_omega2 = tuned.surrogate.diagnostics.misclassified_omega2;
        info.misclassified_omega3 = tuned.surrogate.diagnostics.misclassified_omega3;
        info.omega2_rms = tuned.surrogate.diagnostics.omega2_rms;
        log.line(info.metric + ": fitted, nu=" + format_double(tuned.nu) + " attempts=" +
                 std::to_string(tuned.attempts) + " omega2_rms=" + format_double(info.omega2_rms));
      }

      const fs::path dpath = root / "datasets" / (info.metric + "_dataset.csv");
      const fs::path mpath = root / "datasets" / (info.metric + "_dataset.meta.json");
      write_dataset_csv(ds, dpath.string());
      write_dataset_sidecar(ds, mpath.string(), cfg.seed, cfg.n_c, cfg.budget);
      info.dataset_file = dpath.string();
      all_sets.emplace_back(info.metric, std::move(ds));
    } catch (const Error& e) {
      info.ok = false;
      info.error = e.what();
      result.ok = false;
      log.line(info.metric + ": FAILED: " + info.error);
    }
    info.wall_ms = pipedetail::ms_since(t0);
    result.metrics.push_back(std::move(info));
  }

  const bool wants_ratio = cfg.wants("h1") || cfg.wants("h2");
  const bool wants_gamma = cfg.wants("h3");
  if (wants_ratio || wants_gamma) {
    const auto t0 = std::chrono::steady_clock::now();
    result.equality.ran = true;
    try {
      EqualityDataset eq = build_equality_targets(model, scenarios);
      // keep only the selected target kinds
      std::vector<EqualityTarget> kept;
      for (auto& t : eq.targets) {
        if ((t.kind == "impedance_ratio" && wants_ratio) ||
            (t.kind == "short_circuit_capacity" && wants_gamma)) {
          kept.push_back(std::move(t));
        }
      }
      eq.targets = std::move(kept);
      if (eq.skipped_singular > 0) {
        log.line("equality targets: skipped " + std::to_string(eq.skipped_singular) +
                 " singular scenarios");
      }
      auto fits = fit_all_equality_surrogates(eq);
      if (fit_stage) {
        pipedetail::write_json(root / "constraints" / "h_constraints.json",
                               equality_to_json(eq, fits));
      }
      write_equality_targets_csv(root / "datasets" / "h_targets.csv", eq);
      result.equality.n_targets = fits.size();
      for (const auto& f : fits) {
        const double denom = std::max(f.residuals.mean_target_magnitude, 1e-300);
        result.equality.worst_relative_residual =
            std::max(result.equality.worst_relative_residual, f.residuals.max_abs / denom);
      }
      result.equality.ok = true;
      log.line("equality surrogates: " + std::to_string(fits.size()) + " targets, worst rel residual " +
               format_double(result.equality.worst_relative_residual));
    } catch (const Error& e) {
      result.equality.ok = false;
      result.equality.error = e.what();
      result.ok = false;
      log.line(std::string("equality surrogates: FAILED: ") + e.what());
    }
    result.equality.wall_ms = pipedetail::ms_since(t0);
  }

  write_metrics_csv(root / "metrics.csv", all_sets);

  for (const auto& info : result.metrics) {
    if (!info.ok) result.ok = false;
  }
  result.wall_ms = pipedetail::ms_since(t_start);
  log.line("done in " + format_double(result.wall_ms) + " ms, status " +
           (result.ok ? "ok" : "FAILED"));
  return result;
}

// ---------------------------------------------------------------------------
// Reporting.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const RunResult& result) {
  nlohmann::ordered_json j;
  j["out_dir"] = result.out_dir;
  j["ok"] = result.ok;
  j["wall_ms"] = result.wall_ms;
  auto metrics = nlohmann::ordered_json::array();
  for (const auto& m : result.metrics) {
    nlohmann::ordered_json e;
    e["metric"] = m.metric;
    e["ok"] = m.ok;
    e["exact"] = m.exact;
    if (!m.error.empty()) e["error"] = m.error;
    e["counts"] = {{"omega1", m.counts.omega1},
                   {"omega2", m.counts.omega2},
                   {"omega3", m.counts.omega3},
                   {"structurally_infeasible", m.counts.infeasible}};
    e["misclassified"] = {{"omega1", m.misclassified_omega1},
                          {"omega2", m.misclassified_omega2},
                          {"omega3", m.misclassified_omega3}};
    e["omega2_rms"] = std::isfinite(m.omega2_rms) ? nlohmann::ordered_json(m.omega2_rms)
                                                  : nlohmann::ordered_json(nullptr);
    e["nu"] = m.nu;
    e["nu_attempts"] = m.nu_attempts;
    e["wall_ms"] = m.wall_ms;
    metrics.push_back(e);
  }
  j["metrics"] = metrics;
  if (result.equality.ran) {
    j["equality"] = {{"ok", result.equality.ok},
                     {"n_targets", result.equality.n_targets},
                     {"worst_relative_residual", result.equality.worst_relative_residual},
                     {"wall_ms", result.equality.wall_ms}};
    if (!result.equality.error.empty()) j["equality"]["error"] = result.equality.error;
  }
  return j;
}

inline std::string report_to_text(const RunResult& result) {
  std::string out;
  out += "constraint compilation report\n";
  out += "=============================\n";
  for (const auto& m : result.metrics) {
    out += m.metric + ": " + (m.ok ? "ok" : "FAILED") + (m.exact ? " (exact cone)" : "") + "\n";
    if (!m.error.empty()) out += "  error: " + m.error + "\n";
    out += "  samples: omega1=" + std::to_string(m.counts.omega1) +
           " omega2=" + std::to_string(m.counts.omega2) +
           " omega3=" + std::to_string(m.counts.omega3) +
           " (structurally infeasible " + std::to_string(m.counts.infeasible) + ")\n";
    out += "  misclassified: omega1=" + std::to_string(m.misclassified_omega1) +
           " omega2=" + std::to_string(m.misclassified_omega2) +
           " omega3=" + std::to_string(m.misclassified_omega3) + "\n";
    if (std::isfinite(m.omega2_rms)) out += "  omega2 rms: " + format_double(m.omega2_rms) + "\n";
    if (!m.exact && m.ok) {
      out += "  nu: " + format_double(m.nu) + " after " + std::to_string(m.nu_attempts) +
             " attempt(s)\n";
    }
    out += "  wall time: " + format_double(m.wall_ms) + " ms\n";
  }
  if (result.equality.ran) {
    out += std::string("h: ") + (result.equality.ok ? "ok" : "FAILED") + "\n";
    if (!result.equality.error.empty()) out += "  error: " + result.equality.error + "\n";
    out += "  targets: " + std::to_string(result.equality.n_targets) + "\n";
    out += "  worst relative residual: " + format_double(result.equality.worst_relative_residual) +
           "\n";
    out += "  wall time: " + format_double(result.equality.wall_ms) + " ms\n";
  }
  out += "total wall time: " + format_double(result.wall_ms) + " ms\n";
  out += std::string("status: ") + (result.ok ? "ok" : "FAILED") + "\n";
  return out;
}

inline void export_report(const RunResult& result) {
  namespace fs = std::filesystem;
  const fs::path root(result.out_dir);
  pipedetail::write_json(root / "report.json", report_to_json(result));
  pipedetail::write_text(root / "report.txt", report_to_text(result));
}

// ---------------------------------------------------------------------------
// Re-verification of an exported constraint against a stored dataset, and
// format conversion of constraint files.
// ---------------------------------------------------------------------------

struct ReverifyResult {
  VerificationReport report;
  bool matches_stored_diagnostics = true;
  bool ok = false;
};

inline ReverifyResult reverify_constraint(const std::string& constraint_path,
                                          const std::string& dataset_csv,
                                          const std::string& dataset_sidecar) {
  const auto j = ioutil::parse_file(constraint_path);
  const SocSurrogate s = surrogate_from_json(j);
  const StabilityDataset ds = read_dataset(dataset_csv, dataset_sidecar);
  ReverifyResult out;
  out.report = verify(s, ds);
  out.matches_stored_diagnostics =
      out.report.misclassified_omega1 == s.diagnostics.misclassified_omega1 &&
      out.report.misclassified_omega2 == s.diagnostics.misclassified_omega2 &&
      out.report.misclassified_omega3 == s.diagnostics.misclassified_omega3 &&
      out.report.counts.omega1 == s.diagnostics.count_omega1 &&
      out.report.counts.omega2 == s.diagnostics.count_omega2 &&
      out.report.counts.omega3 == s.diagnostics.count_omega3;
  out.ok = out.report.conservative && out.matches_stored_diagnostics && !out.report.limit_mismatch;
  return out;
}

inline std::string constraint_to_csv(const SocSurrogate& s) {
  std::string out = "field,values\n";
  out += "metric," + s.metric + "\n";
  out += "variables";
  for (const auto& v : s.variables) out += "," + v;
  out += "\n";
  for (int r = 0; r < s.A.rows(); ++r) {
    out += "A[" + std::to_string(r) + "]";
    for (int c = 0; c < s.A.cols(); ++c) out += "," + format_double(s.A(r, c));
    out += "\n";
  }
  out += "b";
  for (int r = 0; r < s.b.size(); ++r) out += "," + format_double(s.b(r));
  out += "\nc";
  for (int r = 0; r < s.c.size(); ++r) out += "," + format_double(s.c(r));
  out += "\nd," + format_double(s.d) + "\n";
  out += "g_lim," + format_double(s.g_lim) + "\n";
  out += "nu," + format_double(s.nu) + "\n";
  return out;
}

inline std::string constraint_to_text(const SocSurrogate& s) {
  std::string out;
  out += "metric " + s.metric + ": ||A X + b|| <= c X + (d - g_lim)\n";
  out += "variables:";
  for (const auto& v : s.variables) out += " " + v;
  out += "\nA:\n";
  for (int r = 0; r < s.A.rows(); ++r) {
    out += "  [";
    for (int c = 0; c < s.A.cols(); ++c) {
      out += (c ? ", " : " ") + format_double(s.A(r, c));
    }
    out += " ]\n";
  }
  out += "b: [";
  for (int r = 0; r < s.b.size(); ++r) out += (r ? ", " : " ") + format_double(s.b(r));
  out += " ]\nc: [";
  for (int r = 0; r < s.c.size(); ++r) out += (r ? ", " : " ") + format_double(s.c(r));
  out += " ]\nd: " + format_double(s.d) + "\n";
  out += "g_lim: " + format_double(s.g_lim) + "\n";
  out += "nu: " + format_double(s.nu) + "\n";
  return out;
}

}  // namespace stabcone
