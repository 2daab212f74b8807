// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabcone/common.hpp"
#include "stabcone/fit.hpp"
#include "stabcone/metrics.hpp"
#include "stabcone/network.hpp"

namespace stabcone {

namespace ioutil {

using nlohmann::json;

inline json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

// Strict mode: any field outside the frozen schema is an error.
inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& context) {
  if (!obj.is_object()) throw SchemaError(context + ": expected an object");
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw SchemaError(context + ": unknown field '" + item.key() + "'");
    }
  }
}

inline const json& require(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.contains(key)) throw SchemaError(context + ": missing required field '" + key + "'");
  return obj.at(key);
}

inline double as_number(const json& v, const std::string& context) {
  if (!v.is_number()) throw SchemaError(context + ": expected a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& context) {
  if (!v.is_string()) throw SchemaError(context + ": expected a string");
  return v.get<std::string>();
}

}  // namespace ioutil

// ---------------------------------------------------------------------------
// Network file. Field names are frozen in schemas/network.schema.json.
// ---------------------------------------------------------------------------

inline NetworkModel load_network(const std::string& path) {
  using ioutil::as_number;
  using ioutil::as_string;
  using ioutil::check_keys;
  using ioutil::require;
  const auto j = ioutil::parse_file(path);
  check_keys(j, {"base_mva", "buses", "branches", "sg_units", "gfm_units", "gfl_units"}, path);

  NetworkModel model;
  model.base_mva = as_number(require(j, "base_mva", path), path + ": base_mva");
  if (!(model.base_mva > 0.0)) throw SchemaError(path + ": base_mva must be positive");

  const auto& buses = require(j, "buses", path);
  if (!buses.is_array()) throw SchemaError(path + ": buses must be an array");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string ctx = path + ": buses[" + std::to_string(i) + "]";
    check_keys(buses[i], {"id"}, ctx);
    model.buses.push_back(Bus{as_string(require(buses[i], "id", ctx), ctx + ".id")});
  }
  model.freeze_ordering();

  const auto& branches = require(j, "branches", path);
  if (!branches.is_array()) throw SchemaError(path + ": branches must be an array");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string ctx = path + ": branches[" + std::to_string(i) + "]";
    check_keys(branches[i], {"from", "to", "r", "x", "b"}, ctx);
    Branch br;
    br.from = as_string(require(branches[i], "from", ctx), ctx + ".from");
    br.to = as_string(require(branches[i], "to", ctx), ctx + ".to");
    br.resistance = as_number(require(branches[i], "r", ctx), ctx + ".r");
    br.reactance = as_number(require(branches[i], "x", ctx), ctx + ".x");
    br.charging = branches[i].contains("b") ? as_number(branches[i]["b"], ctx + ".b") : 0.0;
    if (!model.has_bus(br.from)) throw SchemaError(ctx + ": unknown bus '" + br.from + "'");
    if (!model.has_bus(br.to)) throw SchemaError(ctx + ": unknown bus '" + br.to + "'");
    model.branches.push_back(std::move(br));
  }

  const auto read_alpha = [&](const nlohmann::json& rec, const std::string& ctx,
                              const std::string& unit_id) {
    if (!rec.contains("alpha")) {
      log_info("%s: unit '%s' has no alpha; defaulting to 1.0", path.c_str(), unit_id.c_str());
      return 1.0;
    }
    return as_number(rec["alpha"], ctx + ".alpha");
  };

  const auto& sgs = require(j, "sg_units", path);
  if (!sgs.is_array()) throw SchemaError(path + ": sg_units must be an array");
  for (std::size_t i = 0; i < sgs.size(); ++i) {
    const std::string ctx = path + ": sg_units[" + std::to_string(i) + "]";
    check_keys(sgs[i], {"id", "bus", "x_transient"}, ctx);
    SgUnit u;
    u.id = as_string(require(sgs[i], "id", ctx), ctx + ".id");
    u.bus = as_string(require(sgs[i], "bus", ctx), ctx + ".bus");
    u.x_transient = as_number(require(sgs[i], "x_transient", ctx), ctx + ".x_transient");
    model.sg_units.push_back(std::move(u));
  }

  const auto& gfms = require(j, "gfm_units", path);
  if (!gfms.is_array()) throw SchemaError(path + ": gfm_units must be an array");
  for (std::size_t i = 0; i < gfms.size(); ++i) {
    const std::string ctx = path + ": gfm_units[" + std::to_string(i) + "]";
    check_keys(gfms[i], {"id", "bus", "x_equiv", "droop", "i_max", "alpha"}, ctx);
    GfmUnit u;
    u.id = as_string(require(gfms[i], "id", ctx), ctx + ".id");
    u.bus = as_string(require(gfms[i], "bus", ctx), ctx + ".bus");
    u.x_equiv = as_number(require(gfms[i], "x_equiv", ctx), ctx + ".x_equiv");
    u.droop = as_number(require(gfms[i], "droop", ctx), ctx + ".droop");
    u.i_max = as_number(require(gfms[i], "i_max", ctx), ctx + ".i_max");
    u.alpha_nominal = read_alpha(gfms[i], ctx, u.id);
    model.gfm_units.push_back(std::move(u));
  }

  const auto& gfls = require(j, "gfl_units", path);
  if (!gfls.is_array()) throw SchemaError(path + ": gfl_units must be an array");
  for (std::size_t i = 0; i < gfls.size(); ++i) {
    const std::string ctx = path + ": gfl_units[" + std::to_string(i) + "]";
    check_keys(gfls[i], {"id", "bus", "rated_power", "droop", "i_max", "alpha"}, ctx);
    GflUnit u;
    u.id = as_string(require(gfls[i], "id", ctx), ctx + ".id");
    u.bus = as_string(require(gfls[i], "bus", ctx), ctx + ".bus");
    u.rated_power = as_number(require(gfls[i], "rated_power", ctx), ctx + ".rated_power");
    u.droop = as_number(require(gfls[i], "droop", ctx), ctx + ".droop");
    u.i_max = as_number(require(gfls[i], "i_max", ctx), ctx + ".i_max");
    u.alpha_nominal = read_alpha(gfls[i], ctx, u.id);
    model.gfl_units.push_back(std::move(u));
  }

  model.validate();
  log_info("%s: loaded %d buses / %zu SG / %zu GFL / %zu GFM", path.c_str(), model.bus_count(),
           model.sg_units.size(), model.gfl_units.size(), model.gfm_units.size());
  return model;
}

// ---------------------------------------------------------------------------
// Pipeline configuration. Field names frozen in schemas/config.schema.json.
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::vector<std::string> metrics;  // subset of g1..g6, h1..h3
  MetricLimits limits;
  int n_c = 4;
  std::int64_t budget = 10000;
  std::uint64_t seed = 0;
  NuSchedule nu;
  int cone_rows = -1;
  long fit_iterations = 2500;
  std::vector<std::string> fault_buses;  // empty: every bus
  bool respect_caps = false;
  double power_factor = 1.0;
  std::optional<FrequencyParams> frequency;

  bool wants(const std::string& m) const {
    for (const auto& s : metrics) {
      if (s == m) return true;
    }
    return false;
  }

  void validate() const {
    static const std::set<std::string> known = {"g1", "g2", "g3", "g4", "g5",
                                                "g6", "h1", "h2", "h3"};
    if (metrics.empty()) throw SchemaError("config selects no metrics");
    for (const auto& m : metrics) {
      if (known.count(m) == 0) throw SchemaError("config selects unknown metric '" + m + "'");
    }
    if (!(limits.sync > 0.0) || !(limits.gscr > 0.0) || !(limits.scc > 0.0) ||
        !(limits.dv > 0.0)) {
      throw SchemaError("config limits must be positive");
    }
    if (n_c < 1) throw SchemaError("n_c must be >= 1");
    if (budget < 1) throw SchemaError("budget must be >= 1");
    if (wants("g6") && !frequency) {
      throw SchemaError("metric g6 selected but no frequency parameters given");
    }
    if (frequency) frequency->validate();
  }
};

inline PipelineConfig load_config(const std::string& path) {
  using ioutil::as_number;
  using ioutil::as_string;
  using ioutil::check_keys;
  using ioutil::require;
  const auto j = ioutil::parse_file(path);
  check_keys(j,
             {"metrics", "limits", "n_c", "budget", "seed", "nu", "cone_rows", "fit_iterations",
              "fault_buses", "respect_current_caps", "gfl_power_factor", "frequency"},
             path);

  PipelineConfig cfg;
  const auto& metrics = require(j, "metrics", path);
  if (!metrics.is_array()) throw SchemaError(path + ": metrics must be an array");
  for (const auto& m : metrics) cfg.metrics.push_back(as_string(m, path + ": metrics[]"));

  if (j.contains("limits")) {
    const std::string ctx = path + ": limits";
    check_keys(j["limits"], {"g1", "gscr", "scc", "delta_v"}, ctx);
    if (j["limits"].contains("g1")) cfg.limits.sync = as_number(j["limits"]["g1"], ctx + ".g1");
    if (j["limits"].contains("gscr")) cfg.limits.gscr = as_number(j["limits"]["gscr"], ctx + ".gscr");
    if (j["limits"].contains("scc")) cfg.limits.scc = as_number(j["limits"]["scc"], ctx + ".scc");
    if (j["limits"].contains("delta_v")) cfg.limits.dv = as_number(j["limits"]["delta_v"], ctx + ".delta_v");
  }
  if (j.contains("n_c")) cfg.n_c = static_cast<int>(as_number(j["n_c"], path + ": n_c"));
  if (j.contains("budget")) cfg.budget = static_cast<std::int64_t>(as_number(j["budget"], path + ": budget"));
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(as_number(j["seed"], path + ": seed"));
  if (j.contains("nu")) {
    const std::string ctx = path + ": nu";
    check_keys(j["nu"], {"initial", "growth", "max"}, ctx);
    if (j["nu"].contains("initial") && !j["nu"]["initial"].is_null()) {
      cfg.nu.initial = as_number(j["nu"]["initial"], ctx + ".initial");
    }
    if (j["nu"].contains("growth")) cfg.nu.growth = as_number(j["nu"]["growth"], ctx + ".growth");
    if (j["nu"].contains("max") && !j["nu"]["max"].is_null()) {
      cfg.nu.cap = as_number(j["nu"]["max"], ctx + ".max");
    }
  }
  if (j.contains("cone_rows") && !j["cone_rows"].is_null()) {
    cfg.cone_rows = static_cast<int>(as_number(j["cone_rows"], path + ": cone_rows"));
  }
  if (j.contains("fit_iterations")) {
    cfg.fit_iterations = static_cast<long>(as_number(j["fit_iterations"], path + ": fit_iterations"));
  }
  if (j.contains("fault_buses")) {
    const auto& fb = j["fault_buses"];
    if (fb.is_string()) {
      if (fb.get<std::string>() != "all") {
        throw SchemaError(path + ": fault_buses must be \"all\" or an array of bus ids");
      }
    } else if (fb.is_array()) {
      for (const auto& b : fb) cfg.fault_buses.push_back(as_string(b, path + ": fault_buses[]"));
    } else {
      throw SchemaError(path + ": fault_buses must be \"all\" or an array of bus ids");
    }
  }
  if (j.contains("respect_current_caps")) {
    if (!j["respect_current_caps"].is_boolean()) {
      throw SchemaError(path + ": respect_current_caps must be a boolean");
    }
    cfg.respect_caps = j["respect_current_caps"].get<bool>();
  }
  if (j.contains("gfl_power_factor")) {
    cfg.power_factor = as_number(j["gfl_power_factor"], path + ": gfl_power_factor");
  }
  if (j.contains("frequency")) {
    const std::string ctx = path + ": frequency";
    check_keys(j["frequency"],
               {"disturbance", "delivery_time", "df_limit", "damping", "farms", "inertia",
                "reserve"},
               ctx);
    FrequencyParams fp;
    fp.disturbance = as_number(require(j["frequency"], "disturbance", ctx), ctx + ".disturbance");
    fp.delivery_time = as_number(require(j["frequency"], "delivery_time", ctx), ctx + ".delivery_time");
    fp.df_limit = as_number(require(j["frequency"], "df_limit", ctx), ctx + ".df_limit");
    fp.damping = as_number(require(j["frequency"], "damping", ctx), ctx + ".damping");
    fp.inertia = as_number(require(j["frequency"], "inertia", ctx), ctx + ".inertia");
    fp.reserve = as_number(require(j["frequency"], "reserve", ctx), ctx + ".reserve");
    const auto& farms = require(j["frequency"], "farms", ctx);
    if (!farms.is_array()) throw SchemaError(ctx + ".farms must be an array");
    for (std::size_t i = 0; i < farms.size(); ++i) {
      const std::string fctx = ctx + ".farms[" + std::to_string(i) + "]";
      check_keys(farms[i], {"gamma", "h_s"}, fctx);
      fp.gamma.push_back(as_number(require(farms[i], "gamma", fctx), fctx + ".gamma"));
      fp.h_s.push_back(as_number(require(farms[i], "h_s", fctx), fctx + ".h_s"));
    }
    cfg.frequency = std::move(fp);
  }

  cfg.validate();
  return cfg;
}

// Loads and cross-validates both inputs; resolved defaults are echoed by the
// pipeline run log.
inline std::pair<PipelineConfig, NetworkModel> load(const std::string& config_path,
                                                    const std::string& network_path) {
  PipelineConfig cfg = load_config(config_path);
  NetworkModel model = load_network(network_path);
  for (const auto& fb : cfg.fault_buses) {
    if (!model.has_bus(fb)) {
      throw SchemaError(config_path + ": fault bus '" + fb + "' not present in the network");
    }
  }
  return {std::move(cfg), std::move(model)};
}

}  // namespace stabcone
