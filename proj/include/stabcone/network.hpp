// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "stabcone/common.hpp"

namespace stabcone {

// All quantities are per-unit on the model's MVA base; voltages are assumed
// flat at 1 p.u. during normal operation.

struct Bus {
  std::string id;
};

struct Branch {
  std::string from;
  std::string to;
  double resistance = 0.0;       // series r
  double reactance = 0.0;        // series x
  double charging = 0.0;         // total shunt susceptance b, split half per end
};

// Synchronous generator: voltage source behind its transient reactance.
struct SgUnit {
  std::string id;
  std::string bus;
  double x_transient = 0.0;
};

// Grid-forming converter: voltage source behind an equivalent reactance,
// with a reactive-current droop during faults.
struct GfmUnit {
  std::string id;
  std::string bus;
  double x_equiv = 0.0;
  double droop = 0.0;
  double i_max = 0.0;
  double alpha_nominal = 1.0;    // nominal online fraction
};

// Grid-following converter: current source; contributes fault current via
// droop but no small-signal shunt.
struct GflUnit {
  std::string id;
  std::string bus;
  double rated_power = 0.0;
  double droop = 0.0;
  double i_max = 0.0;
  double alpha_nominal = 1.0;
};

class NetworkModel {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<SgUnit> sg_units;
  std::vector<GfmUnit> gfm_units;
  std::vector<GflUnit> gfl_units;

  // Bus ordering is frozen when the model is built; every matrix produced
  // from this model references it.
  void freeze_ordering() {
    bus_index_.clear();
    for (std::size_t i = 0; i < buses.size(); ++i) {
      if (!bus_index_.emplace(buses[i].id, static_cast<int>(i)).second) {
        throw SchemaError("duplicate bus id '" + buses[i].id + "'");
      }
    }
  }

  int bus_count() const { return static_cast<int>(buses.size()); }

  int index_of(const std::string& bus_id) const {
    auto it = bus_index_.find(bus_id);
    if (it == bus_index_.end()) throw SchemaError("unknown bus id '" + bus_id + "'");
    return it->second;
  }

  bool has_bus(const std::string& bus_id) const { return bus_index_.count(bus_id) != 0; }

  std::vector<int> gfl_bus_indices() const {
    std::vector<int> out;
    out.reserve(gfl_units.size());
    for (const auto& u : gfl_units) out.push_back(index_of(u.bus));
    return out;
  }

  std::vector<int> gfm_bus_indices() const {
    std::vector<int> out;
    out.reserve(gfm_units.size());
    for (const auto& u : gfm_units) out.push_back(index_of(u.bus));
    return out;
  }

  // GFM units first, then GFL: the frozen ordering for every per-IBR vector.
  std::vector<int> ibr_bus_indices() const {
    std::vector<int> out = gfm_bus_indices();
    for (const auto& u : gfl_units) out.push_back(index_of(u.bus));
    return out;
  }

  std::size_t ibr_count() const { return gfm_units.size() + gfl_units.size(); }

  void validate() const {
    if (buses.empty()) throw StructuralError("network has no buses");
    for (const auto& br : branches) {
      check_bus_ref(br.from, "branch endpoint");
      check_bus_ref(br.to, "branch endpoint");
      if (br.from == br.to) {
        throw StructuralError("branch " + br.from + "--" + br.to + " is a self loop");
      }
      if (br.resistance == 0.0 && br.reactance == 0.0) {
        throw StructuralError("branch " + br.from + "--" + br.to + " has zero series impedance");
      }
      if (br.reactance < 0.0) {
        throw DomainError("branch " + br.from + "--" + br.to + " has negative reactance");
      }
    }
    for (const auto& u : sg_units) {
      check_bus_ref(u.bus, "SG unit '" + u.id + "'");
      if (u.x_transient <= 0.0) throw DomainError("SG unit '" + u.id + "' needs x_transient > 0");
    }
    for (const auto& u : gfm_units) {
      check_bus_ref(u.bus, "GFM unit '" + u.id + "'");
      if (u.x_equiv <= 0.0) throw DomainError("GFM unit '" + u.id + "' needs x_equiv > 0");
      if (u.droop < 0.0) throw DomainError("GFM unit '" + u.id + "' needs droop >= 0");
      if (u.i_max <= 0.0) throw DomainError("GFM unit '" + u.id + "' needs i_max > 0");
      check_alpha(u.alpha_nominal, u.id);
    }
    for (const auto& u : gfl_units) {
      check_bus_ref(u.bus, "GFL unit '" + u.id + "'");
      if (u.rated_power <= 0.0) throw DomainError("GFL unit '" + u.id + "' needs rated_power > 0");
      if (u.droop < 0.0) throw DomainError("GFL unit '" + u.id + "' needs droop >= 0");
      if (u.i_max <= 0.0) throw DomainError("GFL unit '" + u.id + "' needs i_max > 0");
      check_alpha(u.alpha_nominal, u.id);
    }
    if (buses.size() > 1 && !connected()) {
      throw StructuralError("branch graph does not connect all buses");
    }
  }

  // Connectivity over in-service branches (all branches are in service here;
  // unit status lives in the scenario, not the network).
  bool connected() const {
    const int n = bus_count();
    std::vector<std::vector<int>> adj(n);
    for (const auto& br : branches) {
      const int a = index_of(br.from);
      const int b = index_of(br.to);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n;
  }

 private:
  void check_bus_ref(const std::string& bus_id, const std::string& what) const {
    if (!has_bus(bus_id)) {
      throw SchemaError(what + " references unknown bus '" + bus_id + "'");
    }
  }

  static void check_alpha(double a, const std::string& unit_id) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw DomainError("unit '" + unit_id + "': alpha must lie in [0, 1]");
    }
  }

  std::unordered_map<std::string, int> bus_index_;
};

}  // namespace stabcone
