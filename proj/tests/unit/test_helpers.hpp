// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "stabcone/network.hpp"
#include "stabcone/scenario.hpp"

namespace testutil {

// Triangle network: three buses, x = 0.1 per side, no charging, one SG.
inline stabcone::NetworkModel triangle() {
  stabcone::NetworkModel m;
  m.buses = {{"a"}, {"b"}, {"c"}};
  m.branches = {{"a", "b", 0.0, 0.1, 0.0}, {"b", "c", 0.0, 0.1, 0.0}, {"a", "c", 0.0, 0.1, 0.0}};
  m.sg_units = {{"sg", "a", 0.2}};
  m.gfl_units = {{"gfl", "c", 1.0, 1.5, 1.2, 1.0}};
  m.freeze_ordering();
  m.validate();
  return m;
}

// WSCC-style nine bus fixture, identical to data/ieee9.json.
inline stabcone::NetworkModel nine_bus() {
  stabcone::NetworkModel m;
  for (int i = 1; i <= 9; ++i) m.buses.push_back({"bus" + std::to_string(i)});
  m.branches = {
      {"bus1", "bus4", 0.0, 0.0576, 0.0},    {"bus4", "bus5", 0.01, 0.085, 0.176},
      {"bus4", "bus6", 0.017, 0.092, 0.158}, {"bus5", "bus7", 0.032, 0.161, 0.306},
      {"bus6", "bus9", 0.039, 0.17, 0.358},  {"bus7", "bus2", 0.0, 0.0625, 0.0},
      {"bus7", "bus8", 0.0085, 0.072, 0.149}, {"bus8", "bus9", 0.0119, 0.1008, 0.209},
      {"bus9", "bus3", 0.0, 0.0586, 0.0}};
  m.sg_units = {{"SG1", "bus1", 0.0608}, {"SG2", "bus2", 0.1198}, {"SG3", "bus3", 0.1813}};
  m.gfm_units = {{"GFM8", "bus8", 0.15, 2.0, 1.5, 1.0}};
  m.gfl_units = {{"GFL5", "bus5", 1.0, 1.5, 1.2, 1.0}, {"GFL6", "bus6", 0.8, 2.0, 1.1, 1.0}};
  m.freeze_ordering();
  m.validate();
  return m;
}

inline stabcone::Scenario all_on(const stabcone::NetworkModel& m) {
  stabcone::Scenario s;
  s.x.assign(m.sg_units.size(), 1);
  s.alpha_gfm.assign(m.gfm_units.size(), 1.0);
  s.alpha_gfl.assign(m.gfl_units.size(), 1.0);
  for (const auto& u : m.gfl_units) s.gfl_p.push_back(u.rated_power);
  s.gfl_q.assign(m.gfl_units.size(), 0.0);
  return s;
}

inline stabcone::Scenario all_off(const stabcone::NetworkModel& m) {
  stabcone::Scenario s;
  s.x.assign(m.sg_units.size(), 0);
  s.alpha_gfm.assign(m.gfm_units.size(), 0.0);
  s.alpha_gfl.assign(m.gfl_units.size(), 0.0);
  s.gfl_p.assign(m.gfl_units.size(), 0.0);
  s.gfl_q.assign(m.gfl_units.size(), 0.0);
  return s;
}

// Random stiff grid for oracle comparisons: spanning tree plus extra edges,
// reactance-dominated branches, two or more SG groundings.
struct RandomNet {
  stabcone::NetworkModel model;
  std::vector<int> ibr_buses;
};

inline RandomNet random_stiff_network(stabcone::SplitMix64& rng, int max_buses = 10,
                                      int max_ibr = 3) {
  RandomNet out;
  auto& m = out.model;
  const int nb = 4 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_buses - 3)));
  for (int i = 0; i < nb; ++i) m.buses.push_back({"n" + std::to_string(i)});
  for (int i = 1; i < nb; ++i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i)));
    m.branches.push_back({m.buses[static_cast<std::size_t>(i)].id,
                          m.buses[static_cast<std::size_t>(j)].id, 0.0,
                          rng.uniform(0.04, 0.18), 0.0});
  }
  for (int e = 0; e < nb; ++e) {
    const int i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(nb)));
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(nb)));
    if (i == j) continue;
    m.branches.push_back({m.buses[static_cast<std::size_t>(i)].id,
                          m.buses[static_cast<std::size_t>(j)].id, 0.0,
                          rng.uniform(0.04, 0.18), 0.0});
  }
  for (auto& br : m.branches) br.resistance = 0.1 * br.reactance;

  const int nsg = std::max(2, nb / 3);
  std::vector<int> order(static_cast<std::size_t>(nb));
  for (int i = 0; i < nb; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = nb - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  for (int g = 0; g < nsg; ++g) {
    m.sg_units.push_back({"sg" + std::to_string(g),
                          m.buses[static_cast<std::size_t>(order[static_cast<std::size_t>(g)])].id,
                          rng.uniform(0.04, 0.12)});
  }
  const int nibr = 1 + static_cast<int>(rng.uniform_int(
                           static_cast<std::uint64_t>(std::min(max_ibr, nb - nsg))));
  for (int c = 0; c < nibr; ++c) {
    const int bus = order[static_cast<std::size_t>(nsg + c)];
    out.ibr_buses.push_back(bus);
    m.gfl_units.push_back({"ibr" + std::to_string(c), m.buses[static_cast<std::size_t>(bus)].id,
                           rng.uniform(0.4, 1.0), rng.uniform(0.5, 2.0), 1e9,
                           rng.uniform(0.3, 1.0)});
  }
  m.freeze_ordering();
  m.validate();
  return out;
}

}  // namespace testutil
