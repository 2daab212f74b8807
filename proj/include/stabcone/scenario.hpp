// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stabcone/common.hpp"
#include "stabcone/network.hpp"

namespace stabcone {

// One commitment/availability point: binary SG status, fractional online
// share per IBR, and the GFL dispatch derived from it.
struct Scenario {
  std::int64_t id = 0;
  std::vector<std::uint8_t> x;       // per SG, file order
  std::vector<double> alpha_gfm;     // per GFM, file order
  std::vector<double> alpha_gfl;     // per GFL, file order
  std::vector<double> gfl_p;         // active dispatch per GFL
  std::vector<double> gfl_q;         // reactive dispatch per GFL

  void validate(const NetworkModel& model) const {
    if (x.size() != model.sg_units.size()) throw DomainError("scenario x size mismatch");
    if (alpha_gfm.size() != model.gfm_units.size()) throw DomainError("scenario alpha_gfm size mismatch");
    if (alpha_gfl.size() != model.gfl_units.size()) throw DomainError("scenario alpha_gfl size mismatch");
    for (double a : alpha_gfm) {
      if (!(a >= 0.0 && a <= 1.0)) throw DomainError("scenario alpha outside [0, 1]");
    }
    for (double a : alpha_gfl) {
      if (!(a >= 0.0 && a <= 1.0)) throw DomainError("scenario alpha outside [0, 1]");
    }
    for (std::size_t i = 0; i < gfl_p.size(); ++i) {
      const double cap = model.gfl_units[i].rated_power * alpha_gfl[i];
      if (gfl_p[i] > cap + 1e-12) throw DomainError("GFL dispatch exceeds available rating");
    }
  }
};

// Region midpoints (k - 0.5)/n_c, the representative availability values.
inline std::vector<double> alpha_midpoints(int n_c) {
  if (n_c < 1) throw DomainError("n_c must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n_c));
  for (int k = 0; k < n_c; ++k) out[static_cast<std::size_t>(k)] = (k + 0.5) / n_c;
  return out;
}

struct ScenarioOptions {
  int n_c = 4;
  std::int64_t budget = 10000;
  std::uint64_t seed = 0;
  double power_factor = 1.0;  // GFL dispatch policy: P = alpha * rated, Q = P * tan(acos(pf))
};

namespace detail {

inline void apply_dispatch_policy(const NetworkModel& model, double power_factor, Scenario& s) {
  const std::size_t n = model.gfl_units.size();
  s.gfl_p.resize(n);
  s.gfl_q.resize(n);
  double tan_phi = 0.0;
  if (power_factor < 1.0) {
    if (power_factor <= 0.0) throw DomainError("power factor must lie in (0, 1]");
    tan_phi = std::sqrt(1.0 - power_factor * power_factor) / power_factor;
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.gfl_p[i] = s.alpha_gfl[i] * model.gfl_units[i].rated_power;
    s.gfl_q[i] = s.gfl_p[i] * tan_phi;
  }
}

}  // namespace detail

// Enumerates the scenario product space {0,1}^|G| x midpoints^|C| when it fits
// the budget, otherwise draws `budget` uniform samples from the same space.
// Deterministic given (model, options).
inline std::vector<Scenario> enumerate_scenarios(const NetworkModel& model,
                                                 const ScenarioOptions& options) {
  if (options.budget < 1) throw DomainError("scenario budget must be >= 1");
  const auto mids = alpha_midpoints(options.n_c);
  const std::size_t n_sg = model.sg_units.size();
  const std::size_t n_ibr = model.ibr_count();
  const std::size_t n_gfm = model.gfm_units.size();

  // 2^|G| * n_c^|C| with overflow saturation
  long double total = std::pow(2.0L, static_cast<long double>(n_sg));
  for (std::size_t i = 0; i < n_ibr; ++i) total *= options.n_c;
  const bool exhaustive = total <= static_cast<long double>(options.budget);

  std::vector<Scenario> out;
  if (exhaustive) {
    const std::int64_t count = static_cast<std::int64_t>(total);
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t s = 0; s < count; ++s) {
      Scenario sc;
      sc.id = s;
      // mixed-radix decode: SG bits are the most significant digits,
      // first unit most significant within each block.
      std::int64_t rest = s;
      std::vector<int> alpha_digit(n_ibr, 0);
      for (std::size_t i = n_ibr; i-- > 0;) {
        alpha_digit[i] = static_cast<int>(rest % options.n_c);
        rest /= options.n_c;
      }
      sc.x.resize(n_sg);
      for (std::size_t g = n_sg; g-- > 0;) {
        sc.x[g] = static_cast<std::uint8_t>(rest & 1);
        rest >>= 1;
      }
      sc.alpha_gfm.assign(n_gfm, 0.0);
      sc.alpha_gfl.assign(n_ibr - n_gfm, 0.0);
      for (std::size_t i = 0; i < n_gfm; ++i) sc.alpha_gfm[i] = mids[static_cast<std::size_t>(alpha_digit[i])];
      for (std::size_t i = n_gfm; i < n_ibr; ++i) {
        sc.alpha_gfl[i - n_gfm] = mids[static_cast<std::size_t>(alpha_digit[i])];
      }
      detail::apply_dispatch_policy(model, options.power_factor, sc);
      out.push_back(std::move(sc));
    }
  } else {
    out.reserve(static_cast<std::size_t>(options.budget));
    SplitMix64 rng(options.seed);
    for (std::int64_t s = 0; s < options.budget; ++s) {
      Scenario sc;
      sc.id = s;
      sc.x.resize(n_sg);
      for (std::size_t g = 0; g < n_sg; ++g) sc.x[g] = rng.uniform() < 0.5 ? 1 : 0;
      sc.alpha_gfm.resize(n_gfm);
      sc.alpha_gfl.resize(n_ibr - n_gfm);
      for (auto& a : sc.alpha_gfm) a = mids[rng.uniform_int(static_cast<std::uint64_t>(options.n_c))];
      for (auto& a : sc.alpha_gfl) a = mids[rng.uniform_int(static_cast<std::uint64_t>(options.n_c))];
      detail::apply_dispatch_policy(model, options.power_factor, sc);
      out.push_back(std::move(sc));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interaction features for the equality-constraint regressions: the linear
// block (x_g, alpha_cm) plus one pairwise product per unordered pair over the
// SG u GFM set. Higher-order terms are dropped.
// ---------------------------------------------------------------------------

struct FeatureVector {
  std::vector<double> values;  // layout matches equality_feature_names()
};

inline std::vector<std::string> equality_feature_names(const NetworkModel& model) {
  std::vector<std::string> names;
  for (const auto& u : model.sg_units) names.push_back("x[" + u.id + "]");
  for (const auto& u : model.gfm_units) names.push_back("alpha[" + u.id + "]");
  std::vector<std::string> unit_ids;
  for (const auto& u : model.sg_units) unit_ids.push_back(u.id);
  for (const auto& u : model.gfm_units) unit_ids.push_back(u.id);
  for (std::size_t i = 0; i < unit_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < unit_ids.size(); ++j) {
      names.push_back("eta[" + unit_ids[i] + "*" + unit_ids[j] + "]");
    }
  }
  return names;
}

inline FeatureVector interaction_features(const NetworkModel& model, const Scenario& s) {
  FeatureVector fv;
  std::vector<double> unit_vals;
  for (std::size_t g = 0; g < model.sg_units.size(); ++g) unit_vals.push_back(static_cast<double>(s.x[g]));
  for (std::size_t m = 0; m < model.gfm_units.size(); ++m) unit_vals.push_back(s.alpha_gfm[m]);
  fv.values = unit_vals;
  for (std::size_t i = 0; i < unit_vals.size(); ++i) {
    for (std::size_t j = i + 1; j < unit_vals.size(); ++j) {
      fv.values.push_back(unit_vals[i] * unit_vals[j]);
    }
  }
  return fv;
}

}  // namespace stabcone
