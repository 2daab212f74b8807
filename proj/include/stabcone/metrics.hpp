// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stabcone/admittance.hpp"
#include "stabcone/common.hpp"
#include "stabcone/fault.hpp"
#include "stabcone/network.hpp"
#include "stabcone/scenario.hpp"

namespace stabcone {

enum class MetricId { g1, g2, g3, g4, g5, g6 };

inline const char* to_string(MetricId id) {
  switch (id) {
    case MetricId::g1: return "g1";
    case MetricId::g2: return "g2";
    case MetricId::g3: return "g3";
    case MetricId::g4: return "g4";
    case MetricId::g5: return "g5";
    case MetricId::g6: return "g6";
  }
  return "?";
}

inline MetricId metric_from_string(const std::string& s) {
  for (MetricId id : {MetricId::g1, MetricId::g2, MetricId::g3, MetricId::g4, MetricId::g5,
                      MetricId::g6}) {
    if (s == to_string(id)) return id;
  }
  throw DomainError("unknown metric '" + s + "'");
}

struct MetricValue {
  MetricId id;
  double value = 0.0;
  double limit = 0.0;
  bool feasible = false;  // always value >= limit
  std::int64_t scenario_id = -1;
};

inline MetricValue make_metric_value(MetricId id, double value, double limit,
                                     std::int64_t scenario_id = -1) {
  return MetricValue{id, value, limit, value >= limit, scenario_id};
}

// ---------------------------------------------------------------------------
// g1: PLL equilibrium existence. The grid must be strong enough at the GFL
// bus that the q-axis voltage can be regulated to zero:
//   1/|Z_cc| >= cos(phi_Z) Q + sin(phi_Z) P      (V = V_G = 1 p.u.)
// The scheduler-facing limit is the conservative constant 1; the exact
// right-hand side is returned as the MetricValue limit.
// ---------------------------------------------------------------------------

inline constexpr double kSyncCompiledLimit = 1.0;

inline MetricValue eval_sync_equilibrium(const ImpedanceMatrix& z, int gfl_bus, double p, double q,
                                         std::int64_t scenario_id = -1) {
  if (gfl_bus < 0 || gfl_bus >= static_cast<int>(z.bus_ids.size())) {
    throw DomainError("GFL bus index out of range");
  }
  const double mag = z.magnitude(gfl_bus, gfl_bus);
  const double phi = z.angle(gfl_bus, gfl_bus);
  const double strength = 1.0 / mag;
  const double rhs = std::cos(phi) * q + std::sin(phi) * p;
  return make_metric_value(MetricId::g1, strength, rhs, scenario_id);
}

// ---------------------------------------------------------------------------
// g2: generalized short-circuit ratio, the minimum eigenvalue of
// diag(V^2/P) B_red over the GFL buses after GFM rows/columns are removed.
// ---------------------------------------------------------------------------

struct GscrResult {
  MetricValue value;
  double max_imag_component = 0.0;  // leakage of the general eigensolver; should be ~0
  int dimension = 0;
  std::vector<int> included_units;  // GFL indices with P > 0
};

inline GscrResult eval_gscr(const NetworkModel& model, const Scenario& scenario, double gscr_lim,
                            std::int64_t scenario_id = -1) {
  const auto y = smallsignal_admittance(model, scenario);
  const auto ibr_buses = model.ibr_bus_indices();
  if (model.gfl_units.empty()) throw DomainError("gSCR needs at least one GFL unit");
  const auto y_red = kron_reduce(y, ibr_buses);
  const Eigen::MatrixXd b_full = susceptance_magnitude(y_red);

  // Removing the GFM rows/columns of the reduced matrix keeps the GFL block.
  const int n_gfm = static_cast<int>(model.gfm_units.size());
  const int n_gfl = static_cast<int>(model.gfl_units.size());

  std::vector<int> included;
  for (int l = 0; l < n_gfl; ++l) {
    if (scenario.gfl_p[static_cast<std::size_t>(l)] > 0.0) included.push_back(l);
  }
  if (included.empty()) throw DomainError("gSCR needs at least one GFL unit with P > 0");

  const int m = static_cast<int>(included.size());
  Eigen::MatrixXd b(m, m);
  std::vector<double> power(static_cast<std::size_t>(m));
  std::vector<double> voltage(static_cast<std::size_t>(m), 1.0);
  for (int a = 0; a < m; ++a) {
    power[static_cast<std::size_t>(a)] = scenario.gfl_p[static_cast<std::size_t>(included[a])];
    for (int bcol = 0; bcol < m; ++bcol) {
      b(a, bcol) = b_full(n_gfm + included[a], n_gfm + included[bcol]);
    }
  }
  const Eigen::MatrixXd y_eq = build_extended_admittance(b, power, voltage);

  Eigen::EigenSolver<Eigen::MatrixXd> solver(y_eq, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw ConvergenceError("eigensolver failed on Y_eq");
  double lambda_min = std::numeric_limits<double>::infinity();
  double max_imag = 0.0;
  for (int i = 0; i < y_eq.rows(); ++i) {
    lambda_min = std::min(lambda_min, solver.eigenvalues()(i).real());
    max_imag = std::max(max_imag, std::abs(solver.eigenvalues()(i).imag()));
  }
  GscrResult res;
  res.value = make_metric_value(MetricId::g2, lambda_min, gscr_lim, scenario_id);
  res.max_imag_component = max_imag;
  res.dimension = m;
  res.included_units = included;
  return res;
}

// ---------------------------------------------------------------------------
// g3 / g4: short-circuit current and post-fault voltage at IBR buses.
// ---------------------------------------------------------------------------

// Every IBR contributes fault current through the capped droop law with
// effective gain alpha_c * d_c; the fault-study admittance itself carries SG
// shunts only.
inline FaultStudy make_fault_study(const NetworkModel& model, const Scenario& scenario,
                                   int fault_bus) {
  FaultStudy study;
  study.fault_bus = fault_bus;
  study.v_prefault = kPreFaultVoltage;
  for (std::size_t m = 0; m < model.gfm_units.size(); ++m) {
    DroopSource s;
    s.bus = model.index_of(model.gfm_units[m].bus);
    s.droop = scenario.alpha_gfm[m] * model.gfm_units[m].droop;
    s.i_max = model.gfm_units[m].i_max;
    study.sources.push_back(s);
  }
  for (std::size_t l = 0; l < model.gfl_units.size(); ++l) {
    DroopSource s;
    s.bus = model.index_of(model.gfl_units[l].bus);
    s.droop = scenario.alpha_gfl[l] * model.gfl_units[l].droop;
    s.i_max = model.gfl_units[l].i_max;
    study.sources.push_back(s);
  }
  return study;
}

inline MetricValue eval_scc(const ImpedanceMatrix& z, const FaultStudy& study, double scc_lim,
                            std::int64_t scenario_id = -1) {
  const double value = std::abs(scc_closed_form(z, study));
  return make_metric_value(MetricId::g3, value, scc_lim, scenario_id);
}

// g4 is the negated voltage-drop magnitude so that "stable" keeps the usual
// orientation value >= limit with limit = -dv_lim.
inline MetricValue eval_post_fault_voltage(const ImpedanceMatrix& z, const FaultStudy& study,
                                           std::size_t source_index, double dv_lim,
                                           std::int64_t scenario_id = -1) {
  const Complex drop = post_fault_voltage_drop_closed_form(z, study, source_index);
  return make_metric_value(MetricId::g4, -std::abs(drop), -dv_lim, scenario_id);
}

// ---------------------------------------------------------------------------
// h1/h2: equivalent power injection seen from one GFL bus, folding in every
// other GFL unit by its impedance ratio. h3: short-circuit capacity.
// ---------------------------------------------------------------------------

struct EquivalentInjection {
  double p_hat = 0.0;
  double q_hat = 0.0;
};

inline EquivalentInjection equivalent_injection(const ImpedanceMatrix& z,
                                                const std::vector<int>& gfl_buses,
                                                const std::vector<double>& p,
                                                const std::vector<double>& q, std::size_t unit) {
  if (unit >= gfl_buses.size()) throw DomainError("GFL unit index out of range");
  if (p.size() != gfl_buses.size() || q.size() != gfl_buses.size()) {
    throw DomainError("dispatch vector size mismatch");
  }
  const int bus = gfl_buses[unit];
  const double self = z.magnitude(bus, bus);
  EquivalentInjection out{p[unit], q[unit]};
  for (std::size_t other = 0; other < gfl_buses.size(); ++other) {
    if (other == unit) continue;
    const double ratio = z.magnitude(bus, gfl_buses[other]) / self;
    out.p_hat += ratio * p[other];
    out.q_hat += ratio * q[other];
  }
  return out;
}

inline double short_circuit_capacity_gamma(const ImpedanceMatrix& z, int gfl_bus) {
  // Gamma = |V_G|^2 / (2 |Z_cc|) with V_G = 1 p.u.
  return 1.0 / (2.0 * z.magnitude(gfl_bus, gfl_bus));
}

// g5: maximum-power-transfer margin (Q_hat + Gamma)^2 - P_hat^2 - Q_hat^2 >= 0.
inline MetricValue eval_voltage_stability(double p_hat, double q_hat, double gamma,
                                          std::int64_t scenario_id = -1) {
  if (!(gamma > 0.0)) throw DomainError("short-circuit capacity must be positive");
  const double s = q_hat + gamma;
  return make_metric_value(MetricId::g5, s * s - p_hat * p_hat - q_hat * q_hat, 0.0, scenario_id);
}

// ---------------------------------------------------------------------------
// g6: frequency nadir margin.
// ---------------------------------------------------------------------------

struct FrequencyParams {
  double disturbance = 0.0;     // dP_L
  double delivery_time = 0.0;   // T_d
  double df_limit = 0.0;        // df_lim
  double damping = 0.0;         // D
  std::vector<double> gamma;    // per wind farm, synthetic-inertia damping coefficient
  std::vector<double> h_s;      // per wind farm, synthetic inertia
  double inertia = 0.0;         // H (conventional + synthetic)
  double reserve = 0.0;         // R, primary frequency response

  void validate() const {
    if (!(delivery_time > 0.0)) throw DomainError("PFR delivery time must be positive");
    if (!(df_limit > 0.0)) throw DomainError("frequency deviation limit must be positive");
    if (!(disturbance / df_limit > damping)) {
      throw DomainError("frequency parameters need dP_L/df_lim > D");
    }
    if (gamma.size() != h_s.size()) throw DomainError("gamma and h_s need matching sizes");
    for (double gv : gamma) {
      if (gv < 0.0) throw DomainError("gamma coefficients must be >= 0");
    }
    if (inertia < 0.0 || reserve < 0.0) throw DomainError("H and R must be >= 0");
  }

  // x1^2 = dP^2 T / (4 df) - dP T D / 4, nonnegative by the invariant above.
  double ancillary_squared() const {
    return disturbance * disturbance * delivery_time / (4.0 * df_limit) -
           disturbance * delivery_time * damping / 4.0;
  }
};

inline MetricValue eval_nadir_margin(const FrequencyParams& fp, std::int64_t scenario_id = -1) {
  fp.validate();
  double si_term = 0.0;
  for (std::size_t j = 0; j < fp.gamma.size(); ++j) si_term += fp.gamma[j] * fp.h_s[j] * fp.h_s[j];
  const double value =
      fp.inertia * fp.reserve -
      fp.disturbance * fp.disturbance * fp.delivery_time / (4.0 * fp.df_limit) +
      fp.disturbance * fp.delivery_time / 4.0 * (fp.damping - si_term);
  return make_metric_value(MetricId::g6, value, 0.0, scenario_id);
}

// ---------------------------------------------------------------------------
// Per-scenario aggregation: each scalar metric is the worst case over its
// instances (GFL units for g1/g5, fault buses for g3, fault bus x IBR pairs
// for g4), so one compiled constraint certifies every instance.
// ---------------------------------------------------------------------------

struct MetricLimits {
  double sync = kSyncCompiledLimit;  // g1
  double gscr = 2.0;                 // g2
  double scc = 3.0;                  // g3, |I''_F| floor
  double dv = 0.85;                  // g4, voltage-drop ceiling (limit is -dv)
  double voltage = 0.0;              // g5
  double nadir = 0.0;                // g6

  double limit_for(MetricId id) const {
    switch (id) {
      case MetricId::g1: return sync;
      case MetricId::g2: return gscr;
      case MetricId::g3: return scc;
      case MetricId::g4: return -dv;
      case MetricId::g5: return voltage;
      case MetricId::g6: return nadir;
    }
    return 0.0;
  }
};

struct ScenarioEvalSettings {
  MetricLimits limits;
  std::vector<int> fault_buses;      // empty means every bus
  bool respect_caps = false;         // evaluate g3/g4 through the capped fixed point
  FixedPointOptions fp_options;
  std::optional<FrequencyParams> frequency;
};

struct ScenarioMetricOutcome {
  bool defined = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string note;  // why the metric is undefined, when it is
};

namespace detail {

inline std::vector<int> fault_bus_list(const NetworkModel& model,
                                       const ScenarioEvalSettings& settings) {
  if (!settings.fault_buses.empty()) return settings.fault_buses;
  std::vector<int> all(static_cast<std::size_t>(model.bus_count()));
  for (int i = 0; i < model.bus_count(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

}  // namespace detail

inline ScenarioMetricOutcome evaluate_scenario_metric(const NetworkModel& model,
                                                      const Scenario& scenario, MetricId id,
                                                      const ScenarioEvalSettings& settings) {
  ScenarioMetricOutcome out;
  try {
    switch (id) {
      case MetricId::g1: {
        const auto z = invert_to_impedance(smallsignal_admittance(model, scenario));
        double worst = std::numeric_limits<double>::infinity();
        for (int bus : model.gfl_bus_indices()) {
          worst = std::min(worst, eval_sync_equilibrium(z, bus, 0.0, 0.0).value);
        }
        if (!std::isfinite(worst)) throw DomainError("no GFL units");
        out.value = worst;
        break;
      }
      case MetricId::g2: {
        out.value = eval_gscr(model, scenario, settings.limits.gscr, scenario.id).value.value;
        break;
      }
      case MetricId::g3:
      case MetricId::g4: {
        const auto z = invert_to_impedance(fault_admittance(model, scenario));
        double worst = std::numeric_limits<double>::infinity();
        for (int fault_bus : detail::fault_bus_list(model, settings)) {
          const auto study = make_fault_study(model, scenario, fault_bus);
          if (id == MetricId::g3) {
            double scc;
            if (settings.respect_caps) {
              scc = std::abs(scc_fixed_point(z, study, settings.fp_options).scc);
            } else {
              scc = std::abs(scc_closed_form(z, study));
            }
            worst = std::min(worst, scc);
          } else {
            if (settings.respect_caps) {
              const auto fp = scc_fixed_point(z, study, settings.fp_options);
              for (const auto& drop : fp.drops) worst = std::min(worst, -std::abs(drop));
            } else {
              for (std::size_t c = 0; c < study.sources.size(); ++c) {
                worst = std::min(worst,
                                 -std::abs(post_fault_voltage_drop_closed_form(z, study, c)));
              }
            }
          }
        }
        if (!std::isfinite(worst)) throw DomainError("no fault instances to evaluate");
        out.value = worst;
        break;
      }
      case MetricId::g5: {
        const auto z = invert_to_impedance(smallsignal_admittance(model, scenario));
        const auto buses = model.gfl_bus_indices();
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < buses.size(); ++k) {
          const auto inj = equivalent_injection(z, buses, scenario.gfl_p, scenario.gfl_q, k);
          const double gamma = short_circuit_capacity_gamma(z, buses[k]);
          worst = std::min(worst, eval_voltage_stability(inj.p_hat, inj.q_hat, gamma).value);
        }
        if (!std::isfinite(worst)) throw DomainError("no GFL units");
        out.value = worst;
        break;
      }
      case MetricId::g6: {
        if (!settings.frequency) throw DomainError("frequency parameters not configured");
        out.value = eval_nadir_margin(*settings.frequency, scenario.id).value;
        break;
      }
    }
    out.defined = true;
  } catch (const SingularNetworkError& e) {
    out.note = e.what();
  } catch (const SingularFaultError& e) {
    out.note = e.what();
  } catch (const ConvergenceError& e) {
    out.note = e.what();
  } catch (const DomainError& e) {
    out.note = e.what();
  }
  return out;
}

}  // namespace stabcone
