// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "stabcone/common.hpp"
#include "stabcone/network.hpp"
#include "stabcone/scenario.hpp"

namespace stabcone {

using Complex = std::complex<double>;

// Complex bus admittance matrix with its frozen bus ordering.
struct AdmittanceMatrix {
  Eigen::MatrixXcd values;
  std::vector<std::string> bus_ids;

  int size() const { return static_cast<int>(values.rows()); }
};

struct ImpedanceMatrix {
  Eigen::MatrixXcd values;
  std::vector<std::string> bus_ids;

  Complex at(int i, int j) const { return values(i, j); }
  double magnitude(int i, int j) const { return std::abs(values(i, j)); }
  double angle(int i, int j) const { return std::arg(values(i, j)); }
};

// Y0: series admittances plus half the line charging at each end. Scenario
// independent.
inline AdmittanceMatrix assemble_base_admittance(const NetworkModel& model) {
  model.validate();
  const int n = model.bus_count();
  AdmittanceMatrix out;
  out.values = Eigen::MatrixXcd::Zero(n, n);
  out.bus_ids.reserve(static_cast<std::size_t>(n));
  for (const auto& bus : model.buses) out.bus_ids.push_back(bus.id);
  for (const auto& br : model.branches) {
    const int i = model.index_of(br.from);
    const int j = model.index_of(br.to);
    const Complex z(br.resistance, br.reactance);
    const Complex y = 1.0 / z;
    const Complex half_charging(0.0, 0.5 * br.charging);
    out.values(i, i) += y + half_charging;
    out.values(j, j) += y + half_charging;
    out.values(i, j) -= y;
    out.values(j, i) -= y;
  }
  return out;
}

// Yg: diagonal susceptance increment from the sources that behave as voltage
// sources behind a reactance. Each entry enters as -j/X scaled by the unit's
// commitment or online share; GFM shunts are skipped for fault studies.
inline AdmittanceMatrix generator_susceptance_increment(const NetworkModel& model,
                                                        const Scenario& scenario,
                                                        bool include_gfm) {
  scenario.validate(model);
  const int n = model.bus_count();
  AdmittanceMatrix out;
  out.values = Eigen::MatrixXcd::Zero(n, n);
  out.bus_ids.reserve(static_cast<std::size_t>(n));
  for (const auto& bus : model.buses) out.bus_ids.push_back(bus.id);
  for (std::size_t g = 0; g < model.sg_units.size(); ++g) {
    const int bus = model.index_of(model.sg_units[g].bus);
    out.values(bus, bus) += Complex(0.0, -1.0 / model.sg_units[g].x_transient) *
                            static_cast<double>(scenario.x[g]);
  }
  if (include_gfm) {
    for (std::size_t m = 0; m < model.gfm_units.size(); ++m) {
      const int bus = model.index_of(model.gfm_units[m].bus);
      out.values(bus, bus) += Complex(0.0, -1.0 / model.gfm_units[m].x_equiv) * scenario.alpha_gfm[m];
    }
  }
  return out;
}

inline AdmittanceMatrix add(const AdmittanceMatrix& a, const AdmittanceMatrix& b) {
  if (a.size() != b.size()) throw DomainError("admittance matrix size mismatch");
  AdmittanceMatrix out;
  out.values = a.values + b.values;
  out.bus_ids = a.bus_ids;
  return out;
}

// Small-signal admittance Y = Y0 + Yg with both SG and GFM shunts.
inline AdmittanceMatrix smallsignal_admittance(const NetworkModel& model, const Scenario& s) {
  return add(assemble_base_admittance(model), generator_susceptance_increment(model, s, true));
}

// Fault-study admittance: SG shunts only; IBR fault behaviour is modelled as
// voltage-dependent current sources, not shunts.
inline AdmittanceMatrix fault_admittance(const NetworkModel& model, const Scenario& s) {
  return add(assemble_base_admittance(model), generator_susceptance_increment(model, s, false));
}

// Z = Y^-1. A reciprocal-condition estimate below kSingularRcond means no
// grounded voltage source is online.
inline ImpedanceMatrix invert_to_impedance(const AdmittanceMatrix& y) {
  const int n = y.size();
  if (n == 0) throw DomainError("cannot invert an empty matrix");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(y.values);
  const double rcond = lu.rcond();
  if (!std::isfinite(rcond) || rcond < kSingularRcond) {
    throw SingularNetworkError("admittance matrix is singular (no voltage source online?)");
  }
  ImpedanceMatrix out;
  out.values = lu.solve(Eigen::MatrixXcd::Identity(n, n));
  out.bus_ids = y.bus_ids;
  return out;
}

// Schur complement onto `retained`: Y_rr - Y_re Y_ee^-1 Y_er. Port behaviour
// at the retained buses is preserved.
inline AdmittanceMatrix kron_reduce(const AdmittanceMatrix& y, const std::vector<int>& retained) {
  const int n = y.size();
  std::vector<char> keep(static_cast<std::size_t>(n), 0);
  for (int r : retained) {
    if (r < 0 || r >= n) throw DomainError("retained bus index out of range");
    if (keep[static_cast<std::size_t>(r)]) throw DomainError("retained bus listed twice");
    keep[static_cast<std::size_t>(r)] = 1;
  }
  std::vector<int> elim;
  for (int i = 0; i < n; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) elim.push_back(i);
  }
  AdmittanceMatrix out;
  out.bus_ids.reserve(retained.size());
  for (int r : retained) out.bus_ids.push_back(y.bus_ids[static_cast<std::size_t>(r)]);
  const int nr = static_cast<int>(retained.size());
  const int ne = static_cast<int>(elim.size());
  if (ne == 0) {
    out.values = y.values;
    return out;
  }
  Eigen::MatrixXcd yrr(nr, nr), yre(nr, ne), yer(ne, nr), yee(ne, ne);
  for (int a = 0; a < nr; ++a) {
    for (int b = 0; b < nr; ++b) yrr(a, b) = y.values(retained[a], retained[b]);
    for (int b = 0; b < ne; ++b) yre(a, b) = y.values(retained[a], elim[b]);
  }
  for (int a = 0; a < ne; ++a) {
    for (int b = 0; b < nr; ++b) yer(a, b) = y.values(elim[a], retained[b]);
    for (int b = 0; b < ne; ++b) yee(a, b) = y.values(elim[a], elim[b]);
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(yee);
  const double rcond = lu.rcond();
  if (!std::isfinite(rcond) || rcond < kSingularRcond) {
    throw SingularNetworkError("eliminated block is singular; cannot Kron-reduce");
  }
  out.values = yrr - yre * lu.solve(yer);
  return out;
}

// Susceptance-magnitude image of a reduced admittance matrix: |Im Y_red|
// entrywise. Symmetric whenever Y_red is.
inline Eigen::MatrixXd susceptance_magnitude(const AdmittanceMatrix& y_red) {
  return y_red.values.imag().cwiseAbs();
}

// diag(V^2 / P) * B_red. Similar to the symmetric D^1/2 B D^1/2, so the
// spectrum is real. Callers must pre-filter units with P <= 0.
inline Eigen::MatrixXd build_extended_admittance(const Eigen::MatrixXd& b_red,
                                                 const std::vector<double>& gfl_power,
                                                 const std::vector<double>& voltages) {
  const int n = static_cast<int>(b_red.rows());
  if (static_cast<int>(gfl_power.size()) != n || static_cast<int>(voltages.size()) != n) {
    throw DomainError("extended admittance: dimension mismatch");
  }
  Eigen::VectorXd scale(n);
  for (int i = 0; i < n; ++i) {
    if (!(gfl_power[static_cast<std::size_t>(i)] > 0.0)) {
      throw DomainError("extended admittance requires P > 0 for every included unit");
    }
    const double v = voltages[static_cast<std::size_t>(i)];
    scale(i) = v * v / gfl_power[static_cast<std::size_t>(i)];
  }
  return scale.asDiagonal() * b_red;
}

}  // namespace stabcone
