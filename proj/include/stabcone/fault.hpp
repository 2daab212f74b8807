// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "stabcone/admittance.hpp"
#include "stabcone/common.hpp"

namespace stabcone {

// The superposition denominator collapsed; the fault equations have no
// solution for this operating point.
class SingularFaultError : public Error {
 public:
  using Error::Error;
};

// A fault-current source: any IBR (GFM or GFL) injecting reactive current in
// proportion to its terminal voltage drop, up to its current cap.
struct DroopSource {
  int bus = -1;
  double droop = 0.0;                                    // effective gain alpha_c * d_c
  double i_max = std::numeric_limits<double>::infinity();
  Complex i_load = Complex(0.0, 0.0);                    // pre-fault load current, usually 0
};

struct FaultStudy {
  int fault_bus = -1;
  double v_prefault = kPreFaultVoltage;
  std::vector<DroopSource> sources;

  void validate(int bus_count) const {
    if (fault_bus < 0 || fault_bus >= bus_count) throw DomainError("fault bus out of range");
    if (!(v_prefault > 0.0)) throw DomainError("pre-fault voltage must be positive");
    for (const auto& s : sources) {
      if (s.bus < 0 || s.bus >= bus_count) throw DomainError("droop source bus out of range");
      if (s.droop < 0.0) throw DomainError("droop gain must be >= 0");
      if (s.i_max < 0.0) throw DomainError("current cap must be >= 0");
    }
  }
};

namespace detail {

inline Complex scc_denominator(const ImpedanceMatrix& z, const FaultStudy& study) {
  const int f = study.fault_bus;
  Complex den = z.at(f, f);
  for (const auto& s : study.sources) {
    if (s.droop <= 0.0) continue;
    const Complex zfc = z.at(f, s.bus);
    den -= zfc * zfc / (1.0 / s.droop + z.at(s.bus, s.bus));
  }
  if (std::abs(den) < 1e-12) {
    throw SingularFaultError("fault superposition denominator vanished at bus index " +
                             std::to_string(f));
  }
  return den;
}

}  // namespace detail

// Closed-form fault current at the study's fault bus (loads neglected). With
// every droop at zero this is -V_F(0)/Z_FF, the conventional value.
inline Complex scc_closed_form(const ImpedanceMatrix& z, const FaultStudy& study) {
  study.validate(static_cast<int>(z.bus_ids.size()));
  return -study.v_prefault / detail::scc_denominator(z, study);
}

// Closed-form post-fault voltage drop at source `k`, obtained by pushing the
// closed-form fault current through the per-source voltage relation
// dV = Z_Fc I''_F / (1 + d_c Z_cc). Exact for any number of droop sources.
inline Complex post_fault_voltage_drop_closed_form(const ImpedanceMatrix& z,
                                                   const FaultStudy& study,
                                                   std::size_t k) {
  study.validate(static_cast<int>(z.bus_ids.size()));
  if (k >= study.sources.size()) throw DomainError("droop source index out of range");
  const Complex i_fault = -study.v_prefault / detail::scc_denominator(z, study);
  const auto& s = study.sources[k];
  return z.at(study.fault_bus, s.bus) * i_fault / (1.0 + s.droop * z.at(s.bus, s.bus));
}

struct FixedPointOptions {
  double tolerance = 1e-10;
  int budget = 100;
  bool respect_caps = true;
};

struct FixedPointResult {
  Complex scc;
  std::vector<Complex> drops;          // per source, order of study.sources
  std::vector<Complex> source_currents;
  int iterations = 0;
  bool relaxed = false;                // oscillation damping engaged
};

// Capped-droop fault solver. Starting from zero IBR current, alternates the
// superposition equations with the droop law I_fc = min(I_max, d|dV|) aligned
// against the voltage drop. Plain substitution; switches to half-step updates
// once the residual direction reverses or the step size grows.
inline FixedPointResult scc_fixed_point(const ImpedanceMatrix& z, const FaultStudy& study,
                                        const FixedPointOptions& options = {}) {
  study.validate(static_cast<int>(z.bus_ids.size()));
  const int f = study.fault_bus;
  const std::size_t n = study.sources.size();
  const Complex zff = z.at(f, f);
  if (std::abs(zff) < 1e-12) throw SingularFaultError("driving-point impedance vanished");

  FixedPointResult res;
  res.drops.assign(n, Complex(0.0, 0.0));
  res.source_currents.assign(n, Complex(0.0, 0.0));

  std::vector<Complex> current(n, Complex(0.0, 0.0));
  std::vector<Complex> prev_step(n, Complex(0.0, 0.0));
  double prev_delta = std::numeric_limits<double>::infinity();
  bool have_prev = false;
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(options.budget));

  for (int it = 1; it <= options.budget; ++it) {
    Complex rhs = -study.v_prefault;
    for (std::size_t c = 0; c < n; ++c) {
      rhs -= z.at(f, study.sources[c].bus) * (current[c] - study.sources[c].i_load);
    }
    const Complex i_fault = rhs / zff;

    std::vector<Complex> drops(n);
    std::vector<Complex> next(n);
    for (std::size_t c = 0; c < n; ++c) {
      const auto& s = study.sources[c];
      drops[c] = z.at(s.bus, s.bus) * (current[c] - s.i_load) + z.at(f, s.bus) * i_fault;
      const double mag = std::abs(drops[c]);
      if (mag < 1e-300 || s.droop <= 0.0) {
        next[c] = Complex(0.0, 0.0);
        continue;
      }
      double amp = s.droop * mag;
      if (options.respect_caps && amp > s.i_max) amp = s.i_max;
      next[c] = -amp * drops[c] / mag;
    }

    double delta = 0.0;
    double reversal = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const Complex step = next[c] - current[c];
      delta = std::max(delta, std::abs(step));
      reversal += (step * std::conj(prev_step[c])).real();
      prev_step[c] = step;
    }
    if (have_prev && !res.relaxed && (reversal < 0.0 || delta > prev_delta)) {
      res.relaxed = true;
    }
    have_prev = true;
    prev_delta = delta;
    trace.push_back(delta);

    if (res.relaxed) {
      for (std::size_t c = 0; c < n; ++c) current[c] = 0.5 * (current[c] + next[c]);
    } else {
      current = next;
    }

    if (delta <= options.tolerance) {
      res.scc = i_fault;
      res.drops = drops;
      res.source_currents = current;
      res.iterations = it;
      return res;
    }
  }

  std::string msg = "fault fixed point did not converge in " + std::to_string(options.budget) +
                    " iterations; last residuals:";
  const std::size_t tail = trace.size() > 5 ? trace.size() - 5 : 0;
  for (std::size_t i = tail; i < trace.size(); ++i) msg += " " + format_double(trace[i]);
  throw ConvergenceError(msg);
}

}  // namespace stabcone
