// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "stabcone/fault.hpp"
#include "stabcone/metrics.hpp"
#include "test_helpers.hpp"

using namespace stabcone;
using Catch::Approx;

namespace {

ImpedanceMatrix make_z(const Eigen::MatrixXcd& values) {
  ImpedanceMatrix z;
  z.values = values;
  z.bus_ids.resize(static_cast<std::size_t>(values.rows()));
  for (std::size_t i = 0; i < z.bus_ids.size(); ++i) z.bus_ids[i] = "n" + std::to_string(i);
  return z;
}

ImpedanceMatrix nine_bus_fault_z(const NetworkModel& m, const Scenario& s) {
  return invert_to_impedance(fault_admittance(m, s));
}

}  // namespace

TEST_CASE("zero droop reduces to the conventional formula", "[fault]") {
  auto z = make_z(Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, 0.2)));
  FaultStudy study;
  study.fault_bus = 0;
  SECTION("no sources at all") {
    CHECK(std::abs(scc_closed_form(z, study)) == Approx(5.0));
  }
  SECTION("sources with zero effective droop behave the same") {
    study.sources.push_back({0, 0.0, 1.5});
    CHECK(std::abs(scc_closed_form(z, study)) == Approx(5.0));
  }
}

TEST_CASE("post-fault voltage special cases", "[fault]") {
  SECTION("fault at the unit's own bus with zero droop collapses fully") {
    auto z = make_z(Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, 0.15)));
    FaultStudy study;
    study.fault_bus = 0;
    study.sources.push_back({0, 0.0, 1.0});
    const auto drop = post_fault_voltage_drop_closed_form(z, study, 0);
    CHECK(std::abs(drop) == Approx(1.0));
  }
  SECTION("zero transfer impedance means no voltage change") {
    Eigen::MatrixXcd v(2, 2);
    v << Complex(0.0, 0.2), Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.3);
    auto z = make_z(v);
    FaultStudy study;
    study.fault_bus = 0;
    study.sources.push_back({1, 1.5, 2.0});
    const auto drop = post_fault_voltage_drop_closed_form(z, study, 0);
    CHECK(std::abs(drop) == 0.0);
  }
}

TEST_CASE("vanishing superposition denominator is an error", "[fault]") {
  // choose Z_Fc so that Z_FF == Z_Fc^2 / (1/d + Z_cc) exactly
  const Complex zff(0.0, 0.2);
  const Complex zcc(0.0, 0.1);
  const double droop = 1.0;
  const Complex zfc = std::sqrt(zff * (1.0 / droop + zcc));
  Eigen::MatrixXcd v(2, 2);
  v << zff, zfc, zfc, zcc;
  auto z = make_z(v);
  FaultStudy study;
  study.fault_bus = 0;
  study.sources.push_back({1, droop, 1e9});
  CHECK_THROWS_AS(scc_closed_form(z, study), SingularFaultError);
}

TEST_CASE("fixed point with zero caps lands on the droop-free value", "[fault][fixedpoint]") {
  const auto m = testutil::nine_bus();
  const auto s = testutil::all_on(m);
  const auto z = nine_bus_fault_z(m, s);
  auto study = make_fault_study(m, s, m.index_of("bus5"));
  for (auto& src : study.sources) src.i_max = 0.0;

  const auto fp = scc_fixed_point(z, study);
  CHECK(fp.iterations == 1);
  FaultStudy no_droop = study;
  for (auto& src : no_droop.sources) src.droop = 0.0;
  CHECK(std::abs(fp.scc) == Approx(std::abs(scc_closed_form(z, no_droop))).epsilon(1e-12));
}

TEST_CASE("fixed point agrees with the closed forms when caps stay slack", "[fault][fixedpoint]") {
  const auto m = testutil::nine_bus();
  const auto s = testutil::all_on(m);
  const auto z = nine_bus_fault_z(m, s);
  for (const std::string bus : {"bus5", "bus8", "bus4"}) {
    auto study = make_fault_study(m, s, m.index_of(bus));
    for (auto& src : study.sources) src.i_max = 1e9;
    const auto fp = scc_fixed_point(z, study);
    const double closed = std::abs(scc_closed_form(z, study));
    CHECK(std::abs(fp.scc) == Approx(closed).epsilon(1e-8));
    for (std::size_t c = 0; c < study.sources.size(); ++c) {
      const double drop_closed = std::abs(post_fault_voltage_drop_closed_form(z, study, c));
      CHECK(std::abs(fp.drops[c]) == Approx(drop_closed).epsilon(1e-8));
    }
  }
}

TEST_CASE("a binding cap brackets the fault current", "[fault][fixedpoint]") {
  const auto m = testutil::nine_bus();
  const auto s = testutil::all_on(m);
  const auto z = nine_bus_fault_z(m, s);
  auto study = make_fault_study(m, s, m.index_of("bus5"));

  FaultStudy no_droop = study;
  for (auto& src : no_droop.sources) src.droop = 0.0;
  const double low = std::abs(scc_closed_form(z, no_droop));
  const double high = std::abs(scc_closed_form(z, study));  // uncapped
  REQUIRE(high > low);

  // cap the unit at the faulted bus itself; a remote cap can shift the fault
  // current either way once resistive phase rotation enters the couplings
  auto capped = study;
  for (auto& src : capped.sources) src.i_max = 1e9;
  capped.sources[1].i_max = 0.05;  // GFL5 sits at bus5
  const auto fp = scc_fixed_point(z, capped);
  CHECK(std::abs(fp.source_currents[1]) == Approx(0.05).epsilon(1e-9));
  CHECK(std::abs(fp.scc) > low);
  CHECK(std::abs(fp.scc) < high);
}

TEST_CASE("divergence is reported with a residual trace", "[fault][fixedpoint]") {
  Eigen::MatrixXcd v(2, 2);
  v << Complex(0.01, 1.0), Complex(0.005, 0.95), Complex(0.005, 0.95), Complex(0.01, 1.0);
  auto z = make_z(v);
  FaultStudy study;
  study.fault_bus = 0;
  study.sources.push_back({1, 50.0, 1e9});
  FixedPointOptions opts;
  opts.budget = 8;
  try {
    scc_fixed_point(z, study, opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find("did not converge") != std::string::npos);
    CHECK(std::string(e.what()).find("residuals") != std::string::npos);
  }
}
