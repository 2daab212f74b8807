// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "stabcone/admittance.hpp"
#include "test_helpers.hpp"

using namespace stabcone;
using Catch::Approx;
using testutil::all_off;
using testutil::all_on;
using testutil::triangle;

namespace {

Scenario scenario_for(const NetworkModel& m, std::vector<std::uint8_t> x) {
  Scenario s = all_off(m);
  s.x = std::move(x);
  return s;
}

}  // namespace

TEST_CASE("base admittance of a single branch", "[admittance]") {
  NetworkModel m;
  m.buses = {{"a"}, {"b"}};
  m.branches = {{"a", "b", 0.0, 0.5, 0.0}};
  m.sg_units = {{"sg", "a", 0.1}};
  m.freeze_ordering();

  const auto y = assemble_base_admittance(m);
  REQUIRE(y.size() == 2);
  CHECK(y.values(0, 0) == Complex(0.0, -2.0));
  CHECK(y.values(1, 1) == Complex(0.0, -2.0));
  CHECK(y.values(0, 1) == Complex(0.0, 2.0));
  CHECK(y.values(1, 0) == Complex(0.0, 2.0));
}

TEST_CASE("base admittance of an isolated bus", "[admittance]") {
  NetworkModel m;
  m.buses = {{"only"}};
  m.freeze_ordering();
  const auto y = assemble_base_admittance(m);
  REQUIRE(y.size() == 1);
  CHECK(y.values(0, 0) == Complex(0.0, 0.0));
}

TEST_CASE("triangle network equals its graph Laplacian", "[admittance]") {
  const auto m = triangle();
  const auto y = assemble_base_admittance(m);

  // hand-assembled Laplacian with weights 1/x = 10, scaled by -j
  Eigen::Matrix3d lap;
  lap << 20.0, -10.0, -10.0, -10.0, 20.0, -10.0, -10.0, -10.0, 20.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(y.values(i, j).real() == Approx(0.0).margin(1e-15));
      CHECK(y.values(i, j).imag() == Approx(-lap(i, j)).margin(1e-12));
    }
  }
}

TEST_CASE("base matrix symmetry and shunt row sums", "[admittance]") {
  const auto m = testutil::nine_bus();
  const auto y = assemble_base_admittance(m);
  for (int i = 0; i < y.size(); ++i) {
    for (int j = 0; j < y.size(); ++j) CHECK(y.values(i, j) == y.values(j, i));
  }
  // series terms cancel in the row sum, leaving the charging at each bus
  std::vector<Complex> shunts(static_cast<std::size_t>(y.size()), Complex(0, 0));
  for (const auto& br : m.branches) {
    shunts[static_cast<std::size_t>(m.index_of(br.from))] += Complex(0.0, 0.5 * br.charging);
    shunts[static_cast<std::size_t>(m.index_of(br.to))] += Complex(0.0, 0.5 * br.charging);
  }
  for (int i = 0; i < y.size(); ++i) {
    const Complex row_sum = y.values.row(i).sum();
    CHECK(std::abs(row_sum - shunts[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("generator increment entries", "[admittance]") {
  NetworkModel m;
  m.buses = {{"a"}, {"b"}};
  m.branches = {{"a", "b", 0.0, 0.5, 0.0}};
  m.sg_units = {{"sg", "a", 0.2}};
  m.gfm_units = {{"gfm", "b", 0.25, 2.0, 1.5, 1.0}};
  m.freeze_ordering();

  SECTION("online SG adds 1/X at its bus") {
    Scenario s = all_off(m);
    s.x = {1};
    const auto yg = generator_susceptance_increment(m, s, false);
    CHECK(std::abs(yg.values(0, 0)) == Approx(5.0));
    CHECK(yg.values(0, 0).real() == 0.0);
    CHECK(yg.values(1, 1) == Complex(0, 0));
  }
  SECTION("all units offline gives the zero matrix") {
    const auto yg = generator_susceptance_increment(m, all_off(m), true);
    CHECK(yg.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("GFM share scales its susceptance") {
    Scenario s = all_off(m);
    s.alpha_gfm = {0.5};
    const auto yg = generator_susceptance_increment(m, s, true);
    CHECK(std::abs(yg.values(1, 1)) == Approx(2.0));
    const auto yg_fault = generator_susceptance_increment(m, s, false);
    CHECK(std::abs(yg_fault.values(1, 1)) == 0.0);
  }
  SECTION("alpha outside [0,1] is rejected") {
    Scenario s = all_off(m);
    s.alpha_gfm = {1.5};
    CHECK_THROWS_AS(generator_susceptance_increment(m, s, true), DomainError);
  }
}

TEST_CASE("impedance inversion", "[admittance]") {
  SECTION("scalar inverse") {
    AdmittanceMatrix y;
    y.values = Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, -5.0));
    y.bus_ids = {"a"};
    const auto z = invert_to_impedance(y);
    CHECK(std::abs(z.values(0, 0) - Complex(0.0, 0.2)) < 1e-15);
  }
  SECTION("no grounding path is singular") {
    const auto m = triangle();
    const auto y = assemble_base_admittance(m);  // no SG shunts added
    CHECK_THROWS_AS(invert_to_impedance(y), SingularNetworkError);
  }
  SECTION("triangle with SG matches the fixed-size cofactor inverse") {
    const auto m = triangle();
    const auto y = add(assemble_base_admittance(m),
                       generator_susceptance_increment(m, scenario_for(m, {1}), false));
    const auto z = invert_to_impedance(y);
    Eigen::Matrix3cd fixed = y.values;
    const Eigen::Matrix3cd oracle = fixed.inverse();
    CHECK((z.values - oracle).cwiseAbs().maxCoeff() < 1e-10);
    // inverse consistency and symmetry
    const Eigen::MatrixXcd eye = z.values * y.values;
    CHECK((eye - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((z.values - z.values.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("kron reduction", "[admittance][kron]") {
  SECTION("retaining every bus is the identity") {
    const auto m = triangle();
    const auto y = assemble_base_admittance(m);
    const auto red = kron_reduce(y, {0, 1, 2});
    CHECK((red.values - y.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("two-bus chain reduces to the series combination") {
    const Complex y12(0.0, -4.0);
    const Complex ysh(0.0, -2.0);
    AdmittanceMatrix y;
    y.values.resize(2, 2);
    y.values << y12, -y12, -y12, y12 + ysh;
    y.bus_ids = {"a", "b"};
    const auto red = kron_reduce(y, {0});
    const Complex expected = y12 * ysh / (y12 + ysh);
    CHECK(std::abs(red.values(0, 0) - expected) < 1e-14);
  }
  SECTION("port responses match the full model") {
    const auto m = testutil::nine_bus();
    const auto y = add(assemble_base_admittance(m),
                       generator_susceptance_increment(m, all_on(m), true));
    const std::vector<int> retained = {m.index_of("bus5"), m.index_of("bus6")};
    const auto red = kron_reduce(y, retained);

    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(9);
    inj(retained[0]) = Complex(1.0, 0.3);
    inj(retained[1]) = Complex(-0.4, 0.9);
    const Eigen::VectorXcd v_full = y.values.partialPivLu().solve(inj);
    Eigen::VectorXcd inj_red(2);
    inj_red << inj(retained[0]), inj(retained[1]);
    const Eigen::VectorXcd v_red = red.values.partialPivLu().solve(inj_red);
    CHECK(std::abs(v_full(retained[0]) - v_red(0)) < 1e-10);
    CHECK(std::abs(v_full(retained[1]) - v_red(1)) < 1e-10);
  }
  SECTION("singular eliminated block is reported") {
    AdmittanceMatrix y;
    y.values = Eigen::MatrixXcd::Zero(3, 3);
    y.values(0, 0) = Complex(0.0, -1.0);
    y.bus_ids = {"a", "b", "c"};
    CHECK_THROWS_AS(kron_reduce(y, {0}), SingularNetworkError);
  }
}

TEST_CASE("extended admittance scaling", "[admittance][gscr]") {
  SECTION("scalar case") {
    Eigen::MatrixXd b(1, 1);
    b << 4.0;
    const auto yeq = build_extended_admittance(b, {0.8}, {1.0});
    CHECK(yeq(0, 0) == Approx(5.0));
  }
  SECTION("unit powers leave the matrix unchanged") {
    Eigen::MatrixXd b(2, 2);
    b << 5.0, -1.0, -1.0, 6.0;
    const auto yeq = build_extended_admittance(b, {1.0, 1.0}, {1.0, 1.0});
    CHECK((yeq - b).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("two-unit eigenvalues follow the characteristic polynomial") {
    Eigen::MatrixXd b(2, 2);
    b << 6.0, 1.5, 1.5, 4.0;
    const std::vector<double> p = {0.8, 0.5};
    const auto yeq = build_extended_admittance(b, p, {1.0, 1.0});
    // det(Y - lambda I) = 0 solved by hand
    const double tr = yeq(0, 0) + yeq(1, 1);
    const double det = yeq(0, 0) * yeq(1, 1) - yeq(0, 1) * yeq(1, 0);
    const double lam_min = (tr - std::sqrt(tr * tr - 4.0 * det)) / 2.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(yeq);
    double got = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) got = std::min(got, es.eigenvalues()(i).real());
    CHECK(got == Approx(lam_min).margin(1e-10));
  }
  SECTION("nonpositive power is rejected") {
    Eigen::MatrixXd b(1, 1);
    b << 4.0;
    CHECK_THROWS_AS(build_extended_admittance(b, {0.0}, {1.0}), DomainError);
  }
}

TEST_CASE("adding a generator never weakens the grid", "[admittance][property]") {
  SplitMix64 rng(314159);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = testutil::random_stiff_network(rng, 8, 2);
    auto& m = net.model;
    Scenario s = all_on(m);
    s.x[0] = 0;
    const auto y_off = add(assemble_base_admittance(m),
                           generator_susceptance_increment(m, s, true));
    s.x[0] = 1;
    const auto y_on = add(assemble_base_admittance(m),
                          generator_susceptance_increment(m, s, true));
    for (int i = 0; i < y_on.size(); ++i) {
      CHECK(std::abs(y_on.values(i, i)) >= std::abs(y_off.values(i, i)) - 1e-12);
    }
    const auto z_off = invert_to_impedance(y_off);
    const auto z_on = invert_to_impedance(y_on);
    for (int bus : net.ibr_buses) {
      CHECK(std::abs(z_on.values(bus, bus)) <= std::abs(z_off.values(bus, bus)) + 1e-12);
    }
  }
}
