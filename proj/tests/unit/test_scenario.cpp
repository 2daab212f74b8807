// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "stabcone/dataset.hpp"
#include "stabcone/scenario.hpp"
#include "test_helpers.hpp"

using namespace stabcone;
using Catch::Approx;

namespace {

// |G| SGs and |C| GFL units strung along a line.
NetworkModel synthetic_model(int n_sg, int n_gfl) {
  NetworkModel m;
  const int n = n_sg + n_gfl;
  for (int i = 0; i < n; ++i) m.buses.push_back({"b" + std::to_string(i)});
  for (int i = 1; i < n; ++i) {
    m.branches.push_back({"b" + std::to_string(i - 1), "b" + std::to_string(i), 0.0, 0.1, 0.0});
  }
  for (int g = 0; g < n_sg; ++g) m.sg_units.push_back({"sg" + std::to_string(g), "b" + std::to_string(g), 0.1});
  for (int c = 0; c < n_gfl; ++c) {
    m.gfl_units.push_back({"gfl" + std::to_string(c), "b" + std::to_string(n_sg + c), 1.0, 1.0, 1.0, 1.0});
  }
  m.freeze_ordering();
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("exhaustive enumeration over region midpoints", "[scenario]") {
  SECTION("2 SGs, one IBR axis split in two") {
    const auto m = synthetic_model(2, 1);
    ScenarioOptions opts;
    opts.n_c = 2;
    opts.budget = 100;
    const auto scen = enumerate_scenarios(m, opts);
    REQUIRE(scen.size() == 8);  // 2^2 * 2^1
    std::set<double> alphas;
    for (const auto& s : scen) alphas.insert(s.alpha_gfl[0]);
    CHECK(alphas == std::set<double>{0.25, 0.75});
    // ids are the mixed-radix index, stable across runs
    for (std::size_t i = 0; i < scen.size(); ++i) CHECK(scen[i].id == static_cast<std::int64_t>(i));
  }
  SECTION("a single region is represented by its midpoint") {
    const auto m = synthetic_model(1, 2);
    ScenarioOptions opts;
    opts.n_c = 1;
    const auto scen = enumerate_scenarios(m, opts);
    REQUIRE(scen.size() == 2);
    for (const auto& s : scen) {
      CHECK(s.alpha_gfl[0] == 0.5);
      CHECK(s.alpha_gfl[1] == 0.5);
    }
  }
  SECTION("dispatch policy couples P to alpha") {
    const auto m = synthetic_model(1, 1);
    ScenarioOptions opts;
    opts.n_c = 4;
    const auto scen = enumerate_scenarios(m, opts);
    for (const auto& s : scen) {
      CHECK(s.gfl_p[0] == Approx(s.alpha_gfl[0] * 1.0));
      CHECK(s.gfl_q[0] == 0.0);
    }
  }
}

TEST_CASE("budgeted sampling is reproducible", "[scenario]") {
  const auto m = synthetic_model(10, 4);
  ScenarioOptions opts;
  opts.n_c = 4;
  opts.budget = 10000;  // 2^10 * 4^4 = 262144 exceeds it
  opts.seed = 20240809;
  const auto a = enumerate_scenarios(m, opts);
  const auto b = enumerate_scenarios(m, opts);
  REQUIRE(a.size() == 10000);
  REQUIRE(b.size() == 10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].alpha_gfl == b[i].alpha_gfl);
  }
  // alphas stay on region midpoints
  const std::set<double> mids{0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 50; ++i) {
    for (double v : a[static_cast<std::size_t>(i)].alpha_gfl) CHECK(mids.count(v) == 1);
  }
}

TEST_CASE("interaction features follow the three-case product rule", "[scenario][features]") {
  NetworkModel m;
  m.buses = {{"b0"}, {"b1"}, {"b2"}};
  m.branches = {{"b0", "b1", 0.0, 0.1, 0.0}, {"b1", "b2", 0.0, 0.1, 0.0}};
  m.sg_units = {{"sg0", "b0", 0.1}, {"sg1", "b1", 0.1}};
  m.gfm_units = {{"gfm0", "b2", 0.2, 1.0, 1.0, 1.0}};
  m.freeze_ordering();

  Scenario s;
  s.x = {1, 1};
  s.alpha_gfm = {0.7};
  s.alpha_gfl = {};
  s.gfl_p = {};
  s.gfl_q = {};

  const auto names = equality_feature_names(m);
  REQUIRE(names == std::vector<std::string>{"x[sg0]", "x[sg1]", "alpha[gfm0]", "eta[sg0*sg1]",
                                            "eta[sg0*gfm0]", "eta[sg1*gfm0]"});
  auto fv = interaction_features(m, s);
  CHECK(fv.values[3] == 1.0);             // x*x
  CHECK(fv.values[4] == Approx(0.7));     // x*alpha
  s.x = {0, 1};
  fv = interaction_features(m, s);
  CHECK(fv.values[3] == 0.0);
  CHECK(fv.values[4] == 0.0);
  s.alpha_gfm = {0.5};
  // alpha*alpha needs two GFM units
  NetworkModel m2 = m;
  m2.gfm_units.push_back({"gfm1", "b1", 0.2, 1.0, 1.0, 1.0});
  m2.freeze_ordering();
  Scenario s2 = s;
  s2.alpha_gfm = {0.5, 0.5};
  const auto fv2 = interaction_features(m2, s2);
  const auto names2 = equality_feature_names(m2);
  for (std::size_t i = 0; i < names2.size(); ++i) {
    if (names2[i] == "eta[gfm0*gfm1]") CHECK(fv2.values[i] == Approx(0.25));
  }
}

TEST_CASE("partition labels the half-open band", "[scenario][partition]") {
  StabilityDataset ds;
  ds.metric = "g3";
  ds.variables = {"v"};
  for (double g : {0.5, 1.2, 3.0}) {
    StabilitySample s;
    s.x = Eigen::VectorXd::Constant(1, 0.0);
    s.g = g;
    ds.samples.push_back(s);
  }
  partition(ds, 1.0, 1.0);
  CHECK(ds.samples[0].label == OmegaLabel::omega1);
  CHECK(ds.samples[1].label == OmegaLabel::omega2);
  CHECK(ds.samples[2].label == OmegaLabel::omega3);
  const auto c = ds.counts();
  CHECK(c.omega1 + c.omega2 + c.omega3 == 3);

  SECTION("zero width empties the band") {
    partition(ds, 1.0, 0.0);
    CHECK(ds.counts().omega2 == 0);
  }
  SECTION("a value exactly at the limit joins the band") {
    ds.samples[0].g = 1.0;
    partition(ds, 1.0, 0.5);
    CHECK(ds.samples[0].label == OmegaLabel::omega2);
  }
  SECTION("negative width is rejected") {
    CHECK_THROWS_AS(partition(ds, 1.0, -0.1), DomainError);
  }
}

TEST_CASE("dataset CSV and sidecar round trip", "[scenario][io]") {
  const auto m = testutil::nine_bus();
  ScenarioOptions opts;
  opts.n_c = 2;
  const auto scen = enumerate_scenarios(m, opts);
  ScenarioEvalSettings settings;
  auto ds = evaluate_metric_dataset(m, scen, MetricId::g3, settings);
  partition(ds, ds.g_lim, 0.25);

  const auto dir = std::filesystem::temp_directory_path() / "stabcone_ds_roundtrip";
  std::filesystem::create_directories(dir);
  const auto csv = (dir / "g3.csv").string();
  const auto meta = (dir / "g3.meta.json").string();
  write_dataset_csv(ds, csv);
  write_dataset_sidecar(ds, meta, 42, opts.n_c, opts.budget);

  const auto back = read_dataset(csv, meta);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.g_lim == ds.g_lim);
  CHECK(back.nu == ds.nu);
  CHECK(back.variables == ds.variables);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].scenario_id == ds.samples[i].scenario_id);
    if (std::isfinite(ds.samples[i].g)) {
      CHECK(back.samples[i].g == ds.samples[i].g);  // %.17g round trips exactly
    } else {
      CHECK(back.samples[i].structurally_infeasible);
    }
    CHECK((back.samples[i].x - ds.samples[i].x).cwiseAbs().maxCoeff() == 0.0);
  }
}
