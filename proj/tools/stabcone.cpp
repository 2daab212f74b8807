// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabcone/netio.hpp"
#include "stabcone/pipeline.hpp"

namespace {

std::vector<std::string> split_metrics(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct CommonArgs {
  std::string network;
  std::string config;
  std::string metrics;
  int nc = -1;
  long long budget = -1;
  long long seed = -1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--network", args.network, "network JSON file")->required();
  cmd->add_option("--config", args.config, "pipeline config JSON file")->required();
  cmd->add_option("--metrics", args.metrics, "comma-separated metric override (g1..g6,h1..h3)");
  cmd->add_option("--nc", args.nc, "override the number of availability regions per IBR");
  cmd->add_option("--budget", args.budget, "override the scenario budget");
  cmd->add_option("--seed", args.seed, "override the sampling/fit seed");
  cmd->add_option("--out", args.out, "output directory")->required();
}

int run_compile(const CommonArgs& args, bool fit_stage) {
  auto [cfg, model] = stabcone::load(args.config, args.network);
  if (!args.metrics.empty()) cfg.metrics = split_metrics(args.metrics);
  if (args.nc > 0) cfg.n_c = args.nc;
  if (args.budget > 0) cfg.budget = args.budget;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  cfg.validate();
  const auto result = stabcone::run_pipeline(model, cfg, args.out, fit_stage);
  stabcone::export_report(result);
  std::cout << stabcone::report_to_text(result);
  return result.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stability-constraint compiler: evaluates stability metrics over "
               "commitment/availability scenarios and compiles conservative "
               "second-order-cone constraints"};
  app.require_subcommand(1);

  CommonArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "generate metric datasets only");
  add_common(eval_cmd, eval_args);

  CommonArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "run the full compile pipeline");
  add_common(fit_cmd, fit_args);

  std::string v_constraint, v_dataset, v_meta;
  CLI::App* verify_cmd = app.add_subcommand("verify", "recheck an exported constraint against a dataset");
  verify_cmd->add_option("--constraint", v_constraint, "constraint JSON file")->required();
  verify_cmd->add_option("--dataset", v_dataset, "dataset CSV file")->required();
  verify_cmd->add_option("--meta", v_meta, "dataset sidecar JSON (default: dataset with .meta.json)");

  std::string x_constraint, x_format = "txt", x_out;
  CLI::App* export_cmd = app.add_subcommand("export", "convert a constraint file to another format");
  export_cmd->add_option("--constraint", x_constraint, "constraint JSON file")->required();
  export_cmd->add_option("--format", x_format, "output format: json, csv, or txt");
  export_cmd->add_option("--out", x_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval_cmd) return run_compile(eval_args, /*fit_stage=*/false);
    if (*fit_cmd) return run_compile(fit_args, /*fit_stage=*/true);

    if (*verify_cmd) {
      std::string meta = v_meta;
      if (meta.empty()) {
        meta = v_dataset;
        const auto pos = meta.rfind(".csv");
        if (pos != std::string::npos) meta = meta.substr(0, pos);
        meta += ".meta.json";
      }
      const auto res = stabcone::reverify_constraint(v_constraint, v_dataset, meta);
      std::printf("samples: omega1=%zu omega2=%zu omega3=%zu\n", res.report.counts.omega1,
                  res.report.counts.omega2, res.report.counts.omega3);
      std::printf("misclassified: omega1=%zu omega2=%zu omega3=%zu\n",
                  res.report.misclassified_omega1, res.report.misclassified_omega2,
                  res.report.misclassified_omega3);
      if (std::isfinite(res.report.omega2_rms)) {
        std::printf("omega2 rms: %s\n", stabcone::format_double(res.report.omega2_rms).c_str());
      }
      std::printf("conservative: %s\n", res.report.conservative ? "yes" : "NO");
      std::printf("matches stored diagnostics: %s\n", res.matches_stored_diagnostics ? "yes" : "NO");
      if (res.report.limit_mismatch) std::printf("WARNING: dataset g_lim differs from constraint\n");
      return res.ok ? 0 : 1;
    }

    if (*export_cmd) {
      const auto j = stabcone::ioutil::parse_file(x_constraint);
      const auto s = stabcone::surrogate_from_json(j);
      std::string rendered;
      if (x_format == "json") {
        rendered = stabcone::to_json(s).dump(2) + "\n";
      } else if (x_format == "csv") {
        rendered = stabcone::constraint_to_csv(s);
      } else if (x_format == "txt") {
        rendered = stabcone::constraint_to_text(s);
      } else {
        std::fprintf(stderr, "unknown format '%s'\n", x_format.c_str());
        return 2;
      }
      if (x_out.empty()) {
        std::fputs(rendered.c_str(), stdout);
      } else {
        std::ofstream out(x_out, std::ios::binary);
        if (!out) throw stabcone::Error("cannot open '" + x_out + "' for writing");
        out << rendered;
      }
      return 0;
    }
  } catch (const stabcone::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 2;
}
