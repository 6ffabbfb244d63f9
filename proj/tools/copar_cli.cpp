#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "copar/copar.hpp"

namespace {

copar::RunConfig load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                                     bool legacy_charge) {
  copar::RunConfig cfg = copar::load_run_config(path);
  if (seed) cfg.seed = *seed;
  if (legacy_charge) cfg.legacy_charge = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copar: replica control for counter-like objects"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  bool legacy_charge = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_flag("--legacy-charge", legacy_charge,
                  "owner charging instead of post-commit redistribution");
    sub->add_option("--out", out_path, "trace output path");
  };

  auto* sim = app.add_subcommand("sim", "deterministic full run in simulated time");
  add_common(sim);

  auto* node_cmd = app.add_subcommand("node", "start one networked server");
  int node_id = 0;
  add_common(node_cmd);
  node_cmd->add_option("id", node_id, "node id to run")->required();

  auto* gen = app.add_subcommand("generate", "drive a networked run");
  add_common(gen);

  auto* report = app.add_subcommand("report", "summarize a trace file");
  std::string trace_path;
  report->add_option("trace", trace_path, "trace CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      auto cfg = load_with_overrides(config_path, seed, legacy_charge);
      auto res = copar::run_sim(cfg);
      if (!out_path.empty()) copar::write_csv_file(res.trace, out_path);
      copar::print_summary(copar::summarize(res.trace), std::cout);
      if (!res.generator_done) {
        std::cout << "WARNING: run did not complete all transactions\n";
      }
    } else if (node_cmd->parsed()) {
      auto cfg = load_with_overrides(config_path, seed, legacy_charge);
      copar::Trace trace = copar::run_net_node(cfg, node_id);
      if (!out_path.empty()) copar::write_csv_file(trace, out_path);
    } else if (gen->parsed()) {
      auto cfg = load_with_overrides(config_path, seed, legacy_charge);
      copar::Trace trace = copar::run_net_generator(cfg);
      if (!out_path.empty()) copar::write_csv_file(trace, out_path);
      copar::print_summary(copar::summarize(trace), std::cout);
    } else if (report->parsed()) {
      copar::Trace trace = copar::read_csv_file(trace_path);
      copar::print_summary(copar::summarize(trace), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
