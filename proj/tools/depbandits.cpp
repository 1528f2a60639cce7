#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "depbandits/cli.hpp"

namespace cli = depbandits::cli;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0, horizon = 0, reps = 0;
  std::string kappa;
  bool audit = false;
  unsigned threads = 0;
  std::string csv, svg;
};

void add_common(CLI::App* sub, Options& o, bool runs) {
  sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--kappa", o.kappa, "confidence scale: a positive number or 'floor'");
  if (!runs) return;
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--horizon", o.horizon, "rounds per replication");
  sub->add_option("--reps", o.reps, "replications per policy");
  sub->add_flag("--audit", o.audit, "write a per-round audit log");
  sub->add_option("--threads", o.threads, "worker threads (default: DEPBANDITS_THREADS or all cores)");
}

cli::Overrides overrides(const CLI::App* sub, const Options& o) {
  cli::Overrides ov;
  auto given = [&](const char* name) {
    try {
      return sub->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };
  if (given("--out")) ov.out = o.out;
  if (given("--seed")) ov.seed = o.seed;
  if (given("--horizon")) ov.horizon = o.horizon;
  if (given("--reps")) ov.reps = o.reps;
  if (given("--kappa")) ov.kappa = o.kappa;
  if (given("--threads")) ov.threads = o.threads;
  ov.audit = o.audit;
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bandits with dependent arms: simulation, bounds, certification and plots"};
  app.set_version_flag("--version", cli::kVersion);
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "run the configured experiment and write CSVs and a manifest");
  add_common(simulate, o, true);
  auto* bounds = app.add_subcommand("bounds", "write the regret bound report as JSON");
  add_common(bounds, o, false);
  auto* certify = app.add_subcommand("certify", "certify the structural constants of every cluster");
  add_common(certify, o, false);
  auto* plot = app.add_subcommand("plot", "render an aggregate CSV as an SVG");
  plot->add_option("csv", o.csv, "aggregate CSV")->required();
  plot->add_option("svg", o.svg, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigFailure;
  }

  if (simulate->parsed()) return cli::cmd_simulate(o.config, overrides(simulate, o), std::cout, std::cerr);
  if (bounds->parsed()) return cli::cmd_bounds(o.config, overrides(bounds, o), std::cout, std::cerr);
  if (certify->parsed()) return cli::cmd_certify(o.config, overrides(certify, o), std::cout, std::cerr);
  return cli::cmd_plot(o.csv, o.svg, std::cout, std::cerr);
}
