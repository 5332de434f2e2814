// zpanel: firm-panel analytics pipeline driver.
//
// Stages: synth -> ingest -> derive -> tfp -> classify -> aggregate ->
// estimate -> report. Artifacts are flat CSV files in the output directory;
// rerunning a later stage reuses persisted upstream artifacts.

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "zpanel/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitMissingDependency = 2;
constexpr int kExitDataError = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zpanel: zombie-lending firm-panel analytics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::string firm_years, instruments, deflators, labor_costs, catalog;
  std::string definition, weight, stages_list;
  int threads = 0;
  long long seed = -1;
  int window_start = 0, window_end = 0;

  app.add_option("--config", config_path, "config file (key = value sections)");
  app.add_option("--out", output_dir, "output directory");
  app.add_option("--firm-years", firm_years, "firm_years.csv path");
  app.add_option("--instruments", instruments, "instruments.csv path");
  app.add_option("--deflators", deflators, "deflators.csv path");
  app.add_option("--labor-costs", labor_costs, "labor_costs.csv path");
  app.add_option("--catalog", catalog, "regression catalog spec file");
  app.add_option("--definition", definition,
                 "zombie definition: broad|narrow_x|nar");
  app.add_option("--weight", weight, "share weight: face|count");
  app.add_option("--threads", threads, "worker threads (default 1)");
  app.add_option("--seed", seed, "synthetic data seed");
  app.add_option("--window-start", window_start, "sample window first year");
  app.add_option("--window-end", window_end, "sample window last year");

  std::string run_stages_arg;
  auto* run_cmd = app.add_subcommand("run", "run a stage list");
  run_cmd->add_option("--stages", run_stages_arg,
                      "comma-separated stages (ingest,derive,...)")
      ->required();

  for (const char* name : {"synth", "ingest", "derive", "tfp", "classify",
                           "aggregate", "estimate", "report", "figures"})
    app.add_subcommand(name, std::string("run the ") + name + " stage");

  CLI11_PARSE(app, argc, argv);

  zpanel::pipeline::RunConfig cfg;
  try {
    if (!config_path.empty())
      zpanel::pipeline::apply_config(
          cfg, zpanel::pipeline::parse_config_file(config_path));
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!firm_years.empty()) cfg.firm_years = firm_years;
    if (!instruments.empty()) cfg.instruments = instruments;
    if (!deflators.empty()) cfg.deflators = deflators;
    if (!labor_costs.empty()) cfg.labor_costs = labor_costs;
    if (!catalog.empty()) cfg.catalog_file = catalog;
    if (!definition.empty()) {
      auto d = zpanel::parse_definition(definition);
      if (!d) {
        std::cerr << "unknown definition '" << definition << "'\n";
        return kExitUsage;
      }
      cfg.definition = *d;
    }
    if (!weight.empty()) {
      auto w = zpanel::agg::parse_weight(weight);
      if (!w) {
        std::cerr << "unknown weight '" << weight << "'\n";
        return kExitUsage;
      }
      cfg.weight = *w;
    }
    if (threads > 0) cfg.threads = threads;
    if (seed >= 0) cfg.synth.seed = static_cast<unsigned long long>(seed);
    if (window_start > 0) cfg.window.first = window_start;
    if (window_end > 0) cfg.window.last = window_end;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<std::string> stages;
  if (run_cmd->parsed()) {
    stages = split_list(run_stages_arg);
    if (stages.empty()) {
      std::cerr << "--stages needs at least one stage\n";
      return kExitUsage;
    }
  } else {
    for (const auto* sub : app.get_subcommands()) stages.push_back(sub->get_name());
  }

  try {
    for (const auto& s : stages) {
      if (s == "figures")
        zpanel::pipeline::emit_figures(cfg);
      else
        zpanel::pipeline::run_stages(cfg, {s});
    }
  } catch (const zpanel::pipeline::MissingDependency& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingDependency;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}
