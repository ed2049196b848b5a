#include "magfilm/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>

namespace {

using namespace magfilm;

int run(const std::string& path, std::optional<Experiment> selected, const RunOptions& opts) {
  try {
    const RunConfig cfg = load_config(path);
    const Experiment e = selected ? *selected : cfg.experiment.value_or(Experiment::validate);
    const RunReport r = run_experiment(cfg, e, opts);
    if (!opts.quiet) {
      for (const auto& line : r.lines) fmt::print("{}\n", line);
      for (const auto& f : r.files) fmt::print("wrote {}\n", f.string());
    }
    return 0;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const ModelError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    fmt::print(stderr, "solver did not converge: {} (residual {:.3e})\n", e.what(), e.residual());
    return 3;
  } catch (const InvariantFailure& e) {
    fmt::print(stderr, "invariant failure: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasistatic magnetoelastic film simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string output_dir;
  RunOptions opts;
  std::optional<Experiment> selected;

  const std::pair<const char*, std::optional<Experiment>> commands[] = {
      {"run", std::nullopt},
      {"static", Experiment::static_min},
      {"evolve", Experiment::evolve},
      {"gamma-sweep", Experiment::gamma_sweep},
      {"stray-diag", Experiment::stray_diag},
      {"validate", Experiment::validate},
  };
  for (const auto& [name, exp] : commands) {
    auto* sub = app.add_subcommand(name, exp ? "Run the " + to_string(*exp) + " experiment"
                                             : std::string("Run the experiment named in the config"));
    sub->add_option("config", config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "Output directory (overrides MAGFILM_OUTPUT_DIR and the config)");
    sub->add_flag("--deterministic", opts.deterministic, "Sequential reductions");
    sub->add_flag("-q,--quiet", opts.quiet, "No summary on stdout");
    sub->callback([&selected, e = exp] { selected = e; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!output_dir.empty()) opts.output_dir = output_dir;
  return run(config, selected, opts);
}
