#include <glob.h>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "husimi/experiment.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_instability = 3;

struct Overrides {
  std::string config;
  std::vector<std::string> methods;
  std::vector<double> epsilons;
  std::optional<long long> n1, n2;
  std::optional<double> h1, h2, t_final;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<unsigned> threads;

  void attach(CLI::App* cmd, bool estimator_flags) {
    cmd->add_option("--config", config, "INI file, or preset:NAME")->required();
    cmd->add_option("--epsilon", epsilons, "keep or add runs for these epsilons");
    cmd->add_option("--t-final", t_final);
    cmd->add_option("--output", output, "output directory");
    cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);
    if (!estimator_flags) return;
    cmd->add_option("--method", methods, "husimi-corrected, husimi-naive, wigner");
    cmd->add_option("--n1", n1);
    cmd->add_option("--n2", n2);
    cmd->add_option("--h1", h1);
    cmd->add_option("--h2", h2);
    cmd->add_option("--seed", seed);
  }

  husimi::ExperimentConfig load() const {
    husimi::ExperimentConfig cfg = config.starts_with("preset:")
                                       ? husimi::preset(config.substr(7))
                                       : husimi::load_config(config);
    if (!methods.empty()) {
      cfg.methods.clear();
      for (const auto& m : methods) {
        try {
          cfg.methods.push_back(husimi::parse_method(m));
        } catch (const std::exception& e) {
          throw husimi::ConfigError(e.what(), "--method");
        }
      }
    }
    if (!epsilons.empty()) {
      if (cfg.runs.empty()) throw husimi::ConfigError("no run to derive epsilon from", "--epsilon");
      std::vector<husimi::EpsilonRun> kept;
      for (double eps : epsilons) {
        husimi::EpsilonRun run = cfg.runs.front();
        for (const auto& r : cfg.runs)
          if (std::abs(r.epsilon - eps) <= 1e-12 * eps) run = r;
        run.epsilon = eps;
        kept.push_back(run);
      }
      cfg.runs = kept;
    }
    for (auto& r : cfg.runs) {
      if (n1) r.n1 = *n1;
      if (n2) r.n2 = *n2;
      if (h1) r.h1 = *h1;
      if (h2) r.h2 = *h2;
    }
    if (t_final) cfg.t_final = *t_final;
    if (seed) cfg.seed = *seed;
    if (output) cfg.output_dir = *output;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return cfg;
  }
};

std::vector<std::string> expand(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  return out;
}

void report(const husimi::ExperimentResult& result) {
  for (const auto& f : result.files) std::cout << "wrote " << f << "\n";
  for (const auto& [method, table] : result.convergence)
    std::cout << husimi::to_string(method) << " slope " << husimi::format_number(table.slope) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corrected Husimi sampling experiments"};
  app.require_subcommand(1);
  Overrides sim, ref;
  auto* simulate = app.add_subcommand("simulate", "run estimators (and references if configured)");
  sim.attach(simulate, true);
  auto* reference = app.add_subcommand("reference", "run the grid or exact reference only");
  ref.attach(reference, false);
  auto* converge = app.add_subcommand("converge", "fit slopes from error summaries");
  std::string inputs, output;
  converge->add_option("--inputs", inputs, "glob of error_summary_eps*.csv files")->required();
  converge->add_option("--output", output)->required();
  auto* presets = app.add_subcommand("presets", "list preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*presets) {
      for (const auto& name : husimi::preset_names()) std::cout << name << "\n";
    } else if (*simulate) {
      report(husimi::run_experiment(sim.load()));
    } else if (*reference) {
      report(husimi::run_references(ref.load()));
    } else if (*converge) {
      const auto files = expand(inputs);
      if (files.empty()) throw husimi::ConfigError("no files match '" + inputs + "'", "--inputs");
      for (const auto& [method, table] : husimi::converge_files(files, output))
        std::cout << method << " slope " << husimi::format_number(table.slope) << "\n";
    }
  } catch (const husimi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const husimi::InstabilityError& e) {
    std::cerr << "instability: " << e.what() << " (" << e.failed_nodes().size() << " trajectories)\n";
    return exit_instability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
