#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "husimi/estimator.hpp"
#include "husimi/reference_solver.hpp"

namespace husimi {

/// Per-epsilon sample counts, steps and reference grid.
struct EpsilonRun {
  double epsilon = 0.1;
  Index n1 = 10000;
  Index n2 = 1000;
  double h1 = 1e-2;
  double h2 = 1e-3;
  double grid_half_width = 3.0;
  Index grid_points = 512;
  double grid_dt = 1e-3;

  bool operator==(const EpsilonRun&) const = default;
};

enum class ReferenceKind {
  none,
  grid,   ///< split-step Fourier solution, d <= 2
  exact,  ///< closed form for the harmonic oscillator with Gaussian data
};

/// `automatic` picks qmc-split when the cross term is negligible, else mcmc.
enum class SamplingChoice { automatic, qmc_split, mcmc };

struct ExperimentConfig {
  std::string name = "custom";
  std::string potential = "torsional";
  Index dimension = 2;
  double sigma = 0.11180339887498948;
  /// One or two phase-space centres of length 2d.
  std::vector<VectorXd> centers;
  std::vector<EpsilonRun> runs;
  std::vector<Method> methods{Method::husimi_corrected};
  std::vector<std::string> observables{"q1", "q2", "p1", "p2", "potential", "kinetic", "total"};
  double t_final = 5.0;
  double record_every = 0.1;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned threads = 1;
  SamplingChoice sampling = SamplingChoice::automatic;
  /// Independent Markov chains averaged when mcmc sampling is used.
  int mcmc_repeats = 1;
  ReferenceKind reference = ReferenceKind::none;
  /// Also run the grid reference at grid_dt / 2 and report the difference.
  bool reference_check = false;
  double q_bound = 1e3;
  ForceModel force = ForceModel::h_eps;

  void validate() const;
  bool operator==(const ExperimentConfig& other) const;
};

std::vector<std::string> preset_names();
/// Built-in configurations; ConfigError for unknown names.
ExperimentConfig preset(const std::string& name);

/// INI text with an [experiment] section and one [epsilon.N] section per
/// run. A `preset` key seeds the configuration, other keys override it.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Fully explicit INI text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Reference values on the output time grid.
struct ReferenceSeries {
  double epsilon = 0.0;
  std::vector<double> times;
  std::vector<std::string> observables;
  MatrixXd values;  ///< times x observables
  /// Max difference to the run at half the step; NaN when not computed.
  double self_convergence = std::numeric_limits<double>::quiet_NaN();
  double max_aliasing = 0.0;
  bool resolved = true;
};

ReferenceSeries run_reference(const ExperimentConfig& cfg, const EpsilonRun& run);

/// Error groups reported in summaries: Euclidean norm over the position
/// (resp. momentum) components, absolute error for the energies.
std::vector<std::string> error_groups(const ExperimentConfig& cfg);

/// Time average of the error of `group` over the common grid.
double time_averaged_error(const ExpectationSeries& est, const ReferenceSeries& ref,
                           const std::string& group);

struct ConvergenceRow {
  double epsilon;
  double error;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(error) against log(epsilon); needs >= 3 points.
ConvergenceTable convergence_table(const std::vector<ConvergenceRow>& rows);

struct RunRecord {
  double epsilon;
  ExpectationSeries series;
  /// Mean error over error_groups() and the per-group values; empty without reference.
  std::optional<double> average_error;
  std::vector<std::pair<std::string, double>> group_errors;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<ReferenceSeries> references;
  /// One table per method when a reference and >= 3 epsilons exist.
  std::vector<std::pair<Method, ConvergenceTable>> convergence;
  std::vector<std::string> files;
};

/// Runs every (epsilon, method) pair and writes CSV files to cfg.output_dir.
/// On trajectory instability the completed outputs stay on disk and the
/// PartialEstimateError propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
/// Reference CSVs only; ConfigError when cfg.reference is none.
ExperimentResult run_references(const ExperimentConfig& cfg);

/// Collects the "average" rows of error summary files, fits one slope per
/// method and writes method,epsilon,time_avg_error,slope.
std::vector<std::pair<std::string, ConvergenceTable>> converge_files(
    const std::vector<std::string>& inputs, const std::string& output);

/// printf %.17g.
std::string format_number(double x);

}  // namespace husimi
