#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "husimi/phase_space.hpp"
#include "husimi/states.hpp"

namespace husimi {

/// Sobol direction numbers, one row per dimension, 32-bit resolution.
///
/// Text format (Joe & Kuo layout): a header line, then per dimension
/// `d s a m_1 ... m_s`, starting at d = 2. Dimension 1 is implicit.
class DirectionTable {
 public:
  static constexpr int bits = 32;

  static DirectionTable parse(std::istream& in, std::string identifier = "custom");
  static DirectionTable load(const std::string& path);
  /// Bundled Joe & Kuo (new-joe-kuo-6) numbers, 64 dimensions.
  static const DirectionTable& joe_kuo();

  Index max_dimension() const { return static_cast<Index>(directions_.size()); }
  const std::string& identifier() const { return identifier_; }
  const std::array<std::uint32_t, bits>& directions(Index dim) const { return directions_[dim]; }

 private:
  std::vector<std::array<std::uint32_t, bits>> directions_;
  std::string identifier_;
};

/// Unscrambled Sobol sequence in the Gray-code ordering.
///
/// point(i) is computed directly from i, so ranges can be split across
/// workers. Index 0 is the all-zero point and is never produced; next()
/// enumerates from 1.
class SobolGenerator {
 public:
  SobolGenerator(Index dimension, const DirectionTable& table = DirectionTable::joe_kuo(),
                 Index dimension_offset = 0);

  Index dimension() const { return dimension_; }
  Index dimension_offset() const { return offset_; }
  const std::string& table_identifier() const { return table_->identifier(); }
  std::uint64_t index() const { return index_; }

  /// i-th point, i >= 1; all coordinates lie in (0, 1).
  VectorXd point(std::uint64_t i) const;
  void point(std::uint64_t i, VecOut out) const;

  /// Returns point(index() + 1) and advances.
  VectorXd next();
  void seek(std::uint64_t last_index) { index_ = last_index; }

 private:
  Index dimension_;
  Index offset_;
  const DirectionTable* table_;
  std::uint64_t index_ = 0;
};

/// Standard normal CDF.
double normal_cdf(double x);

/// Quantile of the standard normal distribution on (0, 1).
double inverse_normal_cdf(double u);

enum class Provenance { qmc, mcmc };

/// Equal-weight quadrature nodes, one column per node.
struct SampleEnsemble {
  MatrixXd nodes;
  Provenance provenance = Provenance::qmc;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 1;
  Index dimension_offset = 0;

  Index size() const { return nodes.cols(); }
  Index phase_dimension() const { return nodes.rows(); }
  double weight() const { return 1.0 / static_cast<double>(size()); }
  PhasePoint node(Index j) const { return PhasePoint::from_coordinates(nodes.col(j)); }
};

/// nodes z_i = center + sqrt(scale) Phi^{-1}(sobol(i)), i = 1..N.
/// The generator dimension must equal the phase-space dimension.
SampleEnsemble sample_gaussian_qmc(const PhasePoint& center, double covariance_scale, Index n,
                                   const SobolGenerator& gen);

/// min(1, target_proposed / target_current * proposal_ratio), where
/// proposal_ratio = q(current | proposed) / q(proposed | current).
double metropolis_acceptance(double target_current, double target_proposed,
                             double proposal_ratio = 1.0);

struct MetropolisOptions {
  /// Random-walk standard deviation per coordinate; <= 0 selects sqrt(eps).
  double step_width = 0.0;
  double jump_probability = 0.1;
  /// Variance of the independent jump proposal; <= 0 selects eps.
  double jump_variance = 0.0;
  /// Jump centres; empty selects the packet centres plus their midpoint.
  std::vector<VectorXd> jump_centers;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 1;
};

/// Metropolis-Hastings chain on a phase-space density with a mixture of a
/// Gaussian random walk and independent jumps between sampling regions.
class MetropolisChain {
 public:
  MetropolisChain(PhaseSpaceDensity target, VectorXd start, MetropolisOptions options);

  const VectorXd& state() const { return state_; }
  const MetropolisOptions& options() const { return options_; }
  double acceptance_rate() const;

  /// One transition; returns whether the proposal was accepted.
  bool step();

  /// Runs burn-in (once) and records the next n states.
  SampleEnsemble sample(Index n);

 private:
  double jump_density(const VectorXd& z) const;

  PhaseSpaceDensity target_;
  VectorXd state_;
  double state_density_;
  MetropolisOptions options_;
  std::mt19937_64 rng_;
  std::size_t proposed_ = 0, accepted_ = 0;
  bool burned_in_ = false;
};

enum class SamplingStrategy { qmc_split, mcmc };

/// Neglect threshold for the cross term of a two-packet Husimi density.
inline constexpr double cross_term_neglect_threshold = 1e-12;

struct SuperpositionSampling {
  SamplingStrategy strategy = SamplingStrategy::qmc_split;
  Index dimension_offset = 0;
  MetropolisOptions metropolis{};
};

/// Nodes distributed according to H^eps(psi0). qmc-split samples each packet
/// with its share of Sobol points and is refused while the cross term is
/// above the neglect threshold.
SampleEnsemble sample_superposition(const GaussianSuperposition& psi0, Index n,
                                    const SuperpositionSampling& how);

}  // namespace husimi
