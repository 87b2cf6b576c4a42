#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "husimi/corrected_flow.hpp"
#include "husimi/observables.hpp"
#include "husimi/sampling.hpp"
#include "husimi/states.hpp"

namespace husimi {

enum class Method {
  husimi_corrected,  ///< corrected flow, a_eps and the Lambda/Gamma correction term
  husimi_naive,      ///< Husimi nodes, classical flow, a itself
  wigner,            ///< Wigner nodes, classical flow, a itself
};

std::string to_string(Method m);
/// Accepts "husimi-corrected", "husimi-naive", "wigner" and the letters A, B, C.
Method parse_method(const std::string& text);

struct EstimatorConfig {
  Method method = Method::husimi_corrected;
  Index n1 = 1 << 14;
  Index n2 = 1 << 10;
  double h1 = 1e-3;
  double h2 = 1e-3;
  double t_final = 1.0;
  /// Spacing of the output time grid; a multiple of h1 (and of h2 when used).
  double record_every = 0.1;
  std::uint64_t seed = 1;
  /// Worker count; results do not depend on it.
  unsigned threads = 1;
  double q_bound = 1e3;
  ForceModel force = ForceModel::h_eps;
  SuperpositionSampling sampling{};

  void validate() const;
  /// Integer ratio record_every / h, or ContractError.
  std::size_t record_stride(double h) const;
  std::size_t record_count() const;
};

struct ExpectationSeries {
  std::vector<double> times;
  std::vector<std::string> observables;
  /// values(i, k): observable k at times[i].
  MatrixXd values;
  Method method = Method::husimi_corrected;
  Index n1 = 0, n2 = 0;
  std::uint64_t seed = 0;

  Index observable_index(const std::string& name) const;
  VectorXd column(const std::string& name) const { return values.col(observable_index(name)); }
};

/// Trajectory instability during estimate(); partial() averages the nodes
/// that stayed admissible.
class PartialEstimateError : public InstabilityError {
 public:
  PartialEstimateError(const std::string& what, std::vector<std::size_t> failed,
                       ExpectationSeries partial)
      : InstabilityError(what, std::move(failed)), partial_(std::move(partial)) {}
  const ExpectationSeries& partial() const noexcept { return partial_; }

 private:
  ExpectationSeries partial_;
};

/// a_eps(Phi) - (eps/2) [tr(Lambda D^2a(Phi)) + Gamma . grad a(Phi)].
double evaluate_F(const ObservableSymbol& a, const CorrectionState& state, double epsilon);

/// tr(Lambda D^2a(Phi)) + Gamma . grad a(Phi).
double correction_integrand(const ObservableSymbol& a, const CorrectionState& state);

/// Expectation values of `observables` on the grid 0, record_every, ... up to t_final.
ExpectationSeries estimate(const GaussianSuperposition& psi0,
                           const std::vector<ObservableSymbol>& observables,
                           const HamiltonianModel& model, const EstimatorConfig& cfg);

struct SeriesDifference {
  std::vector<double> times;
  std::vector<std::string> observables;
  MatrixXd difference;  ///< a - b
  VectorXd sup_norm;    ///< per observable

  double sup(const std::string& name) const;
};

/// Pointwise a - b; grids and observable lists must agree.
SeriesDifference compare_methods(const ExpectationSeries& a, const ExpectationSeries& b);

}  // namespace husimi
