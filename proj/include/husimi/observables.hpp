#pragma once

#include <functional>
#include <string>
#include <vector>

#include "husimi/phase_space.hpp"

namespace husimi {

enum class ObservableKind { position, momentum, potential, kinetic, total, custom };

/// A real phase-space symbol a(z) with optional derivative callbacks.
///
/// Derivative callbacks may be empty: symbols produced by correct_symbol()
/// only carry values. Accessors throw CapabilityError when a missing
/// derivative is requested.
class ObservableSymbol {
 public:
  using ValueFn = std::function<double(const VecRef&)>;
  using GradientFn = std::function<VectorXd(const VecRef&)>;
  using HessianFn = std::function<MatrixXd(const VecRef&)>;

  ObservableSymbol(std::string name, Index dimension, ValueFn value, GradientFn gradient = {},
                   HessianFn hessian = {}, ValueFn laplacian = {},
                   ObservableKind kind = ObservableKind::custom, Index component = -1);

  const std::string& name() const { return name_; }
  Index dimension() const { return d_; }
  ObservableKind kind() const { return kind_; }
  /// Coordinate index for position/momentum symbols, -1 otherwise.
  Index component() const { return component_; }

  bool has_gradient() const { return static_cast<bool>(gradient_); }
  bool has_hessian() const { return static_cast<bool>(hessian_); }
  bool has_laplacian() const { return static_cast<bool>(laplacian_) || has_hessian(); }

  double value(const VecRef& z) const;
  VectorXd gradient(const VecRef& z) const;
  MatrixXd hessian(const VecRef& z) const;
  /// Falls back to trace(hessian) when no dedicated callback exists.
  double laplacian(const VecRef& z) const;

 private:
  void check(const VecRef& z) const;

  std::string name_;
  Index d_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  ValueFn laplacian_;
  ObservableKind kind_;
  Index component_;
};

/// a_eps = a - (eps/4) Delta a, value-only.
ObservableSymbol correct_symbol(const ObservableSymbol& a, double epsilon);

/// alpha a + beta b with all derivatives that both operands provide.
ObservableSymbol linear_combination(double alpha, const ObservableSymbol& a, double beta,
                                    const ObservableSymbol& b);

/// q_1..q_d, p_1..p_d, V, |p|^2/2 and h, with analytic derivatives.
std::vector<ObservableSymbol> builtin_observables(const HamiltonianModel& model);

/// Picks symbols from builtin_observables by name ("q1", "p2", "potential",
/// "kinetic", "total"). An empty selection is an error.
std::vector<ObservableSymbol> select_observables(const HamiltonianModel& model,
                                                 const std::vector<std::string>& names);

}  // namespace husimi
