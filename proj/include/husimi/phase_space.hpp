#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "husimi/errors.hpp"
#include "husimi/linalg.hpp"

namespace husimi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using VecRef = Eigen::Ref<const VectorXd>;
using VecOut = Eigen::Ref<VectorXd>;
using MatOut = Eigen::Ref<MatrixXd>;

/// A point z = (q, p) of the 2d-dimensional phase space, stored contiguously.
template <typename Scalar>
class BasicPhasePoint {
 public:
  using Vector = VectorX<Scalar>;

  BasicPhasePoint(const Vector& q, const Vector& p) : z_(q.size() + p.size()) {
    if (q.size() != p.size()) throw ContractError("PhasePoint: q and p must have the same length");
    if (q.size() < 1) throw ContractError("PhasePoint: dimension must be >= 1");
    z_ << q, p;
    check_finite();
  }

  /// Interprets z as (q, p) halves.
  static BasicPhasePoint from_coordinates(const Vector& z) {
    if (z.size() < 2 || z.size() % 2 != 0)
      throw ContractError("PhasePoint: coordinate vector must have even length >= 2");
    return BasicPhasePoint(z.head(z.size() / 2), z.tail(z.size() / 2));
  }

  Index dimension() const { return z_.size() / 2; }
  auto q() const { return z_.head(dimension()); }
  auto p() const { return z_.tail(dimension()); }
  const Vector& coordinates() const { return z_; }

 private:
  void check_finite() const {
    if (!z_.allFinite()) throw ContractError("PhasePoint: non-finite component");
  }

  Vector z_;
};

using PhasePoint = BasicPhasePoint<double>;

/// Potential V : R^d -> R with derivatives up to order three.
///
/// Implementations must be safe to call concurrently; all evaluation methods
/// are const and keep no mutable state.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual Index dimension() const = 0;
  virtual std::string name() const = 0;

  virtual double value(const VecRef& q) const = 0;
  virtual void gradient(const VecRef& q, VecOut out) const = 0;
  virtual void hessian(const VecRef& q, MatOut out) const = 0;

  /// False if third derivatives are neither analytic nor approximated.
  virtual bool has_third_derivative() const { return true; }

  /// d x d slice  d/dq_i D^2V(q).
  ///
  /// The base implementation differentiates hessian() by central differences
  /// with step cbrt(machine epsilon) * max(1, |q|).
  virtual void third_derivative(const VecRef& q, Index i, MatOut out) const;

  /// Delta V(q) = trace D^2V(q).
  virtual double laplacian(const VecRef& q) const;

  /// grad (Delta V)(q); component i is trace of third_derivative(q, i).
  virtual void laplacian_gradient(const VecRef& q, VecOut out) const;

  /// E[V(X)] for X ~ N(mean, variance * Id), where the mean may be complex
  /// (analytic continuation). Used for closed-form Gaussian expectations;
  /// returns nullopt when no closed form is available.
  virtual std::optional<std::complex<double>> gaussian_average(
      std::span<const std::complex<double>> mean, double variance) const;

  VectorXd gradient_at(const VecRef& q) const;
  MatrixXd hessian_at(const VecRef& q) const;
  MatrixXd third_derivative_at(const VecRef& q, Index i) const;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// h(q,p) = |p|^2/2 + V(q) with the semiclassical parameter epsilon.
class HamiltonianModel {
 public:
  HamiltonianModel(PotentialPtr potential, double epsilon);

  const Potential& potential() const { return *potential_; }
  const PotentialPtr& potential_ptr() const { return potential_; }
  double epsilon() const { return epsilon_; }
  Index dimension() const { return potential_->dimension(); }

  /// Same potential, different epsilon.
  HamiltonianModel with_epsilon(double epsilon) const { return {potential_, epsilon}; }

  double h(const VecRef& z) const;
  /// Phase-space Laplacian: d + trace D^2V(q).
  double laplacian_h(const VecRef& z) const;

 private:
  PotentialPtr potential_;
  double epsilon_;
};

/// h_eps(z) = h(z) - (eps/4)(d + trace D^2V(q)).
double eval_h_eps(const HamiltonianModel& model, const PhasePoint& z);

/// grad h_eps = (grad V - (eps/4) grad(Delta V), p).
VectorXd grad_h_eps(const HamiltonianModel& model, const PhasePoint& z);

/// -grad_q h_eps at q, written into `force`. Hot path of the flow integrators.
void corrected_force(const HamiltonianModel& model, const VecRef& q, VecOut force);

/// -grad V at q.
void classical_force(const Potential& potential, const VecRef& q, VecOut force);

}  // namespace husimi
