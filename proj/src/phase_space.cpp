#include "husimi/phase_space.hpp"

#include <cmath>
#include <limits>

namespace husimi {

void Potential::third_derivative(const VecRef& q, Index i, MatOut out) const {
  const Index d = dimension();
  if (i < 0 || i >= d) throw ContractError("third_derivative: index out of range");
  const double step =
      std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, q.norm());
  VectorXd shifted = q;
  MatrixXd plus(d, d), minus(d, d);
  shifted(i) = q(i) + step;
  hessian(shifted, plus);
  shifted(i) = q(i) - step;
  hessian(shifted, minus);
  out = (plus - minus) / (2.0 * step);
}

double Potential::laplacian(const VecRef& q) const { return hessian_at(q).trace(); }

void Potential::laplacian_gradient(const VecRef& q, VecOut out) const {
  const Index d = dimension();
  MatrixXd slice(d, d);
  for (Index i = 0; i < d; ++i) {
    third_derivative(q, i, slice);
    out(i) = slice.trace();
  }
}

std::optional<std::complex<double>> Potential::gaussian_average(
    std::span<const std::complex<double>>, double) const {
  return std::nullopt;
}

VectorXd Potential::gradient_at(const VecRef& q) const {
  VectorXd g(dimension());
  gradient(q, g);
  return g;
}

MatrixXd Potential::hessian_at(const VecRef& q) const {
  MatrixXd H(dimension(), dimension());
  hessian(q, H);
  return H;
}

MatrixXd Potential::third_derivative_at(const VecRef& q, Index i) const {
  if (!has_third_derivative())
    throw CapabilityError("potential '" + name() + "' provides no third derivatives");
  MatrixXd T(dimension(), dimension());
  third_derivative(q, i, T);
  return T;
}

HamiltonianModel::HamiltonianModel(PotentialPtr potential, double epsilon)
    : potential_(std::move(potential)), epsilon_(epsilon) {
  if (!potential_) throw ContractError("HamiltonianModel: null potential");
  if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_))
    throw ContractError("HamiltonianModel: epsilon must be finite and non-negative");
}

namespace {

void check_dimension(const HamiltonianModel& model, Index phase_size) {
  if (phase_size != 2 * model.dimension())
    throw ContractError("phase point dimension does not match the Hamiltonian model");
}

}  // namespace

double HamiltonianModel::h(const VecRef& z) const {
  check_dimension(*this, z.size());
  const Index d = dimension();
  return 0.5 * z.tail(d).squaredNorm() + potential_->value(z.head(d));
}

double HamiltonianModel::laplacian_h(const VecRef& z) const {
  check_dimension(*this, z.size());
  return static_cast<double>(dimension()) + potential_->laplacian(z.head(dimension()));
}

double eval_h_eps(const HamiltonianModel& model, const PhasePoint& z) {
  const auto& coords = z.coordinates();
  return model.h(coords) - 0.25 * model.epsilon() * model.laplacian_h(coords);
}

VectorXd grad_h_eps(const HamiltonianModel& model, const PhasePoint& z) {
  check_dimension(model, z.coordinates().size());
  const Index d = model.dimension();
  VectorXd g(2 * d);
  VectorXd force(d);
  corrected_force(model, z.q(), force);
  g.head(d) = -force;
  g.tail(d) = z.p();
  return g;
}

void corrected_force(const HamiltonianModel& model, const VecRef& q, VecOut force) {
  const Potential& V = model.potential();
  V.gradient(q, force);
  force = -force;
  if (model.epsilon() == 0.0) return;
  if (!V.has_third_derivative())
    throw CapabilityError("corrected flow needs third derivatives of '" + V.name() + "'");
  VectorXd lap_grad(q.size());
  V.laplacian_gradient(q, lap_grad);
  force += 0.25 * model.epsilon() * lap_grad;
}

void classical_force(const Potential& potential, const VecRef& q, VecOut force) {
  potential.gradient(q, force);
  force = -force;
}

}  // namespace husimi
