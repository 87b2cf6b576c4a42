#include "husimi/observables.hpp"

#include <algorithm>

namespace husimi {

ObservableSymbol::ObservableSymbol(std::string name, Index dimension, ValueFn value,
                                   GradientFn gradient, HessianFn hessian, ValueFn laplacian,
                                   ObservableKind kind, Index component)
    : name_(std::move(name)),
      d_(dimension),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      laplacian_(std::move(laplacian)),
      kind_(kind),
      component_(component) {
  if (d_ < 1) throw ContractError("ObservableSymbol: dimension must be >= 1");
  if (!value_) throw ContractError("ObservableSymbol: value callback is required");
}

void ObservableSymbol::check(const VecRef& z) const {
  if (z.size() != 2 * d_)
    throw ContractError("observable '" + name_ + "': phase point has wrong dimension");
}

double ObservableSymbol::value(const VecRef& z) const {
  check(z);
  return value_(z);
}

VectorXd ObservableSymbol::gradient(const VecRef& z) const {
  check(z);
  if (!gradient_) throw CapabilityError("observable '" + name_ + "' has no gradient");
  return gradient_(z);
}

MatrixXd ObservableSymbol::hessian(const VecRef& z) const {
  check(z);
  if (!hessian_) throw CapabilityError("observable '" + name_ + "' has no hessian");
  return hessian_(z);
}

double ObservableSymbol::laplacian(const VecRef& z) const {
  check(z);
  if (laplacian_) return laplacian_(z);
  if (hessian_) return hessian_(z).trace();
  throw CapabilityError("observable '" + name_ + "' has no laplacian");
}

ObservableSymbol correct_symbol(const ObservableSymbol& a, double epsilon) {
  if (!a.has_laplacian())
    throw CapabilityError("correct_symbol: observable '" + a.name() + "' has no laplacian");
  auto value = [a, epsilon](const VecRef& z) { return a.value(z) - 0.25 * epsilon * a.laplacian(z); };
  return ObservableSymbol(a.name() + "_eps", a.dimension(), value, {}, {}, {}, a.kind(),
                          a.component());
}

ObservableSymbol linear_combination(double alpha, const ObservableSymbol& a, double beta,
                                    const ObservableSymbol& b) {
  if (a.dimension() != b.dimension())
    throw ContractError("linear_combination: observables differ in dimension");
  ObservableSymbol::GradientFn gradient;
  ObservableSymbol::HessianFn hessian;
  ObservableSymbol::ValueFn laplacian;
  if (a.has_gradient() && b.has_gradient())
    gradient = [=](const VecRef& z) -> VectorXd { return alpha * a.gradient(z) + beta * b.gradient(z); };
  if (a.has_hessian() && b.has_hessian())
    hessian = [=](const VecRef& z) -> MatrixXd { return alpha * a.hessian(z) + beta * b.hessian(z); };
  if (a.has_laplacian() && b.has_laplacian())
    laplacian = [=](const VecRef& z) { return alpha * a.laplacian(z) + beta * b.laplacian(z); };
  return ObservableSymbol(
      "lincomb", a.dimension(),
      [=](const VecRef& z) { return alpha * a.value(z) + beta * b.value(z); }, gradient, hessian,
      laplacian);
}

std::vector<ObservableSymbol> builtin_observables(const HamiltonianModel& model) {
  const Index d = model.dimension();
  const PotentialPtr V = model.potential_ptr();
  std::vector<ObservableSymbol> out;
  out.reserve(2 * d + 3);

  auto unit = [d](Index k) {
    VectorXd e = VectorXd::Zero(2 * d);
    e(k) = 1.0;
    return e;
  };
  auto zero_hessian = [d](const VecRef&) -> MatrixXd { return MatrixXd::Zero(2 * d, 2 * d); };
  auto zero = [](const VecRef&) { return 0.0; };

  for (Index j = 0; j < d; ++j) {
    out.emplace_back(
        "q" + std::to_string(j + 1), d, [j](const VecRef& z) { return z(j); },
        [unit, j](const VecRef&) { return unit(j); }, zero_hessian, zero,
        ObservableKind::position, j);
  }
  for (Index j = 0; j < d; ++j) {
    out.emplace_back(
        "p" + std::to_string(j + 1), d, [d, j](const VecRef& z) { return z(d + j); },
        [unit, d, j](const VecRef&) { return unit(d + j); }, zero_hessian, zero,
        ObservableKind::momentum, j);
  }

  auto potential_gradient = [V, d](const VecRef& z) -> VectorXd {
    VectorXd g = VectorXd::Zero(2 * d);
    V->gradient(z.head(d), g.head(d));
    return g;
  };
  auto potential_hessian = [V, d](const VecRef& z) -> MatrixXd {
    MatrixXd H = MatrixXd::Zero(2 * d, 2 * d);
    V->hessian(z.head(d), H.topLeftCorner(d, d));
    return H;
  };
  auto kinetic_hessian = [d](const VecRef&) -> MatrixXd {
    MatrixXd H = MatrixXd::Zero(2 * d, 2 * d);
    H.bottomRightCorner(d, d).setIdentity();
    return H;
  };

  out.emplace_back(
      "potential", d, [V, d](const VecRef& z) { return V->value(z.head(d)); }, potential_gradient,
      potential_hessian, [V, d](const VecRef& z) { return V->laplacian(z.head(d)); },
      ObservableKind::potential);
  out.emplace_back(
      "kinetic", d, [d](const VecRef& z) { return 0.5 * z.tail(d).squaredNorm(); },
      [d](const VecRef& z) -> VectorXd {
        VectorXd g = VectorXd::Zero(2 * d);
        g.tail(d) = z.tail(d);
        return g;
      },
      kinetic_hessian, [d](const VecRef&) { return static_cast<double>(d); },
      ObservableKind::kinetic);
  out.emplace_back(
      "total", d, [V, d](const VecRef& z) { return 0.5 * z.tail(d).squaredNorm() + V->value(z.head(d)); },
      [V, d](const VecRef& z) -> VectorXd {
        VectorXd g(2 * d);
        V->gradient(z.head(d), g.head(d));
        g.tail(d) = z.tail(d);
        return g;
      },
      [V, d](const VecRef& z) -> MatrixXd {
        MatrixXd H = MatrixXd::Zero(2 * d, 2 * d);
        V->hessian(z.head(d), H.topLeftCorner(d, d));
        H.bottomRightCorner(d, d).setIdentity();
        return H;
      },
      [V, d](const VecRef& z) { return static_cast<double>(d) + V->laplacian(z.head(d)); },
      ObservableKind::total);
  return out;
}

std::vector<ObservableSymbol> select_observables(const HamiltonianModel& model,
                                                 const std::vector<std::string>& names) {
  if (names.empty()) throw ContractError("observable list is empty");
  auto all = builtin_observables(model);
  std::vector<ObservableSymbol> out;
  for (const auto& name : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& a) { return a.name() == name; });
    if (it == all.end()) throw ContractError("unknown observable '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

}  // namespace husimi
