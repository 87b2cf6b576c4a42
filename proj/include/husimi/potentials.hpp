#pragma once

#include <functional>

#include "husimi/phase_space.hpp"

namespace husimi {

/// V(q) = |q|^2 / 2.
class HarmonicPotential final : public Potential {
 public:
  explicit HarmonicPotential(Index d);

  Index dimension() const override { return d_; }
  std::string name() const override { return "harmonic"; }
  double value(const VecRef& q) const override;
  void gradient(const VecRef& q, VecOut out) const override;
  void hessian(const VecRef& q, MatOut out) const override;
  void third_derivative(const VecRef& q, Index i, MatOut out) const override;
  double laplacian(const VecRef& q) const override;
  void laplacian_gradient(const VecRef& q, VecOut out) const override;
  std::optional<std::complex<double>> gaussian_average(std::span<const std::complex<double>> mean,
                                                       double variance) const override;

 private:
  Index d_;
};

/// V = 0.
class FreePotential final : public Potential {
 public:
  explicit FreePotential(Index d);

  Index dimension() const override { return d_; }
  std::string name() const override { return "free"; }
  double value(const VecRef& q) const override;
  void gradient(const VecRef& q, VecOut out) const override;
  void hessian(const VecRef& q, MatOut out) const override;
  void third_derivative(const VecRef& q, Index i, MatOut out) const override;
  double laplacian(const VecRef& q) const override;
  void laplacian_gradient(const VecRef& q, VecOut out) const override;
  std::optional<std::complex<double>> gaussian_average(std::span<const std::complex<double>> mean,
                                                       double variance) const override;

 private:
  Index d_;
};

/// V(q) = sum_j (1 - cos q_j); for d = 2 this is 2 - cos q1 - cos q2.
class TorsionalPotential final : public Potential {
 public:
  explicit TorsionalPotential(Index d = 2);

  Index dimension() const override { return d_; }
  std::string name() const override { return "torsional"; }
  double value(const VecRef& q) const override;
  void gradient(const VecRef& q, VecOut out) const override;
  void hessian(const VecRef& q, MatOut out) const override;
  void third_derivative(const VecRef& q, Index i, MatOut out) const override;
  double laplacian(const VecRef& q) const override;
  void laplacian_gradient(const VecRef& q, VecOut out) const override;
  std::optional<std::complex<double>> gaussian_average(std::span<const std::complex<double>> mean,
                                                       double variance) const override;

 private:
  Index d_;
};

/// Henon-Heiles chain
///   V(q) = sum_j q_j^2/2
///        + sum_{j<d} sigma (q_j q_{j+1}^2 - q_j^3/3) + sigma^2/16 (q_j^2 + q_{j+1}^2)^2.
class HenonHeilesPotential final : public Potential {
 public:
  static constexpr double default_sigma = 0.11180339887498948;  // 1/sqrt(80)

  explicit HenonHeilesPotential(Index d = 6, double sigma = default_sigma);

  Index dimension() const override { return d_; }
  std::string name() const override { return "henon-heiles"; }
  double sigma() const { return sigma_; }
  double value(const VecRef& q) const override;
  void gradient(const VecRef& q, VecOut out) const override;
  void hessian(const VecRef& q, MatOut out) const override;
  void third_derivative(const VecRef& q, Index i, MatOut out) const override;
  double laplacian(const VecRef& q) const override;
  void laplacian_gradient(const VecRef& q, VecOut out) const override;
  std::optional<std::complex<double>> gaussian_average(std::span<const std::complex<double>> mean,
                                                       double variance) const override;

 private:
  Index d_;
  double sigma_;
};

/// User potential assembled from callbacks. Without a third-derivative
/// callback the model either falls back to finite differences of the
/// Hessian or reports the capability as missing.
class CallbackPotential final : public Potential {
 public:
  using ValueFn = std::function<double(const VecRef&)>;
  using GradientFn = std::function<void(const VecRef&, VecOut)>;
  using HessianFn = std::function<void(const VecRef&, MatOut)>;
  using ThirdFn = std::function<void(const VecRef&, Index, MatOut)>;

  enum class ThirdDerivative { analytic, finite_difference, none };

  CallbackPotential(Index d, std::string name, ValueFn value, GradientFn gradient,
                    HessianFn hessian, ThirdFn third = {},
                    ThirdDerivative mode = ThirdDerivative::finite_difference);

  Index dimension() const override { return d_; }
  std::string name() const override { return name_; }
  double value(const VecRef& q) const override { return value_(q); }
  void gradient(const VecRef& q, VecOut out) const override { gradient_(q, out); }
  void hessian(const VecRef& q, MatOut out) const override { hessian_(q, out); }
  bool has_third_derivative() const override { return mode_ != ThirdDerivative::none; }
  void third_derivative(const VecRef& q, Index i, MatOut out) const override;

 private:
  Index d_;
  std::string name_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  ThirdFn third_;
  ThirdDerivative mode_;
};

PotentialPtr make_potential(const std::string& name, Index d,
                            double sigma = HenonHeilesPotential::default_sigma);

}  // namespace husimi
