#include "husimi/potentials.hpp"

#include <cmath>

namespace husimi {

namespace {

using cplx = std::complex<double>;

void require_dimension(Index d) {
  if (d < 1) throw ContractError("potential dimension must be >= 1");
}

void check_mean(std::span<const cplx> mean, Index d) {
  if (static_cast<Index>(mean.size()) != d)
    throw ContractError("gaussian_average: mean has wrong dimension");
}

// Raw moments of X ~ N(mu, v) for complex mu.
struct Moments {
  cplx m1, m2, m3, m4;
  Moments(cplx mu, double v)
      : m1(mu),
        m2(mu * mu + v),
        m3(mu * mu * mu + 3.0 * mu * v),
        m4(mu * mu * mu * mu + 6.0 * mu * mu * v + 3.0 * v * v) {}
};

}  // namespace

// --- harmonic ---------------------------------------------------------------

HarmonicPotential::HarmonicPotential(Index d) : d_(d) { require_dimension(d); }

double HarmonicPotential::value(const VecRef& q) const { return 0.5 * q.squaredNorm(); }
void HarmonicPotential::gradient(const VecRef& q, VecOut out) const { out = q; }
void HarmonicPotential::hessian(const VecRef&, MatOut out) const { out.setIdentity(); }
void HarmonicPotential::third_derivative(const VecRef&, Index, MatOut out) const {
  out.setZero();
}
double HarmonicPotential::laplacian(const VecRef&) const { return static_cast<double>(d_); }
void HarmonicPotential::laplacian_gradient(const VecRef&, VecOut out) const { out.setZero(); }

std::optional<cplx> HarmonicPotential::gaussian_average(std::span<const cplx> mean,
                                                        double variance) const {
  check_mean(mean, d_);
  cplx sum = 0.0;
  for (const cplx& mu : mean) sum += 0.5 * (mu * mu + variance);
  return sum;
}

// --- free -------------------------------------------------------------------

FreePotential::FreePotential(Index d) : d_(d) { require_dimension(d); }

double FreePotential::value(const VecRef&) const { return 0.0; }
void FreePotential::gradient(const VecRef&, VecOut out) const { out.setZero(); }
void FreePotential::hessian(const VecRef&, MatOut out) const { out.setZero(); }
void FreePotential::third_derivative(const VecRef&, Index, MatOut out) const { out.setZero(); }
double FreePotential::laplacian(const VecRef&) const { return 0.0; }
void FreePotential::laplacian_gradient(const VecRef&, VecOut out) const { out.setZero(); }

std::optional<cplx> FreePotential::gaussian_average(std::span<const cplx> mean, double) const {
  check_mean(mean, d_);
  return cplx(0.0);
}

// --- torsional --------------------------------------------------------------

TorsionalPotential::TorsionalPotential(Index d) : d_(d) { require_dimension(d); }

double TorsionalPotential::value(const VecRef& q) const {
  return static_cast<double>(d_) - q.array().cos().sum();
}

void TorsionalPotential::gradient(const VecRef& q, VecOut out) const { out = q.array().sin(); }

void TorsionalPotential::hessian(const VecRef& q, MatOut out) const {
  out.setZero();
  out.diagonal() = q.array().cos();
}

void TorsionalPotential::third_derivative(const VecRef& q, Index i, MatOut out) const {
  out.setZero();
  out(i, i) = -std::sin(q(i));
}

double TorsionalPotential::laplacian(const VecRef& q) const { return q.array().cos().sum(); }

void TorsionalPotential::laplacian_gradient(const VecRef& q, VecOut out) const {
  out = -q.array().sin();
}

std::optional<cplx> TorsionalPotential::gaussian_average(std::span<const cplx> mean,
                                                         double variance) const {
  check_mean(mean, d_);
  // E[cos X] = cos(mu) exp(-v/2)
  const double damping = std::exp(-0.5 * variance);
  cplx sum = 0.0;
  for (const cplx& mu : mean) sum += 1.0 - std::cos(mu) * damping;
  return sum;
}

// --- Henon-Heiles -----------------------------------------------------------
//
// Pair term P(a, b) = sigma (a b^2 - a^3/3) + sigma^2/16 (a^2 + b^2)^2 with
// a = q_j, b = q_{j+1}.

HenonHeilesPotential::HenonHeilesPotential(Index d, double sigma) : d_(d), sigma_(sigma) {
  if (d < 2) throw ContractError("Henon-Heiles potential needs d >= 2");
}

double HenonHeilesPotential::value(const VecRef& q) const {
  const double s = sigma_;
  double v = 0.5 * q.squaredNorm();
  for (Index j = 0; j + 1 < d_; ++j) {
    const double a = q(j), b = q(j + 1);
    const double r = a * a + b * b;
    v += s * (a * b * b - a * a * a / 3.0) + s * s / 16.0 * r * r;
  }
  return v;
}

void HenonHeilesPotential::gradient(const VecRef& q, VecOut out) const {
  const double s = sigma_;
  out = q;
  for (Index j = 0; j + 1 < d_; ++j) {
    const double a = q(j), b = q(j + 1);
    const double r = a * a + b * b;
    out(j) += s * (b * b - a * a) + 0.25 * s * s * r * a;
    out(j + 1) += 2.0 * s * a * b + 0.25 * s * s * r * b;
  }
}

void HenonHeilesPotential::hessian(const VecRef& q, MatOut out) const {
  const double s = sigma_;
  out.setIdentity();
  for (Index j = 0; j + 1 < d_; ++j) {
    const double a = q(j), b = q(j + 1);
    out(j, j) += -2.0 * s * a + 0.25 * s * s * (3.0 * a * a + b * b);
    out(j + 1, j + 1) += 2.0 * s * a + 0.25 * s * s * (a * a + 3.0 * b * b);
    const double ab = 2.0 * s * b + 0.5 * s * s * a * b;
    out(j, j + 1) += ab;
    out(j + 1, j) += ab;
  }
}

void HenonHeilesPotential::third_derivative(const VecRef& q, Index i, MatOut out) const {
  const double s = sigma_;
  out.setZero();
  // Pair (j, j+1) contributes only when i is one of its two coordinates.
  auto add_pair = [&](Index j) {
    const double a = q(j), b = q(j + 1);
    const double aaa = -2.0 * s + 1.5 * s * s * a;
    const double aab = 0.5 * s * s * b;
    const double abb = 2.0 * s + 0.5 * s * s * a;
    const double bbb = 1.5 * s * s * b;
    if (i == j) {
      out(j, j) += aaa;
      out(j, j + 1) += aab;
      out(j + 1, j) += aab;
      out(j + 1, j + 1) += abb;
    } else {
      out(j, j) += aab;
      out(j, j + 1) += abb;
      out(j + 1, j) += abb;
      out(j + 1, j + 1) += bbb;
    }
  };
  if (i > 0) add_pair(i - 1);
  if (i + 1 < d_) add_pair(i);
}

double HenonHeilesPotential::laplacian(const VecRef& q) const {
  // Cubic parts cancel in the trace: Delta V = d + sigma^2 sum_pairs (a^2 + b^2).
  double lap = static_cast<double>(d_);
  for (Index j = 0; j + 1 < d_; ++j) lap += sigma_ * sigma_ * (q(j) * q(j) + q(j + 1) * q(j + 1));
  return lap;
}

void HenonHeilesPotential::laplacian_gradient(const VecRef& q, VecOut out) const {
  out.setZero();
  const double s2 = sigma_ * sigma_;
  for (Index j = 0; j + 1 < d_; ++j) {
    out(j) += 2.0 * s2 * q(j);
    out(j + 1) += 2.0 * s2 * q(j + 1);
  }
}

std::optional<cplx> HenonHeilesPotential::gaussian_average(std::span<const cplx> mean,
                                                           double variance) const {
  check_mean(mean, d_);
  const double s = sigma_;
  cplx sum = 0.0;
  for (Index j = 0; j < d_; ++j) sum += 0.5 * Moments(mean[j], variance).m2;
  for (Index j = 0; j + 1 < d_; ++j) {
    const Moments a(mean[j], variance), b(mean[j + 1], variance);
    sum += s * (a.m1 * b.m2 - a.m3 / 3.0);
    sum += s * s / 16.0 * (a.m4 + 2.0 * a.m2 * b.m2 + b.m4);
  }
  return sum;
}

// --- callbacks --------------------------------------------------------------

CallbackPotential::CallbackPotential(Index d, std::string name, ValueFn value,
                                     GradientFn gradient, HessianFn hessian, ThirdFn third,
                                     ThirdDerivative mode)
    : d_(d),
      name_(std::move(name)),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      third_(std::move(third)),
      mode_(mode) {
  require_dimension(d);
  if (!value_ || !gradient_ || !hessian_)
    throw ContractError("CallbackPotential: value, gradient and hessian are required");
  if (mode_ == ThirdDerivative::analytic && !third_)
    throw ContractError("CallbackPotential: analytic mode needs a third-derivative callback");
}

void CallbackPotential::third_derivative(const VecRef& q, Index i, MatOut out) const {
  switch (mode_) {
    case ThirdDerivative::analytic:
      third_(q, i, out);
      return;
    case ThirdDerivative::finite_difference:
      Potential::third_derivative(q, i, out);
      return;
    case ThirdDerivative::none:
      break;
  }
  throw CapabilityError("potential '" + name_ + "' provides no third derivatives");
}

PotentialPtr make_potential(const std::string& name, Index d, double sigma) {
  if (name == "harmonic") return std::make_shared<HarmonicPotential>(d);
  if (name == "free") return std::make_shared<FreePotential>(d);
  if (name == "torsional") return std::make_shared<TorsionalPotential>(d);
  if (name == "henon-heiles") return std::make_shared<HenonHeilesPotential>(d, sigma);
  throw ContractError("unknown potential '" + name + "'");
}

}  // namespace husimi
