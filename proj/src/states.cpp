#include "husimi/states.hpp"

#include <cmath>
#include <numbers>

namespace husimi {

namespace {

using cplx = std::complex<double>;
constexpr double pi = std::numbers::pi;

void check_same_dimension(const PhasePoint& a, const PhasePoint& b) {
  if (a.dimension() != b.dimension()) throw ContractError("phase points differ in dimension");
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ContractError("epsilon must be positive and finite");
}

double isotropic_gaussian(const VectorXd& z, const VectorXd& mean, double variance) {
  const double d2 = static_cast<double>(z.size());
  return std::pow(2.0 * pi * variance, -0.5 * d2) * std::exp(-(z - mean).squaredNorm() / (2.0 * variance));
}

// Cross term with complex packet weights: Re(w1 conj(w2) <g_z,g1> conj(<g_z,g2>)) / (2 pi eps)^d.
double weighted_cross_term(const PhasePoint& z1, const PhasePoint& z2, cplx weight, double epsilon,
                           const VecRef& z) {
  const Index d = z1.dimension();
  const VectorXd zm = z1.coordinates() - z2.coordinates();
  const VectorXd zp = 0.5 * (z1.coordinates() + z2.coordinates());
  const double c12 = z1.q().dot(z1.p()) - z2.q().dot(z2.p());
  // Jz . z_- = p.q_- - q.p_-
  const double jz_zm = z.tail(d).dot(zm.head(d)) - z.head(d).dot(zm.tail(d));
  const double envelope = std::pow(2.0 * pi * epsilon, -static_cast<double>(d)) *
                          std::exp(-zm.squaredNorm() / (8.0 * epsilon)) *
                          std::exp(-(z - zp).squaredNorm() / (2.0 * epsilon));
  const double phase = -(c12 + jz_zm) / (2.0 * epsilon);
  return envelope * std::real(weight * std::polar(1.0, phase));
}

}  // namespace

GaussianWavePacket::GaussianWavePacket(PhasePoint c, double eps, cplx w)
    : center(std::move(c)), epsilon(eps), weight(w) {
  check_epsilon(epsilon);
}

cplx GaussianWavePacket::operator()(const VecRef& q) const {
  const double d = static_cast<double>(dimension());
  const VectorXd dq = q - center.q();
  const double amplitude = std::pow(pi * epsilon, -0.25 * d) * std::exp(-dq.squaredNorm() / (2.0 * epsilon));
  return std::polar(amplitude, center.p().dot(dq) / epsilon);
}

cplx gaussian_overlap(const PhasePoint& z1, const PhasePoint& z2, double epsilon) {
  check_same_dimension(z1, z2);
  check_epsilon(epsilon);
  const double modulus =
      std::exp(-(z1.coordinates() - z2.coordinates()).squaredNorm() / (4.0 * epsilon));
  const double phase = (z1.p() + z2.p()).dot(z1.q() - z2.q()) / (2.0 * epsilon);
  return std::polar(modulus, phase);
}

GaussianSuperposition::GaussianSuperposition(std::vector<GaussianWavePacket> packets)
    : packets_(std::move(packets)), normalization_(1.0) {
  if (packets_.empty() || packets_.size() > 2)
    throw ContractError("GaussianSuperposition: one or two packets are supported");
  const auto& first = packets_.front();
  for (const auto& g : packets_) {
    check_same_dimension(first.center, g.center);
    if (g.epsilon != first.epsilon)
      throw ContractError("GaussianSuperposition: packets must share epsilon");
  }
  double norm2 = 0.0;
  for (const auto& g : packets_) norm2 += std::norm(g.weight);
  if (packets_.size() == 2) {
    const auto& g1 = packets_[0];
    const auto& g2 = packets_[1];
    norm2 += 2.0 * std::real(std::conj(g1.weight) * g2.weight *
                             gaussian_overlap(g1.center, g2.center, g1.epsilon));
  }
  if (!(norm2 > 0.0)) throw ContractError("GaussianSuperposition: state has zero norm");
  normalization_ = 1.0 / std::sqrt(norm2);
}

GaussianSuperposition GaussianSuperposition::single(const PhasePoint& center, double epsilon) {
  return GaussianSuperposition({GaussianWavePacket(center, epsilon)});
}

GaussianSuperposition GaussianSuperposition::pair(const PhasePoint& z1, const PhasePoint& z2,
                                                  double epsilon) {
  return GaussianSuperposition({GaussianWavePacket(z1, epsilon), GaussianWavePacket(z2, epsilon)});
}

cplx GaussianSuperposition::wave_function(const VecRef& q) const {
  cplx sum = 0.0;
  for (const auto& g : packets_) sum += g.weight * g(q);
  return normalization_ * sum;
}

double GaussianSuperposition::husimi(const VecRef& z) const {
  if (z.size() != 2 * dimension()) throw ContractError("husimi: phase point has wrong dimension");
  const double eps = epsilon();
  double value = 0.0;
  for (const auto& g : packets_)
    value += std::norm(g.weight) * isotropic_gaussian(z, g.center.coordinates(), eps);
  if (packets_.size() == 2) {
    const auto& g1 = packets_[0];
    const auto& g2 = packets_[1];
    value += 2.0 * weighted_cross_term(g1.center, g2.center, g1.weight * std::conj(g2.weight), eps, z);
  }
  return normalization_ * normalization_ * value;
}

double GaussianSuperposition::cross_term_envelope() const {
  if (packets_.size() < 2) return 0.0;
  return husimi::cross_term_envelope(packets_[0].center, packets_[1].center, epsilon());
}

double husimi_of_gaussian(const GaussianWavePacket& g, const PhasePoint& z) {
  check_same_dimension(g.center, z);
  return isotropic_gaussian(z.coordinates(), g.center.coordinates(), g.epsilon);
}

double wigner_of_gaussian(const GaussianWavePacket& g, const PhasePoint& z) {
  check_same_dimension(g.center, z);
  return isotropic_gaussian(z.coordinates(), g.center.coordinates(), 0.5 * g.epsilon);
}

double husimi_cross_term(const PhasePoint& z1, const PhasePoint& z2, double epsilon,
                         const PhasePoint& z) {
  check_same_dimension(z1, z2);
  check_same_dimension(z1, z);
  check_epsilon(epsilon);
  return weighted_cross_term(z1, z2, 1.0, epsilon, z.coordinates());
}

double cross_term_envelope(const PhasePoint& z1, const PhasePoint& z2, double epsilon) {
  check_same_dimension(z1, z2);
  check_epsilon(epsilon);
  const double d = static_cast<double>(z1.dimension());
  return std::pow(2.0 * pi * epsilon, -d) *
         std::exp(-(z1.coordinates() - z2.coordinates()).squaredNorm() / (8.0 * epsilon));
}

PhaseSpaceDensity PhaseSpaceDensity::husimi(const GaussianSuperposition& psi) {
  return {psi.packets().size() == 1 ? Kind::husimi_gaussian : Kind::husimi_superposition, psi};
}

PhaseSpaceDensity PhaseSpaceDensity::wigner(const GaussianWavePacket& g) {
  return {Kind::wigner_gaussian, GaussianSuperposition({GaussianWavePacket(g.center, g.epsilon)})};
}

double PhaseSpaceDensity::covariance_scale() const {
  return kind_ == Kind::wigner_gaussian ? 0.5 * epsilon() : epsilon();
}

double PhaseSpaceDensity::operator()(const VecRef& z) const {
  if (kind_ == Kind::wigner_gaussian)
    return isotropic_gaussian(z, state_.packets().front().center.coordinates(), 0.5 * epsilon());
  return state_.husimi(z);
}

// (W^eps(psi) * G_{sigma/2})(0,0)
//   = (pi sigma)^{-1/2} (2 pi eps)^{-1}
//     int int psi(x - y/2) psi(x + y/2) exp(-x^2/sigma) exp(-sigma y^2 / (4 eps^2)) dy dx
// for the real test state psi(v) = v exp(-v^2).
double smoothing_positivity_probe(double sigma_over_eps, double epsilon) {
  if (!(sigma_over_eps > 0.0)) throw ContractError("smoothing_positivity_probe: sigma must be positive");
  check_epsilon(epsilon);
  const double sigma = sigma_over_eps * epsilon;
  auto psi = [](double v) { return v * std::exp(-v * v); };

  // Integrand decays at least like exp(-2x^2 - y^2/2); truncation below 1e-30 at these radii.
  const double x_radius = std::max(6.0, 6.0 * std::sqrt(sigma));
  const double y_radius = 12.0;
  auto trapezoid = [&](int n) {
    const double hx = 2.0 * x_radius / n, hy = 2.0 * y_radius / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = -x_radius + i * hx;
      const double wx = (i == 0 || i == n) ? 0.5 : 1.0;
      const double gx = std::exp(-x * x / sigma);
      double row = 0.0;
      for (int j = 0; j <= n; ++j) {
        const double y = -y_radius + j * hy;
        const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
        row += wy * psi(x - 0.5 * y) * psi(x + 0.5 * y) *
               std::exp(-sigma * y * y / (4.0 * epsilon * epsilon));
      }
      sum += wx * gx * row;
    }
    return sum * hx * hy / (std::sqrt(pi * sigma) * 2.0 * pi * epsilon);
  };
  const double coarse = trapezoid(600);
  const double fine = trapezoid(1200);
  if (std::abs(fine - coarse) > 1e-13)
    throw ToleranceError("smoothing_positivity_probe: quadrature did not converge");
  return fine;
}

namespace {

// <g_k, A g_l> / <g_k, g_l> for the Weyl operator of a built-in symbol. The
// product conj(g_k) g_l is <g_k, g_l> times a Gaussian of variance eps/2 and
// complex mean (q_k + q_l)/2 + i (p_l - p_k)/2, so polynomial and
// trigonometric symbols have closed forms.
cplx pair_expectation(const GaussianWavePacket& gk, const GaussianWavePacket& gl,
                      const ObservableSymbol& a, const HamiltonianModel& model) {
  const Index d = gk.dimension();
  const double v = 0.5 * gk.epsilon;
  std::vector<cplx> mean(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j)
    mean[j] = cplx(0.5 * (gk.center.q()(j) + gl.center.q()(j)),
                   0.5 * (gl.center.p()(j) - gk.center.p()(j)));

  auto kinetic = [&]() {
    cplx sum = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double qk = gk.center.q()(j), ql = gl.center.q()(j);
      const double pk = gk.center.p()(j), pl = gl.center.p()(j);
      const cplx mu = mean[j];
      const cplx second = mu * mu + v - mu * (qk + ql) + qk * ql;  // E[(u - qk)(u - ql)]
      sum += pk * pl + cplx(0, 1) * pk * (mu - ql) - cplx(0, 1) * pl * (mu - qk) + second;
    }
    return 0.5 * sum;
  };
  auto potential = [&]() {
    auto avg = model.potential().gaussian_average(mean, v);
    if (!avg)
      throw CapabilityError("initial_expectation_oracle: potential '" + model.potential().name() +
                            "' has no closed-form Gaussian average");
    return *avg;
  };

  switch (a.kind()) {
    case ObservableKind::position:
      return mean[a.component()];
    case ObservableKind::momentum: {
      const Index j = a.component();
      return gl.center.p()(j) + cplx(0, 1) * (mean[j] - gl.center.q()(j));
    }
    case ObservableKind::kinetic:
      return kinetic();
    case ObservableKind::potential:
      return potential();
    case ObservableKind::total:
      return kinetic() + potential();
    case ObservableKind::custom:
      break;
  }
  throw CapabilityError("initial_expectation_oracle: unsupported observable '" + a.name() + "'");
}

}  // namespace

double initial_expectation_oracle(const GaussianSuperposition& psi0, const ObservableSymbol& a,
                                  const HamiltonianModel& model) {
  if (psi0.dimension() != model.dimension() || a.dimension() != model.dimension())
    throw ContractError("initial_expectation_oracle: dimension mismatch");
  const auto& packets = psi0.packets();
  cplx sum = 0.0;
  for (const auto& gk : packets)
    for (const auto& gl : packets) {
      const cplx overlap = gaussian_overlap(gk.center, gl.center, gk.epsilon);
      sum += std::conj(gk.weight) * gl.weight * overlap * pair_expectation(gk, gl, a, model);
    }
  const double c = psi0.normalization();
  return c * c * sum.real();
}

}  // namespace husimi
