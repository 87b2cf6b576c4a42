#pragma once

#include <complex>
#include <vector>

#include "husimi/observables.hpp"
#include "husimi/phase_space.hpp"

namespace husimi {

/// Isotropic Gaussian wave packet of width sqrt(eps) centred at z0 = (q0, p0):
///   g(q) = (pi eps)^{-d/4} exp(-|q - q0|^2 / (2 eps) + i p0.(q - q0) / eps).
struct GaussianWavePacket {
  PhasePoint center;
  double epsilon;
  std::complex<double> weight{1.0, 0.0};

  GaussianWavePacket(PhasePoint center, double epsilon, std::complex<double> weight = 1.0);

  Index dimension() const { return center.dimension(); }
  /// Unweighted packet value g(q).
  std::complex<double> operator()(const VecRef& q) const;
};

/// <g_{z1}, g_{z2}> for unit-weight packets of the same width.
std::complex<double> gaussian_overlap(const PhasePoint& z1, const PhasePoint& z2, double epsilon);

/// c * sum_k w_k g_k with one or two packets and c chosen so the L2 norm is 1.
class GaussianSuperposition {
 public:
  explicit GaussianSuperposition(std::vector<GaussianWavePacket> packets);
  static GaussianSuperposition single(const PhasePoint& center, double epsilon);
  static GaussianSuperposition pair(const PhasePoint& z1, const PhasePoint& z2, double epsilon);

  const std::vector<GaussianWavePacket>& packets() const { return packets_; }
  /// The constant c.
  double normalization() const { return normalization_; }
  double epsilon() const { return packets_.front().epsilon; }
  Index dimension() const { return packets_.front().dimension(); }

  std::complex<double> wave_function(const VecRef& q) const;
  /// Husimi density including the cross term.
  double husimi(const VecRef& z) const;
  /// (2 pi eps)^{-d} exp(-|z_-|^2 / (8 eps)); 0 for a single packet.
  double cross_term_envelope() const;

 private:
  std::vector<GaussianWavePacket> packets_;
  double normalization_;
};

/// (2 pi eps)^{-d} exp(-|z - z0|^2 / (2 eps)).
double husimi_of_gaussian(const GaussianWavePacket& g, const PhasePoint& z);

/// (pi eps)^{-d} exp(-|z - z0|^2 / eps).
double wigner_of_gaussian(const GaussianWavePacket& g, const PhasePoint& z);

/// Cross term C_{z1,z2}(z) of H(g_{z1} + g_{z2}) = H(g_{z1}) + H(g_{z2}) + 2C:
///   (2 pi eps)^{-d} exp(-|z_-|^2/(8 eps)) exp(-|z - z_+|^2/(2 eps))
///     * cos((c12 + Jz.z_-) / (2 eps))
/// with z_+ = (z1 + z2)/2, z_- = z1 - z2 and c12 = q1.p1 - q2.p2.
double husimi_cross_term(const PhasePoint& z1, const PhasePoint& z2, double epsilon,
                         const PhasePoint& z);

/// Envelope bound of the cross term.
double cross_term_envelope(const PhasePoint& z1, const PhasePoint& z2, double epsilon);

/// Density on phase space used as a sampling target.
class PhaseSpaceDensity {
 public:
  enum class Kind { husimi_gaussian, husimi_superposition, wigner_gaussian };

  static PhaseSpaceDensity husimi(const GaussianSuperposition& psi);
  static PhaseSpaceDensity wigner(const GaussianWavePacket& g);

  Kind kind() const { return kind_; }
  Index dimension() const { return state_.dimension(); }
  double epsilon() const { return state_.epsilon(); }
  const GaussianSuperposition& state() const { return state_; }
  /// Covariance scale of each Gaussian component: eps (Husimi) or eps/2 (Wigner).
  double covariance_scale() const;

  double operator()(const VecRef& z) const;

 private:
  PhaseSpaceDensity(Kind kind, GaussianSuperposition state)
      : kind_(kind), state_(std::move(state)) {}

  Kind kind_;
  GaussianSuperposition state_;
};

/// (W^eps(psi) * G_{sigma/2})(0, 0) in d = 1 for psi(v) = v exp(-v^2), with
/// sigma = sigma_over_eps * eps, by tensor trapezoid quadrature.
/// Throws ToleranceError if refining the grid changes the value by more than 1e-13.
double smoothing_positivity_probe(double sigma_over_eps, double epsilon = 1.0);

/// <psi0, op^We(a) psi0> for built-in observable kinds, exact for Gaussian data.
/// Throws CapabilityError for custom observables or potentials without a
/// closed-form Gaussian average.
double initial_expectation_oracle(const GaussianSuperposition& psi0, const ObservableSymbol& a,
                                  const HamiltonianModel& model);

}  // namespace husimi
