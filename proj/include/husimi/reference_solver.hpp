#pragma once

// Split-step Fourier reference for i eps psi_t = -(eps^2/2) Lap psi + V psi
// on a periodic box [-L, L)^d, d = 1 or 2.

#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "husimi/phase_space.hpp"
#include "husimi/states.hpp"

namespace husimi {

struct GridSpec {
  std::vector<double> half_width;  ///< L per axis
  std::vector<Index> points;       ///< n per axis, powers of two

  static GridSpec square(Index d, double half_width, Index points);
  Index dimension() const { return static_cast<Index>(points.size()); }
  Index size() const;
  double spacing(Index axis) const { return 2.0 * half_width[axis] / points[axis]; }
  double cell_volume() const;
  /// Grid coordinate -L + 2L k / n.
  double coordinate(Index axis, Index k) const;
  /// Wavenumber pi m / L of FFT bin k, with m = k or k - n.
  double wavenumber(Index axis, Index k) const;
  void validate() const;
};

/// Wave function samples in row-major order (last axis fastest).
struct GridState {
  GridSpec grid;
  std::vector<std::complex<double>> psi;
  double epsilon = 0.0;
  double time = 0.0;

  static GridState from_wave(const GridSpec& grid, double epsilon,
                             const std::function<std::complex<double>(const VecRef&)>& wave);
  static GridState from_superposition(const GridSpec& grid, const GaussianSuperposition& psi0);

  /// sum |psi|^2 * cell volume.
  double norm_squared() const;
  /// Coordinates of flat index i.
  VectorXd point(Index i) const;
};

/// Propagator with precomputed phase factors and transform plans for one
/// grid, model and step.
class SplitStepSolver {
 public:
  SplitStepSolver(const GridSpec& grid, const HamiltonianModel& model, double h);
  ~SplitStepSolver();
  SplitStepSolver(const SplitStepSolver&) = delete;
  SplitStepSolver& operator=(const SplitStepSolver&) = delete;

  double step_size() const { return h_; }
  /// psi <- e^{-iVh/2eps} F^-1 e^{-i eps h |xi|^2/2} F e^{-iVh/2eps} psi.
  void step(GridState& state) const;
  void advance(GridState& state, std::size_t steps) const;

 private:
  struct Plans;
  GridSpec grid_;
  double h_;
  std::vector<std::complex<double>> half_potential_, full_potential_, kinetic_;
  std::unique_ptr<Plans> plans_;
};

/// One step; builds a solver each call.
GridState split_step(const GridState& state, const HamiltonianModel& model, double h);

struct GridExpectations {
  VectorXd position;
  VectorXd momentum;
  double potential = 0.0;
  double kinetic = 0.0;
  double total = 0.0;
  /// Share of momentum-space mass with some |xi_j| in the outer 10% of the band.
  double aliasing_mass = 0.0;

  /// q1.., p1.., potential, kinetic, total in builtin_observables naming.
  double value(const std::string& observable) const;
};

inline constexpr double aliasing_tolerance = 1e-10;

GridExpectations grid_expectations(const GridState& state, const Potential& potential);

/// Text header line, then n complex64 little-endian values.
void save_checkpoint(const std::string& path, const GridState& state);
GridState load_checkpoint(const std::string& path);

}  // namespace husimi
