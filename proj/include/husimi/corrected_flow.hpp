#pragma once

// Integration of the eps-corrected flow Phi_eps together with the correction
// fields Lambda (2d x 2d) and Gamma (2d):
//
//   d/dt Phi    = J grad h_eps(Phi)
//   d/dt Lambda = M + M Lambda + Lambda M^T,          Lambda(0) = 0
//   d/dt Gamma  = M Gamma + (<C_i, Lambda>)_i,         Gamma(0)  = 0
//
// with M = J D^2h(Phi) and (C_i)_jk = d_k (J D^2h)_ij (Phi).

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "husimi/linalg.hpp"
#include "husimi/phase_space.hpp"

namespace husimi {

/// Which Hamiltonian drives the position/momentum part.
enum class ForceModel {
  h_eps,  ///< -grad_q h_eps: the corrected flow
  h,      ///< -grad V: the classical flow
};

struct IntegratorConfig {
  double h1 = 1e-3;       ///< step of the sixth-order leading flow
  double h2 = 1e-3;       ///< step of the Strang correction scheme
  double t_final = 1.0;
  ForceModel force = ForceModel::h_eps;
  /// Trajectories with |q| beyond this bound abort the run.
  double q_bound = 1e3;

  void validate() const;
};

/// floor(t / h) with a relative guard against round-off in t / h.
std::size_t step_count(double t, double h);

template <typename Scalar>
struct BasicCorrectionState {
  VectorX<Scalar> phi;     ///< Phi_eps^t(z) = (q, p)
  MatrixX<Scalar> lambda;  ///< Lambda_eps^t(z)
  VectorX<Scalar> gamma;   ///< Gamma_eps^t(z)
  Scalar t = 0;

  static BasicCorrectionState initial(const VectorX<Scalar>& z) {
    const Index n = z.size();
    return {z, MatrixX<Scalar>::Zero(n, n), VectorX<Scalar>::Zero(n), Scalar(0)};
  }
  Index dimension() const { return phi.size() / 2; }
  bool all_finite() const { return phi.allFinite() && lambda.allFinite() && gamma.allFinite(); }
};

using CorrectionState = BasicCorrectionState<double>;

/// Split of the state into Upsilon_1 = (p, vec Lambda, Gamma) and Upsilon_2 = q.
struct SplitVector {
  VectorXd upsilon1;  ///< length d + 4d^2 + 2d
  VectorXd upsilon2;  ///< length d

  static SplitVector split(const CorrectionState& s);
  CorrectionState join(double t = 0.0) const;
  Index dimension() const { return upsilon2.size(); }
};

/// M = J D^2h(q) = [[0, Id], [-D^2V(q), 0]].
MatrixXd build_M(const HamiltonianModel& model, const PhasePoint& phi);

/// C_1..C_2d; only C_{d+m} is non-zero, with q-block -d_m D^2V(q).
std::vector<MatrixXd> build_C(const HamiltonianModel& model, const PhasePoint& phi);

/// Right-hand side of the coupled (Phi, vec Lambda, Gamma) system written with
/// K = M (x) Id + Id (x) M and the stacked rows vec(C_i)^T. Independent of
/// the matrix-form update used by strang_step; meant for checks.
VectorXd complete_variational_rhs(const HamiltonianModel& model, const VectorXd& phi,
                                  const VectorXd& vec_lambda, const VectorXd& gamma,
                                  ForceModel force = ForceModel::h_eps);

/// Reusable buffers for the Strang scheme; one per worker.
class StrangWorkspace {
 public:
  explicit StrangWorkspace(Index d);

  /// Geometry (force, M, third-derivative slices) at q.
  void evaluate(const HamiltonianModel& model, ForceModel force, const VecRef& q);
  /// phi_a over tau with the geometry of the last evaluate(): exact in p,
  /// explicit midpoint rule in (Lambda, Gamma).
  void half_step(CorrectionState& s, double tau);

 private:
  void rates(const MatrixXd& lambda, const VectorXd& gamma, MatrixXd& dlambda,
             VectorXd& dgamma) const;

  Index d_;
  VectorXd force_;
  MatrixXd hess_;
  MatrixXd M_;
  std::vector<MatrixXd> slices_;
  MatrixXd dl_, lm_;
  VectorXd dg_, gm_;
};

/// One step F^h = phi_a^{h/2} phi_b^h phi_a^{h/2}. Any non-zero h is accepted
/// so the scheme can be run backwards.
SplitVector strang_step(const SplitVector& state, const HamiltonianModel& model, double h,
                        ForceModel force = ForceModel::h_eps);
void strang_step(CorrectionState& state, const HamiltonianModel& model, double h,
                 StrangWorkspace& ws, ForceModel force = ForceModel::h_eps);

/// Yoshida's sixth-order symmetric composition (solution B) of the
/// Stoermer-Verlet step.
class Yoshida6 {
 public:
  static constexpr int stages = 7;
  static const std::array<double, stages>& weights();

  Yoshida6(const HamiltonianModel& model, ForceModel force);

  /// Advances (q, p) by one step of size h.
  void step(VecOut q, VecOut p, double h);
  /// Advances over [0, t] with steps h and a final partial step.
  void advance(VecOut q, VecOut p, double h, double t);

 private:
  void force(const VecRef& q);

  const HamiltonianModel* model_;
  ForceModel model_force_;
  VectorXd f_, scratch_;
};

/// Phi^t(z) by the sixth-order scheme.
PhasePoint yoshida6_flow(const PhasePoint& z, const HamiltonianModel& model, double h1, double t,
                         ForceModel force = ForceModel::h_eps);

/// (Phi, Lambda, Gamma) at cfg.t_final after floor(t/h2) Strang steps from (z, 0, 0).
/// Throws InstabilityError naming `trajectory` if the state leaves the bound.
CorrectionState propagate_correction(const PhasePoint& z, const HamiltonianModel& model,
                                     const IntegratorConfig& cfg, std::size_t trajectory = 0);

/// Calls `record(step, state)` at step 0 and every `record_every` Strang steps
/// up to `steps`. Returns false (leaving the state as is) if the trajectory
/// left the bound or produced non-finite values.
bool propagate_correction_recorded(
    const VecRef& z, const HamiltonianModel& model, double h, std::size_t steps,
    std::size_t record_every, ForceModel force, double q_bound, StrangWorkspace& ws,
    const std::function<void(std::size_t, const CorrectionState&)>& record);

struct LambdaGammaOracle {
  MatrixXd lambda;
  VectorXd gamma;
};

/// Integral forms of the correction fields,
///   Lambda~ = int_0^t (Jac M Jac^T)(Phi^{t-tau} z) dtau,
///   Gamma~_i = int_0^t sum_kl M_kl d^2_kl Phi^tau_i (Phi^{t-tau} z) dtau,
/// with Jac = D Phi^tau and M = J D^2h, by the composite trapezoid rule on
/// `nodes` intervals. Flows use the sixth-order scheme at step fine_h;
/// first and second derivatives of Phi^tau come from central differences of
/// that flow. Intended for small d only.
LambdaGammaOracle lambda_gamma_quadrature_oracle(const PhasePoint& z, const HamiltonianModel& model,
                                                 double t, double fine_h, int nodes = 200,
                                                 double fd_step = 1e-3);

}  // namespace husimi
