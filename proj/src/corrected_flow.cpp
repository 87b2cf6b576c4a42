#include "husimi/corrected_flow.hpp"

#include <cmath>
#include <string>

namespace husimi {

namespace {

// Force into `out` without allocating; `scratch` has length d.
void evaluate_force(const HamiltonianModel& model, ForceModel which, const VecRef& q, VecOut out,
                    VecOut scratch) {
  const Potential& V = model.potential();
  V.gradient(q, out);
  out = -out;
  if (which == ForceModel::h || model.epsilon() == 0.0) return;
  if (!V.has_third_derivative())
    throw CapabilityError("corrected flow needs third derivatives of '" + V.name() + "'");
  V.laplacian_gradient(q, scratch);
  out += 0.25 * model.epsilon() * scratch;
}

bool out_of_bounds(const VectorXd& phi, Index d, double q_bound) {
  return !phi.allFinite() || phi.head(d).norm() > q_bound;
}

void check_step(double h, const char* who) {
  if (!std::isfinite(h) || h == 0.0)
    throw ContractError(std::string(who) + ": step size must be finite and non-zero");
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(h1 > 0.0) || !std::isfinite(h1)) throw ContractError("IntegratorConfig: h1 must be > 0");
  if (!(h2 > 0.0) || !std::isfinite(h2)) throw ContractError("IntegratorConfig: h2 must be > 0");
  if (!(t_final >= 0.0) || !std::isfinite(t_final))
    throw ContractError("IntegratorConfig: t_final must be >= 0");
  if (!(q_bound > 0.0)) throw ContractError("IntegratorConfig: q_bound must be > 0");
}

std::size_t step_count(double t, double h) {
  if (!(h > 0.0)) throw ContractError("step_count: h must be > 0");
  if (!(t >= 0.0)) throw ContractError("step_count: t must be >= 0");
  return static_cast<std::size_t>(std::floor(t / h * (1.0 + 1e-12) + 1e-12));
}

SplitVector SplitVector::split(const CorrectionState& s) {
  const Index d = s.dimension();
  SplitVector out;
  out.upsilon1.resize(d + 4 * d * d + 2 * d);
  out.upsilon1.head(d) = s.phi.tail(d);
  out.upsilon1.segment(d, 4 * d * d) = vec_rowwise(s.lambda);
  out.upsilon1.tail(2 * d) = s.gamma;
  out.upsilon2 = s.phi.head(d);
  return out;
}

CorrectionState SplitVector::join(double t) const {
  const Index d = upsilon2.size();
  if (d < 1 || upsilon1.size() != d + 4 * d * d + 2 * d)
    throw ContractError("SplitVector: inconsistent block lengths");
  CorrectionState s;
  s.phi.resize(2 * d);
  s.phi << upsilon2, upsilon1.head(d);
  s.lambda = unvec_rowwise(upsilon1.segment(d, 4 * d * d));
  s.gamma = upsilon1.tail(2 * d);
  s.t = t;
  return s;
}

MatrixXd build_M(const HamiltonianModel& model, const PhasePoint& phi) {
  const Index d = model.dimension();
  if (phi.dimension() != d) throw ContractError("build_M: dimension mismatch");
  MatrixXd M = MatrixXd::Zero(2 * d, 2 * d);
  M.topRightCorner(d, d).setIdentity();
  M.bottomLeftCorner(d, d) = -model.potential().hessian_at(phi.q());
  return M;
}

std::vector<MatrixXd> build_C(const HamiltonianModel& model, const PhasePoint& phi) {
  const Index d = model.dimension();
  if (phi.dimension() != d) throw ContractError("build_C: dimension mismatch");
  std::vector<MatrixXd> C(2 * d, MatrixXd::Zero(2 * d, 2 * d));
  for (Index m = 0; m < d; ++m)
    C[d + m].topLeftCorner(d, d) = -model.potential().third_derivative_at(phi.q(), m);
  return C;
}

VectorXd complete_variational_rhs(const HamiltonianModel& model, const VectorXd& phi,
                                  const VectorXd& vec_lambda, const VectorXd& gamma,
                                  ForceModel force) {
  const Index d = model.dimension();
  const Index n = 2 * d;
  if (phi.size() != n || vec_lambda.size() != n * n || gamma.size() != n)
    throw ContractError("complete_variational_rhs: dimension mismatch");
  const PhasePoint z = PhasePoint::from_coordinates(phi);
  const MatrixXd M = build_M(model, z);
  const std::vector<MatrixXd> C = build_C(model, z);
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd K = kron(M, I) + kron(I, M);
  MatrixXd Crows(n, n * n);
  for (Index i = 0; i < n; ++i) Crows.row(i) = vec_rowwise(C[i]).transpose();

  VectorXd rhs(n + n * n + n);
  VectorXd f(d), scratch(d);
  evaluate_force(model, force, phi.head(d), f, scratch);
  rhs.head(d) = phi.tail(d);
  rhs.segment(d, d) = f;
  rhs.segment(n, n * n) = vec_rowwise(M) + K * vec_lambda;
  rhs.tail(n) = M * gamma + Crows * vec_lambda;
  return rhs;
}

StrangWorkspace::StrangWorkspace(Index d)
    : d_(d),
      force_(d),
      hess_(d, d),
      M_(MatrixXd::Zero(2 * d, 2 * d)),
      slices_(d, MatrixXd(d, d)),
      dl_(2 * d, 2 * d),
      lm_(2 * d, 2 * d),
      dg_(2 * d),
      gm_(2 * d) {
  if (d < 1) throw ContractError("StrangWorkspace: dimension must be >= 1");
  M_.topRightCorner(d, d).setIdentity();
}

void StrangWorkspace::evaluate(const HamiltonianModel& model, ForceModel force, const VecRef& q) {
  if (model.dimension() != d_) throw ContractError("StrangWorkspace: dimension mismatch");
  const Potential& V = model.potential();
  V.gradient(q, force_);
  force_ = -force_;
  const bool corrected = force == ForceModel::h_eps && model.epsilon() != 0.0;
  if (!V.has_third_derivative())
    throw CapabilityError("correction fields need third derivatives of '" + V.name() + "'");
  for (Index m = 0; m < d_; ++m) {
    V.third_derivative(q, m, slices_[m]);
    if (corrected) force_(m) += 0.25 * model.epsilon() * slices_[m].trace();
  }
  V.hessian(q, hess_);
  M_.bottomLeftCorner(d_, d_) = -hess_;
}

void StrangWorkspace::rates(const MatrixXd& lambda, const VectorXd& gamma, MatrixXd& dlambda,
                            VectorXd& dgamma) const {
  const Index d = d_;
  // M Lambda + Lambda M^T with M = [[0, I], [-H, 0]], written blockwise.
  dlambda.noalias() = M_ * lambda;
  dlambda.noalias() += lambda * M_.transpose();
  dlambda += M_;
  dgamma.noalias() = M_ * gamma;
  for (Index m = 0; m < d; ++m)
    dgamma(d + m) -= frobenius_dot(slices_[m], lambda.topLeftCorner(d, d));
}

void StrangWorkspace::half_step(CorrectionState& s, double tau) {
  s.phi.tail(d_) += tau * force_;
  rates(s.lambda, s.gamma, dl_, dg_);
  lm_ = s.lambda + 0.5 * tau * dl_;
  gm_ = s.gamma + 0.5 * tau * dg_;
  rates(lm_, gm_, dl_, dg_);
  s.lambda += tau * dl_;
  s.gamma += tau * dg_;
}

void strang_step(CorrectionState& state, const HamiltonianModel& model, double h,
                 StrangWorkspace& ws, ForceModel force) {
  check_step(h, "strang_step");
  const Index d = model.dimension();
  if (state.phi.size() != 2 * d) throw ContractError("strang_step: dimension mismatch");
  ws.evaluate(model, force, state.phi.head(d));
  ws.half_step(state, 0.5 * h);
  state.phi.head(d) += h * state.phi.tail(d);
  ws.evaluate(model, force, state.phi.head(d));
  ws.half_step(state, 0.5 * h);
  state.t += h;
}

SplitVector strang_step(const SplitVector& state, const HamiltonianModel& model, double h,
                        ForceModel force) {
  CorrectionState s = state.join();
  StrangWorkspace ws(model.dimension());
  strang_step(s, model, h, ws, force);
  return SplitVector::split(s);
}

const std::array<double, Yoshida6::stages>& Yoshida6::weights() {
  static const std::array<double, stages> w = [] {
    constexpr double w1 = -2.13228522200144;
    constexpr double w2 = 0.00426068187079180;
    constexpr double w3 = 1.43984816797678;
    constexpr double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
    return std::array<double, stages>{w3, w2, w1, w0, w1, w2, w3};
  }();
  return w;
}

Yoshida6::Yoshida6(const HamiltonianModel& model, ForceModel force)
    : model_(&model), model_force_(force), f_(model.dimension()), scratch_(model.dimension()) {}

void Yoshida6::force(const VecRef& q) { evaluate_force(*model_, model_force_, q, f_, scratch_); }

void Yoshida6::step(VecOut q, VecOut p, double h) {
  check_step(h, "Yoshida6::step");
  if (q.size() != model_->dimension() || p.size() != q.size())
    throw ContractError("Yoshida6::step: dimension mismatch");
  const auto& w = weights();
  // Adjacent half kicks of consecutive Verlet stages share a force evaluation.
  force(q);
  p += 0.5 * w[0] * h * f_;
  for (int s = 0; s < stages; ++s) {
    q += w[s] * h * p;
    force(q);
    const double kick = s + 1 < stages ? 0.5 * (w[s] + w[s + 1]) : 0.5 * w[s];
    p += kick * h * f_;
  }
}

void Yoshida6::advance(VecOut q, VecOut p, double h, double t) {
  if (!(h > 0.0)) throw ContractError("Yoshida6::advance: h must be > 0");
  if (t == 0.0) return;
  const double dir = t > 0.0 ? 1.0 : -1.0;
  const double span = std::abs(t);
  const std::size_t n = step_count(span, h);
  for (std::size_t k = 0; k < n; ++k) step(q, p, dir * h);
  const double rest = span - static_cast<double>(n) * h;
  if (rest > 1e-14 * std::max(1.0, span)) step(q, p, dir * rest);
}

PhasePoint yoshida6_flow(const PhasePoint& z, const HamiltonianModel& model, double h1, double t,
                         ForceModel force) {
  if (z.dimension() != model.dimension()) throw ContractError("yoshida6_flow: dimension mismatch");
  VectorXd q = z.q(), p = z.p();
  Yoshida6 integrator(model, force);
  integrator.advance(q, p, h1, t);
  if (!q.allFinite() || !p.allFinite())
    throw InstabilityError("yoshida6_flow: non-finite state", {0});
  return {q, p};
}

CorrectionState propagate_correction(const PhasePoint& z, const HamiltonianModel& model,
                                     const IntegratorConfig& cfg, std::size_t trajectory) {
  cfg.validate();
  if (z.dimension() != model.dimension())
    throw ContractError("propagate_correction: dimension mismatch");
  const std::size_t steps = step_count(cfg.t_final, cfg.h2);
  StrangWorkspace ws(model.dimension());
  CorrectionState last;
  const bool ok = propagate_correction_recorded(
      z.coordinates(), model, cfg.h2, steps, steps == 0 ? 1 : steps, cfg.force, cfg.q_bound, ws,
      [&](std::size_t, const CorrectionState& s) { last = s; });
  if (!ok)
    throw InstabilityError("trajectory " + std::to_string(trajectory) + " left the admissible region",
                           {trajectory});
  return last;
}

bool propagate_correction_recorded(
    const VecRef& z, const HamiltonianModel& model, double h, std::size_t steps,
    std::size_t record_every, ForceModel force, double q_bound, StrangWorkspace& ws,
    const std::function<void(std::size_t, const CorrectionState&)>& record) {
  if (record_every == 0) throw ContractError("propagate_correction_recorded: record_every is 0");
  const Index d = model.dimension();
  if (z.size() != 2 * d) throw ContractError("propagate_correction_recorded: dimension mismatch");
  CorrectionState s = CorrectionState::initial(z);
  record(0, s);
  if (steps == 0) return true;
  // Consecutive half steps at the same q reuse one geometry evaluation.
  ws.evaluate(model, force, s.phi.head(d));
  for (std::size_t k = 1; k <= steps; ++k) {
    ws.half_step(s, 0.5 * h);
    s.phi.head(d) += h * s.phi.tail(d);
    if (out_of_bounds(s.phi, d, q_bound)) return false;
    ws.evaluate(model, force, s.phi.head(d));
    ws.half_step(s, 0.5 * h);
    s.t = static_cast<double>(k) * h;
    if (k % record_every == 0) {
      if (!s.all_finite()) return false;
      record(k, s);
    }
  }
  return s.all_finite();
}

LambdaGammaOracle lambda_gamma_quadrature_oracle(const PhasePoint& z, const HamiltonianModel& model,
                                                 double t, double fine_h, int nodes,
                                                 double fd_step) {
  const Index d = model.dimension();
  const Index n = 2 * d;
  if (z.dimension() != d) throw ContractError("quadrature oracle: dimension mismatch");
  if (!(t >= 0.0) || !(fine_h > 0.0) || nodes < 1 || !(fd_step > 0.0))
    throw ContractError("quadrature oracle: invalid parameters");

  Yoshida6 flow(model, ForceModel::h_eps);
  auto advance = [&](const VectorXd& y, double tau) {
    VectorXd q = y.head(d), p = y.tail(d);
    flow.advance(q, p, fine_h, tau);
    VectorXd out(n);
    out << q, p;
    return out;
  };

  LambdaGammaOracle result{MatrixXd::Zero(n, n), VectorXd::Zero(n)};
  if (t == 0.0) return result;
  const double dtau = t / nodes;
  const double delta = fd_step;
  MatrixXd jac(n, n);
  std::vector<VectorXd> plus(n), minus(n);

  for (int j = 0; j <= nodes; ++j) {
    const double tau = j * dtau;
    const double weight = (j == 0 || j == nodes) ? 0.5 * dtau : dtau;
    const VectorXd y = advance(z.coordinates(), t - tau);
    const MatrixXd M = build_M(model, PhasePoint::from_coordinates(y));
    const VectorXd center = advance(y, tau);

    for (Index k = 0; k < n; ++k) {
      VectorXd e = y;
      e(k) += delta;
      plus[k] = advance(e, tau);
      e(k) = y(k) - delta;
      minus[k] = advance(e, tau);
      jac.col(k) = (plus[k] - minus[k]) / (2.0 * delta);
    }
    result.lambda += weight * jac * M * jac.transpose();

    // sum_kl M_kl d^2 Phi / dy_k dy_l over the non-zero entries of M only.
    VectorXd contraction = VectorXd::Zero(n);
    for (Index k = 0; k < n; ++k) {
      for (Index l = 0; l < n; ++l) {
        const double m = M(k, l);
        if (m == 0.0) continue;
        VectorXd second;
        if (k == l) {
          second = (plus[k] - 2.0 * center + minus[k]) / (delta * delta);
        } else {
          VectorXd e = y;
          e(k) += delta;
          e(l) += delta;
          const VectorXd pp = advance(e, tau);
          e(l) = y(l) - delta;
          const VectorXd pm = advance(e, tau);
          e(k) = y(k) - delta;
          const VectorXd mm = advance(e, tau);
          e(l) = y(l) + delta;
          const VectorXd mp = advance(e, tau);
          second = (pp - pm - mp + mm) / (4.0 * delta * delta);
        }
        contraction += m * second;
      }
    }
    result.gamma += weight * contraction;
  }
  return result;
}

}  // namespace husimi
