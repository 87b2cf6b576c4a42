#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "husimi/estimator.hpp"
#include "husimi/potentials.hpp"

using namespace husimi;
using testing_util::point;

namespace {

const double pi = std::numbers::pi;

GaussianSuperposition henon_heiles_state(double eps) {
  VectorXd z = VectorXd::Zero(12);
  z.head(6).setConstant(2.0);
  return GaussianSuperposition::single(PhasePoint::from_coordinates(z), eps);
}

EstimatorConfig config(Method m, Index n1, Index n2, double h, double t) {
  EstimatorConfig cfg;
  cfg.method = m;
  cfg.n1 = n1;
  cfg.n2 = n2;
  cfg.h1 = h;
  cfg.h2 = h;
  cfg.t_final = t;
  cfg.record_every = t > 0 ? std::min(0.1, t) : 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::husimi_corrected, Method::husimi_naive, Method::wigner})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("A") == Method::husimi_corrected);
  CHECK(parse_method("B") == Method::husimi_naive);
  CHECK(parse_method("C") == Method::wigner);
  CHECK_THROWS(parse_method("D"));
}

TEST_CASE("corrected symbol evaluation") {
  const HamiltonianModel harm(make_potential("harmonic", 1), 0.1);
  const auto obs = select_observables(harm, {"q1", "kinetic"});
  IntegratorConfig cfg;
  // floor(t / h2) steps, so pick h2 dividing pi/2.
  cfg.h2 = pi / 2000;
  cfg.t_final = pi / 2;
  CorrectionState s = propagate_correction(point({1, 0}), harm, cfg);
  CHECK(std::abs(evaluate_F(obs[0], s, 0.1)) < 1e-5);

  // Lambda = t J is antisymmetric, so the trace term drops for kinetic energy.
  CorrectionState k{point({0.3, 0.8}).coordinates(), 0.7 * symplectic_matrix(1), VectorXd::Zero(2), 0.7};
  CHECK(evaluate_F(obs[1], k, 0.1) == doctest::Approx(0.5 * 0.64 - 0.1 / 4).epsilon(1e-14));
  CHECK(correction_integrand(obs[1], k) == 0.0);

  const HamiltonianModel tors(make_potential("torsional", 2), 0.1);
  std::mt19937_64 rng(2);
  CorrectionState r{testing_util::random_vector(rng, 4), testing_util::random_matrix(rng, 4),
                    testing_util::random_vector(rng, 4), 1.0};
  for (const auto& a : builtin_observables(tors)) CHECK(evaluate_F(a, r, 0.0) == a.value(r.phi));
}

TEST_CASE("initial values of the corrected estimator") {
  const double eps = 0.01;
  const auto psi = henon_heiles_state(eps);
  const HamiltonianModel model(make_potential("henon-heiles", 6), eps);
  const auto obs = select_observables(model, {"q1", "q4", "kinetic", "potential"});
  const ExpectationSeries s = estimate(psi, obs, model, config(Method::husimi_corrected, 1 << 14, 1 << 10, 1e-3, 0.0));
  REQUIRE(s.times.size() == 1);
  CHECK(std::abs(s.values(0, 0) - 2.0) < 1e-4);
  CHECK(std::abs(s.values(0, 1) - 2.0) < 1e-4);
  CHECK(std::abs(s.values(0, 2) - 0.015) < 1e-4);
  CHECK(std::abs(s.values(0, 3) - initial_expectation_oracle(psi, obs[3], model)) < 1e-4);
}

TEST_CASE("harmonic oscillator positions follow the classical solution") {
  const double eps = 0.1;
  const HamiltonianModel model(make_potential("harmonic", 1), eps);
  const auto psi = GaussianSuperposition::single(point({1.0, 0.5}), eps);
  const auto obs = select_observables(model, {"q1", "p1"});
  const ExpectationSeries s = estimate(psi, obs, model, config(Method::husimi_corrected, 1 << 15, 1 << 8, 1e-2, 3.0));
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    const double t = s.times[i];
    CHECK(std::abs(s.values(i, 0) - (std::cos(t) + 0.5 * std::sin(t))) < 1e-4);
    CHECK(std::abs(s.values(i, 1) - (0.5 * std::cos(t) - std::sin(t))) < 1e-4);
  }
}

TEST_CASE("estimator is linear in the observable") {
  const double eps = 0.05;
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const auto psi = GaussianSuperposition::single(point({1, 0, 0, 0}), eps);
  const auto base = select_observables(model, {"q1", "potential", "kinetic"});
  std::vector<ObservableSymbol> obs = base;
  obs.push_back(linear_combination(2.0, base[1], -0.5, base[2]));
  obs.push_back(linear_combination(1.5, base[0], 1.0, base[1]));
  const auto s = estimate(psi, obs, model, config(Method::husimi_corrected, 2048, 256, 1e-2, 1.0));
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    CHECK(s.values(i, 3) == doctest::Approx(2.0 * s.values(i, 1) - 0.5 * s.values(i, 2)).epsilon(1e-12));
    CHECK(s.values(i, 4) == doctest::Approx(1.5 * s.values(i, 0) + s.values(i, 1)).epsilon(1e-12));
  }
}

TEST_CASE("corrected method without corrections equals the naive method") {
  const double eps = 0.05;
  const auto psi = GaussianSuperposition::single(point({1, 0, 0.2, 0}), eps);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const auto obs = select_observables(model, {"q1", "p2", "total"});
  const auto naive = estimate(psi, obs, model, config(Method::husimi_naive, 1024, 128, 1e-2, 1.0));
  const auto zero = estimate(psi, select_observables(model.with_epsilon(0.0), {"q1", "p2", "total"}),
                             model.with_epsilon(0.0), config(Method::husimi_corrected, 1024, 128, 1e-2, 1.0));
  CHECK((naive.values - zero.values).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("results do not depend on the worker count") {
  const double eps = 0.05;
  const auto psi = GaussianSuperposition::pair(point({0.5, -0.6, 0, 0}), point({0, 1, 0, 0}), eps);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const auto obs = select_observables(model, {"q1", "total"});
  auto cfg = config(Method::husimi_corrected, 1500, 300, 1e-2, 0.5);
  cfg.sampling.strategy = SamplingStrategy::mcmc;
  const auto one = estimate(psi, obs, model, cfg);
  cfg.threads = 3;
  const auto three = estimate(psi, obs, model, cfg);
  CHECK(one.values == three.values);
  const auto again = estimate(psi, obs, model, cfg);
  CHECK(again.values == three.values);
}

TEST_CASE("leading term converges as N1 grows") {
  const double eps = 0.01;
  const auto psi = henon_heiles_state(eps);
  const HamiltonianModel model(make_potential("henon-heiles", 6), eps);
  const auto obs = select_observables(model, {"potential"});
  const double exact = initial_expectation_oracle(psi, obs[0], model);
  std::vector<double> errors;
  for (int m = 10; m <= 15; ++m) {
    const auto s = estimate(psi, obs, model, config(Method::husimi_corrected, 1 << m, 1 << 10, 1e-3, 0.0));
    errors.push_back(std::abs(s.values(0, 0) - exact));
  }
  CHECK(errors.back() < errors.front());
  CHECK(errors[5] < errors[2]);
  CHECK(errors[3] < errors[0]);
}

TEST_CASE("comparison of series") {
  const double eps = 0.05;
  const auto psi = GaussianSuperposition::single(point({1, 0, 0, 0}), eps);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const auto obs = select_observables(model, {"q1", "total"});
  const auto cfg = config(Method::husimi_naive, 512, 64, 1e-2, 0.5);
  const auto a = estimate(psi, obs, model, cfg);
  const auto b = estimate(psi, obs, model, cfg);
  CHECK(compare_methods(a, b).sup_norm.norm() == 0.0);
  auto shifted = b;
  shifted.values.array() += 0.25;
  const auto d = compare_methods(shifted, a);
  CHECK(d.sup("q1") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.sup("total") == doctest::Approx(0.25).epsilon(1e-12));
  auto shorter = b;
  shorter.times.pop_back();
  shorter.values.conservativeResize(shorter.values.rows() - 1, Eigen::NoChange);
  CHECK_THROWS_AS(compare_methods(a, shorter), ContractError);
}

TEST_CASE("estimator preconditions") {
  const double eps = 0.1;
  const auto pair = GaussianSuperposition::pair(point({0.5, -0.6, 0, 0}), point({0, 1, 0, 0}), eps);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const auto obs = select_observables(model, {"q1"});
  auto cfg = config(Method::wigner, 256, 32, 1e-2, 0.5);
  CHECK_THROWS(estimate(pair, obs, model, cfg));
  cfg.method = Method::husimi_corrected;
  CHECK_THROWS_AS(estimate(pair, obs, model, cfg), StrategyError);
  cfg.record_every = 0.015;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = config(Method::husimi_corrected, 16, 32, 1e-2, 0.5);
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("escaping trajectories give a partial result") {
  const double eps = 0.01;
  const auto psi = henon_heiles_state(eps);
  const HamiltonianModel model(make_potential("henon-heiles", 6), eps);
  const auto obs = select_observables(model, {"total"});
  auto cfg = config(Method::husimi_corrected, 256, 64, 1e-2, 1.0);
  cfg.q_bound = 2.05;
  try {
    estimate(psi, obs, model, cfg);
    FAIL("expected instability");
  } catch (const PartialEstimateError& e) {
    CHECK_FALSE(e.failed_nodes().empty());
    CHECK(e.partial().times.size() == 11);
  }
}
