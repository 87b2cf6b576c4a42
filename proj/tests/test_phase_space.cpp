#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "husimi/observables.hpp"
#include "husimi/potentials.hpp"

using namespace husimi;
using testing_util::point;
using testing_util::random_vector;

TEST_CASE("phase point rejects mismatched or non-finite input") {
  CHECK_THROWS_AS(PhasePoint(VectorXd::Zero(2), VectorXd::Zero(3)), ContractError);
  VectorXd bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(PhasePoint(bad, VectorXd::Zero(2)), ContractError);
  CHECK_THROWS_AS(PhasePoint::from_coordinates(VectorXd::Zero(3)), ContractError);
  const PhasePoint z = point({1, 2, 3, 4});
  CHECK(z.dimension() == 2);
  CHECK(z.q()(1) == 2.0);
  CHECK(z.p()(0) == 3.0);
}

TEST_CASE("symplectic matrix squares to minus identity") {
  for (Index d : {1, 2, 6}) {
    const MatrixXd J = symplectic_matrix(d);
    CHECK((J * J + MatrixXd::Identity(2 * d, 2 * d)).norm() == 0.0);
    CHECK((J.transpose() + J).norm() == 0.0);
  }
}

TEST_CASE("h_eps closed values") {
  const HamiltonianModel tors(make_potential("torsional", 2), 0.1);
  CHECK(eval_h_eps(tors, point({0, 0, 0, 0})) == doctest::Approx(-0.1).epsilon(1e-15));

  const HamiltonianModel free(make_potential("free", 3), 0.2);
  const PhasePoint z = point({0.3, -1, 2, 0.5, 1.5, -2});
  CHECK(eval_h_eps(free, z) == doctest::Approx(0.5 * (0.25 + 2.25 + 4) - 0.2 * 3 / 4).epsilon(1e-14));

  const HamiltonianModel harm(make_potential("harmonic", 2), 0.0);
  CHECK(eval_h_eps(harm, point({1, 0, 0, 0})) == 0.5);

  CHECK_THROWS_AS(eval_h_eps(tors, point({0, 0})), ContractError);
}

TEST_CASE("grad h_eps closed values") {
  const HamiltonianModel free(make_potential("free", 2), 0.3);
  const PhasePoint z = point({0.1, 0.2, 0.7, -0.4});
  const VectorXd g = grad_h_eps(free, z);
  CHECK(g.head(2).norm() == 0.0);
  CHECK(g(2) == 0.7);
  CHECK(g(3) == -0.4);

  const HamiltonianModel harm(make_potential("harmonic", 2), 0.5);
  CHECK((grad_h_eps(harm, z) - z.coordinates()).norm() < 1e-15);

  const HamiltonianModel tors(make_potential("torsional", 2), 0.1);
  const VectorXd t = grad_h_eps(tors, point({std::numbers::pi / 2, 0, 0, 0}));
  CHECK(t(0) == doctest::Approx(1.025).epsilon(1e-14));
  CHECK(std::abs(t(1)) < 1e-15);
}

TEST_CASE("grad h_eps matches central differences of h_eps") {
  std::mt19937_64 rng(11);
  for (const char* name : {"torsional", "henon-heiles", "harmonic"}) {
    const Index d = std::string(name) == "henon-heiles" ? 3 : 2;
    const HamiltonianModel model(make_potential(name, d), 0.05);
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd z = random_vector(rng, 2 * d);
      const VectorXd g = grad_h_eps(model, PhasePoint::from_coordinates(z));
      const double step = 1e-4;
      for (Index k = 0; k < 2 * d; ++k) {
        VectorXd zp = z, zm = z;
        zp(k) += step;
        zm(k) -= step;
        const double fd = (eval_h_eps(model, PhasePoint::from_coordinates(zp)) -
                           eval_h_eps(model, PhasePoint::from_coordinates(zm))) /
                          (2 * step);
        CHECK(std::abs(fd - g(k)) < 1e-6);
      }
    }
  }
}

TEST_CASE("potential derivatives agree with finite differences") {
  std::mt19937_64 rng(3);
  for (const char* name : {"harmonic", "free", "torsional", "henon-heiles"}) {
    const Index d = 3;
    const PotentialPtr V = make_potential(name, d);
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd q = random_vector(rng, d);
      const MatrixXd H = V->hessian_at(q);
      CHECK((H - H.transpose()).norm() == 0.0);
      const double step = 1e-4;
      const VectorXd g = V->gradient_at(q);
      for (Index i = 0; i < d; ++i) {
        VectorXd qp = q, qm = q;
        qp(i) += step;
        qm(i) -= step;
        CHECK(std::abs((V->value(qp) - V->value(qm)) / (2 * step) - g(i)) < 1e-7);
        const MatrixXd T = V->third_derivative_at(q, i);
        const MatrixXd fd = (V->hessian_at(qp) - V->hessian_at(qm)) / (2 * step);
        CHECK((T - fd).cwiseAbs().maxCoeff() < 1e-7);
      }
      CHECK(V->laplacian(q) == doctest::Approx(H.trace()).epsilon(1e-13));
    }
  }
}

TEST_CASE("third derivative fallback and missing capability") {
  auto value = [](const VecRef& q) { return std::pow(q(0), 4) / 12.0; };
  auto grad = [](const VecRef& q, VecOut g) { g(0) = std::pow(q(0), 3) / 3.0; };
  auto hess = [](const VecRef& q, MatOut h) { h(0, 0) = q(0) * q(0); };
  const CallbackPotential fd(1, "quartic", value, grad, hess);
  VectorXd q(1);
  q << 0.7;
  CHECK(fd.third_derivative_at(q, 0)(0, 0) == doctest::Approx(1.4).epsilon(1e-8));

  auto none = std::make_shared<CallbackPotential>(1, "quartic", value, grad, hess,
                                                  CallbackPotential::ThirdFn{},
                                                  CallbackPotential::ThirdDerivative::none);
  CHECK_FALSE(none->has_third_derivative());
  const HamiltonianModel model(none, 0.1);
  CHECK_THROWS_AS(grad_h_eps(model, point({0.7, 0.0})), CapabilityError);
}

TEST_CASE("Henon-Heiles potential matches its defining sum") {
  const PotentialPtr V = make_potential("henon-heiles", 3, 0.2);
  VectorXd q(3);
  q << 0.3, -0.5, 1.1;
  double expected = 0.5 * q.squaredNorm();
  for (int j = 0; j < 2; ++j) {
    expected += 0.2 * (q(j) * q(j + 1) * q(j + 1) - std::pow(q(j), 3) / 3.0);
    expected += 0.04 / 16.0 * std::pow(q(j) * q(j) + q(j + 1) * q(j + 1), 2);
  }
  CHECK(V->value(q) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("Hamiltonian and its phase-space Laplacian") {
  std::mt19937_64 rng(5);
  const HamiltonianModel model(make_potential("torsional", 2), 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd z = random_vector(rng, 4, 2.0);
    const double V = model.potential().value(z.head(2));
    CHECK(model.h(z) == doctest::Approx(0.5 * z.tail(2).squaredNorm() + V).epsilon(1e-14));
    CHECK(model.laplacian_h(z) ==
          doctest::Approx(2.0 + std::cos(z(0)) + std::cos(z(1))).epsilon(1e-14));
  }
}

TEST_CASE("correct_symbol closed values") {
  const HamiltonianModel model(make_potential("torsional", 2), 0.01);
  const auto obs = builtin_observables(model);
  auto find = [&](const std::string& name) {
    for (const auto& a : obs)
      if (a.name() == name) return a;
    FAIL("missing observable " << name);
    return obs.front();
  };
  const VectorXd z = point({0.4, -0.2, 0.3, 0.9}).coordinates();
  CHECK(correct_symbol(find("q1"), 0.01).value(z) == find("q1").value(z));
  CHECK(correct_symbol(find("kinetic"), 0.01).value(VectorXd::Zero(4)) ==
        doctest::Approx(-0.005).epsilon(1e-14));
  for (double eps : {0.0, 0.1, 0.7}) {
    const auto corrected = correct_symbol(find("total"), eps);
    CHECK(corrected.value(z) ==
          doctest::Approx(eval_h_eps(model.with_epsilon(eps), PhasePoint::from_coordinates(z)))
              .epsilon(1e-14));
  }
  CHECK_FALSE(correct_symbol(find("total"), 0.1).has_gradient());
  CHECK_THROWS_AS(correct_symbol(find("total"), 0.1).gradient(z), CapabilityError);
}

TEST_CASE("correct_symbol is linear and the identity at eps = 0") {
  std::mt19937_64 rng(9);
  const HamiltonianModel model(make_potential("henon-heiles", 2), 0.05);
  const auto obs = builtin_observables(model);
  for (const auto& a : obs)
    for (const auto& b : obs) {
      const auto combo = linear_combination(0.7, a, -1.3, b);
      const auto lhs = correct_symbol(combo, 0.05);
      const auto ca = correct_symbol(a, 0.05);
      const auto cb = correct_symbol(b, 0.05);
      for (int trial = 0; trial < 3; ++trial) {
        const VectorXd z = random_vector(rng, 4);
        CHECK(lhs.value(z) == doctest::Approx(0.7 * ca.value(z) - 1.3 * cb.value(z)).epsilon(1e-12));
        CHECK(correct_symbol(a, 0.0).value(z) == a.value(z));
      }
    }
}

TEST_CASE("builtin observables") {
  std::mt19937_64 rng(1);
  const HamiltonianModel model(make_potential("torsional", 2), 0.1);
  const auto obs = select_observables(model, {"kinetic", "potential", "total", "p2", "q1"});
  CHECK(obs[0].value(point({0, 0, 1, 0}).coordinates()) == 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd z = random_vector(rng, 4, 3.0);
    CHECK(obs[2].value(z) == doctest::Approx(obs[0].value(z) + obs[1].value(z)).epsilon(1e-14));
  }
  VectorXd e = VectorXd::Zero(4);
  e(3) = 1.0;
  CHECK((obs[3].gradient(VectorXd::Ones(4)) - e).norm() == 0.0);
  CHECK(obs[3].kind() == ObservableKind::momentum);
  CHECK(obs[4].component() == 0);
  for (const auto& a : builtin_observables(model)) {
    const VectorXd z = random_vector(rng, 4);
    CHECK(a.laplacian(z) == doctest::Approx(a.hessian(z).trace()).epsilon(1e-13));
    const VectorXd g = a.gradient(z);
    for (Index k = 0; k < 4; ++k) {
      VectorXd zp = z, zm = z;
      zp(k) += 1e-5;
      zm(k) -= 1e-5;
      CHECK(std::abs((a.value(zp) - a.value(zm)) / 2e-5 - g(k)) < 1e-8);
    }
  }
  CHECK_THROWS(select_observables(model, {}));
  CHECK_THROWS(select_observables(model, {"q3"}));
}
