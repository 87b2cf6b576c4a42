#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "husimi/potentials.hpp"
#include "husimi/reference_solver.hpp"

using namespace husimi;
using testing_util::point;

namespace {

GridState gaussian(Index d, double L, Index n, const PhasePoint& z, double eps) {
  return GridState::from_superposition(GridSpec::square(d, L, n), GaussianSuperposition::single(z, eps));
}

GridExpectations evolve(GridState state, const char* potential, double h, std::size_t steps) {
  const HamiltonianModel model(make_potential(potential, state.grid.dimension()), state.epsilon);
  SplitStepSolver(state.grid, model, h).advance(state, steps);
  return grid_expectations(state, model.potential());
}

}  // namespace

TEST_CASE("grid specification") {
  const GridSpec g = GridSpec::square(2, 3.0, 8);
  CHECK(g.size() == 64);
  CHECK(g.spacing(0) == 0.75);
  CHECK(g.cell_volume() == 0.5625);
  CHECK(g.coordinate(0, 0) == -3.0);
  CHECK(g.coordinate(1, 4) == 0.0);
  CHECK(g.wavenumber(0, 1) == doctest::Approx(std::numbers::pi / 3));
  CHECK(g.wavenumber(0, 7) == doctest::Approx(-std::numbers::pi / 3));
  CHECK_THROWS_AS(GridSpec::square(2, 3.0, 12).validate(), ContractError);
  CHECK_THROWS_AS(GridSpec::square(3, 3.0, 8).validate(), ContractError);
}

TEST_CASE("initial grid expectations") {
  const double eps = 0.1;
  const PhasePoint z = point({0.3, -0.4, 0.5, 0.2});
  const GridState s = gaussian(2, 4.0, 128, z, eps);
  CHECK(std::abs(s.norm_squared() - 1.0) < 1e-12);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const GridExpectations e = grid_expectations(s, model.potential());
  CHECK((e.position - z.q()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((e.momentum - z.p()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(e.kinetic == doctest::Approx(0.5 * 0.29 + eps / 2).epsilon(1e-10));
  CHECK(e.total == doctest::Approx(e.kinetic + e.potential).epsilon(1e-14));
  const auto pot = select_observables(model, {"potential"});
  CHECK(e.potential ==
        doctest::Approx(initial_expectation_oracle(GaussianSuperposition::single(z, eps), pot[0], model))
            .epsilon(1e-10));
  CHECK(e.aliasing_mass < aliasing_tolerance);
  CHECK(e.value("p2") == e.momentum(1));
  CHECK(e.value("total") == e.total);
  CHECK_THROWS(e.value("q3"));

  const GridState zero_p = gaussian(2, 4.0, 128, point({0.1, 0.2, 0, 0}), eps);
  CHECK(grid_expectations(zero_p, model.potential()).kinetic == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("free motion of a Gaussian") {
  const double eps = 0.1;
  const GridState s = gaussian(1, 8.0, 512, point({-0.5, 0.5}), eps);
  const GridExpectations e = evolve(s, "free", 1e-2, 100);
  CHECK(std::abs(e.position(0) - 0.0) < 1e-8);
  CHECK(std::abs(e.momentum(0) - 0.5) < 1e-8);
}

TEST_CASE("split step keeps the norm") {
  const double eps = 0.1;
  GridState s = gaussian(2, 3.0, 64, point({1, 0, 0, 0}), eps);
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  SplitStepSolver(s.grid, model, 1e-3).advance(s, 1000);
  CHECK(std::abs(s.norm_squared() - 1.0) < 1e-10);
  CHECK(s.time == doctest::Approx(1.0).epsilon(1e-12));
  const GridState one = split_step(s, model, 1e-3);
  CHECK(std::abs(one.norm_squared() - 1.0) < 1e-10);
}

TEST_CASE("harmonic oscillator follows Ehrenfest") {
  const double eps = 0.1;
  const GridState s = gaussian(1, 6.0, 256, point({1.0, 0.0}), eps);
  const GridExpectations e = evolve(s, "harmonic", 1e-3, 1000);
  CHECK(std::abs(e.position(0) - std::cos(1.0)) < 1e-6);
  CHECK(std::abs(e.momentum(0) + std::sin(1.0)) < 1e-6);
}

TEST_CASE("energy conservation, time and grid convergence") {
  const double eps = 0.1;
  const GridState s = gaussian(2, 3.0, 128, point({1, 0, 0, 0}), eps);
  const double e0 = evolve(s, "torsional", 1e-3, 0).total;
  const GridExpectations fine = evolve(s, "torsional", 2.5e-4, 4000);
  CHECK(std::abs(fine.total - e0) < 1e-8);

  const GridExpectations a = evolve(s, "torsional", 1e-2, 100);
  const GridExpectations b = evolve(s, "torsional", 5e-3, 200);
  const double ea = (a.position - fine.position).norm(), eb = (b.position - fine.position).norm();
  CHECK(ea / eb > 3.5);
  CHECK(ea / eb < 4.5);

  const GridState big = gaussian(2, 3.0, 256, point({1, 0, 0, 0}), eps);
  const GridExpectations doubled = evolve(big, "torsional", 5e-3, 200);
  CHECK((doubled.position - b.position).norm() < 1e-8);
  CHECK(std::abs(doubled.total - b.total) < 1e-8);
}

TEST_CASE("aliasing guard flags under-resolved states") {
  const double eps = 0.1;
  const HamiltonianModel model(make_potential("torsional", 2), eps);
  const GridState coarse = gaussian(2, 3.0, 16, point({0, 0, 2.5, 0}), eps);
  CHECK(grid_expectations(coarse, model.potential()).aliasing_mass > aliasing_tolerance);
  const GridState fine = gaussian(2, 3.0, 256, point({0, 0, 2.5, 0}), eps);
  CHECK(grid_expectations(fine, model.potential()).aliasing_mass < aliasing_tolerance);
}

TEST_CASE("checkpoint round trip") {
  GridState s = gaussian(2, 3.0, 32, point({0.5, 0, 0.3, 0}), 0.1);
  s.time = 1.25;
  const auto path = std::filesystem::temp_directory_path() / "husimi_checkpoint_test.bin";
  save_checkpoint(path.string(), s);
  const GridState back = load_checkpoint(path.string());
  std::filesystem::remove(path);
  CHECK(back.grid.points == s.grid.points);
  CHECK(back.grid.half_width == s.grid.half_width);
  CHECK(back.epsilon == s.epsilon);
  CHECK(back.time == s.time);
  double worst = 0;
  for (std::size_t i = 0; i < s.psi.size(); ++i) worst = std::max(worst, std::abs(back.psi[i] - s.psi[i]));
  CHECK(worst < 1e-6);
  CHECK_THROWS(load_checkpoint("/nonexistent/checkpoint.bin"));
}
