#include "husimi/reference_solver.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

namespace husimi {

namespace {

// Planner calls are not thread safe in FFTW.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Multi-index of flat i, last axis fastest.
void unflatten(const GridSpec& g, Index i, std::vector<Index>& idx) {
  idx.resize(static_cast<std::size_t>(g.dimension()));
  for (Index a = g.dimension() - 1; a >= 0; --a) {
    idx[static_cast<std::size_t>(a)] = i % g.points[a];
    i /= g.points[a];
  }
}

void forward_fft(std::vector<std::complex<double>>& data, const GridSpec& g, int sign) {
  std::vector<int> n(g.points.begin(), g.points.end());
  fftw_complex* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft(static_cast<int>(n.size()), n.data(), buf, buf, sign,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

GridSpec GridSpec::square(Index d, double half_width, Index points) {
  GridSpec g;
  g.half_width.assign(static_cast<std::size_t>(d), half_width);
  g.points.assign(static_cast<std::size_t>(d), points);
  g.validate();
  return g;
}

Index GridSpec::size() const {
  Index n = 1;
  for (Index p : points) n *= p;
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (Index a = 0; a < dimension(); ++a) v *= spacing(a);
  return v;
}

double GridSpec::coordinate(Index axis, Index k) const {
  return -half_width[axis] + spacing(axis) * static_cast<double>(k);
}

double GridSpec::wavenumber(Index axis, Index k) const {
  const Index n = points[axis];
  const Index m = k < n / 2 ? k : k - n;
  return std::numbers::pi * static_cast<double>(m) / half_width[axis];
}

void GridSpec::validate() const {
  if (points.empty() || points.size() > 2 || half_width.size() != points.size())
    throw ContractError("GridSpec: one or two axes required");
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (!is_power_of_two(points[a]) || points[a] < 2)
      throw ContractError("GridSpec: grid sizes must be powers of two");
    if (!(half_width[a] > 0.0)) throw ContractError("GridSpec: half widths must be > 0");
  }
}

GridState GridState::from_wave(const GridSpec& grid, double epsilon,
                               const std::function<std::complex<double>(const VecRef&)>& wave) {
  grid.validate();
  if (!(epsilon > 0.0)) throw ContractError("GridState: epsilon must be > 0");
  GridState s;
  s.grid = grid;
  s.epsilon = epsilon;
  s.psi.resize(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) s.psi[static_cast<std::size_t>(i)] = wave(s.point(i));
  return s;
}

GridState GridState::from_superposition(const GridSpec& grid, const GaussianSuperposition& psi0) {
  if (psi0.dimension() != grid.dimension())
    throw ContractError("GridState: state and grid dimensions differ");
  return from_wave(grid, psi0.epsilon(),
                   [&](const VecRef& q) { return psi0.wave_function(q); });
}

double GridState::norm_squared() const {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return s * grid.cell_volume();
}

VectorXd GridState::point(Index i) const {
  std::vector<Index> idx;
  unflatten(grid, i, idx);
  VectorXd q(grid.dimension());
  for (Index a = 0; a < grid.dimension(); ++a) q(a) = grid.coordinate(a, idx[static_cast<std::size_t>(a)]);
  return q;
}

// 2D transforms run as batched row FFTs around a blocked transpose; strided
// column transforms are several times slower. The spectrum is therefore held
// transposed and the kinetic factor is stored in that layout.
struct SplitStepSolver::Plans {
  Index rows = 1, cols = 1;
  fftw_complex* a = nullptr;  // rows x cols
  fftw_complex* b = nullptr;  // cols x rows, 2D only
  fftw_plan fwd_a = nullptr, bwd_a = nullptr, fwd_b = nullptr, bwd_b = nullptr;

  void transpose(const fftw_complex* from, fftw_complex* to, Index r, Index c) const {
    constexpr Index tile = 32;
    for (Index i0 = 0; i0 < r; i0 += tile)
      for (Index j0 = 0; j0 < c; j0 += tile)
        for (Index i = i0; i < std::min(r, i0 + tile); ++i)
          for (Index j = j0; j < std::min(c, j0 + tile); ++j) {
            to[j * r + i][0] = from[i * c + j][0];
            to[j * r + i][1] = from[i * c + j][1];
          }
  }
  // psi in a -> spectrum in b (2D) or a (1D)
  std::complex<double>* forward() const {
    fftw_execute(fwd_a);
    if (!b) return reinterpret_cast<std::complex<double>*>(a);
    transpose(a, b, rows, cols);
    fftw_execute(fwd_b);
    return reinterpret_cast<std::complex<double>*>(b);
  }
  void backward() const {
    if (b) {
      fftw_execute(bwd_b);
      transpose(b, a, cols, rows);
    }
    fftw_execute(bwd_a);
  }
};

SplitStepSolver::SplitStepSolver(const GridSpec& grid, const HamiltonianModel& model, double h)
    : grid_(grid), h_(h), plans_(std::make_unique<Plans>()) {
  grid_.validate();
  if (model.dimension() != grid_.dimension())
    throw ContractError("SplitStepSolver: model and grid dimensions differ");
  if (!std::isfinite(h) || h == 0.0) throw ContractError("SplitStepSolver: step must be non-zero");
  const double eps = model.epsilon();
  if (!(eps > 0.0)) throw ContractError("SplitStepSolver: epsilon must be > 0");

  const Index n = grid_.size();
  const auto un = static_cast<std::size_t>(n);
  const bool two_d = grid_.dimension() == 2;
  Plans& P = *plans_;
  P.rows = two_d ? grid_.points[0] : 1;
  P.cols = two_d ? grid_.points[1] : grid_.points[0];

  half_potential_.resize(un);
  full_potential_.resize(un);
  kinetic_.resize(un);
  std::vector<Index> idx;
  VectorXd q(grid_.dimension());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    unflatten(grid_, i, idx);
    double xi2 = 0.0;
    for (Index a = 0; a < grid_.dimension(); ++a) {
      const auto k = idx[static_cast<std::size_t>(a)];
      q(a) = grid_.coordinate(a, k);
      const double xi = grid_.wavenumber(a, k);
      xi2 += xi * xi;
    }
    const double v = model.potential().value(q);
    half_potential_[static_cast<std::size_t>(i)] = std::polar(1.0, -v * h / (2.0 * eps));
    full_potential_[static_cast<std::size_t>(i)] = std::polar(1.0, -v * h / eps);
    // Spectral layout is transposed in 2D; the unnormalized inverse
    // transform's 1/n is folded in here.
    const Index s = two_d ? idx[1] * P.rows + idx[0] : i;
    kinetic_[static_cast<std::size_t>(s)] = std::polar(inv_n, -eps * h * xi2 / 2.0);
  }

  std::lock_guard lock(planner_mutex());
  const int rows = static_cast<int>(P.rows), cols = static_cast<int>(P.cols);
  P.a = fftw_alloc_complex(un);
  P.fwd_a = fftw_plan_many_dft(1, &cols, rows, P.a, nullptr, 1, cols, P.a, nullptr, 1, cols,
                               FFTW_FORWARD, FFTW_ESTIMATE);
  P.bwd_a = fftw_plan_many_dft(1, &cols, rows, P.a, nullptr, 1, cols, P.a, nullptr, 1, cols,
                               FFTW_BACKWARD, FFTW_ESTIMATE);
  if (two_d) {
    P.b = fftw_alloc_complex(un);
    P.fwd_b = fftw_plan_many_dft(1, &rows, cols, P.b, nullptr, 1, rows, P.b, nullptr, 1, rows,
                                 FFTW_FORWARD, FFTW_ESTIMATE);
    P.bwd_b = fftw_plan_many_dft(1, &rows, cols, P.b, nullptr, 1, rows, P.b, nullptr, 1, rows,
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  }
}

SplitStepSolver::~SplitStepSolver() {
  std::lock_guard lock(planner_mutex());
  for (fftw_plan p : {plans_->fwd_a, plans_->bwd_a, plans_->fwd_b, plans_->bwd_b})
    if (p) fftw_destroy_plan(p);
  if (plans_->a) fftw_free(plans_->a);
  if (plans_->b) fftw_free(plans_->b);
}

void SplitStepSolver::step(GridState& state) const { advance(state, 1); }

void SplitStepSolver::advance(GridState& state, std::size_t steps) const {
  if (state.grid.points != grid_.points || state.grid.half_width != grid_.half_width)
    throw ContractError("SplitStepSolver: state lives on a different grid");
  if (steps == 0) return;
  const std::size_t n = state.psi.size();
  auto* psi = reinterpret_cast<std::complex<double>*>(plans_->a);
  std::memcpy(psi, state.psi.data(), n * sizeof(std::complex<double>));
  // Adjacent potential half steps merge into one full step.
  for (std::size_t i = 0; i < n; ++i) psi[i] *= half_potential_[i];
  for (std::size_t s = 0; s < steps; ++s) {
    std::complex<double>* spec = plans_->forward();
    for (std::size_t i = 0; i < n; ++i) spec[i] *= kinetic_[i];
    plans_->backward();
    const auto& phase = s + 1 < steps ? full_potential_ : half_potential_;
    for (std::size_t i = 0; i < n; ++i) psi[i] *= phase[i];
  }
  std::memcpy(state.psi.data(), psi, n * sizeof(std::complex<double>));
  state.time += static_cast<double>(steps) * h_;
}

GridState split_step(const GridState& state, const HamiltonianModel& model, double h) {
  if (std::abs(model.epsilon() - state.epsilon) > 1e-15 * std::max(1.0, state.epsilon))
    throw ContractError("split_step: model and state epsilon differ");
  GridState next = state;
  SplitStepSolver(state.grid, model, h).step(next);
  return next;
}

double GridExpectations::value(const std::string& observable) const {
  if (observable == "potential") return potential;
  if (observable == "kinetic") return kinetic;
  if (observable == "total") return total;
  if (observable.size() >= 2 && (observable[0] == 'q' || observable[0] == 'p')) {
    const Index j = std::stol(observable.substr(1)) - 1;
    const VectorXd& v = observable[0] == 'q' ? position : momentum;
    if (j >= 0 && j < v.size()) return v(j);
  }
  throw ContractError("grid expectations have no observable '" + observable + "'");
}

GridExpectations grid_expectations(const GridState& state, const Potential& potential) {
  const GridSpec& g = state.grid;
  const Index d = g.dimension();
  if (potential.dimension() != d) throw ContractError("grid_expectations: dimension mismatch");
  const double eps = state.epsilon;
  GridExpectations out;
  out.position = VectorXd::Zero(d);
  out.momentum = VectorXd::Zero(d);

  std::vector<Index> idx;
  double mass = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double w = std::norm(state.psi[static_cast<std::size_t>(i)]);
    const VectorXd q = state.point(i);
    mass += w;
    out.position += w * q;
    out.potential += w * potential.value(q);
  }
  out.position /= mass;
  out.potential /= mass;

  std::vector<std::complex<double>> spectrum = state.psi;
  forward_fft(spectrum, g, FFTW_FORWARD);
  double smass = 0.0, outer = 0.0, kin = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double w = std::norm(spectrum[static_cast<std::size_t>(i)]);
    unflatten(g, i, idx);
    bool in_outer = false;
    double xi2 = 0.0;
    for (Index a = 0; a < d; ++a) {
      const Index k = idx[static_cast<std::size_t>(a)];
      const double xi = g.wavenumber(a, k);
      const Index m = k < g.points[a] / 2 ? k : k - g.points[a];
      if (std::abs(static_cast<double>(m)) >= 0.9 * static_cast<double>(g.points[a] / 2))
        in_outer = true;
      out.momentum(a) += w * eps * xi;
      xi2 += xi * xi;
    }
    kin += w * 0.5 * eps * eps * xi2;
    smass += w;
    if (in_outer) outer += w;
  }
  out.momentum /= smass;
  out.kinetic = kin / smass;
  out.total = out.kinetic + out.potential;
  out.aliasing_mass = outer / smass;
  return out;
}

void save_checkpoint(const std::string& path, const GridState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write checkpoint '" + path + "'");
  out.precision(17);
  out << "husimi-grid d=" << state.grid.dimension();
  for (Index a = 0; a < state.grid.dimension(); ++a)
    out << " n" << a << "=" << state.grid.points[a] << " L" << a << "=" << state.grid.half_width[a];
  out << " eps=" << state.epsilon << " t=" << state.time << "\n";
  for (const auto& v : state.psi) {
    float parts[2] = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
    for (float f : parts) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw ContractError("failed writing checkpoint '" + path + "'");
}

GridState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot read checkpoint '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream fields(header);
  std::string tag;
  fields >> tag;
  if (tag != "husimi-grid") throw ContractError("checkpoint '" + path + "' has no grid header");
  GridState s;
  Index d = 0;
  for (std::string kv; fields >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "d") {
      d = std::stol(value);
      s.grid.points.assign(static_cast<std::size_t>(d), 0);
      s.grid.half_width.assign(static_cast<std::size_t>(d), 0.0);
    } else if (key == "eps") {
      s.epsilon = std::stod(value);
    } else if (key == "t") {
      s.time = std::stod(value);
    } else if ((key[0] == 'n' || key[0] == 'L') && key.size() > 1) {
      const auto a = static_cast<std::size_t>(std::stol(key.substr(1)));
      if (a >= s.grid.points.size()) throw ContractError("checkpoint header: bad axis");
      if (key[0] == 'n') s.grid.points[a] = std::stol(value);
      else s.grid.half_width[a] = std::stod(value);
    }
  }
  s.grid.validate();
  s.psi.resize(static_cast<std::size_t>(s.grid.size()));
  for (auto& v : s.psi) {
    std::uint32_t bits[2];
    in.read(reinterpret_cast<char*>(bits), sizeof bits);
    if (!in) throw ContractError("checkpoint '" + path + "' is truncated");
    for (auto& b : bits)
      if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap32(b);
    v = {std::bit_cast<float>(bits[0]), std::bit_cast<float>(bits[1])};
  }
  return s;
}

}  // namespace husimi
