#include "husimi/sampling.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace husimi {

namespace detail {
extern const char* const joe_kuo_text;
}

// --- direction numbers ------------------------------------------------------

DirectionTable DirectionTable::parse(std::istream& in, std::string identifier) {
  DirectionTable table;
  table.identifier_ = std::move(identifier);

  std::array<std::uint32_t, bits> first{};
  for (int k = 0; k < bits; ++k) first[k] = 1u << (bits - 1 - k);
  table.directions_.push_back(first);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    long long dim = 0;
    if (!(fields >> dim)) continue;  // header or blank line
    unsigned s = 0, a = 0;
    if (!(fields >> s >> a) || s < 1 || s >= static_cast<unsigned>(bits))
      throw ContractError("direction table line " + std::to_string(line_no) + ": bad degree");
    if (dim != static_cast<long long>(table.directions_.size()) + 1)
      throw ContractError("direction table line " + std::to_string(line_no) +
                          ": dimensions must be consecutive from 2");
    std::array<std::uint32_t, bits> v{};
    for (unsigned k = 0; k < s; ++k) {
      std::uint64_t m = 0;
      if (!(fields >> m) || m % 2 == 0 || m >= (1ull << (k + 1)))
        throw ContractError("direction table line " + std::to_string(line_no) +
                            ": bad initial direction number");
      v[k] = static_cast<std::uint32_t>(m << (bits - 1 - k));
    }
    for (unsigned k = s; k < static_cast<unsigned>(bits); ++k) {
      std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
      for (unsigned l = 1; l < s; ++l)
        if ((a >> (s - 1 - l)) & 1u) x ^= v[k - l];
      v[k] = x;
    }
    table.directions_.push_back(v);
  }
  return table;
}

DirectionTable DirectionTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open direction table '" + path + "'");
  return parse(in, path);
}

const DirectionTable& DirectionTable::joe_kuo() {
  static const DirectionTable table = [] {
    std::istringstream in(detail::joe_kuo_text);
    return parse(in, "new-joe-kuo-6.64");
  }();
  return table;
}

// --- Sobol ------------------------------------------------------------------

SobolGenerator::SobolGenerator(Index dimension, const DirectionTable& table, Index dimension_offset)
    : dimension_(dimension), offset_(dimension_offset), table_(&table) {
  if (dimension < 1 || dimension_offset < 0)
    throw ContractError("SobolGenerator: dimension must be >= 1 and offset >= 0");
  if (dimension + dimension_offset > table.max_dimension())
    throw CapabilityError("SobolGenerator: direction table '" + table.identifier() + "' covers " +
                          std::to_string(table.max_dimension()) + " dimensions, " +
                          std::to_string(dimension + dimension_offset) + " requested");
}

void SobolGenerator::point(std::uint64_t i, VecOut out) const {
  if (i == 0) throw DomainError("Sobol index 0 is the degenerate all-zero point");
  if (i >= (1ull << DirectionTable::bits)) throw DomainError("Sobol index exceeds 2^32 - 1");
  const std::uint64_t gray = i ^ (i >> 1);
  constexpr double scale = 1.0 / 4294967296.0;
  for (Index j = 0; j < dimension_; ++j) {
    const auto& v = table_->directions(offset_ + j);
    std::uint32_t x = 0;
    for (std::uint64_t g = gray; g != 0; g &= g - 1) x ^= v[std::countr_zero(g)];
    out(j) = x * scale;
  }
}

VectorXd SobolGenerator::point(std::uint64_t i) const {
  VectorXd x(dimension_);
  point(i, x);
  return x;
}

VectorXd SobolGenerator::next() {
  ++index_;
  return point(index_);
}

// --- normal distribution ----------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Rational initial guess (Acklam), relative error about 1e-9, for u <= 0.5.
double lower_quantile_guess(double u) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  if (u < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse_normal_cdf: argument must lie in (0, 1)");
  if (u > 0.5) return -inverse_normal_cdf(1.0 - u);  // 1 - u is exact here
  if (u == 0.5) return 0.0;
  double x = lower_quantile_guess(u);
  // Halley refinement against erfc, which is accurate in the lower tail.
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - u;
    const double t = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= t / (1.0 + 0.5 * x * t);
  }
  return x;
}

// --- QMC --------------------------------------------------------------------

SampleEnsemble sample_gaussian_qmc(const PhasePoint& center, double covariance_scale, Index n,
                                   const SobolGenerator& gen) {
  const Index dim = center.coordinates().size();
  if (n < 1) throw ContractError("sample_gaussian_qmc: N must be >= 1");
  if (!(covariance_scale >= 0.0)) throw ContractError("sample_gaussian_qmc: negative covariance");
  if (gen.dimension() != dim)
    throw ContractError("sample_gaussian_qmc: generator dimension must equal phase-space dimension");

  SampleEnsemble ens;
  ens.nodes.resize(dim, n);
  ens.provenance = Provenance::qmc;
  ens.first_index = 1;
  ens.dimension_offset = gen.dimension_offset();
  const double width = std::sqrt(covariance_scale);
  VectorXd u(dim);
  for (Index j = 0; j < n; ++j) {
    gen.point(static_cast<std::uint64_t>(j) + 1, u);
    for (Index k = 0; k < dim; ++k)
      ens.nodes(k, j) = center.coordinates()(k) + width * inverse_normal_cdf(u(k));
  }
  return ens;
}

// --- Metropolis -------------------------------------------------------------

double metropolis_acceptance(double target_current, double target_proposed,
                             double proposal_ratio) {
  if (target_proposed < 0.0 || target_current < 0.0 || !(proposal_ratio >= 0.0))
    throw ContractError("metropolis_acceptance: densities and ratios must be non-negative");
  if (target_current == 0.0) return target_proposed > 0.0 ? 1.0 : 0.0;
  return std::min(1.0, target_proposed / target_current * proposal_ratio);
}

MetropolisChain::MetropolisChain(PhaseSpaceDensity target, VectorXd start,
                                 MetropolisOptions options)
    : target_(std::move(target)),
      state_(std::move(start)),
      state_density_(0.0),
      options_(std::move(options)),
      rng_(options_.seed) {
  const Index dim = 2 * target_.dimension();
  if (state_.size() != dim) throw ContractError("MetropolisChain: start has wrong dimension");
  if (!state_.allFinite()) throw ContractError("MetropolisChain: start must be finite");
  const double eps = target_.epsilon();
  if (options_.step_width <= 0.0) options_.step_width = std::sqrt(eps);
  if (options_.jump_variance <= 0.0) options_.jump_variance = eps;
  if (options_.jump_probability < 0.0 || options_.jump_probability > 1.0)
    throw ContractError("MetropolisChain: jump probability must lie in [0, 1]");
  if (options_.jump_centers.empty()) {
    const auto& packets = target_.state().packets();
    for (const auto& g : packets) options_.jump_centers.push_back(g.center.coordinates());
    if (packets.size() == 2)
      options_.jump_centers.push_back(
          0.5 * (packets[0].center.coordinates() + packets[1].center.coordinates()));
  }
  for (const auto& c : options_.jump_centers)
    if (c.size() != dim) throw ContractError("MetropolisChain: jump centre has wrong dimension");
  state_density_ = target_(state_);
}

double MetropolisChain::acceptance_rate() const {
  return proposed_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(proposed_);
}

double MetropolisChain::jump_density(const VectorXd& z) const {
  // Mixture of isotropic Gaussians; normalisation cancels in the Hastings ratio.
  double sum = 0.0;
  for (const auto& c : options_.jump_centers)
    sum += std::exp(-(z - c).squaredNorm() / (2.0 * options_.jump_variance));
  return sum;
}

bool MetropolisChain::step() {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index dim = state_.size();
  VectorXd proposal(dim);
  double ratio = 1.0;
  if (uniform(rng_) < options_.jump_probability) {
    std::uniform_int_distribution<std::size_t> pick(0, options_.jump_centers.size() - 1);
    const VectorXd& c = options_.jump_centers[pick(rng_)];
    const double width = std::sqrt(options_.jump_variance);
    for (Index k = 0; k < dim; ++k) proposal(k) = c(k) + width * normal(rng_);
    const double forward = jump_density(proposal);
    ratio = forward > 0.0 ? jump_density(state_) / forward : 0.0;
  } else {
    for (Index k = 0; k < dim; ++k) proposal(k) = state_(k) + options_.step_width * normal(rng_);
  }
  ++proposed_;
  const double proposed_density = target_(proposal);
  const double alpha = metropolis_acceptance(state_density_, proposed_density, ratio);
  if (uniform(rng_) < alpha && proposal.allFinite()) {
    state_ = std::move(proposal);
    state_density_ = proposed_density;
    ++accepted_;
    return true;
  }
  return false;
}

SampleEnsemble MetropolisChain::sample(Index n) {
  if (n < 1) throw ContractError("MetropolisChain::sample: N must be >= 1");
  if (!burned_in_) {
    for (std::size_t k = 0; k < options_.burn_in; ++k) step();
    burned_in_ = true;
  }
  SampleEnsemble ens;
  ens.nodes.resize(state_.size(), n);
  ens.provenance = Provenance::mcmc;
  ens.seed = options_.seed;
  ens.first_index = 0;
  for (Index j = 0; j < n; ++j) {
    step();
    ens.nodes.col(j) = state_;
  }
  return ens;
}

// --- superpositions ---------------------------------------------------------

SampleEnsemble sample_superposition(const GaussianSuperposition& psi0, Index n,
                                    const SuperpositionSampling& how) {
  if (n < 1) throw ContractError("sample_superposition: N must be >= 1");
  const Index dim = 2 * psi0.dimension();
  const double eps = psi0.epsilon();
  const auto& packets = psi0.packets();

  if (how.strategy == SamplingStrategy::mcmc) {
    MetropolisChain chain(PhaseSpaceDensity::husimi(psi0), packets.front().center.coordinates(),
                          how.metropolis);
    return chain.sample(n);
  }

  const SobolGenerator gen(dim, DirectionTable::joe_kuo(), how.dimension_offset);
  if (packets.size() == 1) return sample_gaussian_qmc(packets.front().center, eps, n, gen);

  const double envelope = psi0.cross_term_envelope();
  if (envelope >= cross_term_neglect_threshold) {
    std::ostringstream msg;
    msg << "qmc-split needs a negligible cross term, envelope bound is " << envelope
        << "; use mcmc";
    throw StrategyError(msg.str());
  }
  // With the cross term dropped the density is a two-component mixture.
  const double w0 = std::norm(packets[0].weight), w1 = std::norm(packets[1].weight);
  const Index n0 = std::clamp<Index>(static_cast<Index>(std::llround(n * w0 / (w0 + w1))), 1, n);
  const Index n1 = n - n0;
  SampleEnsemble ens = sample_gaussian_qmc(packets[0].center, eps, n0, gen);
  if (n1 > 0) {
    const SampleEnsemble second = sample_gaussian_qmc(packets[1].center, eps, n1, gen);
    ens.nodes.conservativeResize(Eigen::NoChange, n);
    ens.nodes.rightCols(n1) = second.nodes;
  }
  return ens;
}

}  // namespace husimi
