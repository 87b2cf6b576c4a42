#include "husimi/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace husimi {

namespace {

constexpr Index block_size = 256;

// Runs fn(b) for b in [0, blocks) on up to `threads` workers.
template <typename Fn>
void for_each_block(Index blocks, unsigned threads, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::clamp<Index>(static_cast<Index>(std::max(1u, threads)), 1, blocks));
  if (workers <= 1) {
    for (Index b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (Index b = next++; b < blocks; b = next++) {
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t integer_ratio(double a, double b, const char* what) {
  const double r = a / b;
  const double k = std::round(r);
  if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r))
    throw ContractError(std::string("EstimatorConfig: record_every must be a multiple of ") + what);
  return static_cast<std::size_t>(k);
}

struct BlockSums {
  MatrixXd sums;  // times x observables
  std::vector<std::size_t> failed;
  Index used = 0;
};

// Sums of a (or a_eps) along the leading flow for nodes [begin, end).
BlockSums leading_block(const SampleEnsemble& nodes, Index begin, Index end,
                        const std::vector<ObservableSymbol>& symbols, const HamiltonianModel& model,
                        ForceModel force, const EstimatorConfig& cfg, std::size_t stride,
                        std::size_t records) {
  const Index d = model.dimension();
  BlockSums out{MatrixXd::Zero(static_cast<Index>(records), static_cast<Index>(symbols.size())), {}, 0};
  Yoshida6 flow(model, force);
  VectorXd q(d), p(d), z(2 * d);
  MatrixXd local(out.sums.rows(), out.sums.cols());
  for (Index j = begin; j < end; ++j) {
    q = nodes.nodes.col(j).head(d);
    p = nodes.nodes.col(j).tail(d);
    bool ok = true;
    for (std::size_t r = 0; r < records && ok; ++r) {
      if (r > 0)
        for (std::size_t s = 0; s < stride; ++s) flow.step(q, p, cfg.h1);
      if (!q.allFinite() || !p.allFinite() || q.norm() > cfg.q_bound) {
        ok = false;
        break;
      }
      z << q, p;
      for (std::size_t k = 0; k < symbols.size(); ++k)
        local(static_cast<Index>(r), static_cast<Index>(k)) = symbols[k].value(z);
    }
    if (ok) {
      out.sums += local;
      ++out.used;
    } else {
      out.failed.push_back(static_cast<std::size_t>(j));
    }
  }
  return out;
}

BlockSums correction_block(const SampleEnsemble& nodes, Index begin, Index end,
                           const std::vector<ObservableSymbol>& symbols,
                           const HamiltonianModel& model, const EstimatorConfig& cfg,
                           std::size_t stride, std::size_t records) {
  BlockSums out{MatrixXd::Zero(static_cast<Index>(records), static_cast<Index>(symbols.size())), {}, 0};
  StrangWorkspace ws(model.dimension());
  MatrixXd local(out.sums.rows(), out.sums.cols());
  const std::size_t steps = (records - 1) * stride;
  for (Index j = begin; j < end; ++j) {
    const bool ok = propagate_correction_recorded(
        nodes.nodes.col(j), model, cfg.h2, steps, stride, cfg.force, cfg.q_bound, ws,
        [&](std::size_t step, const CorrectionState& s) {
          const auto r = static_cast<Index>(step / stride);
          for (std::size_t k = 0; k < symbols.size(); ++k)
            local(r, static_cast<Index>(k)) = correction_integrand(symbols[k], s);
        });
    if (ok) {
      out.sums += local;
      ++out.used;
    } else {
      out.failed.push_back(static_cast<std::size_t>(j));
    }
  }
  return out;
}

// Block-ordered reduction; independent of how blocks were scheduled.
BlockSums run_blocks(Index n, unsigned threads, const std::function<BlockSums(Index, Index)>& body) {
  const Index blocks = (n + block_size - 1) / block_size;
  std::vector<BlockSums> partial(static_cast<std::size_t>(blocks));
  for_each_block(blocks, threads, [&](Index b) {
    partial[static_cast<std::size_t>(b)] = body(b * block_size, std::min(n, (b + 1) * block_size));
  });
  BlockSums total = std::move(partial.front());
  for (std::size_t b = 1; b < partial.size(); ++b) {
    total.sums += partial[b].sums;
    total.used += partial[b].used;
    total.failed.insert(total.failed.end(), partial[b].failed.begin(), partial[b].failed.end());
  }
  return total;
}

SampleEnsemble husimi_nodes(const GaussianSuperposition& psi0, Index n, const EstimatorConfig& cfg,
                            Index dimension_offset, std::uint64_t seed_shift) {
  SuperpositionSampling how = cfg.sampling;
  how.dimension_offset = dimension_offset;
  how.metropolis.seed = cfg.seed + seed_shift;
  return sample_superposition(psi0, n, how);
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::husimi_corrected: return "husimi-corrected";
    case Method::husimi_naive: return "husimi-naive";
    case Method::wigner: return "wigner";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  if (text == "husimi-corrected" || text == "A") return Method::husimi_corrected;
  if (text == "husimi-naive" || text == "B") return Method::husimi_naive;
  if (text == "wigner" || text == "C") return Method::wigner;
  throw ContractError("unknown method '" + text + "'");
}

void EstimatorConfig::validate() const {
  if (n1 < 1) throw ContractError("EstimatorConfig: N1 must be >= 1");
  if (method == Method::husimi_corrected) {
    if (n2 < 1) throw ContractError("EstimatorConfig: husimi-corrected needs N2 >= 1");
    if (n2 > n1) throw ContractError("EstimatorConfig: N1 must be >= N2");
  }
  if (!(h1 > 0.0) || !(h2 > 0.0)) throw ContractError("EstimatorConfig: steps must be > 0");
  if (!(t_final >= 0.0) || !std::isfinite(t_final))
    throw ContractError("EstimatorConfig: t_final must be >= 0");
  if (!(record_every > 0.0)) throw ContractError("EstimatorConfig: record_every must be > 0");
  if (!(q_bound > 0.0)) throw ContractError("EstimatorConfig: q_bound must be > 0");
  record_stride(h1);
  if (method == Method::husimi_corrected) record_stride(h2);
}

std::size_t EstimatorConfig::record_stride(double h) const {
  return integer_ratio(record_every, h, h == h1 ? "h1" : "h2");
}

std::size_t EstimatorConfig::record_count() const { return step_count(t_final, record_every) + 1; }

Index ExpectationSeries::observable_index(const std::string& name) const {
  const auto it = std::find(observables.begin(), observables.end(), name);
  if (it == observables.end()) throw ContractError("series has no observable '" + name + "'");
  return static_cast<Index>(it - observables.begin());
}

double correction_integrand(const ObservableSymbol& a, const CorrectionState& state) {
  // D^2a is symmetric, so tr(Lambda D^2a) is the Frobenius product.
  return frobenius_dot(state.lambda, a.hessian(state.phi)) + state.gamma.dot(a.gradient(state.phi));
}

double evaluate_F(const ObservableSymbol& a, const CorrectionState& state, double epsilon) {
  if (state.phi.size() != 2 * a.dimension()) throw ContractError("evaluate_F: dimension mismatch");
  const double leading = a.value(state.phi) - 0.25 * epsilon * a.laplacian(state.phi);
  if (epsilon == 0.0) return leading;
  return leading - 0.5 * epsilon * correction_integrand(a, state);
}

ExpectationSeries estimate(const GaussianSuperposition& psi0,
                           const std::vector<ObservableSymbol>& observables,
                           const HamiltonianModel& model, const EstimatorConfig& cfg) {
  cfg.validate();
  if (observables.empty()) throw ContractError("estimate: empty observable list");
  const Index d = model.dimension();
  if (psi0.dimension() != d) throw ContractError("estimate: state and model dimensions differ");
  for (const auto& a : observables)
    if (a.dimension() != d) throw ContractError("estimate: observable dimension mismatch");

  const std::size_t records = cfg.record_count();
  ExpectationSeries series;
  series.method = cfg.method;
  series.n1 = cfg.n1;
  series.n2 = cfg.method == Method::husimi_corrected ? cfg.n2 : 0;
  series.seed = cfg.seed;
  for (std::size_t r = 0; r < records; ++r)
    series.times.push_back(static_cast<double>(r) * cfg.record_every);
  for (const auto& a : observables) series.observables.push_back(a.name());

  const bool corrected = cfg.method == Method::husimi_corrected;
  const double eps = model.epsilon();

  SampleEnsemble nodes;
  if (cfg.method == Method::wigner) {
    if (psi0.packets().size() != 1)
      throw StrategyError("Wigner sampling is limited to a single Gaussian packet");
    const SobolGenerator gen(2 * d);
    nodes = sample_gaussian_qmc(psi0.packets().front().center, 0.5 * psi0.epsilon(), cfg.n1, gen);
  } else {
    nodes = husimi_nodes(psi0, cfg.n1, cfg, 0, 0);
  }

  std::vector<ObservableSymbol> leading_symbols;
  for (const auto& a : observables)
    leading_symbols.push_back(corrected ? correct_symbol(a, eps) : a);
  const ForceModel force = corrected ? cfg.force : ForceModel::h;
  const std::size_t stride1 = cfg.record_stride(cfg.h1);

  BlockSums lead = run_blocks(cfg.n1, cfg.threads, [&](Index b, Index e) {
    return leading_block(nodes, b, e, leading_symbols, model, force, cfg, stride1, records);
  });
  std::vector<std::size_t> failed = lead.failed;
  MatrixXd values = lead.used > 0 ? MatrixXd(lead.sums / static_cast<double>(lead.used))
                                  : MatrixXd::Constant(lead.sums.rows(), lead.sums.cols(), NAN);

  if (corrected && eps != 0.0) {
    const SampleEnsemble cnodes = husimi_nodes(psi0, cfg.n2, cfg, 2 * d, 1);
    const std::size_t stride2 = cfg.record_stride(cfg.h2);
    BlockSums corr = run_blocks(cfg.n2, cfg.threads, [&](Index b, Index e) {
      return correction_block(cnodes, b, e, observables, model, cfg, stride2, records);
    });
    for (std::size_t j : corr.failed) failed.push_back(static_cast<std::size_t>(cfg.n1) + j);
    if (corr.used > 0) values -= 0.5 * eps * corr.sums / static_cast<double>(corr.used);
  }
  series.values = std::move(values);

  if (!failed.empty()) {
    throw PartialEstimateError(std::to_string(failed.size()) +
                                   " trajectories left the admissible region (indices >= N1 "
                                   "refer to correction nodes, offset by N1)",
                               std::move(failed), std::move(series));
  }
  return series;
}

double SeriesDifference::sup(const std::string& name) const {
  const auto it = std::find(observables.begin(), observables.end(), name);
  if (it == observables.end()) throw ContractError("difference has no observable '" + name + "'");
  return sup_norm(it - observables.begin());
}

SeriesDifference compare_methods(const ExpectationSeries& a, const ExpectationSeries& b) {
  if (a.observables != b.observables)
    throw ContractError("compare_methods: observable lists differ");
  if (a.times.size() != b.times.size())
    throw ContractError("compare_methods: time grids differ");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
      throw ContractError("compare_methods: time grids differ");
  SeriesDifference out;
  out.times = a.times;
  out.observables = a.observables;
  out.difference = a.values - b.values;
  out.sup_norm = out.difference.cwiseAbs().colwise().maxCoeff().transpose();
  return out;
}

}  // namespace husimi
