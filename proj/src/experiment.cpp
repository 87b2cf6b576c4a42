#include "husimi/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "husimi/potentials.hpp"

namespace husimi {

namespace pt = boost::property_tree;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string epsilon_label(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

VectorXd phase_point(std::initializer_list<double> values) {
  VectorXd z(static_cast<Index>(values.size()));
  Index k = 0;
  for (double v : values) z(k++) = v;
  return z;
}

// ---------------------------------------------------------------------------
// Presets

std::vector<EpsilonRun> torsional_runs(bool superposition, bool desk) {
  struct Row {
    double eps;
    Index n1_d, n1_e, n2_d, n2_e;
    double h1, h2, L;
    Index full_points;
    double full_steps;
  };
  // Sample counts and steps per epsilon; reference boxes and step counts
  // over [0, 20] for the full-scale runs.
  const std::vector<Row> table = {
      {1e-1, 10000, 100000, 1000, 10000, 1e-2, 1e-3, 3.0, 2048, 5000},
      {5e-2, 30000, 200000, 3000, 20000, 1e-2, 1e-3, 3.0, 2048, 5000},
      {1e-2, 100000, 100000, 10000, 10000, 1e-3, 1e-3, 2.0, 2048, 7500},
      {5e-3, 300000, 300000, 20000, 20000, 1e-3, 1e-3, 2.0, 2048, 10000},
      {1e-3, 1000000, 1000000, 50000, 50000, 1e-3, 2e-4, 2.0, 2048, 10000},
  };
  std::vector<EpsilonRun> runs;
  for (const Row& r : table) {
    if (desk && r.eps < 1e-2) continue;
    EpsilonRun run;
    run.epsilon = r.eps;
    run.n1 = superposition ? r.n1_e : r.n1_d;
    run.n2 = superposition ? r.n2_e : r.n2_d;
    run.h1 = r.h1;
    run.h2 = r.h2;
    run.grid_half_width = r.L;
    if (desk) {
      // The sixth-order flow is converged far below the target errors at 1e-2.
      run.h1 = 1e-2;
      run.grid_points = 512;
      run.grid_dt = 1e-3;
      if (superposition) {
        run.n1 = 20000;
        run.n2 = 2000;
      }
    } else {
      run.grid_points = r.full_points;
      run.grid_dt = 20.0 / r.full_steps;
    }
    runs.push_back(run);
  }
  return runs;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"D", "D-desk", "E", "E-desk", "henon-heiles", "henon-heiles-desk", "harmonic-sanity"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "D" || name == "D-desk" || name == "E" || name == "E-desk") {
    const bool desk = name.ends_with("-desk");
    const bool superposition = name[0] == 'E';
    c.potential = "torsional";
    c.dimension = 2;
    if (superposition)
      c.centers = {phase_point({0.5, -0.6, 0.0, 0.0}), phase_point({0.0, 1.0, 0.0, 0.0})};
    else
      c.centers = {phase_point({1.0, 0.0, 0.0, 0.0})};
    c.runs = torsional_runs(superposition, desk);
    c.t_final = desk ? 5.0 : 20.0;
    // 20/7500 does not divide 0.1.
    c.record_every = desk ? 0.1 : 0.2;
    c.reference = ReferenceKind::grid;
    c.reference_check = desk;
    c.mcmc_repeats = desk ? 1 : 10;
    c.output_dir = "out/" + name;
    return c;
  }
  if (name == "henon-heiles" || name == "henon-heiles-desk") {
    c.potential = "henon-heiles";
    c.dimension = 6;
    VectorXd z = VectorXd::Zero(12);
    z.head(6).setConstant(2.0);
    c.centers = {z};
    EpsilonRun run;
    run.epsilon = 1e-2;
    run.n1 = 1 << 14;
    run.n2 = 1 << 10;
    run.h1 = 1e-3;
    run.h2 = 1e-3;
    c.runs = {run};
    c.methods = {Method::husimi_corrected, Method::husimi_naive, Method::wigner};
    c.observables = {"kinetic", "potential", "total"};
    c.t_final = name == "henon-heiles" ? 10.0 : 2.0;
    c.reference = ReferenceKind::none;
    c.output_dir = "out/" + name;
    return c;
  }
  if (name == "harmonic-sanity") {
    c.potential = "harmonic";
    c.dimension = 1;
    c.centers = {phase_point({1.0, 0.5})};
    EpsilonRun run;
    run.epsilon = 0.1;
    run.n1 = 1 << 15;
    run.n2 = 1 << 10;
    run.h1 = 1e-2;
    run.h2 = 1e-2;
    c.runs = {run};
    c.observables = {"q1", "p1", "potential", "kinetic", "total"};
    c.t_final = 5.0;
    c.reference = ReferenceKind::exact;
    c.output_dir = "out/" + name;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'", "experiment.preset");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what, const std::string& field) {
    throw ConfigError(what, field);
  };
  if (dimension < 1) fail("dimension must be >= 1", "experiment.dimension");
  try {
    make_potential(potential, dimension, sigma);
  } catch (const std::exception& e) {
    fail(e.what(), "experiment.potential");
  }
  if (centers.empty() || centers.size() > 2) fail("one or two centers required", "experiment.centers");
  for (const auto& z : centers)
    if (z.size() != 2 * dimension) fail("each center needs 2*dimension entries", "experiment.centers");
  if (runs.empty()) fail("no epsilon runs configured", "epsilon");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const std::string sec = "epsilon." + std::to_string(i + 1);
    if (!(r.epsilon > 0.0)) fail("epsilon must be > 0", sec + ".epsilon");
    if (r.n1 < 1) fail("n1 must be >= 1", sec + ".n1");
    if (r.n2 < 1 || r.n2 > r.n1) fail("n2 must satisfy 1 <= n2 <= n1", sec + ".n2");
    if (!(r.h1 > 0.0)) fail("h1 must be > 0", sec + ".h1");
    if (!(r.h2 > 0.0)) fail("h2 must be > 0", sec + ".h2");
    if (reference == ReferenceKind::grid) {
      if (!(r.grid_half_width > 0.0)) fail("grid_half_width must be > 0", sec + ".grid_half_width");
      if (r.grid_points < 2 || (r.grid_points & (r.grid_points - 1)) != 0)
        fail("grid_points must be a power of two", sec + ".grid_points");
      if (!(r.grid_dt > 0.0)) fail("grid_dt must be > 0", sec + ".grid_dt");
    }
    for (double h : {r.h1, r.h2, reference == ReferenceKind::grid ? r.grid_dt : r.h1}) {
      const double k = record_every / h;
      if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k) || std::round(k) < 1.0)
        fail("record_every must be a multiple of every step size", sec);
    }
  }
  if (methods.empty()) fail("empty method list", "experiment.methods");
  if (observables.empty()) fail("empty observable list", "experiment.observables");
  try {
    HamiltonianModel model(make_potential(potential, dimension, sigma), 0.0);
    select_observables(model, observables);
  } catch (const std::exception& e) {
    fail(e.what(), "experiment.observables");
  }
  if (!(t_final >= 0.0)) fail("t_final must be >= 0", "experiment.t_final");
  if (!(record_every > 0.0)) fail("record_every must be > 0", "experiment.record_every");
  if (mcmc_repeats < 1) fail("mcmc_repeats must be >= 1", "experiment.mcmc_repeats");
  if (!(q_bound > 0.0)) fail("q_bound must be > 0", "experiment.q_bound");
  if (reference == ReferenceKind::grid && dimension > 2)
    fail("grid references support d <= 2", "experiment.reference");
  if (reference == ReferenceKind::exact && (potential != "harmonic" || centers.size() != 1))
    fail("exact references need the harmonic potential and one Gaussian", "experiment.reference");
  for (Method m : methods)
    if (m == Method::wigner && centers.size() != 1)
      fail("the wigner method needs a single Gaussian", "experiment.methods");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  if (centers.size() != o.centers.size()) return false;
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (centers[i] != o.centers[i]) return false;
  return name == o.name && potential == o.potential && dimension == o.dimension &&
         sigma == o.sigma && runs == o.runs && methods == o.methods &&
         observables == o.observables && t_final == o.t_final && record_every == o.record_every &&
         seed == o.seed && output_dir == o.output_dir && threads == o.threads &&
         sampling == o.sampling && mcmc_repeats == o.mcmc_repeats && reference == o.reference &&
         reference_check == o.reference_check && q_bound == o.q_bound && force == o.force;
}

// ---------------------------------------------------------------------------
// INI text

namespace {

// property_tree drops source positions; this maps "section.key" to its line.
std::map<std::string, std::size_t> key_lines(const std::string& text) {
  std::map<std::string, std::size_t> lines;
  std::istringstream in(text);
  std::string line, section;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      lines.emplace(section, n);
    } else if (const auto eq = t.find('='); eq != std::string::npos) {
      lines.emplace(section + "." + trim(t.substr(0, eq)), n);
    }
  }
  return lines;
}

std::string to_text(SamplingChoice s) {
  switch (s) {
    case SamplingChoice::automatic: return "auto";
    case SamplingChoice::qmc_split: return "qmc-split";
    case SamplingChoice::mcmc: return "mcmc";
  }
  return "auto";
}

std::string to_text(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::none: return "none";
    case ReferenceKind::grid: return "grid";
    case ReferenceKind::exact: return "exact";
  }
  return "none";
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::map<std::string, std::size_t> lines)
      : tree_(tree), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& what, const std::string& field) const {
    const auto it = lines_.find(field);
    const std::size_t line = it == lines_.end() ? 0 : it->second;
    std::string msg = field + ": " + what;
    if (line) msg = "line " + std::to_string(line) + ": " + msg;
    throw ConfigError(msg, field, line);
  }

  std::optional<std::string> text(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    // Section names contain '.', so paths use another separator.
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '/'));
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <typename T>
  void read(const std::string& section, const std::string& key, T& out) {
    const auto v = text(section, key);
    if (!v) return;
    std::istringstream in(*v);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) fail("cannot parse '" + *v + "'", section + "." + key);
    out = value;
  }

  void read_bool(const std::string& section, const std::string& key, bool& out) {
    const auto v = text(section, key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") out = true;
    else if (*v == "false" || *v == "0" || *v == "no") out = false;
    else fail("expected true or false, got '" + *v + "'", section + "." + key);
  }

  void check_unused() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) fail("key outside a section", section);
      for (const auto& [key, value] : body) {
        (void)value;
        if (!used_.count(section + "." + key)) fail("unknown key", section + "." + key);
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  pt::ptree tree;
  try {
    std::istringstream stream(text);
    pt::read_ini(stream, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message(), "", e.line());
  }
  Reader r(tree, key_lines(text));
  const std::string X = "experiment";
  for (const auto& [section, body] : tree) {
    (void)body;
    if (section != X && !section.starts_with("epsilon."))
      r.fail("unknown section", section);
  }

  ExperimentConfig c;
  if (const auto name = r.text(X, "preset")) {
    try {
      c = preset(*name);
    } catch (const ConfigError& e) {
      r.fail(e.what(), X + ".preset");
    }
  }
  r.read(X, "name", c.name);
  r.read(X, "potential", c.potential);
  r.read(X, "dimension", c.dimension);
  r.read(X, "sigma", c.sigma);
  if (const auto v = r.text(X, "centers")) {
    c.centers.clear();
    for (const auto& item : split(*v, '|')) {
      std::istringstream nums(item);
      std::vector<double> values;
      for (double x; nums >> x;) values.push_back(x);
      if (!nums.eof()) r.fail("bad number in '" + item + "'", X + ".centers");
      VectorXd z(static_cast<Index>(values.size()));
      for (std::size_t k = 0; k < values.size(); ++k) z(static_cast<Index>(k)) = values[k];
      c.centers.push_back(z);
    }
  }
  if (const auto v = r.text(X, "methods")) {
    c.methods.clear();
    for (const auto& m : split(*v, ',')) {
      try {
        c.methods.push_back(parse_method(m));
      } catch (const ContractError& e) {
        r.fail(e.what(), X + ".methods");
      }
    }
  }
  if (const auto v = r.text(X, "observables")) c.observables = split(*v, ',');
  r.read(X, "t_final", c.t_final);
  r.read(X, "record_every", c.record_every);
  r.read(X, "seed", c.seed);
  r.read(X, "output", c.output_dir);
  r.read(X, "threads", c.threads);
  if (const auto v = r.text(X, "sampling")) {
    if (*v == "auto") c.sampling = SamplingChoice::automatic;
    else if (*v == "qmc-split") c.sampling = SamplingChoice::qmc_split;
    else if (*v == "mcmc") c.sampling = SamplingChoice::mcmc;
    else r.fail("expected auto, qmc-split or mcmc", X + ".sampling");
  }
  r.read(X, "mcmc_repeats", c.mcmc_repeats);
  if (const auto v = r.text(X, "reference")) {
    if (*v == "none") c.reference = ReferenceKind::none;
    else if (*v == "grid") c.reference = ReferenceKind::grid;
    else if (*v == "exact") c.reference = ReferenceKind::exact;
    else r.fail("expected none, grid or exact", X + ".reference");
  }
  r.read_bool(X, "reference_check", c.reference_check);
  r.read(X, "q_bound", c.q_bound);
  if (const auto v = r.text(X, "force")) {
    if (*v == "h_eps") c.force = ForceModel::h_eps;
    else if (*v == "h") c.force = ForceModel::h;
    else r.fail("expected h_eps or h", X + ".force");
  }

  // Explicit [epsilon.N] sections replace the preset's runs.
  std::vector<std::pair<int, std::string>> sections;
  for (const auto& [section, body] : tree) {
    (void)body;
    if (!section.starts_with("epsilon.")) continue;
    try {
      sections.emplace_back(std::stoi(section.substr(8)), section);
    } catch (const std::exception&) {
      r.fail("section index must be an integer", section);
    }
  }
  std::sort(sections.begin(), sections.end());
  if (!sections.empty()) {
    c.runs.clear();
    for (const auto& [index, s] : sections) {
      (void)index;
      EpsilonRun run;
      if (!r.text(s, "epsilon")) r.fail("missing epsilon", s + ".epsilon");
      r.read(s, "epsilon", run.epsilon);
      r.read(s, "n1", run.n1);
      r.read(s, "n2", run.n2);
      r.read(s, "h1", run.h1);
      r.read(s, "h2", run.h2);
      r.read(s, "grid_half_width", run.grid_half_width);
      r.read(s, "grid_points", run.grid_points);
      r.read(s, "grid_dt", run.grid_dt);
      c.runs.push_back(run);
    }
  }
  // `epsilons` keeps a subset of the configured runs.
  if (const auto v = r.text(X, "epsilons")) {
    std::vector<EpsilonRun> kept;
    for (const auto& item : split(*v, ',')) {
      double eps = 0.0;
      try {
        eps = std::stod(item);
      } catch (const std::exception&) {
        r.fail("bad number '" + item + "'", X + ".epsilons");
      }
      const auto it = std::find_if(c.runs.begin(), c.runs.end(), [&](const EpsilonRun& run) {
        return std::abs(run.epsilon - eps) <= 1e-12 * eps;
      });
      if (it == c.runs.end()) r.fail("no run configured for epsilon " + item, X + ".epsilons");
      kept.push_back(*it);
    }
    c.runs = kept;
  }
  r.check_unused();

  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what(), e.field());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto join = [](const auto& items, auto fmt) {
    std::string s;
    for (const auto& item : items) s += (s.empty() ? "" : ", ") + fmt(item);
    return s;
  };
  out << "[experiment]\n";
  out << "name = " << c.name << "\n";
  out << "potential = " << c.potential << "\n";
  out << "dimension = " << c.dimension << "\n";
  out << "sigma = " << format_number(c.sigma) << "\n";
  std::string centers;
  for (const auto& z : c.centers) {
    if (!centers.empty()) centers += " | ";
    for (Index k = 0; k < z.size(); ++k) centers += (k ? " " : "") + format_number(z(k));
  }
  out << "centers = " << centers << "\n";
  out << "methods = " << join(c.methods, [](Method m) { return to_string(m); }) << "\n";
  out << "observables = " << join(c.observables, [](const std::string& s) { return s; }) << "\n";
  out << "t_final = " << format_number(c.t_final) << "\n";
  out << "record_every = " << format_number(c.record_every) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "output = " << c.output_dir << "\n";
  out << "threads = " << c.threads << "\n";
  out << "sampling = " << to_text(c.sampling) << "\n";
  out << "mcmc_repeats = " << c.mcmc_repeats << "\n";
  out << "reference = " << to_text(c.reference) << "\n";
  out << "reference_check = " << (c.reference_check ? "true" : "false") << "\n";
  out << "q_bound = " << format_number(c.q_bound) << "\n";
  out << "force = " << (c.force == ForceModel::h_eps ? "h_eps" : "h") << "\n";
  for (std::size_t i = 0; i < c.runs.size(); ++i) {
    const auto& r = c.runs[i];
    out << "\n[epsilon." << i + 1 << "]\n";
    out << "epsilon = " << format_number(r.epsilon) << "\n";
    out << "n1 = " << r.n1 << "\n";
    out << "n2 = " << r.n2 << "\n";
    out << "h1 = " << format_number(r.h1) << "\n";
    out << "h2 = " << format_number(r.h2) << "\n";
    out << "grid_half_width = " << format_number(r.grid_half_width) << "\n";
    out << "grid_points = " << r.grid_points << "\n";
    out << "grid_dt = " << format_number(r.grid_dt) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Reference values

namespace {

GaussianSuperposition initial_state(const ExperimentConfig& cfg, double eps) {
  std::vector<GaussianWavePacket> packets;
  for (const auto& z : cfg.centers) packets.emplace_back(PhasePoint::from_coordinates(z), eps);
  return GaussianSuperposition(packets);
}

std::vector<GridExpectations> grid_run(const ExperimentConfig& cfg, const EpsilonRun& run,
                                       double dt, std::size_t records, const Potential& V) {
  const GaussianSuperposition psi0 = initial_state(cfg, run.epsilon);
  const HamiltonianModel model(make_potential(cfg.potential, cfg.dimension, cfg.sigma), run.epsilon);
  GridState state = GridState::from_superposition(
      GridSpec::square(cfg.dimension, run.grid_half_width, run.grid_points), psi0);
  const SplitStepSolver solver(state.grid, model, dt);
  const auto stride = static_cast<std::size_t>(std::llround(cfg.record_every / dt));
  std::vector<GridExpectations> out;
  for (std::size_t r = 0; r < records; ++r) {
    if (r > 0) solver.advance(state, stride);
    out.push_back(grid_expectations(state, V));
  }
  return out;
}

}  // namespace

ReferenceSeries run_reference(const ExperimentConfig& cfg, const EpsilonRun& run) {
  if (cfg.reference == ReferenceKind::none)
    throw ContractError("run_reference: no reference configured");
  const std::size_t records = step_count(cfg.t_final, cfg.record_every) + 1;
  ReferenceSeries ref;
  ref.epsilon = run.epsilon;
  ref.observables = cfg.observables;
  ref.values.resize(static_cast<Index>(records), static_cast<Index>(cfg.observables.size()));
  for (std::size_t r = 0; r < records; ++r) ref.times.push_back(static_cast<double>(r) * cfg.record_every);

  if (cfg.reference == ReferenceKind::exact) {
    // Coherent states stay coherent under the harmonic flow.
    const Index d = cfg.dimension;
    const VectorXd& z0 = cfg.centers.front();
    const double spread = 0.25 * static_cast<double>(d) * run.epsilon;
    for (std::size_t r = 0; r < records; ++r) {
      const double t = ref.times[r];
      const VectorXd q = z0.head(d) * std::cos(t) + z0.tail(d) * std::sin(t);
      const VectorXd p = z0.tail(d) * std::cos(t) - z0.head(d) * std::sin(t);
      GridExpectations e;
      e.position = q;
      e.momentum = p;
      e.potential = 0.5 * q.squaredNorm() + spread;
      e.kinetic = 0.5 * p.squaredNorm() + spread;
      e.total = e.potential + e.kinetic;
      for (std::size_t k = 0; k < cfg.observables.size(); ++k)
        ref.values(static_cast<Index>(r), static_cast<Index>(k)) = e.value(cfg.observables[k]);
    }
    return ref;
  }

  const PotentialPtr V = make_potential(cfg.potential, cfg.dimension, cfg.sigma);
  const auto fine = grid_run(cfg, run, cfg.reference_check ? 0.5 * run.grid_dt : run.grid_dt,
                             records, *V);
  for (std::size_t r = 0; r < records; ++r) {
    ref.max_aliasing = std::max(ref.max_aliasing, fine[r].aliasing_mass);
    for (std::size_t k = 0; k < cfg.observables.size(); ++k)
      ref.values(static_cast<Index>(r), static_cast<Index>(k)) = fine[r].value(cfg.observables[k]);
  }
  ref.resolved = ref.max_aliasing < aliasing_tolerance;
  if (cfg.reference_check) {
    const auto coarse = grid_run(cfg, run, run.grid_dt, records, *V);
    double diff = 0.0;
    for (std::size_t r = 0; r < records; ++r)
      for (std::size_t k = 0; k < cfg.observables.size(); ++k)
        diff = std::max(diff, std::abs(coarse[r].value(cfg.observables[k]) -
                                       ref.values(static_cast<Index>(r), static_cast<Index>(k))));
    ref.self_convergence = diff;
  }
  return ref;
}

std::vector<std::string> error_groups(const ExperimentConfig& cfg) {
  std::vector<std::string> groups;
  auto has_prefix = [&](char c) {
    return std::any_of(cfg.observables.begin(), cfg.observables.end(),
                       [&](const std::string& o) { return o.size() > 1 && o[0] == c && std::isdigit(o[1]); });
  };
  if (has_prefix('q')) groups.push_back("position");
  if (has_prefix('p')) groups.push_back("momentum");
  for (const char* e : {"potential", "kinetic", "total"})
    if (std::find(cfg.observables.begin(), cfg.observables.end(), e) != cfg.observables.end())
      groups.push_back(e);
  return groups;
}

double time_averaged_error(const ExpectationSeries& est, const ReferenceSeries& ref,
                           const std::string& group) {
  if (est.times.size() != ref.times.size() || est.observables != ref.observables)
    throw ContractError("time_averaged_error: series and reference grids differ");
  std::vector<Index> columns;
  if (group == "position" || group == "momentum") {
    const char prefix = group[0] == 'p' && group[1] == 'o' ? 'q' : 'p';
    for (std::size_t k = 0; k < est.observables.size(); ++k) {
      const auto& o = est.observables[k];
      if (o.size() > 1 && o[0] == prefix && std::isdigit(o[1])) columns.push_back(static_cast<Index>(k));
    }
  } else {
    columns.push_back(est.observable_index(group));
  }
  if (columns.empty()) throw ContractError("time_averaged_error: no columns for group " + group);
  double sum = 0.0;
  for (std::size_t r = 0; r < est.times.size(); ++r) {
    double sq = 0.0;
    for (Index c : columns) {
      const double e = est.values(static_cast<Index>(r), c) - ref.values(static_cast<Index>(r), c);
      sq += e * e;
    }
    sum += std::sqrt(sq);
  }
  return sum / static_cast<double>(est.times.size());
}

ConvergenceTable convergence_table(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 3) throw ContractError("convergence_table: at least three points required");
  ConvergenceTable t;
  t.rows = rows;
  Eigen::MatrixXd A(static_cast<Index>(rows.size()), 2);
  VectorXd b(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].epsilon > 0.0) || !(rows[i].error > 0.0))
      throw ContractError("convergence_table: epsilon and error must be positive");
    A(static_cast<Index>(i), 0) = std::log(rows[i].epsilon);
    A(static_cast<Index>(i), 1) = 1.0;
    b(static_cast<Index>(i)) = std::log(rows[i].error);
  }
  const VectorXd x = A.colPivHouseholderQr().solve(b);
  t.slope = x(0);
  t.intercept = x(1);
  return t;
}

// ---------------------------------------------------------------------------
// Driver

namespace {

void write_file(const std::filesystem::path& path, const std::string& text,
                std::vector<std::string>& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << text;
  files.push_back(path.string());
}

std::string series_csv(const ExpectationSeries& s, const ReferenceSeries* ref) {
  std::ostringstream out;
  out << "time,observable,method,value" << (ref ? ",reference,error" : "") << "\n";
  for (std::size_t r = 0; r < s.times.size(); ++r)
    for (std::size_t k = 0; k < s.observables.size(); ++k) {
      const double v = s.values(static_cast<Index>(r), static_cast<Index>(k));
      out << format_number(s.times[r]) << "," << s.observables[k] << "," << to_string(s.method)
          << "," << format_number(v);
      if (ref) {
        const double rv = ref->values(static_cast<Index>(r), static_cast<Index>(k));
        out << "," << format_number(rv) << "," << format_number(v - rv);
      }
      out << "\n";
    }
  return out.str();
}

std::string reference_csv(const ReferenceSeries& ref) {
  std::ostringstream out;
  out << "time,observable,value\n";
  for (std::size_t r = 0; r < ref.times.size(); ++r)
    for (std::size_t k = 0; k < ref.observables.size(); ++k)
      out << format_number(ref.times[r]) << "," << ref.observables[k] << ","
          << format_number(ref.values(static_cast<Index>(r), static_cast<Index>(k))) << "\n";
  return out.str();
}

ExpectationSeries estimate_run(const ExperimentConfig& cfg, const EpsilonRun& run, Method method,
                               const GaussianSuperposition& psi0,
                               const std::vector<ObservableSymbol>& symbols,
                               const HamiltonianModel& model) {
  EstimatorConfig ec;
  ec.method = method;
  ec.n1 = run.n1;
  ec.n2 = run.n2;
  ec.h1 = run.h1;
  ec.h2 = run.h2;
  ec.t_final = cfg.t_final;
  ec.record_every = cfg.record_every;
  ec.seed = cfg.seed;
  ec.threads = cfg.threads;
  ec.q_bound = cfg.q_bound;
  ec.force = cfg.force;
  bool mcmc = cfg.sampling == SamplingChoice::mcmc;
  if (cfg.sampling == SamplingChoice::automatic)
    mcmc = psi0.packets().size() > 1 && psi0.cross_term_envelope() >= cross_term_neglect_threshold;
  ec.sampling.strategy = mcmc ? SamplingStrategy::mcmc : SamplingStrategy::qmc_split;
  if (!mcmc || method == Method::wigner) return estimate(psi0, symbols, model, ec);

  ExpectationSeries mean;
  for (int k = 0; k < cfg.mcmc_repeats; ++k) {
    ec.seed = cfg.seed + 1000003ULL * static_cast<std::uint64_t>(k);
    ExpectationSeries s = estimate(psi0, symbols, model, ec);
    if (k == 0) mean = s;
    else mean.values += s.values;
  }
  mean.values /= static_cast<double>(cfg.mcmc_repeats);
  mean.seed = cfg.seed;
  return mean;
}

}  // namespace

namespace {

ExperimentResult run_driver(const ExperimentConfig& cfg, bool estimates) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  ExperimentResult result;
  std::ostringstream timings, ref_summary;
  ref_summary << "epsilon,self_convergence,max_aliasing,resolved\n";
  const auto groups = error_groups(cfg);
  std::map<Method, std::vector<ConvergenceRow>> rows;

  for (const EpsilonRun& run : cfg.runs) {
    const std::string label = epsilon_label(run.epsilon);
    const HamiltonianModel model(make_potential(cfg.potential, cfg.dimension, cfg.sigma), run.epsilon);
    const GaussianSuperposition psi0 = initial_state(cfg, run.epsilon);
    const auto symbols = select_observables(model, cfg.observables);

    std::optional<ReferenceSeries> ref;
    if (cfg.reference != ReferenceKind::none) {
      const auto t0 = std::chrono::steady_clock::now();
      ref = run_reference(cfg, run);
      timings << "reference eps=" << label << " seconds="
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "\n";
      write_file(dir / ("reference_eps" + label + ".csv"), reference_csv(*ref), result.files);
      ref_summary << format_number(run.epsilon) << ","
                  << (std::isnan(ref->self_convergence) ? std::string("nan")
                                                        : format_number(ref->self_convergence))
                  << "," << format_number(ref->max_aliasing) << ","
                  << (ref->resolved ? "true" : "false") << "\n";
      result.references.push_back(*ref);
    }

    if (!estimates) continue;
    std::ostringstream summary;
    summary << "epsilon,observable,method,time_avg_error\n";
    for (Method method : cfg.methods) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::string file = "series_eps" + label + "_" + to_string(method) + ".csv";
      ExpectationSeries series;
      try {
        series = estimate_run(cfg, run, method, psi0, symbols, model);
      } catch (const PartialEstimateError& e) {
        write_file(dir / file, series_csv(e.partial(), ref ? &*ref : nullptr), result.files);
        throw;
      }
      RunRecord rec{run.epsilon, series, std::nullopt, {}, 0.0};
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timings << to_string(method) << " eps=" << label << " seconds=" << rec.seconds << "\n";
      write_file(dir / file, series_csv(series, ref ? &*ref : nullptr), result.files);
      if (ref && !groups.empty()) {
        double avg = 0.0;
        for (const auto& g : groups) {
          const double e = time_averaged_error(series, *ref, g);
          rec.group_errors.emplace_back(g, e);
          avg += e / static_cast<double>(groups.size());
          summary << format_number(run.epsilon) << "," << g << "," << to_string(method) << ","
                  << format_number(e) << "\n";
        }
        rec.average_error = avg;
        summary << format_number(run.epsilon) << ",average," << to_string(method) << ","
                << format_number(avg) << "\n";
        rows[method].push_back({run.epsilon, avg});
      }
      result.runs.push_back(std::move(rec));
    }
    if (ref) write_file(dir / ("error_summary_eps" + label + ".csv"), summary.str(), result.files);
  }

  if (cfg.reference == ReferenceKind::grid)
    write_file(dir / "reference_summary.csv", ref_summary.str(), result.files);
  std::ostringstream conv;
  conv << "method,epsilon,time_avg_error,slope\n";
  bool any = false;
  for (Method method : cfg.methods) {
    const auto it = rows.find(method);
    if (it == rows.end() || it->second.size() < 3) continue;
    const ConvergenceTable table = convergence_table(it->second);
    for (const auto& row : table.rows)
      conv << to_string(method) << "," << format_number(row.epsilon) << ","
           << format_number(row.error) << "," << format_number(table.slope) << "\n";
    result.convergence.emplace_back(method, table);
    any = true;
  }
  if (any) write_file(dir / "convergence.csv", conv.str(), result.files);
  write_file(dir / "timings.txt", timings.str(), result.files);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) { return run_driver(cfg, true); }

ExperimentResult run_references(const ExperimentConfig& cfg) {
  if (cfg.reference == ReferenceKind::none)
    throw ConfigError("no reference configured", "experiment.reference");
  return run_driver(cfg, false);
}

std::vector<std::pair<std::string, ConvergenceTable>> converge_files(
    const std::vector<std::string>& inputs, const std::string& output) {
  std::map<std::string, std::vector<ConvergenceRow>> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot read '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "epsilon,observable,method,time_avg_error")
      throw ContractError("'" + path + "' is not an error summary");
    while (std::getline(in, line)) {
      const auto cells = split(line, ',');
      if (cells.size() != 4) continue;
      if (cells[1] == "average") rows[cells[2]].push_back({std::stod(cells[0]), std::stod(cells[3])});
    }
  }
  if (rows.empty()) throw ContractError("converge: no error summaries found");
  std::vector<std::pair<std::string, ConvergenceTable>> tables;
  std::ostringstream out;
  out << "method,epsilon,time_avg_error,slope\n";
  for (auto& [method, r] : rows) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.epsilon > b.epsilon; });
    const ConvergenceTable t = convergence_table(r);
    for (const auto& row : t.rows)
      out << method << "," << format_number(row.epsilon) << "," << format_number(row.error) << ","
          << format_number(t.slope) << "\n";
    tables.emplace_back(method, t);
  }
  std::ofstream file(output, std::ios::binary);
  if (!file) throw ContractError("cannot write '" + output + "'");
  file << out.str();
  return tables;
}

}  // namespace husimi
