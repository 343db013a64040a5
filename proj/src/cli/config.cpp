#include "qmb/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qmb::cli {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ConfigError("field '" + field + "': " + msg);
}

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(section, "expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(section + "." + k, "unknown field");
}

double number(const json& j, const std::string& section, const std::string& key, std::optional<double> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    fail(section + "." + key, "missing");
  }
  if (!j[key].is_number()) fail(section + "." + key, "expected a number");
  return j[key].get<double>();
}

int integer(const json& j, const std::string& section, const std::string& key, std::optional<int> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    fail(section + "." + key, "missing");
  }
  if (!j[key].is_number_integer()) fail(section + "." + key, "expected an integer");
  return j[key].get<int>();
}

cplx complex_value(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(field, "expected a number or [re, im]");
}

Unraveling unraveling(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected \"heterodyne\" or \"homodyne\"");
  std::string s = j.get<std::string>();
  if (s == "heterodyne") return Unraveling::Heterodyne;
  if (s == "homodyne") return Unraveling::Homodyne;
  fail(field, "unknown unraveling '" + s + "'");
}

RVec real_vector(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  RVec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_number())
      v(i) = j[i].get<double>();
    else if (j[i].is_string() && j[i].get<std::string>() == "inf")
      v(i) = std::numeric_limits<double>::infinity();
    else
      fail(field + "[" + std::to_string(i) + "]", "expected a number or \"inf\"");
  }
  return v;
}

void parse_model(const json& j, double rate, RunConfig& cfg) {
  const std::string sec = "model";
  if (!j.contains("builder") || !j["builder"].is_string()) fail("model.builder", "missing builder name");
  cfg.builder = j["builder"].get<std::string>();
  if (cfg.builder == "empty_cavity") {
    check_keys(j, sec, {"builder", "dim", "omega", "kappa", "epsilon", "n_th", "unraveling"});
    CavityParams p;
    p.omega = rate * number(j, sec, "omega", 0.0);
    p.kappa = rate * number(j, sec, "kappa", 1.0);
    p.epsilon = std::sqrt(rate) * (j.contains("epsilon") ? complex_value(j["epsilon"], "model.epsilon") : 0.0);
    p.n_th = number(j, sec, "n_th", 0.0);
    if (p.kappa < 0) fail("model.kappa", "must be non-negative");
    if (p.n_th < 0) fail("model.n_th", "must be non-negative");
    Unraveling u = j.contains("unraveling") ? unraveling(j["unraveling"], "model.unraveling") : Unraveling::Heterodyne;
    cfg.model = empty_cavity(p, integer(j, sec, "dim"), u);
    if (p.n_th > 0 && cfg.dynamics.reference_beta.size() == 0)
      cfg.dynamics.reference_beta = RVec::Constant(1, occupation_to_beta(p.n_th));
  } else if (cfg.builder == "dpo") {
    check_keys(j, sec, {"builder", "dim", "kappa", "beta2", "chi", "unravelings"});
    DpoParams p{rate * number(j, sec, "kappa", 1.0), rate * number(j, sec, "beta2"), rate * number(j, sec, "chi")};
    if (p.kappa < 0) fail("model.kappa", "must be non-negative");
    if (p.beta2 < 0) fail("model.beta2", "must be non-negative");
    Unraveling u1 = Unraveling::Heterodyne, u2 = Unraveling::Heterodyne;
    if (j.contains("unravelings")) {
      const json& u = j["unravelings"];
      if (!u.is_array() || u.size() != 2) fail("model.unravelings", "expected [linear, two_photon]");
      u1 = unraveling(u[0], "model.unravelings[0]");
      u2 = unraveling(u[1], "model.unravelings[1]");
    }
    const int dim = integer(j, sec, "dim");
    if (dim < dpo_min_dim(p)) fail("model.dim", "must be at least " + std::to_string(dpo_min_dim(p)));
    cfg.model = dpo(p, dim, u1, u2);
  } else if (cfg.builder == "kerr_network") {
    check_keys(j, sec, {"builder", "modes", "dim_per_mode", "terms", "losses"});
    std::vector<HamiltonianTerm> terms;
    std::vector<LossTerm> losses;
    if (j.contains("terms")) {
      if (!j["terms"].is_array()) fail("model.terms", "expected an array");
      for (size_t i = 0; i < j["terms"].size(); ++i) {
        const json& t = j["terms"][i];
        const std::string f = "model.terms[" + std::to_string(i) + "]";
        check_keys(t, f, {"kind", "mode", "other", "coeff"});
        HamiltonianTerm h;
        std::string kind = t.value("kind", "");
        if (kind == "kerr") h.kind = TermKind::Kerr;
        else if (kind == "detuning") h.kind = TermKind::Detuning;
        else if (kind == "beamsplitter") h.kind = TermKind::Beamsplitter;
        else if (kind == "drive") h.kind = TermKind::Drive;
        else fail(f + ".kind", "expected kerr, detuning, beamsplitter or drive");
        h.mode = integer(t, f, "mode");
        h.other = integer(t, f, "other", -1);
        if (!t.contains("coeff")) fail(f + ".coeff", "missing");
        h.coeff = rate * complex_value(t["coeff"], f + ".coeff");
        terms.push_back(h);
      }
    }
    if (j.contains("losses")) {
      if (!j["losses"].is_array()) fail("model.losses", "expected an array");
      for (size_t i = 0; i < j["losses"].size(); ++i) {
        const json& l = j["losses"][i];
        const std::string f = "model.losses[" + std::to_string(i) + "]";
        check_keys(l, f, {"mode", "rate", "observed", "unraveling"});
        LossTerm lt;
        lt.mode = integer(l, f, "mode");
        lt.rate = rate * number(l, f, "rate");
        lt.observed = l.value("observed", true);
        if (l.contains("unraveling")) lt.unraveling = unraveling(l["unraveling"], f + ".unraveling");
        losses.push_back(lt);
      }
    }
    try {
      cfg.model = kerr_network(integer(j, sec, "modes"), terms, losses, integer(j, sec, "dim_per_mode")).model;
    } catch (const ConfigError& e) {
      fail("model", e.what());
    }
  } else {
    fail("model.builder", "unknown builder '" + cfg.builder + "'");
  }
}

void parse_manifold(const json& j, RunConfig& cfg) {
  check_keys(j, "manifold", {"factors", "theta", "initial_state"});
  std::vector<ManifoldSpec> parts;
  if (j.contains("factors")) {
    if (!j["factors"].is_array()) fail("manifold.factors", "expected an array");
    for (size_t i = 0; i < j["factors"].size(); ++i) {
      const json& f = j["factors"][i];
      const std::string field = "manifold.factors[" + std::to_string(i) + "]";
      check_keys(f, field, {"kind", "sub"});
      int sub = integer(f, field, "sub", 0);
      std::string kind = f.value("kind", "");
      if (kind == "displacement") parts.push_back(ManifoldSpec::coherent_displacement(sub));
      else if (kind == "displaced_squeezed") parts.push_back(ManifoldSpec::displaced_squeezed(sub));
      else if (kind == "spin") parts.push_back(ManifoldSpec::spin_coherent(sub));
      else fail(field + ".kind", "expected displacement, displaced_squeezed or spin");
    }
  }
  try {
    cfg.manifold = ManifoldSpec::product(parts);
    cfg.manifold.check_dims(cfg.model.dims);
  } catch (const Error& e) {
    fail("manifold.factors", e.what());
  }
  cfg.theta0 = j.contains("theta") ? real_vector(j["theta"], "manifold.theta") : RVec::Zero(cfg.manifold.n_coords());
  if (cfg.theta0.size() != cfg.manifold.n_coords())
    fail("manifold.theta", "expected " + std::to_string(cfg.manifold.n_coords()) + " coordinates");
  if (!cfg.theta0.allFinite()) fail("manifold.theta", "coordinates must be finite");
  if (j.contains("initial_state")) {
    const json& s = j["initial_state"];
    check_keys(s, "manifold.initial_state", {"kind", "n", "alpha"});
    cfg.initial.kind = s.value("kind", "fock");
    if (cfg.initial.kind != "fock" && cfg.initial.kind != "coherent" && cfg.initial.kind != "cat_even" &&
        cfg.initial.kind != "cat_odd")
      fail("manifold.initial_state.kind", "expected fock, coherent, cat_even or cat_odd");
    cfg.initial.n = integer(s, "manifold.initial_state", "n", 0);
    if (s.contains("alpha")) cfg.initial.alpha = complex_value(s["alpha"], "manifold.initial_state.alpha");
    if (cfg.initial.kind != "fock" && cfg.model.dims.size() != 1)
      fail("manifold.initial_state.kind", "only fock states are supported for several subsystems");
    if (cfg.initial.n < 0 || cfg.initial.n >= cfg.model.dims[0]) fail("manifold.initial_state.n", "out of range");
  }
}

SpectralMap spectral(const json& t, const std::string& field) {
  std::string f = t.value("f", "n");
  if (f == "n") return [](int n) { return static_cast<double>(n); };
  if (f == "n2") return [](int n) { return static_cast<double>(n) * n; };
  if (f == "exp") {
    double r = number(t, field, "rate");
    return [r](int n) { return std::exp(r * n); };
  }
  fail(field + ".f", "expected n, n2 or exp");
}

void parse_functional(const json& j, RunConfig& cfg) {
  check_keys(j, "functional", {"kind", "lambda", "penalties", "beta"});
  PenaltyFunctional fn;
  if (j.contains("penalties")) {
    if (!j["penalties"].is_array() || j["penalties"].empty()) fail("functional.penalties", "expected a non-empty array");
    for (size_t i = 0; i < j["penalties"].size(); ++i) {
      const json& t = j["penalties"][i];
      const std::string f = "functional.penalties[" + std::to_string(i) + "]";
      check_keys(t, f, {"sub", "weight", "f", "rate"});
      PenaltyTerm term;
      term.sub = integer(t, f, "sub", 0);
      term.weight = number(t, f, "weight", 1.0);
      term.f = spectral(t, f);
      if (term.sub < 0 || term.sub >= static_cast<int>(cfg.model.dims.size())) fail(f + ".sub", "out of range");
      fn.terms.push_back(term);
    }
  } else {
    std::vector<int> subs;
    for (const auto& f : cfg.manifold.factors()) subs.push_back(f.sub);
    if (subs.empty()) subs.push_back(0);
    fn = PenaltyFunctional::total_number(subs);
  }
  std::string kind = j.value("kind", "expectation");
  if (kind == "cgf") {
    fn = fn.cgf(number(j, "functional", "lambda"));
  } else if (kind != "expectation") {
    fail("functional.kind", "expected expectation or cgf");
  }
  try {
    fn.validate();
  } catch (const Error& e) {
    fail("functional", e.what());
  }
  cfg.dynamics.functional = fn;
  if (j.contains("beta")) {
    if (j["beta"].is_string() && j["beta"].get<std::string>() == "fit") {
      cfg.fit_beta = true;
    } else {
      cfg.beta0 = real_vector(j["beta"], "functional.beta");
      if (cfg.beta0.size() != static_cast<Eigen::Index>(fn.terms.size()))
        fail("functional.beta", "expected one weight per penalty");
    }
  }
}

void parse_dynamics(const json& j, double rate, RunConfig& cfg) {
  const std::string sec = "dynamics";
  check_keys(j, sec, {"mode", "dt", "t_final", "eta", "seed", "n_trajectories", "deterministic", "reference_beta"});
  std::string mode = j.value("mode", "gradient_flow");
  if (mode == "gradient_flow") cfg.dynamics.mode = CoordinateMode::GradientFlow;
  else if (mode == "fiducial") cfg.dynamics.mode = CoordinateMode::Fiducial;
  else if (mode == "gibbs_projection") cfg.dynamics.mode = CoordinateMode::GibbsProjection;
  else if (mode == "fixed_basis") cfg.dynamics.mode = CoordinateMode::FixedBasis;
  else fail("dynamics.mode", "expected gradient_flow, fiducial, gibbs_projection or fixed_basis");
  cfg.dt = number(j, sec, "dt") / rate;
  cfg.t_final = number(j, sec, "t_final") / rate;
  if (j.contains("eta")) {
    cfg.dynamics.eta = rate * number(j, sec, "eta");
    if (cfg.dynamics.eta < 0) fail("dynamics.eta", "must be non-negative");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("dynamics.seed", "expected a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.n_trajectories = integer(j, sec, "n_trajectories", 1);
  if (cfg.n_trajectories < 1) fail("dynamics.n_trajectories", "must be at least 1");
  cfg.deterministic = j.value("deterministic", false);
  if (j.contains("reference_beta")) cfg.dynamics.reference_beta = real_vector(j["reference_beta"], "dynamics.reference_beta");
}

void parse_output(const json& j, RunConfig& cfg) {
  check_keys(j, "output", {"stride", "log10_occupations", "expectations", "chernoff_n0", "max_level"});
  cfg.output.stride = integer(j, "output", "stride", 1);
  if (cfg.output.stride < 1) fail("output.stride", "must be at least 1");
  cfg.output.log10_occupations = j.value("log10_occupations", false);
  if (j.contains("expectations")) {
    if (!j["expectations"].is_array()) fail("output.expectations", "expected an array of operator names");
    for (size_t i = 0; i < j["expectations"].size(); ++i) {
      const json& e = j["expectations"][i];
      const std::string f = "output.expectations[" + std::to_string(i) + "]";
      if (!e.is_string()) fail(f, "expected an operator name");
      try {
        OpPoly op = parse_operator(e.get<std::string>());
        if (op.max_sub() >= static_cast<int>(cfg.model.dims.size())) fail(f, "subsystem out of range");
        cfg.output.expectations.emplace_back(e.get<std::string>(), op);
      } catch (const InvalidArgument& err) {
        fail(f, err.what());
      }
    }
  }
  if (j.contains("chernoff_n0")) cfg.output.chernoff_n0 = number(j, "output", "chernoff_n0");
  cfg.output.max_level = integer(j, "output", "max_level", 0);
  if (cfg.output.max_level < 0) fail("output.max_level", "must be non-negative");
}

}  // namespace

OpPoly parse_operator(const std::string& name) {
  std::string base = name;
  int sub = 0;
  if (auto pos = name.find(':'); pos != std::string::npos) {
    base = name.substr(0, pos);
    try {
      size_t used = 0;
      sub = std::stoi(name.substr(pos + 1), &used);
      if (used != name.size() - pos - 1 || sub < 0) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw InvalidArgument("bad subsystem index in '" + name + "'");
    }
  }
  if (base == "a") return ops::a(sub);
  if (base == "ad") return ops::ad(sub);
  if (base == "n") return ops::n(sub);
  if (base == "q") return ops::q(sub);
  if (base == "p") return ops::p(sub);
  if (base == "s") return ops::s(sub);
  if (base == "jz") return ops::jz(sub);
  if (base == "jx") return ops::jx(sub);
  if (base == "jy") return ops::jy(sub);
  throw InvalidArgument("unknown operator '" + base + "'");
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, "config", {"reference_rate", "model", "manifold", "functional", "dynamics", "output"});
  RunConfig cfg;
  cfg.raw = j;
  const double rate = number(j, "config", "reference_rate", 1.0);
  if (!(rate > 0)) fail("reference_rate", "must be positive");
  if (!j.contains("model")) fail("model", "missing section");
  if (!j.contains("dynamics")) fail("dynamics", "missing section");
  if (j.contains("dynamics") && j["dynamics"].contains("reference_beta"))
    cfg.dynamics.reference_beta = real_vector(j["dynamics"]["reference_beta"], "dynamics.reference_beta");
  parse_model(j["model"], rate, cfg);
  parse_manifold(j.value("manifold", json::object()), cfg);
  parse_functional(j.value("functional", json::object()), cfg);
  parse_dynamics(j["dynamics"], rate, cfg);
  parse_output(j.value("output", json::object()), cfg);

  if (cfg.manifold.empty() && cfg.dynamics.mode != CoordinateMode::FixedBasis)
    fail("dynamics.mode", "needs manifold factors unless the mode is fixed_basis");
  if (cfg.dynamics.mode == CoordinateMode::GibbsProjection && cfg.beta0.size() == 0 && !cfg.fit_beta)
    fail("functional.beta", "gibbs_projection needs initial weights or \"fit\"");
  if (!cfg.model.unobserved.empty() && cfg.dynamics.mode != CoordinateMode::GibbsProjection)
    fail("model.losses", "unobserved channels need a mixed state; only gibbs_projection supports them in run");
  if (cfg.output.max_level > 0)
    for (int d : cfg.model.dims)
      if (cfg.output.max_level > d) fail("output.max_level", "exceeds a subsystem dimension");
  apply_overrides(cfg, {});
  return cfg;
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.dt) cfg.dt = *o.dt;
  if (o.t_final) cfg.t_final = *o.t_final;
  if (!(cfg.dt > 0)) fail("dynamics.dt", "must be positive");
  if (!(cfg.t_final >= cfg.dt)) fail("dynamics.t_final", "must be at least dt");
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  RunConfig cfg = parse_config(j);
  apply_overrides(cfg, overrides);
  return cfg;
}

QuantumState RunConfig::initial_state() const {
  if (model.dims.size() > 1) {
    std::vector<int> levels(model.dims.size(), 0);
    levels[0] = initial.n;
    return fock_state(model.dims, levels);
  }
  const int dim = model.dims[0];
  if (initial.kind == "coherent") return coherent_state(dim, initial.alpha).normalized();
  if (initial.kind == "cat_even") return cat_state(dim, initial.alpha, true);
  if (initial.kind == "cat_odd") return cat_state(dim, initial.alpha, false);
  return fock_state(dim, initial.n);
}

int RunConfig::n_steps() const { return static_cast<int>(std::llround(t_final / dt)); }

std::uint64_t splitmix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t master, int k) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1));
}

}  // namespace qmb::cli
