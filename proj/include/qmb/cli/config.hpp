#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qmb/dynamics.hpp"
#include "qmb/models.hpp"

namespace qmb::cli {

using json = nlohmann::json;

struct InitialState {
  std::string kind = "fock";  // fock | coherent | cat_even | cat_odd
  int n = 0;
  cplx alpha = 0.0;
};

struct OutputOptions {
  int stride = 1;
  bool log10_occupations = false;
  std::vector<std::pair<std::string, OpPoly>> expectations;
  std::optional<double> chernoff_n0;
  int max_level = 0;  // largest K in the summary table; 0 means the full dimension
};

struct RunConfig {
  json raw;
  std::string builder;
  ModelSpec model;
  ManifoldSpec manifold;
  RVec theta0;
  InitialState initial;
  DynamicsOptions dynamics;
  RVec beta0;
  bool fit_beta = false;
  double dt = 0.0;
  double t_final = 0.0;
  std::uint64_t seed = 0;
  int n_trajectories = 1;
  bool deterministic = false;
  OutputOptions output;

  // Moving-frame initial state on the model dimensions.
  QuantumState initial_state() const;
  int n_steps() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_final;
};

RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path, const Overrides& overrides = {});
void apply_overrides(RunConfig& cfg, const Overrides& overrides);

// Parses "a", "n", "q:1", ... into the corresponding single-letter operator.
OpPoly parse_operator(const std::string& name);

std::uint64_t splitmix64(std::uint64_t x);
// splitmix64(master + 0x9E3779B97F4A7C15·(k+1))
std::uint64_t trajectory_seed(std::uint64_t master, int k);

}  // namespace qmb::cli
