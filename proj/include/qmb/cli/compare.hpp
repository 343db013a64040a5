#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qmb/cli/config.hpp"

namespace qmb::cli {

struct BasisChoice {
  enum class Kind { Static, DisplacedExmin, DisplacedSqueezedExmin, DisplacedCgf };
  Kind kind = Kind::Static;
  double lambda = 0.0;
  std::string label;

  // static | displaced_exmin | displaced_squeezed_exmin | displaced_cgf(λ)
  static BasisChoice parse(const std::string& s);
};

// Occupations of subsystem `sub` after moving the fixed-frame state into the
// optimal frame of the basis. `warm` carries the last optimum between calls.
RVec basis_occupations(const BasisChoice& basis, const QuantumState& state, int sub, RVec& warm);

struct BasisRow {
  std::string basis;
  int K;
  double mean;
  double p90;
};

std::vector<BasisRow> compare_table(const std::vector<BasisChoice>& bases, const std::vector<QuantumState>& states,
                                    int sub, int max_level);

// `compare-bases`: simulates the configured ensemble, maps every recorded state
// into each basis and writes compare.csv and meta.json.
void compare_bases(const RunConfig& cfg, const std::vector<BasisChoice>& bases, const std::filesystem::path& out_dir,
                   int workers);

}  // namespace qmb::cli
