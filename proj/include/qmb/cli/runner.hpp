#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "qmb/cli/config.hpp"

namespace qmb::cli {

class TrajectoryFailure : public Error {
 public:
  TrajectoryFailure(int index, double t, const std::string& what)
      : Error("trajectory " + std::to_string(index) + " failed at t = " + std::to_string(t) + ": " + what),
        index(index),
        t(t) {}
  int index;
  double t;
};

// Worker count from QMB_WORKERS, else the hardware concurrency.
int default_workers();

// Runs job(k) for k in [0, n) on a pool of `workers` threads. The first
// exception is rethrown after all workers have joined.
void parallel_for(int n, int workers, const std::function<void(int)>& job);

struct RecordedState {
  double t;
  RVec theta;
  QuantumState sigma;
};

struct Trajectory {
  std::vector<json> records;
  std::vector<RecordedState> states;
};

// Simulates trajectory k and returns its records (every `stride` steps plus
// the initial point).
Trajectory simulate(const RunConfig& cfg, int k);

struct SummaryRow {
  int sub;
  int K;
  double mean;
  double p90;
};

// Linear-interpolated percentile, q ∈ [0, 1].
double percentile(std::vector<double> values, double q);
// 1 − Σ_{n<K} p_n for every record and K ≤ max_level.
std::vector<SummaryRow> truncation_summary(const std::vector<std::vector<RVec>>& occupations, int max_level);

json meta_json(const RunConfig& cfg, const std::string& command);

// `run`: writes traj_<k>.jsonl, summary.csv and meta.json into out_dir.
void run(const RunConfig& cfg, const std::filesystem::path& out_dir, int workers);

}  // namespace qmb::cli
