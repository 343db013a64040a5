#include <iostream>

#include "CLI11.hpp"
#include "qmb/cli/compare.hpp"
#include "qmb/cli/runner.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out_dir = "out";
  std::optional<double> dt;
  std::optional<double> t_final;
};

void add_common(CLI::App* sub, Common& c, bool outputs) {
  sub->add_option("config", c.config, "JSON configuration file")->required();
  sub->add_option("--seed", c.seed, "Master seed (overrides dynamics.seed)");
  sub->add_option("--dt", c.dt, "Step size (overrides dynamics.dt)")->check(CLI::PositiveNumber);
  sub->add_option("--t-final", c.t_final, "Final time (overrides dynamics.t_final)")->check(CLI::PositiveNumber);
  if (outputs) {
    sub->add_option("--workers", c.workers, "Worker threads (default: QMB_WORKERS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", c.out_dir, "Output directory");
  }
}

qmb::cli::RunConfig load(const Common& c) {
  return qmb::cli::load_config(c.config, {c.seed, c.dt, c.t_final});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-basis quantum trajectory simulator"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, val_opts;
  auto* run = app.add_subcommand("run", "Simulate the configured ensemble");
  add_common(run, run_opts, true);
  auto* cmp = app.add_subcommand("compare-bases", "Truncation-error table for several bases");
  add_common(cmp, cmp_opts, true);
  std::vector<std::string> bases;
  cmp->add_option("--bases", bases, "static, displaced_exmin, displaced_squeezed_exmin, displaced_cgf(λ)")
      ->required()
      ->delimiter(',');
  auto* val = app.add_subcommand("validate", "Check a configuration file");
  add_common(val, val_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = load(run_opts);
      qmb::cli::run(cfg, run_opts.out_dir, run_opts.workers.value_or(qmb::cli::default_workers()));
    } else if (cmp->parsed()) {
      auto cfg = load(cmp_opts);
      std::vector<qmb::cli::BasisChoice> choices;
      for (const auto& b : bases) choices.push_back(qmb::cli::BasisChoice::parse(b));
      qmb::cli::compare_bases(cfg, choices, cmp_opts.out_dir, cmp_opts.workers.value_or(qmb::cli::default_workers()));
    } else if (val->parsed()) {
      auto cfg = load(val_opts);
      std::cout << "ok: " << cfg.builder << ", dims";
      for (int d : cfg.model.dims) std::cout << ' ' << d;
      std::cout << ", " << cfg.manifold.n_coords() << " coordinates, " << cfg.n_steps() << " steps, "
                << cfg.n_trajectories << " trajectories\n";
    }
  } catch (const qmb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qmb::cli::TrajectoryFailure& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
