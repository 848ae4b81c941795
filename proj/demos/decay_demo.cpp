// Runs a small ensemble and prints the observed mean disagreement next to
// the certified geometric envelope it must stay under.

#include <cstdio>

#include "consensus_lab/diagnostics.hpp"
#include "consensus_lab/engine.hpp"

int main() {
  using namespace clab;

  run_config cfg;
  cfg.n = 3;
  cfg.kernel = confidence_function::linear(0.5);
  cfg.omega0.k = omega0_spec::kind::sampled;
  cfg.seed = 42;

  ensemble_result ens = run_ensemble(cfg, 2000);
  ensemble_summary sum = summarize(ens);

  system_setup setup = materialize(cfg);
  double w0 = diameter(setup.x0);
  double gamma0 = expected_contraction_at_diameter(w0, setup.r, setup.kernel);
  bound_curve bound = geometric_bound(w0, gamma0, 15);

  std::printf("n = %d, linear kernel beta = 0.5, %zu trajectories\n", cfg.n, ens.runs.size());
  std::printf("expected contraction at W0 = %g: %.6f\n", w0, gamma0);
  std::printf("%4s  %12s  %12s\n", "t", "mean W", "bound");
  for (std::size_t t = 0; t <= 15; ++t) {
    double mean = t < sum.mean_w.size() ? sum.mean_w[t] : 0.0;
    std::printf("%4zu  %12.8f  %12.8f\n", t, mean, bound.values[t]);
  }
  return 0;
}
