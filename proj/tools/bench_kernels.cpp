// Compares the OpenMP kernels against their serial references on a
// moderately sized simulation and verifies they agree.
//
// Usage: posbias_bench [num_queries] [sweeps]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "posbias/harness.hpp"
#include "posbias/interventions.hpp"
#include "posbias/simulator.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = Clock::now();
    fn();
    auto t1 = Clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_abs_diff(const posbias::PairStats& a, const posbias::PairStats& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    m = std::max(m, std::abs(a.cells[i].c_at_k - b.cells[i].c_at_k));
    m = std::max(m, std::abs(a.cells[i].c_at_kprime - b.cells[i].c_at_kprime));
    m = std::max(m, std::abs(a.cells[i].notc_at_k - b.cells[i].notc_at_k));
    m = std::max(m,
                 std::abs(a.cells[i].notc_at_kprime - b.cells[i].notc_at_kprime));
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  posbias::SimulationConfig cfg;
  cfg.num_queries = argc > 1 ? std::atoi(argv[1]) : 4000;
  cfg.sweeps = argc > 2 ? std::atoi(argv[2]) : 10;
  cfg.seed = 7;

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("queries=%d sweeps=%d threads=%d\n", cfg.num_queries, cfg.sweeps,
              threads);

  posbias::Corpus corpus = posbias::generate_corpus(cfg);
  posbias::RankingTable table = posbias::generate_rankers(corpus, cfg);

  posbias::LogCollection logs_serial, logs_parallel;
  double sim_serial = time_ms(
      [&] { logs_serial = posbias::simulate_clicks_serial(table, corpus, cfg); },
      3);
  double sim_parallel = time_ms(
      [&] { logs_parallel = posbias::simulate_clicks(table, corpus, cfg); }, 3);
  bool sim_equal = logs_serial == logs_parallel;

  posbias::InterventionalSets sets =
      posbias::build_interventional_sets(table, cfg.M);
  posbias::WeightTable weights =
      posbias::compute_weights(table, logs_parallel.log_sizes, cfg.M);

  posbias::PairStats stats_serial, stats_parallel;
  double acc_serial = time_ms(
      [&] {
        stats_serial = posbias::accumulate_pair_stats_serial(logs_parallel,
                                                             sets, weights);
      },
      3);
  double acc_parallel = time_ms(
      [&] {
        stats_parallel =
            posbias::accumulate_pair_stats(logs_parallel, sets, weights);
      },
      3);
  double acc_diff = max_abs_diff(stats_serial, stats_parallel);

  std::printf("%-24s %10s %10s %8s\n", "kernel", "serial ms", "openmp ms",
              "speedup");
  std::printf("%-24s %10.1f %10.1f %7.2fx  (bitwise equal: %s)\n",
              "simulate_clicks", sim_serial, sim_parallel,
              sim_serial / sim_parallel, sim_equal ? "yes" : "NO");
  std::printf("%-24s %10.1f %10.1f %7.2fx  (max abs diff: %.2e)\n",
              "accumulate_pair_stats", acc_serial, acc_parallel,
              acc_serial / acc_parallel, acc_diff);

  if (!sim_equal || acc_diff > 1e-12) {
    std::printf("KERNEL MISMATCH\n");
    return 1;
  }
  return 0;
}
