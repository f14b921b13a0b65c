// Timing comparison of the OpenMP kernels against their serial references:
// grid-search design oracle, feature lifting, and per-task head fitting.
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <vector>

#include "almt/design.hpp"
#include "almt/features.hpp"
#include "almt/oracles.hpp"
#include "almt/parallel.hpp"
#include "almt/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class F>
double time_best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    f();
    best = std::min(best, seconds_since(start));
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.4f s   omp %8.4f s   speedup %.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("threads: %d\n", almt::par::max_threads());
  almt::Rng rng(7);

  {
    // E-optimal style grid search, 40 ball candidates, support <= 3.
    const int n = 40, k = 2;
    Eigen::MatrixXd features(k, n);
    for (int i = 0; i < n; ++i) features.col(i) = rng.ball(k);
    const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(k, k);
    almt::GridDesign serial_out, parallel_out;
    const double t_serial = time_best_of(repeats, [&] {
      serial_out = almt::grid_search_design_serial(features, target, 3, 0.01);
    });
    const double t_parallel = time_best_of(repeats, [&] {
      parallel_out = almt::grid_search_design(features, target, 3, 0.01);
    });
    report("grid_search_design", t_serial, t_parallel);
    if (serial_out.objective != parallel_out.objective)
      std::printf("  MISMATCH: serial %.17g vs omp %.17g\n", serial_out.objective,
                  parallel_out.objective);
  }

  {
    const int n = 200000, d_in = 10, d_out = 200;
    const almt::FeatureOperator op =
        almt::FeatureOperator::random_fourier(d_out, d_in, 1.0, rng);
    const Eigen::MatrixXd inputs = rng.gaussian(n, d_in);
    Eigen::MatrixXd a, b;
    const double t_serial = time_best_of(repeats, [&] { a = op.apply_rows_serial(inputs); });
    const double t_parallel = time_best_of(repeats, [&] { b = op.apply_rows(inputs); });
    report("fourier_lift", t_serial, t_parallel);
    if (a != b) std::printf("  MISMATCH in lifted features\n");
  }

  {
    // Batched per-task least-squares heads.
    const int tasks = 64, n = 2000, d = 60, k = 8;
    const Eigen::MatrixXd b_x = almt::random_orthonormal(d, k, rng);
    std::vector<Eigen::MatrixXd> features(tasks);
    std::vector<Eigen::VectorXd> labels(tasks);
    for (int t = 0; t < tasks; ++t) {
      features[t] = rng.gaussian(n, d);
      labels[t] = rng.gaussian_vec(n);
    }
    std::vector<Eigen::VectorXd> serial_heads(tasks), parallel_heads(tasks);
    const double t_serial = time_best_of(repeats, [&] {
      for (int t = 0; t < tasks; ++t)
        serial_heads[t] = almt::fit_task_head(b_x, features[t], labels[t], 1e-9);
    });
    const double t_parallel = time_best_of(repeats, [&] {
      almt::par::for_each_index(tasks, [&](std::ptrdiff_t t) {
        parallel_heads[t] = almt::fit_task_head(b_x, features[t], labels[t], 1e-9);
      });
    });
    report("fit_task_heads", t_serial, t_parallel);
    for (int t = 0; t < tasks; ++t)
      if (serial_heads[t] != parallel_heads[t]) {
        std::printf("  MISMATCH in task %d\n", t);
        break;
      }
  }
  return 0;
}
