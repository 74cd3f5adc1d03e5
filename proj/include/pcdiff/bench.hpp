#pragma once

#include <string>
#include <vector>

#include "pcdiff/model.hpp"

namespace pcdiff {

struct BenchRecord {
  std::string kind;   // two_stream | vanilla
  std::string phase;  // inference | train
  int64_t n_test = 0;  // intended test resolution (row label)
  int64_t n_used = 0;  // point count of the measured workload
  double ms = 0.0;     // mean wall time per iteration
  int64_t peak_bytes = 0;  // numeric-core high-water mark
  uint64_t latent_flops = 0;
  bool capped = false;  // allocation failure recorded instead of a crash
};

struct BenchOptions {
  DenoiserConfig cfg = DenoiserConfig::desk();
  int64_t warmup = 3;
  int64_t iters = 10;  // timed iterations
  uint64_t seed = 7;
  // Two-stream training always runs at this resolution; only the label
  // (intended n_test) varies. The vanilla baseline has to train at n_test.
  int64_t n_train_fixed = 256;
};

// Per-iteration wall time and peak memory at each resolution. Runs
// single-threaded so timings stay stable.
std::vector<BenchRecord> run_bench(const std::vector<std::string>& kinds,
                                   const std::vector<std::string>& phases,
                                   const std::vector<int64_t>& resolutions,
                                   const BenchOptions& opts);

// Least-squares slope of log(ms) against log(n).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& n_ms);

double slope_for(const std::vector<BenchRecord>& records,
                 const std::string& kind, const std::string& phase);

void save_bench_csv(const std::vector<BenchRecord>& records,
                    const std::string& path, const std::string& config_hash);

}  // namespace pcdiff
