#pragma once

#include <string>
#include <vector>

#include "pcdiff/checkpoint.hpp"
#include "pcdiff/dataset.hpp"
#include "pcdiff/sampler.hpp"

namespace pcdiff {

struct RunConfig {
  std::string model_kind = "two_stream";  // or "vanilla"
  DenoiserConfig model = DenoiserConfig::desk();
  int64_t n_train = 256;
  int64_t iters = 5000;
  int64_t batch = 4;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.01;
  double cond_dropout = 0.1;
  uint64_t seed = 1;
  std::string out_dir;
  int64_t checkpoint_every = 0;  // 0: final checkpoint only

  // Desk defaults above run on one CPU in minutes-to-hours. The paper
  // recipe is retained verbatim for documentation and large runs.
  static RunConfig desk();
  static RunConfig paper();
};

struct TrainResult {
  std::string checkpoint_path;
  std::string loss_csv_path;
  std::vector<double> losses;  // per-step batch means
  int64_t steps = 0;
};

// Deterministic in (config, dataset): a single serializable RNG stream
// drives batch selection, surface draws, observations and loss draws, so
// checkpoints resume bit-exactly.
TrainResult run_train(const RunConfig& cfg, const Dataset& ds);

// Continues a checkpoint to cfg.iters total steps.
TrainResult resume_train(const std::string& checkpoint_path,
                         const RunConfig& cfg, const Dataset& ds);

}  // namespace pcdiff
