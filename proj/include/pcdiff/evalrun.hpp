#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcdiff/checkpoint.hpp"
#include "pcdiff/dataset.hpp"
#include "pcdiff/sampler.hpp"
#include "pcdiff/trainer.hpp"

namespace pcdiff {

struct EvalOptions {
  int64_t eval_k = 256;  // CD@k / F-score subsample size
  double tau = 0.2;
  int64_t n_ref = 4096;  // ground-truth reference resolution
  int64_t steps = 64;    // sampler steps
  double omega = 0.0;
  double churn = 0.0;
  bool self_cond = true;
  uint64_t seed = 17;
  int threads = 0;
  int64_t max_objects = 0;  // 0: every validation object
};

// Per-object sample seed; rep 0 is shared by the scaling table and the
// trade-off sweep so their omega = 0 columns agree exactly.
uint64_t eval_sample_seed(uint64_t base_seed, int64_t object_id,
                          int64_t n_test, int64_t rep);

// Samples the validation split at each resolution and scores against each
// object's standardized reference surface.
struct ScalingResult {
  std::vector<int64_t> resolutions;
  std::vector<EvalReport> reports;  // aligned with resolutions

  const EvalRow mean(int64_t n_test) const;
  void save_csv(const std::string& path, const std::string& config_hash,
                const std::string& checkpoint_hash) const;
};

ScalingResult run_scaling_eval(const LoadedCheckpoint& ckpt, const Dataset& ds,
                               const std::vector<int64_t>& resolutions,
                               const EvalOptions& opts);

// Same protocol with read attention capped to the first n_cap tokens.
// The cap is applied for the duration of the run and then removed.
ScalingResult run_restricted_read(LoadedCheckpoint& ckpt, const Dataset& ds,
                                  const std::vector<int64_t>& resolutions,
                                  const EvalOptions& opts, int64_t n_cap);

// Fraction of validation objects whose sample lies closer (CD@k) to its
// own surface than to a paired object of a different family.
double family_match_rate(const LoadedCheckpoint& ckpt, const Dataset& ds,
                         int64_t n_test, const EvalOptions& opts);

// Fidelity/variability sweep over (omega, n_test): 3 samples per object.
struct TradeoffCell {
  double omega = 0.0;
  int64_t n_test = 0;
  double fidelity_rep0 = 0.0;  // matches run_scaling_eval cd_at_k
  double fidelity_mean = 0.0;  // mean cd_at_k over the 3 samples
  double variability = 0.0;    // mean pairwise CD@k
};
std::vector<TradeoffCell> run_tradeoff_sweep(
    const LoadedCheckpoint& ckpt, const Dataset& ds,
    const std::vector<double>& omegas, const std::vector<int64_t>& resolutions,
    const EvalOptions& opts);
void save_tradeoff_csv(const std::vector<TradeoffCell>& cells,
                       const std::string& path, const std::string& config_hash,
                       const std::string& checkpoint_hash);

// ---- ablations --------------------------------------------------------------

struct AblationCell {
  std::string label;
  EvalRow mean;
};

// Trains one model per m_init with an identical recipe, then evaluates
// each at n_test.
std::vector<AblationCell> run_latent_ablation(
    const RunConfig& base, const Dataset& ds,
    const std::vector<int64_t>& m_inits, const EvalOptions& opts,
    int64_t n_test);

// Same recipe swept over training resolutions.
std::vector<AblationCell> run_train_resolution_ablation(
    const RunConfig& base, const Dataset& ds,
    const std::vector<int64_t>& n_trains, const EvalOptions& opts,
    int64_t n_test);

// k concatenated n_train-sized runs vs one run at k*n_train points.
struct MixtureRow {
  int64_t k = 1;
  int64_t n_total = 0;
  double cd_mixture = 0.0;
  double cd_oneshot = 0.0;
};
std::vector<MixtureRow> run_mixture_ablation(const LoadedCheckpoint& ckpt,
                                             const Dataset& ds,
                                             const std::vector<int64_t>& ks,
                                             const EvalOptions& opts);

void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::string& path, const std::string& config_hash,
                       const std::string& checkpoint_hash);

}  // namespace pcdiff
