#pragma once

#include <array>
#include <memory>
#include <string>

#include "pcdiff/adam.hpp"
#include "pcdiff/model.hpp"
#include "pcdiff/vanilla.hpp"

namespace pcdiff {

// Versioned binary container: magic + version, a JSON header describing
// the config, tensor names/shapes, optimizer hyperparameters and RNG
// state, then raw little-endian float64 payloads (parameters, then Adam
// first and second moments when present). Layout documented in README.
struct CheckpointMeta {
  std::array<uint64_t, 4> rng_state{};
  int64_t train_step = 0;
  uint64_t dataset_seed = 0;
  int64_t dataset_count = 0;
  int64_t n_train = 0;
  int64_t schedule_T = 1024;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const DenoiserConfig& cfg, std::vector<ParamRef> params,
                     const AdamState& adam, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::string kind;
  DenoiserConfig cfg;
  AdamState adam;
  CheckpointMeta meta;
  std::unique_ptr<TwoStreamDenoiser> two_stream;
  std::unique_ptr<VanillaDenoiser> vanilla;

  EpsDenoiser& model() const;
  std::vector<ParamRef> collect() const;
  const CondEncoderParams& encoder() const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Stable hash of a config's canonical JSON form (CSV provenance headers).
std::string config_hash(const DenoiserConfig& cfg);

}  // namespace pcdiff
