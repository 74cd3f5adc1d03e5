#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcdiff/shapes.hpp"

namespace pcdiff {

enum class Split : int32_t { kTrain = 0, kVal = 1 };

struct DatasetEntry {
  ShapeSpec spec;
  Split split = Split::kTrain;
};

struct Dataset {
  uint64_t seed = 0;
  std::vector<DatasetEntry> entries;

  std::vector<const ShapeSpec*> split_specs(Split s) const;
  int64_t count(Split s) const;
};

// Deterministic corpus of `count` shape specs. Ids are 0..count-1 and the
// train/val split is a pure function of the id: splitmix64(id) % 10 == 9
// marks validation (~10%).
Dataset build_dataset(int64_t count, uint64_t seed);

Split split_for_id(int64_t id);

// Line-oriented manifest (documented in README): a header line with seed
// and count, then one line per shape with id, family, split, and the
// exact double-precision parameters.
void save_manifest(const Dataset& ds, const std::string& path);
Dataset load_manifest(const std::string& path);

}  // namespace pcdiff
