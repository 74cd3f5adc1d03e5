#pragma once

#include <cstdint>
#include <vector>

namespace pcdiff {

// Cumulative signal fractions alpha_bar_t for t = 0..T, strictly
// decreasing from exactly 1, clipped away from zero.
struct NoiseSchedule {
  int64_t T = 0;
  double s = 0.008;  // cosine offset used to build the schedule
  std::vector<double> alpha_bar;  // T + 1 values

  double sigma_min() const;  // sigma at t = 1
  double sigma_max() const;  // sigma at t = T
};

constexpr double kAlphaBarClip = 1e-6;
constexpr int64_t kDefaultTimesteps = 1024;

NoiseSchedule cosine_schedule(int64_t T, double s = 0.008);

// Continuous alpha_bar(t) for real t in [0, T].
double alpha_bar_at(const NoiseSchedule& sched, double t);

// Variance-exploding reparameterization sigma = sqrt((1-ab)/ab) and its
// exact inverse (clamped to [0, T]).
double sigma_of_t(const NoiseSchedule& sched, double t);
double t_of_sigma(const NoiseSchedule& sched, double sigma);

}  // namespace pcdiff
