#include "pcdiff/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "pcdiff/check.hpp"

namespace pcdiff {

namespace {
constexpr double kHalfPi = 1.57079632679489661923;

double cosine_f(double t, double T, double s) {
  const double u = (t / T + s) / (1.0 + s);
  const double c = std::cos(u * kHalfPi);
  return c * c;
}
}  // namespace

NoiseSchedule cosine_schedule(int64_t T, double s) {
  PCD_CHECK(T >= 1, "cosine_schedule: T must be >= 1, got ", T);
  NoiseSchedule sched;
  sched.T = T;
  sched.s = s;
  sched.alpha_bar.resize(size_t(T) + 1);
  const double f0 = cosine_f(0.0, double(T), s);
  for (int64_t t = 0; t <= T; ++t) {
    const double ab = cosine_f(double(t), double(T), s) / f0;
    sched.alpha_bar[size_t(t)] = std::clamp(ab, kAlphaBarClip, 1.0);
  }
  sched.alpha_bar[0] = 1.0;
  return sched;
}

double alpha_bar_at(const NoiseSchedule& sched, double t) {
  PCD_CHECK(t >= 0.0 && t <= double(sched.T),
            "alpha_bar_at: t=", t, " outside [0, ", sched.T, "]");
  const double f0 = cosine_f(0.0, double(sched.T), sched.s);
  const double ab = cosine_f(t, double(sched.T), sched.s) / f0;
  return std::clamp(ab, kAlphaBarClip, 1.0);
}

double sigma_of_t(const NoiseSchedule& sched, double t) {
  const double ab = alpha_bar_at(sched, t);
  return std::sqrt((1.0 - ab) / ab);
}

double t_of_sigma(const NoiseSchedule& sched, double sigma) {
  PCD_CHECK(sigma >= 0.0, "t_of_sigma: negative sigma ", sigma);
  const double ab = 1.0 / (1.0 + sigma * sigma);
  // The clipped tail maps a sigma range onto t = T; the epsilon absorbs
  // round-off in the sigma_max computation itself.
  if (ab <= kAlphaBarClip * (1.0 + 1e-9)) return double(sched.T);
  const double f0 = cosine_f(0.0, double(sched.T), sched.s);
  const double arg = std::clamp(std::sqrt(ab * f0), 0.0, 1.0);
  const double u = std::acos(arg) / kHalfPi;
  const double t = double(sched.T) * (u * (1.0 + sched.s) - sched.s);
  return std::clamp(t, 0.0, double(sched.T));
}

double NoiseSchedule::sigma_min() const { return sigma_of_t(*this, 1.0); }
double NoiseSchedule::sigma_max() const {
  return sigma_of_t(*this, double(T));
}

}  // namespace pcdiff
