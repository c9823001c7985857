#include "ptrack/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ptrack {

namespace {
constexpr double kPi = std::numbers::pi;
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double true_bearing(const Vec3& target_pos, const Vec3& agent_pos) {
  const double dx = target_pos.x() - agent_pos.x();
  const double dy = target_pos.y() - agent_pos.y();
  if (dx == 0.0 && dy == 0.0) throw DegenerateGeometry("bearing undefined: coincident planar positions");
  const double a = std::atan2(dx, dy);
  return a == -kPi ? kPi : a;
}

MeasurementSet generate_measurements(const Vec6& target, const Vec3& agent_pos,
                                     const SensorModel& model, Rng& rng) {
  MeasurementSet out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < model.p_detect) {
    std::normal_distribution<double> noise(0.0, model.sigma_phi);
    out.bearings.push_back(wrap_angle(true_bearing(position_of(target), agent_pos) + noise(rng)));
    out.is_clutter.push_back(false);
  }
  if (model.clutter_rate > 0.0) {
    std::poisson_distribution<int> count(model.clutter_rate);
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      // unit() is in [0, 1), so pi - 2 pi u is in (-pi, pi].
      out.bearings.push_back(kPi - 2.0 * kPi * unit(rng));
      out.is_clutter.push_back(true);
    }
  }
  // Fisher-Yates on both columns together.
  for (std::size_t i = out.bearings.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const std::size_t j = pick(rng);
    std::swap(out.bearings[i - 1], out.bearings[j]);
    const bool tmp = out.is_clutter[i - 1];
    out.is_clutter[i - 1] = out.is_clutter[j];
    out.is_clutter[j] = tmp;
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, std::uint64_t step, std::uint64_t target, StreamPurpose purpose) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ target);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

}  // namespace ptrack
