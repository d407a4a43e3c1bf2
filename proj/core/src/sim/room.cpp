#include "picknet/sim/room.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "picknet/error.hpp"

namespace picknet::sim {

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double horizontal_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double eyring_t60(double reflection, double depth, double width, double height) {
  const double volume = depth * width * height;
  const double surface = 2.0 * (depth * width + depth * height + width * height);
  const double alpha = 1.0 - reflection * reflection;
  return 0.161 * volume / (-surface * std::log(1.0 - alpha));
}

double t60_to_reflection(double t60, double depth, double width, double height) {
  require(depth > 0 && width > 0 && height > 0, ErrorCode::kInvalidInput,
          "room dimensions must be positive");
  require(t60 > 0.0, ErrorCode::kOutOfRange, "T60 must be positive");
  const double volume = depth * width * height;
  const double surface = 2.0 * (depth * width + depth * height + width * height);
  // ln(1 - alpha) = ln(beta^2) = -0.161 V / (S T60)
  const double beta = std::exp(-0.5 * 0.161 * volume / (surface * t60));
  require(beta > 0.0, ErrorCode::kOutOfRange,
          "T60 " + std::to_string(t60) + " s is below what this room can reach");
  return beta;
}

namespace {

bool inside(const Vec3& p, const RoomScene& s, double margin) {
  return p.x > margin && p.x < s.depth - margin && p.y > margin && p.y < s.width - margin &&
         p.z > margin && p.z < s.height - margin;
}

}  // namespace

void validate_scene(const RoomScene& s, const SceneLimits& lim) {
  auto check = [](bool ok, const char* what) {
    require(ok, ErrorCode::kOutOfRange, std::string("scene violates: ") + what);
  };
  check(s.depth >= lim.side_min && s.depth <= lim.side_max, "depth range");
  check(s.width >= lim.side_min && s.width <= lim.side_max, "width range");
  check(s.height >= lim.height_min && s.height <= lim.height_max, "height range");
  check(s.t60 >= lim.t60_min && s.t60 <= lim.t60_max, "T60 range");
  check(s.reflection >= 0.0 && s.reflection < 1.0, "reflection coefficient in [0, 1)");
  check(s.mics.size() >= 2, "at least two microphones");
  check(inside(s.speaker, s, 0.0), "speaker inside the room");
  for (const auto& m : s.mics) check(inside(m, s, 0.0), "microphone inside the room");
  const double h = horizontal_distance(s.speaker, s.mics[0]);
  const double v = std::abs(s.speaker.z - s.mics[0].z);
  check(h >= lim.near_horiz_min && h <= lim.near_horiz_max, "near mic horizontal distance");
  check(v >= lim.near_vert_min && v <= lim.near_vert_max, "near mic vertical offset");
  const double near = distance(s.speaker, s.mics[0]);
  for (std::size_t m = 1; m < s.mics.size(); ++m) {
    const double pair = distance(s.mics[0], s.mics[m]);
    check(pair >= lim.pair_min && pair <= lim.pair_max, "microphone spacing");
    check(distance(s.speaker, s.mics[m]) > near, "mic 0 is the closest to the speaker");
  }
}

RoomScene sample_room(std::uint64_t seed, std::size_t n_mics, const SceneLimits& lim) {
  require(n_mics >= 2, ErrorCode::kInvalidInput, "a scene needs at least two microphones");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  for (int attempt = 0; attempt < 10000; ++attempt) {
    RoomScene s;
    s.depth = uni(lim.side_min, lim.side_max);
    s.width = uni(lim.side_min, lim.side_max);
    s.height = uni(lim.height_min, lim.height_max);
    s.t60 = uni(lim.t60_min, lim.t60_max);
    s.reflection = t60_to_reflection(s.t60, s.depth, s.width, s.height);

    const double m = lim.wall_margin;
    s.speaker = {uni(m, s.depth - m), uni(m, s.width - m), uni(lim.mouth_min, lim.mouth_max)};

    const double r = uni(lim.near_horiz_min, lim.near_horiz_max);
    const double theta = uni(0.0, kTwoPi);
    const double dz = uni(lim.near_vert_min, lim.near_vert_max) * (uni(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    const Vec3 near{s.speaker.x + r * std::cos(theta), s.speaker.y + r * std::sin(theta), s.speaker.z + dz};
    s.mics.push_back(near);

    for (std::size_t k = 1; k < n_mics; ++k) {
      const double d = uni(lim.pair_min, lim.pair_max);
      const double v = uni(-0.5, 0.5);
      const double hz = std::sqrt(d * d - v * v);
      const double phi = uni(0.0, kTwoPi);
      s.mics.push_back({near.x + hz * std::cos(phi), near.y + hz * std::sin(phi), near.z + v});
    }

    bool ok = inside(s.speaker, s, m);
    for (const auto& p : s.mics) ok = ok && inside(p, s, m);
    const double near_d = distance(s.speaker, near);
    for (std::size_t k = 1; k < n_mics && ok; ++k) ok = distance(s.speaker, s.mics[k]) > near_d;
    if (ok) return s;
  }
  fail(ErrorCode::kSamplingFailure, "could not place speaker and microphones after 10000 attempts");
}

}  // namespace picknet::sim
