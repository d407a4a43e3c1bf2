#pragma once

#include <cstdint>
#include <vector>

namespace picknet::sim {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  bool operator==(const Vec3&) const = default;
};

double distance(const Vec3& a, const Vec3& b);
double horizontal_distance(const Vec3& a, const Vec3& b);

// Ranges the sampler draws from.
struct SceneLimits {
  double side_min = 5.0, side_max = 16.0;      // depth and width, m
  double height_min = 2.5, height_max = 4.5;   // m
  double t60_min = 0.2, t60_max = 0.6;         // s
  double near_horiz_min = 0.30, near_horiz_max = 0.70;  // speaker to mic 0, m
  double near_vert_min = 0.10, near_vert_max = 0.30;    // m
  double pair_min = 1.0, pair_max = 4.0;       // mic 0 to mic m, m
  double mouth_min = 1.0, mouth_max = 1.8;     // speaker height, m
  double wall_margin = 0.1;                    // m
};

// Shoebox room with uniform wall reflection. Axes: x along depth, y along
// width, z along height; the origin is a floor corner.
struct RoomScene {
  double depth = 0.0, width = 0.0, height = 0.0;
  double t60 = 0.0;
  double reflection = 0.0;  // pressure reflection coefficient, same on all six walls
  Vec3 speaker;
  std::vector<Vec3> mics;  // mic 0 is the near-field device

  bool operator==(const RoomScene&) const = default;
};

// Deterministic in `seed`; rejection-samples the geometry until every
// placement constraint holds (kSamplingFailure after 10,000 attempts).
RoomScene sample_room(std::uint64_t seed, std::size_t n_mics = 2, const SceneLimits& limits = {});

// Throws kOutOfRange naming the first constraint the scene violates.
void validate_scene(const RoomScene& scene, const SceneLimits& limits = {});

// Eyring: T60 = 0.161 V / (-S ln(1 - alpha)), alpha = 1 - beta^2.
double eyring_t60(double reflection, double depth, double width, double height);
double t60_to_reflection(double t60, double depth, double width, double height);

}  // namespace picknet::sim
