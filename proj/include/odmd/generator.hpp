#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "odmd/geometry.hpp"
#include "odmd/rng.hpp"

namespace odmd {

// Distribution of the wrong-object box that replaces one detection, in
// normalized image units.
struct ReplacementBoxDistribution {
  double center_min = 0.1;
  double center_max = 0.9;
  double size_min = 0.02;
  double size_max = 0.5;

  friend bool operator==(const ReplacementBoxDistribution&,
                         const ReplacementBoxDistribution&) = default;
};

struct PerturbConfig {
  double sigma_cam = 0.0;     // meters, added to positions 2..n
  double sigma_box = 0.0;     // normalized units, added to every box
  double replace_prob = 0.0;  // chance that one box is replaced
  ReplacementBoxDistribution replacement;

  bool boxes_enabled() const { return sigma_box > 0.0 || replace_prob > 0.0; }

  friend bool operator==(const PerturbConfig&, const PerturbConfig&) = default;
};

// Minimum normalized box size after noise.
inline constexpr double kMinNormalizedBoxSize = 1e-4;

struct GenerationConfig {
  std::size_t n = 10;
  double s_min = 0.01;
  double s_max = 0.175;
  CameraPosition dp_min{0.0, 0.0, 0.05};
  CameraPosition dp_max{0.25, 0.175, 0.325};
  double z1_min = 0.55;
  double z1_max = 1.0;
  CameraIntrinsics k{205.5, 205.5, 320.5, 240.5, 640.0, 480.0};
  double reverse_prob = 0.5;
  PerturbConfig perturb;
  std::uint64_t seed = 0;

  // Throws ConfigError for inconsistent bounds, including initial-position
  // bounds that are empty at z1_min.
  void validate() const;

  friend bool operator==(const GenerationConfig&,
                         const GenerationConfig&) = default;
};

// Range of initial object centers that keeps the largest object inside the
// image for every camera position reachable within dp_max.
struct InitialCenterBounds {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
};

InitialCenterBounds initial_center_bounds(const GenerationConfig& cfg,
                                          double z1);

// Smallest initial depth for which an object centered at (x1, y1) stays in
// view after any camera movement within dp_max.
double min_initial_depth(const GenerationConfig& cfg, double x1 = 0.0,
                         double y1 = 0.0);

using CameraPath = std::vector<CameraPosition>;

// Path from p_1 = -delta to p_n = 0 with intermediate positions drawn
// uniformly between them and sorted per axis so the motion is monotonic.
CameraPath camera_path_from(const GenerationConfig& cfg,
                            const CameraPosition& delta, Rng& rng);

// Draws delta ~ U[dp_min, dp_max] with a random sign per axis, then
// camera_path_from.
CameraPath sample_camera_path(const GenerationConfig& cfg, Rng& rng);

// Random size, initial depth and (depth-dependent) initial center.
Object3D sample_object(const GenerationConfig& cfg, Rng& rng);

struct ExampleMeta {
  Object3D object;  // at the first camera position, before any reversal
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  bool reversed = false;

  friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

struct DepthExample {
  ObservationSet obs;
  CameraIntrinsics k;
  double label_z = 0.0;  // depth at the final observation, in meters
  ExampleMeta meta;

  friend bool operator==(const DepthExample&, const DepthExample&) = default;
};

// Adds N(0, sigma^2) to every axis of positions 2..n.
void perturb_camera(CameraPath& path, double sigma, Rng& rng);

// Boxes in normalized units (x/W, y/H, w/W, h/H). Adds N(0, sigma^2) to
// each coordinate, floors sizes at kMinNormalizedBoxSize, then with
// replace_prob swaps one uniformly chosen box for a random one.
void perturb_boxes(std::vector<BoundingBox>& normalized,
                   const PerturbConfig& cfg, Rng& rng);

DepthExample generate_example(const GenerationConfig& cfg, Rng& rng);

// Example k is generate_example with Rng(base_seed, k). Output does not
// depend on the thread count.
std::vector<DepthExample> generate_batch(const GenerationConfig& cfg,
                                         std::size_t count,
                                         std::uint64_t base_seed,
                                         int threads = 0);

}  // namespace odmd
