#pragma once

#include <cstddef>
#include <optional>

#include "odmd/geometry.hpp"

namespace odmd {

struct DepthSolution {
  double z = 0.0;
  // Recovered fx*W and fy*H (pixel meters); only set by the least-squares
  // solver.
  std::optional<double> fx_width;
  std::optional<double> fy_height;
  // Solver-specific diagnostic: condition number for least squares, number
  // of usable variants for the endpoint average, |denominator| for the
  // two-observation cues.
  double condition = 0.0;
};

enum class ScaleSource { kWidth, kHeight };
enum class ParallaxAxis { kX, kY };
enum class DepthCue { kExpansion, kParallax };

// Thresholds below which the geometry is treated as degenerate.
inline constexpr double kExpansionEpsilon = 1e-9;
inline constexpr double kParallaxEpsilon = 1e-9;
inline constexpr double kRankEpsilon = 1e-10;

// Depth at obs_i from the change in box scale between obs_i and obs_j:
// Z_i = (C_Zj - C_Zi) / (1 - s_i / s_j).
DepthSolution depth_optical_expansion(const Observation& obs_i,
                                      const Observation& obs_j,
                                      ScaleSource source = ScaleSource::kWidth);

// Depth at obs_i from the lateral (or vertical) shift of the box center,
// corrected for any scale change between the two observations.
DepthSolution depth_motion_parallax(const Observation& obs_i,
                                    const Observation& obs_j,
                                    const CameraIntrinsics& k,
                                    ParallaxAxis axis,
                                    ScaleSource source = ScaleSource::kWidth);

// Least-squares depth at obs[query] from all widths and heights. Solves the
// stacked 2n x 3 system for (Z, -fx W, -fy H) by Householder QR; the rank is
// checked on the singular values of R. query defaults to the last index.
DepthSolution depth_box_ls(const ObservationSet& obs,
                           std::optional<std::size_t> query = std::nullopt);

// Two-observation estimate at the last observation against the first,
// averaging the width/height (expansion) or x/y (parallax) variants. A
// single degenerate variant is dropped; if both are, DegenerateGeometry.
DepthSolution depth_endpoint_average(
    const ObservationSet& obs, DepthCue cue,
    const std::optional<CameraIntrinsics>& k = std::nullopt);

}  // namespace odmd
