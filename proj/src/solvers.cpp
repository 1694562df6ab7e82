#include "odmd/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "odmd/errors.hpp"

namespace odmd {
namespace {

double scale_of(const BoundingBox& b, ScaleSource source) {
  return source == ScaleSource::kWidth ? b.w : b.h;
}

}  // namespace

DepthSolution depth_optical_expansion(const Observation& obs_i,
                                      const Observation& obs_j,
                                      ScaleSource source) {
  const double ratio = scale_of(obs_i.box, source) / scale_of(obs_j.box, source);
  const double denom = 1.0 - ratio;
  if (!(std::abs(denom) >= kExpansionEpsilon)) {
    throw DegenerateGeometry("insufficient optical expansion", std::abs(denom));
  }
  DepthSolution out;
  out.z = (obs_j.position.z - obs_i.position.z) / denom;
  out.condition = std::abs(denom);
  return out;
}

DepthSolution depth_motion_parallax(const Observation& obs_i,
                                    const Observation& obs_j,
                                    const CameraIntrinsics& k,
                                    ParallaxAxis axis, ScaleSource source) {
  const bool lateral = axis == ParallaxAxis::kX;
  const double focal = lateral ? k.fx : k.fy;
  const double center = lateral ? k.cx : k.cy;
  const double ci = lateral ? obs_i.position.x : obs_i.position.y;
  const double cj = lateral ? obs_j.position.x : obs_j.position.y;
  const double ui = (lateral ? obs_i.box.x : obs_i.box.y) - center;
  const double uj = (lateral ? obs_j.box.x : obs_j.box.y) - center;

  const double ratio = scale_of(obs_i.box, source) / scale_of(obs_j.box, source);
  const double denom = uj * ratio - ui;
  // Relative to the magnitude of the terms, so that cancellation noise from
  // zero motion is caught irrespective of where the box sits.
  const double scale = std::max({1.0, std::abs(ui), std::abs(uj * ratio)});
  if (!(std::abs(denom) >= kParallaxEpsilon * scale)) {
    throw DegenerateGeometry("insufficient motion parallax", std::abs(denom));
  }
  DepthSolution out;
  out.z = focal * (ci - cj) / denom;
  out.condition = std::abs(denom);
  return out;
}

DepthSolution depth_box_ls(const ObservationSet& obs,
                           std::optional<std::size_t> query) {
  const std::size_t n = obs.size();
  const std::size_t qi = query.value_or(n - 1);
  if (qi >= n) {
    throw ContractError("depth_box_ls: query index " + std::to_string(qi) +
                        " out of range for " + std::to_string(n) +
                        " observations");
  }
  const double cz_query = obs[qi].position.z;

  Eigen::Matrix<double, Eigen::Dynamic, 3> a(2 * n, 3);
  Eigen::VectorXd b(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    const BoundingBox& box = obs[j].box;
    const double dz = obs[j].position.z - cz_query;
    const auto r = static_cast<Eigen::Index>(2 * j);
    a.row(r) << box.w, 1.0, 0.0;
    a.row(r + 1) << box.h, 0.0, 1.0;
    b(r) = box.w * dz;
    b(r + 1) = box.h * dz;
  }

  const Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 3>> qr(a);
  const Eigen::Matrix3d r =
      qr.matrixQR().topRows<3>().triangularView<Eigen::Upper>();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(r).singularValues();
  const double condition =
      sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
  if (!(sv(2) >= kRankEpsilon * sv(0))) {
    throw DegenerateGeometry(
        "least-squares system is rank deficient (no z-axis motion?)",
        condition);
  }

  const Eigen::Vector3d x = qr.solve(b);
  DepthSolution out;
  out.z = x(0);
  out.fx_width = -x(1);
  out.fy_height = -x(2);
  out.condition = condition;
  return out;
}

DepthSolution depth_endpoint_average(const ObservationSet& obs, DepthCue cue,
                                     const std::optional<CameraIntrinsics>& k) {
  if (cue == DepthCue::kParallax && !k) {
    throw ContractError("motion parallax needs camera intrinsics");
  }
  const Observation& last = obs.back();
  const Observation& first = obs[0];

  double sum = 0.0;
  int used = 0;
  std::string failure;
  auto attempt = [&](auto&& solve) {
    try {
      sum += solve().z;
      ++used;
    } catch (const DegenerateGeometry& e) {
      failure = e.what();
    }
  };
  if (cue == DepthCue::kExpansion) {
    attempt([&] { return depth_optical_expansion(last, first, ScaleSource::kWidth); });
    attempt([&] { return depth_optical_expansion(last, first, ScaleSource::kHeight); });
  } else {
    attempt([&] {
      return depth_motion_parallax(last, first, *k, ParallaxAxis::kX,
                                   ScaleSource::kWidth);
    });
    attempt([&] {
      return depth_motion_parallax(last, first, *k, ParallaxAxis::kY,
                                   ScaleSource::kHeight);
    });
  }
  if (used == 0) throw DegenerateGeometry(failure);

  DepthSolution out;
  out.z = sum / used;
  out.condition = used;
  return out;
}

}  // namespace odmd
