#include "odmd/geometry.hpp"

#include <cmath>
#include <string>

#include "odmd/errors.hpp"

namespace odmd {

void CameraIntrinsics::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(fx) || !positive(fy)) {
    throw ConfigError("intrinsics: focal lengths must be positive");
  }
  if (!positive(width) || !positive(height)) {
    throw ConfigError("intrinsics: image size must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw ConfigError("intrinsics: principal point must be finite");
  }
}

double distance(const CameraPosition& a, const CameraPosition& b) {
  const CameraPosition d = a - b;
  return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
}

ObservationSet::ObservationSet(std::vector<Observation> observations)
    : observations_(std::move(observations)) {
  if (observations_.size() < 2) {
    throw InputError("an observation set needs at least 2 observations, got " +
                     std::to_string(observations_.size()));
  }
}

ObservationSet::ObservationSet(std::initializer_list<Observation> observations)
    : ObservationSet(std::vector<Observation>(observations)) {}

Point2 project_point(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) {
    throw DomainError("project_point: depth must be positive");
  }
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

BoundingBox project_box(const Object3D& obj, const CameraIntrinsics& k) {
  const Point2 c = project_point({obj.x, obj.y, obj.z}, k);
  return {c.x, c.y, k.fx * obj.width / obj.z, k.fy * obj.height / obj.z};
}

Object3D displace_object(const Object3D& obj, const CameraPosition& from,
                         const CameraPosition& to) {
  const CameraPosition move = to - from;
  Object3D out = obj;
  out.x -= move.x;
  out.y -= move.y;
  out.z -= move.z;
  return out;
}

}  // namespace odmd
