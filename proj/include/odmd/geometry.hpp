#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace odmd {

// Pinhole intrinsics in pixels. Image coordinates are continuous; no
// rounding happens anywhere in projection.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double width = 1.0;
  double height = 1.0;

  // Throws ConfigError unless fx, fy, width, height are positive and finite.
  void validate() const;

  friend bool operator==(const CameraIntrinsics&,
                         const CameraIntrinsics&) = default;
};

// Camera position in meters, axes aligned with the camera frame.
struct CameraPosition {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  double& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }

  friend CameraPosition operator+(CameraPosition a, const CameraPosition& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend CameraPosition operator-(CameraPosition a, const CameraPosition& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend CameraPosition operator*(double s, const CameraPosition& p) {
    return {s * p.x, s * p.y, s * p.z};
  }
  friend bool operator==(const CameraPosition&,
                         const CameraPosition&) = default;
};

// Euclidean norm of a position difference.
double distance(const CameraPosition& a, const CameraPosition& b);

// Box center (x, y) and size (w, h) in pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Observation {
  BoundingBox box;
  CameraPosition position;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Ordered observations of one object; always at least two.
class ObservationSet {
 public:
  ObservationSet() = default;
  // Throws InputError when fewer than two observations are given.
  explicit ObservationSet(std::vector<Observation> observations);
  ObservationSet(std::initializer_list<Observation> observations);

  std::size_t size() const { return observations_.size(); }
  const Observation& operator[](std::size_t i) const { return observations_[i]; }
  Observation& operator[](std::size_t i) { return observations_[i]; }
  const Observation& back() const { return observations_.back(); }
  std::span<const Observation> view() const { return observations_; }

  auto begin() const { return observations_.begin(); }
  auto end() const { return observations_.end(); }
  auto begin() { return observations_.begin(); }
  auto end() { return observations_.end(); }

  friend bool operator==(const ObservationSet&,
                         const ObservationSet&) = default;

 private:
  std::vector<Observation> observations_;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Fronto-parallel W x H rectangle centered at (X, Y, Z) in the camera frame.
struct Object3D {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
  double width = 0.1;
  double height = 0.1;

  friend bool operator==(const Object3D&, const Object3D&) = default;
};

// x = fx X / Z + cx, y = fy Y / Z + cy. Throws DomainError when Z <= 0.
Point2 project_point(const Point3& p, const CameraIntrinsics& k);

// Box of the rectangle seen from the origin: w = fx W / Z, h = fy H / Z.
BoundingBox project_box(const Object3D& obj, const CameraIntrinsics& k);

// The object as seen after the camera moves from `from` to `to`; the object
// is static so its camera-frame position shifts by -(to - from).
Object3D displace_object(const Object3D& obj, const CameraPosition& from,
                         const CameraPosition& to);

}  // namespace odmd
