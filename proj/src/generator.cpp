#include "odmd/generator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "odmd/errors.hpp"
#include "odmd/parallel.hpp"

namespace odmd {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("generation config: " + what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void GenerationConfig::validate() const {
  k.validate();
  require(n >= 2, "n must be at least 2");
  require(std::isfinite(s_min) && s_min > 0.0, "s_min must be positive");
  require(std::isfinite(s_max) && s_min <= s_max, "s_min must not exceed s_max");
  for (int a = 0; a < 3; ++a) {
    require(finite_nonneg(dp_min[a]), "dp_min components must be >= 0");
    require(std::isfinite(dp_max[a]) && dp_min[a] <= dp_max[a],
            "dp_min must not exceed dp_max");
  }
  require(std::isfinite(z1_min) && std::isfinite(z1_max) && z1_min <= z1_max,
          "z1_min must not exceed z1_max");
  require(z1_min - dp_max.z > 0.0,
          "z1_min must exceed the largest z movement (object behind camera)");
  require(reverse_prob >= 0.0 && reverse_prob <= 1.0,
          "reverse_prob must be in [0, 1]");
  require(finite_nonneg(perturb.sigma_cam), "sigma_cam must be >= 0");
  require(finite_nonneg(perturb.sigma_box), "sigma_box must be >= 0");
  require(perturb.replace_prob >= 0.0 && perturb.replace_prob <= 1.0,
          "replace_prob must be in [0, 1]");
  const auto& r = perturb.replacement;
  require(r.center_min <= r.center_max && r.size_min <= r.size_max &&
              r.size_min > 0.0,
          "replacement box ranges are inconsistent");

  // Bounds grow with Z1, so feasibility at z1_min covers the whole range.
  const InitialCenterBounds b = initial_center_bounds(*this, z1_min);
  require(b.x_min <= b.x_max,
          "no initial x keeps the object in view at z1_min (x range [" +
              std::to_string(b.x_min) + ", " + std::to_string(b.x_max) + "])");
  require(b.y_min <= b.y_max,
          "no initial y keeps the object in view at z1_min (y range [" +
              std::to_string(b.y_min) + ", " + std::to_string(b.y_max) + "])");
}

InitialCenterBounds initial_center_bounds(const GenerationConfig& cfg,
                                          double z1) {
  const CameraIntrinsics& k = cfg.k;
  const double half = cfg.s_max / 2.0;
  const double approach = z1 - cfg.dp_max.z;
  InitialCenterBounds b;
  b.x_min = (k.cx / k.fx) * (-approach) + cfg.dp_max.x + half;
  b.y_min = (k.cy / k.fy) * (-approach) + cfg.dp_max.y + half;
  b.x_max = ((k.width - k.cx) / k.fx) * approach - cfg.dp_max.x - half;
  b.y_max = ((k.height - k.cy) / k.fy) * approach - cfg.dp_max.y - half;
  return b;
}

double min_initial_depth(const GenerationConfig& cfg, double x1, double y1) {
  const CameraIntrinsics& k = cfg.k;
  const double half = cfg.s_max / 2.0;
  const double reach_x = half + cfg.dp_max.x;
  const double reach_y = half + cfg.dp_max.y;
  return cfg.dp_max.z + std::max({(k.fx / k.cx) * (reach_x - x1),
                                  (k.fy / k.cy) * (reach_y - y1),
                                  (k.fx / (k.width - k.cx)) * (reach_x + x1),
                                  (k.fy / (k.height - k.cy)) * (reach_y + y1)});
}

CameraPath camera_path_from(const GenerationConfig& cfg,
                            const CameraPosition& delta, Rng& rng) {
  const std::size_t n = cfg.n;
  CameraPath path(n);
  const CameraPosition first{-delta.x, -delta.y, -delta.z};
  path.front() = first;
  path.back() = CameraPosition{};
  for (std::size_t i = 1; i + 1 < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      path[i][a] = first[a] + (0.0 - first[a]) * rng.uniform();
    }
  }
  // Monotonic from p_1 to p_n = 0 along every axis.
  for (int a = 0; a < 3; ++a) {
    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i) axis[i] = path[i][a];
    if (delta[a] >= 0.0) {
      std::sort(axis.begin() + 1, axis.end() - 1);
    } else {
      std::sort(axis.begin() + 1, axis.end() - 1, std::greater<>());
    }
    for (std::size_t i = 1; i + 1 < n; ++i) path[i][a] = axis[i];
  }
  return path;
}

CameraPath sample_camera_path(const GenerationConfig& cfg, Rng& rng) {
  CameraPosition delta;
  for (int a = 0; a < 3; ++a) {
    const double magnitude = rng.uniform(cfg.dp_min[a], cfg.dp_max[a]);
    delta[a] = magnitude * rng.rademacher();
  }
  return camera_path_from(cfg, delta, rng);
}

Object3D sample_object(const GenerationConfig& cfg, Rng& rng) {
  Object3D obj;
  obj.width = rng.uniform(cfg.s_min, cfg.s_max);
  obj.height = rng.uniform(cfg.s_min, cfg.s_max);
  obj.z = rng.uniform(cfg.z1_min, cfg.z1_max);
  const InitialCenterBounds b = initial_center_bounds(cfg, obj.z);
  if (b.x_min > b.x_max || b.y_min > b.y_max) {
    throw ConfigError("initial object center bounds are empty at Z1 = " +
                      std::to_string(obj.z));
  }
  obj.x = rng.uniform(b.x_min, b.x_max);
  obj.y = rng.uniform(b.y_min, b.y_max);
  return obj;
}

void perturb_camera(CameraPath& path, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (std::size_t i = 1; i < path.size(); ++i) {
    for (int a = 0; a < 3; ++a) path[i][a] += rng.normal(sigma);
  }
}

void perturb_boxes(std::vector<BoundingBox>& normalized,
                   const PerturbConfig& cfg, Rng& rng) {
  if (cfg.sigma_box > 0.0) {
    for (BoundingBox& b : normalized) {
      b.x += rng.normal(cfg.sigma_box);
      b.y += rng.normal(cfg.sigma_box);
      b.w = std::max(b.w + rng.normal(cfg.sigma_box), kMinNormalizedBoxSize);
      b.h = std::max(b.h + rng.normal(cfg.sigma_box), kMinNormalizedBoxSize);
    }
  }
  if (cfg.replace_prob > 0.0 && rng.bernoulli(cfg.replace_prob)) {
    const auto& r = cfg.replacement;
    BoundingBox& b = normalized[rng.index(normalized.size())];
    b.x = rng.uniform(r.center_min, r.center_max);
    b.y = rng.uniform(r.center_min, r.center_max);
    b.w = rng.uniform(r.size_min, r.size_max);
    b.h = rng.uniform(r.size_min, r.size_max);
  }
}

DepthExample generate_example(const GenerationConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.n;
  CameraPath path = sample_camera_path(cfg, rng);
  const Object3D object = sample_object(cfg, rng);

  std::vector<BoundingBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    boxes[i] = project_box(displace_object(object, path.front(), path[i]), cfg.k);
  }
  double label = object.z - (path.back().z - path.front().z);

  const bool reversed = rng.bernoulli(cfg.reverse_prob);
  if (reversed) {
    std::reverse(boxes.begin(), boxes.end());
    std::reverse(path.begin(), path.end());
    const CameraPosition anchor = path.back();
    for (CameraPosition& p : path) p = p - anchor;
    label = object.z;
  }

  perturb_camera(path, cfg.perturb.sigma_cam, rng);
  if (cfg.perturb.boxes_enabled()) {
    const double iw = cfg.k.width;
    const double ih = cfg.k.height;
    for (BoundingBox& b : boxes) b = {b.x / iw, b.y / ih, b.w / iw, b.h / ih};
    perturb_boxes(boxes, cfg.perturb, rng);
    for (BoundingBox& b : boxes) b = {b.x * iw, b.y * ih, b.w * iw, b.h * ih};
  }

  std::vector<Observation> obs(n);
  for (std::size_t i = 0; i < n; ++i) obs[i] = {boxes[i], path[i]};

  DepthExample ex;
  ex.obs = ObservationSet(std::move(obs));
  ex.k = cfg.k;
  ex.label_z = label;
  ex.meta.object = object;
  ex.meta.reversed = reversed;
  return ex;
}

std::vector<DepthExample> generate_batch(const GenerationConfig& cfg,
                                         std::size_t count,
                                         std::uint64_t base_seed,
                                         int threads) {
  if (count == 0) throw ContractError("generate_batch: count must be >= 1");
  cfg.validate();
  std::vector<DepthExample> out(count);
  parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(base_seed, i);
      out[i] = generate_example(cfg, rng);
      out[i].meta.seed = base_seed;
      out[i].meta.index = i;
    }
  });
  return out;
}

}  // namespace odmd
