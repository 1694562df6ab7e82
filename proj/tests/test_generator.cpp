#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "odmd/errors.hpp"
#include "odmd/generator.hpp"
#include "odmd/presets.hpp"

using namespace odmd;

namespace {

// Kolmogorov-Smirnov statistic of a sample against U[lo, hi].
double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// alpha = 0.01
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

bool inside_image(const BoundingBox& b, const CameraIntrinsics& k) {
  const double slack = 1e-9;
  return b.x - b.w / 2 >= -slack && b.x + b.w / 2 <= k.width + slack &&
         b.y - b.h / 2 >= -slack && b.y + b.h / 2 <= k.height + slack;
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("path from a fixed displacement") {
  GenerationConfig cfg;
  cfg.n = 2;
  Rng rng(1, 0);
  const CameraPath path = camera_path_from(cfg, {0, 0, 0.1}, rng);
  REQUIRE(path.size() == 2);
  CHECK(path[0] == CameraPosition{0, 0, -0.1});
  CHECK(path[1] == CameraPosition{0, 0, 0});
}

TEST_CASE("paths end at the origin and move monotonically") {
  const GenerationConfig cfg;
  int bad_end = 0, bad_order = 0, bad_range = 0;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    Rng rng(5, i);
    const CameraPath p = sample_camera_path(cfg, rng);
    if (!(p.back() == CameraPosition{})) ++bad_end;
    for (int a = 0; a < 3; ++a) {
      const double d = std::abs(p.front()[a]);
      if (d < cfg.dp_min[a] || d > cfg.dp_max[a]) ++bad_range;
      const bool up = p.front()[a] <= 0.0;
      for (std::size_t j = 1; j < p.size(); ++j) {
        if (up ? p[j][a] < p[j - 1][a] : p[j][a] > p[j - 1][a]) {
          ++bad_order;
          break;
        }
      }
    }
  }
  CHECK(bad_end == 0);
  CHECK(bad_order == 0);
  CHECK(bad_range == 0);
}

TEST_CASE("clean boxes stay inside the image") {
  for (const char* name : {"normal", "normal-z"}) {
    CAPTURE(std::string(name));
    const GenerationConfig cfg = generation_preset(name);
    const auto batch = generate_batch(cfg, 100000, 77, 0);
    std::size_t outside = 0;
    for (const auto& ex : batch) {
      for (const auto& o : ex.obs) outside += !inside_image(o.box, ex.k);
    }
    CHECK(outside == 0);
  }
}

TEST_CASE("center bounds are symmetric for a centered principal point") {
  GenerationConfig cfg;
  cfg.k = {205.5, 205.5, 320.0, 240.0, 640, 480};
  for (double z : {0.6, 0.8, 1.0}) {
    const auto b = initial_center_bounds(cfg, z);
    CHECK(b.x_min == doctest::Approx(-b.x_max).epsilon(1e-14));
    CHECK(b.y_min == doctest::Approx(-b.y_max).epsilon(1e-14));
  }
}

TEST_CASE("minimum initial depth is where the centered object just fits") {
  for (const char* name : {"normal", "normal-z"}) {
    CAPTURE(std::string(name));
    const GenerationConfig cfg = generation_preset(name);
    const double z = min_initial_depth(cfg, 0, 0);
    const auto b = initial_center_bounds(cfg, z);
    CHECK(b.x_min <= 1e-12);
    CHECK(b.x_max >= -1e-12);
    CHECK(b.y_min <= 1e-12);
    CHECK(b.y_max >= -1e-12);
    // At least one side is tight.
    const double tight = std::min({std::abs(b.x_min), std::abs(b.x_max),
                                   std::abs(b.y_min), std::abs(b.y_max)});
    CHECK(tight < 1e-12);
    // Slightly closer is infeasible at the center.
    const auto closer = initial_center_bounds(cfg, z - 1e-6);
    CHECK((closer.x_min > 0 || closer.x_max < 0 || closer.y_min > 0 || closer.y_max < 0));
  }
}

TEST_CASE("reversal swaps the sequence and keeps the scene") {
  GenerationConfig fwd_cfg, rev_cfg;
  fwd_cfg.reverse_prob = 0.0;
  rev_cfg.reverse_prob = 1.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng a(9, i), b(9, i);
    const DepthExample fwd = generate_example(fwd_cfg, a);
    const DepthExample rev = generate_example(rev_cfg, b);
    REQUIRE(fwd.meta.object == rev.meta.object);
    CHECK_FALSE(fwd.meta.reversed);
    CHECK(rev.meta.reversed);
    const std::size_t n = fwd.obs.size();
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(rev.obs[j].box == fwd.obs[n - 1 - j].box);
      const CameraPosition d = fwd.obs[n - 1 - j].position - fwd.obs[0].position;
      CHECK(rev.obs[j].position.z == doctest::Approx(d.z).epsilon(1e-15));
    }
    CHECK(rev.obs.back().position == CameraPosition{0, 0, 0});
    CHECK(rev.label_z == rev.meta.object.z);
    CHECK(fwd.label_z == fwd.meta.object.z + fwd.obs[0].position.z);
  }
}

TEST_CASE("perturbations touch only their own quantities") {
  const GenerationConfig clean = generation_preset("normal");
  const GenerationConfig cam = generation_preset("perturb-camera");
  const GenerationConfig det = generation_preset("perturb-detect");
  const auto a = generate_batch(clean, 2000, 31, 1);
  const auto b = generate_batch(cam, 2000, 31, 1);
  const auto c = generate_batch(det, 2000, 31, 1);
  std::size_t moved_first = 0, moved_boxes = 0, moved_cams = 0, labels = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    labels += a[i].label_z != b[i].label_z || a[i].label_z != c[i].label_z;
    moved_first += !(a[i].obs[0].position == b[i].obs[0].position);
    for (std::size_t j = 0; j < a[i].obs.size(); ++j) {
      moved_boxes += !(a[i].obs[j].box == b[i].obs[j].box);
      moved_cams += !(a[i].obs[j].position == c[i].obs[j].position);
    }
  }
  CHECK(labels == 0);
  CHECK(moved_first == 0);
  CHECK(moved_boxes == 0);
  CHECK(moved_cams == 0);
}

TEST_CASE("noise statistics") {
  constexpr std::size_t kDraws = 1000000;
  SUBCASE("camera noise") {
    const double sigma = 1e-2;
    double sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::uint64_t i = 0; count < kDraws; ++i) {
      Rng rng(2, i);
      CameraPath path(10);
      perturb_camera(path, sigma, rng);
      CHECK(path[0] == CameraPosition{});
      for (std::size_t j = 1; j < path.size(); ++j) {
        for (int a = 0; a < 3; ++a) {
          sum += path[j][a];
          sq += path[j][a] * path[j][a];
          ++count;
        }
      }
    }
    const double mean = sum / count;
    const double sd = std::sqrt(sq / count - mean * mean);
    CHECK(std::abs(mean) < 0.01 * sigma);
    CHECK(std::abs(sd - sigma) < 0.01 * sigma);
  }
  SUBCASE("box noise") {
    PerturbConfig p;
    p.sigma_box = 1e-3;
    double sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::uint64_t i = 0; count < kDraws; ++i) {
      Rng rng(3, i);
      std::vector<BoundingBox> boxes(10, BoundingBox{0.5, 0.5, 0.2, 0.2});
      perturb_boxes(boxes, p, rng);
      for (const auto& b : boxes) {
        for (double d : {b.x - 0.5, b.y - 0.5, b.w - 0.2, b.h - 0.2}) {
          sum += d;
          sq += d * d;
          ++count;
        }
      }
    }
    const double mean = sum / count;
    const double sd = std::sqrt(sq / count - mean * mean);
    CHECK(std::abs(mean) < 0.01 * p.sigma_box);
    CHECK(std::abs(sd - p.sigma_box) < 0.01 * p.sigma_box);
  }
  SUBCASE("replacement rate") {
    PerturbConfig p;
    p.replace_prob = 0.1;
    std::size_t replaced = 0;
    const std::size_t trials = 200000;
    for (std::uint64_t i = 0; i < trials; ++i) {
      Rng rng(4, i);
      std::vector<BoundingBox> boxes(10, BoundingBox{0.5, 0.5, 0.2, 0.2});
      perturb_boxes(boxes, p, rng);
      for (const auto& b : boxes) replaced += !(b == BoundingBox{0.5, 0.5, 0.2, 0.2});
    }
    CHECK(std::abs(static_cast<double>(replaced) / trials - 0.1) < 0.001);
  }
}

TEST_CASE("certain replacement changes exactly one box") {
  GenerationConfig clean, swapped;
  swapped.perturb.replace_prob = 1.0;
  const auto a = generate_batch(clean, 1000, 12, 1);
  const auto b = generate_batch(swapped, 1000, 12, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t changed = 0;
    for (std::size_t j = 0; j < a[i].obs.size(); ++j) {
      changed += std::abs(a[i].obs[j].box.x - b[i].obs[j].box.x) > 1e-9 ||
                 std::abs(a[i].obs[j].box.w - b[i].obs[j].box.w) > 1e-9;
    }
    CHECK(changed == 1);
  }
}

TEST_CASE("generation is deterministic and independent of threads") {
  const GenerationConfig cfg = generation_preset("perturb-all");
  const auto one = generate_batch(cfg, 5000, 123, 1);
  const auto four = generate_batch(cfg, 5000, 123, 4);
  const auto again = generate_batch(cfg, 5000, 123, 1);
  CHECK(one == four);
  CHECK(one == again);
  CHECK_FALSE(one == generate_batch(cfg, 5000, 124, 1));

  Rng rng(123, 0);
  DepthExample single = generate_example(cfg, rng);
  single.meta.seed = 123;
  CHECK(generate_batch(cfg, 1, 123, 1).front() == single);
}

TEST_CASE("sampled quantities follow their uniform ranges") {
  const GenerationConfig cfg;
  const std::size_t n = 20000;
  const auto batch = generate_batch(cfg, n, 2024, 0);
  std::vector<double> w, h, z, dx, dy, dz;
  for (const auto& ex : batch) {
    w.push_back(ex.meta.object.width);
    h.push_back(ex.meta.object.height);
    z.push_back(ex.meta.object.z);
    const CameraPosition d = ex.obs.back().position - ex.obs[0].position;
    dx.push_back(std::abs(d.x));
    dy.push_back(std::abs(d.y));
    dz.push_back(std::abs(d.z));
  }
  const double crit = ks_critical(n);
  CHECK(ks_uniform(w, cfg.s_min, cfg.s_max) < crit);
  CHECK(ks_uniform(h, cfg.s_min, cfg.s_max) < crit);
  CHECK(ks_uniform(z, cfg.z1_min, cfg.z1_max) < crit);
  CHECK(ks_uniform(dx, cfg.dp_min.x, cfg.dp_max.x) < crit);
  CHECK(ks_uniform(dy, cfg.dp_min.y, cfg.dp_max.y) < crit);
  CHECK(ks_uniform(dz, cfg.dp_min.z, cfg.dp_max.z) < crit);
  // And a skewed sample is rejected.
  std::vector<double> skewed;
  for (double v : w) skewed.push_back(cfg.s_min + (v - cfg.s_min) * (v - cfg.s_min) / (cfg.s_max - cfg.s_min));
  CHECK(ks_uniform(skewed, cfg.s_min, cfg.s_max) > crit);
}

TEST_CASE("inconsistent configurations are rejected") {
  const auto bad = [](std::function<void(GenerationConfig&)> edit) {
    GenerationConfig cfg;
    edit(cfg);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  };
  bad([](auto& c) { c.n = 1; });
  bad([](auto& c) { c.s_min = 0.2; });
  bad([](auto& c) { c.s_min = 0.0; });
  bad([](auto& c) { c.dp_min.x = 0.3; });
  bad([](auto& c) { c.z1_min = 0.3; });
  bad([](auto& c) { c.z1_max = 0.5; });
  bad([](auto& c) { c.reverse_prob = 1.5; });
  bad([](auto& c) { c.perturb.sigma_cam = -1; });
  bad([](auto& c) { c.perturb.replace_prob = 2; });
  bad([](auto& c) { c.k.fx = 0; });
  bad([](auto& c) { c.s_max = 0.6; });  // no room in view
  CHECK_THROWS_AS(generate_batch(GenerationConfig{.n = 1}, 3, 0), ConfigError);
  for (const auto& name : generation_preset_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(generation_preset(name).validate());
  }
  CHECK_THROWS_AS(generation_preset("nope"), ConfigError);
}

}
