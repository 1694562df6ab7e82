#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "odmd/benchmark.hpp"
#include "odmd/errors.hpp"
#include "odmd/presets.hpp"
#include "odmd/solvers.hpp"

using namespace odmd;

namespace {

// Predicts the same depth for every example.
class ConstantMethod : public DepthMethod {
 public:
  explicit ConstantMethod(double z) : z_(z) {}
  std::string name() const override { return "constant"; }
  std::vector<Prediction> predict(std::span<const DepthExample> examples,
                                  int) const override {
    return std::vector<Prediction>(examples.size(), Prediction{z_, {}});
  }

 private:
  double z_;
};

PartialObservation seen(double x) { return {BoundingBox{x, x, 10, 10}, {0, 0, x}}; }
PartialObservation missed(double z) { return {std::nullopt, {0, 0, z}}; }

}  // namespace

TEST_SUITE("benchmark") {

TEST_CASE("percent and absolute error") {
  CHECK(percent_error(2.0, 2.0) == 0.0);
  CHECK(percent_error(1.0, 0.9) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(percent_error(0.5, 0.6) == doctest::Approx(20.0).epsilon(1e-14));
  CHECK_THROWS_AS(percent_error(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(percent_error(-1.0, 1.0), DomainError);
  CHECK(absolute_error(1.0, 1.0) == 0.0);
  CHECK(absolute_error(1.0, 0.9) == doctest::Approx(0.1).epsilon(1e-14));
  Rng rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(0.1, 2), b = rng.uniform(0.1, 2);
    CHECK(absolute_error(a, b) == absolute_error(b, a));
    CHECK(percent_error(a, b) > 0.0);
  }
}

TEST_CASE("missing detections borrow the nearest box") {
  SUBCASE("tie goes to the earlier index") {
    const std::vector<PartialObservation> in{seen(1), seen(2), missed(3), seen(4)};
    const ObservationSet out = fill_missing_detections(in);
    CHECK(out[2].box == in[1].box);
    CHECK(out[2].position == in[2].position);
    CHECK(out[3].box == in[3].box);
  }
  SUBCASE("nearest wins") {
    const std::vector<PartialObservation> in{seen(1), missed(2), missed(3),
                                             missed(4), seen(5)};
    const ObservationSet out = fill_missing_detections(in);
    CHECK(out[1].box == in[0].box);
    CHECK(out[2].box == in[0].box);
    CHECK(out[3].box == in[4].box);
  }
  SUBCASE("complete input is unchanged") {
    const std::vector<PartialObservation> in{seen(1), seen(2), seen(3)};
    const ObservationSet out = fill_missing_detections(in);
    for (std::size_t i = 0; i < in.size(); ++i) {
      CHECK(out[i].box == *in[i].box);
      CHECK(out[i].position == in[i].position);
    }
  }
  SUBCASE("a single detection fills everything") {
    std::vector<PartialObservation> in{seen(1)};
    for (int i = 2; i <= 10; ++i) in.push_back(missed(i));
    const ObservationSet out = fill_missing_detections(in);
    for (const auto& o : out) CHECK(o.box == *in[0].box);
  }
  SUBCASE("idempotent") {
    const std::vector<PartialObservation> in{missed(1), seen(2), missed(3),
                                             missed(4), seen(5), missed(6)};
    const ObservationSet once = fill_missing_detections(in);
    std::vector<PartialObservation> again;
    for (const auto& o : once) again.push_back({o.box, o.position});
    CHECK(fill_missing_detections(again) == once);
  }
  SUBCASE("nothing detected") {
    const std::vector<PartialObservation> in{missed(1), missed(2)};
    CHECK_THROWS_AS(fill_missing_detections(in), InputError);
  }
}

TEST_CASE("mask to box") {
  SUBCASE("single pixel") {
    BinaryMask m(64, 48);
    m.set(10, 20);
    CHECK(mask_to_box(m) == BoundingBox{10, 20, 1, 1});
  }
  SUBCASE("inclusive rectangle") {
    BinaryMask m(64, 48);
    for (std::size_t y = 10; y <= 30; ++y) {
      for (std::size_t x = 10; x <= 20; ++x) m.set(x, y);
    }
    CHECK(mask_to_box(m) == BoundingBox{15, 20, 11, 21});
  }
  SUBCASE("central fragment beats a small corner fragment") {
    BinaryMask m(100, 100);
    for (std::size_t y = 45; y < 55; ++y) {
      for (std::size_t x = 45; x < 55; ++x) m.set(x, y);
    }
    for (std::size_t x = 0; x < 5; ++x) m.set(x, 0);
    // Ratios: ~0 / 100 for the center blob against ~68 / 5 for the corner.
    CHECK(mask_to_box(m) == BoundingBox{49.5, 49.5, 10, 10});
    // Anchoring at the corner picks the corner fragment instead.
    CHECK(mask_to_box(m, Point2{2, 0}) == BoundingBox{2, 0, 5, 1});
  }
  SUBCASE("diagonal neighbours connect") {
    BinaryMask m(20, 20);
    m.set(5, 5);
    m.set(6, 6);
    m.set(7, 7);
    CHECK(mask_to_box(m) == BoundingBox{6, 6, 3, 3});
  }
  SUBCASE("empty") {
    CHECK_THROWS_AS(mask_to_box(BinaryMask(8, 8)), InputError);
  }
  SUBCASE("rasterized projections come back within a pixel") {
    const CameraIntrinsics k{205.5, 205.5, 320.5, 240.5, 640, 480};
    Rng rng(6, 0);
    for (int t = 0; t < 200; ++t) {
      const Object3D o{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                       rng.uniform(0.5, 1.0), rng.uniform(0.01, 0.17),
                       rng.uniform(0.01, 0.17)};
      const BoundingBox b = project_box(o, k);
      BinaryMask m(640, 480);
      for (std::size_t y = 0; y < 480; ++y) {
        for (std::size_t x = 0; x < 640; ++x) {
          if (std::abs(x - b.x) <= b.w / 2 && std::abs(y - b.y) <= b.h / 2) m.set(x, y);
        }
      }
      const BoundingBox r = mask_to_box(m);
      CHECK(std::abs(r.x - b.x) <= 1.0);
      CHECK(std::abs(r.y - b.y) <= 1.0);
      CHECK(std::abs(r.w - b.w) <= 1.0);
      CHECK(std::abs(r.h - b.h) <= 1.0);
    }
  }
  SUBCASE("netpbm files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto plain = dir / "odmd_test_mask.pbm";
    std::ofstream(plain) << "P1\n# comment\n5 4\n0 0 0 0 0\n0 1 1 0 0\n0 1 1 0 0\n0 0 0 0 0\n";
    CHECK(mask_to_box(load_mask_pnm(plain.string())) == BoundingBox{1.5, 1.5, 2, 2});
    const auto gray = dir / "odmd_test_mask.pgm";
    {
      std::ofstream out(gray, std::ios::binary);
      out << "P5 3 2 255\n";
      const unsigned char px[6] = {0, 0, 200, 0, 0, 17};
      out.write(reinterpret_cast<const char*>(px), 6);
    }
    CHECK(mask_to_box(load_mask_pnm(gray.string())) == BoundingBox{2, 0.5, 1, 2});
    std::filesystem::remove(plain);
    std::filesystem::remove(gray);
    CHECK_THROWS(load_mask_pnm((dir / "odmd_no_such_mask.pbm").string()));
  }
}

TEST_CASE("benchmark sets are fixed") {
  const BenchmarkSet test = make_benchmark_set("normal", Split::kTest, 0);
  const BenchmarkSet val = make_benchmark_set("normal", Split::kValidation, 0);
  CHECK(test.examples.size() == kTestSetSize);
  CHECK(val.examples.size() == kValidationSetSize);
  CHECK(test.seed != val.seed);
  CHECK(test.generator_version == kGeneratorVersion);
  CHECK(make_benchmark_set("normal", Split::kTest, 1).examples == test.examples);
  GenerationConfig cfg = test.config;
  CHECK(cfg.seed == test.seed);
  cfg.seed = 0;
  CHECK(cfg == generation_preset("normal"));
  CHECK(parse_split("validation") == Split::kValidation);
  CHECK(parse_split("test") == Split::kTest);
  CHECK(std::string(to_string(Split::kTest)) == "test");
  CHECK_THROWS_AS(parse_split("train"), ConfigError);
  CHECK_THROWS_AS(make_benchmark_set("unknown", Split::kTest), ConfigError);
  std::vector<std::uint64_t> seeds;
  for (const auto& name : generation_preset_names()) {
    for (Split s : {Split::kValidation, Split::kTest}) seeds.push_back(benchmark_seed(name, s));
  }
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{4, 1, 3, 2};
  const ErrorStats s = summarize(v);
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(summarize(std::vector<double>{7, 1, 3}).median == 3);
  const ErrorStats e = summarize({});
  CHECK(e.count == 0);
  CHECK(std::isnan(e.mean));
}

TEST_CASE("evaluation records failures and aggregates sets") {
  auto clean = generate_batch(generation_preset("normal"), 200, 3, 1);
  auto broken = clean;
  // No z motion at all: the least-squares system loses rank.
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<Observation> obs(broken[i].obs.begin(), broken[i].obs.end());
    for (auto& o : obs) o = obs.front();
    broken[i].obs = ObservationSet(obs);
  }
  const auto ls = make_solver_method("box-ls");
  const SetReport r = evaluate(*ls, "broken", broken, 2);
  CHECK(r.failures == 5);
  CHECK(r.percent.count == 195);
  CHECK(r.records.size() == 200);
  CHECK_FALSE(r.records[0].prediction);
  CHECK_FALSE(r.records[0].failure.empty());
  CHECK(r.percent.mean < 1e-9);

  const ConstantMethod constant(0.9);
  const std::vector<NamedExamples> sets{{"a", clean}, {"b", broken}};
  const EvalReport a = evaluate(*ls, sets, 1);
  const EvalReport c = evaluate(constant, sets, 1);
  CHECK(a.all_sets_mean == doctest::Approx((a.sets[0].percent.mean + a.sets[1].percent.mean) / 2));
  CHECK(c.all_sets_mean ==
        doctest::Approx((c.sets[0].percent.mean + c.sets[1].percent.mean) / 2).epsilon(1e-15));
  CHECK(evaluate(*ls, sets, 4).all_sets_mean == a.all_sets_mean);
  CHECK_THROWS_AS(make_solver_method("magic"), ConfigError);
}

TEST_CASE("a constant guess loses to least squares on clean data") {
  const auto set = make_benchmark_set("normal", Split::kTest, 0);
  double mean_label = 0;
  for (const auto& ex : set.examples) mean_label += ex.label_z;
  mean_label /= static_cast<double>(set.examples.size());
  const ConstantMethod constant(mean_label);
  const auto ls = make_solver_method("box-ls");
  const double c = evaluate(constant, "normal", set.examples).percent.mean;
  const double l = evaluate(*ls, "normal", set.examples).percent.mean;
  MESSAGE("constant " << c << "% vs box-ls " << l << "%");
  CHECK(l < c);
}

TEST_CASE("ensembles over subsequences") {
  const auto ls = make_solver_method("box-ls");
  SUBCASE("one trial is the direct prediction") {
    for (const auto& ex : make_benchmark_set("perturb-detect", Split::kTest, 0, 100).examples) {
      Rng rng(1, 0);
      const double direct = *ls->predict(std::span(&ex, 1))[0].depth;
      CHECK(ensemble_predict(*ls, ex, 1, rng) == direct);
    }
  }
  SUBCASE("clean data stays exact") {
    for (const auto& ex : make_benchmark_set("normal", Split::kTest, 0, 300).examples) {
      Rng rng(2, ex.meta.index);
      CHECK(percent_error(ex.label_z, ensemble_predict(*ls, ex, 15, rng)) < 1e-7);
    }
  }
  SUBCASE("two-observation cues work on pairs") {
    const auto ex = make_benchmark_set("normal", Split::kTest, 0, 20).examples;
    for (const char* name : {"expansion-2obs", "parallax-2obs"}) {
      const auto m = make_solver_method(name);
      for (const auto& e : ex) {
        Rng rng(3, e.meta.index);
        CHECK(percent_error(e.label_z, ensemble_predict(*m, e, 9, rng)) < 1e-6);
      }
    }
  }
  SUBCASE("the median helps against wrong detections") {
    const auto set = make_benchmark_set("perturb-detect", Split::kTest, 0);
    double single = 0, ensemble = 0;
    const auto direct = ls->predict(set.examples);
    for (std::size_t i = 0; i < set.examples.size(); ++i) {
      const auto& ex = set.examples[i];
      Rng rng(4, i);
      single += percent_error(ex.label_z, *direct[i].depth);
      ensemble += percent_error(ex.label_z, ensemble_predict(*ls, ex, 25, rng));
    }
    single /= set.examples.size();
    ensemble /= set.examples.size();
    MESSAGE("perturb-detect box-ls: single pass " << single << "%, ensemble of 25 "
                                                  << ensemble << "%");
    CHECK(ensemble <= single);
  }
  SUBCASE("zero trials") {
    const auto ex = make_benchmark_set("normal", Split::kTest, 0, 1).examples;
    Rng rng(0, 0);
    CHECK_THROWS_AS(ensemble_predict(*ls, ex[0], 0, rng), ContractError);
  }
}

}
