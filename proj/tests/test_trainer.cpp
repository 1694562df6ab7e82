#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "odmd/errors.hpp"
#include "odmd/presets.hpp"
#include "odmd/trainer.hpp"

using namespace odmd;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.name = "tiny";
  cfg.shape = {10, 8, 16, 2};
  cfg.iterations = 200;
  cfg.batch_size = 32;
  cfg.seed = 5;
  cfg.validation_sets = {"normal"};
  cfg.validation_size = 100;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("adam leaves parameters alone under a zero gradient") {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g(3, 0.0);
  AdamState state;
  adam_step<double>(p, g, state, AdamConfig{});
  CHECK(p == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(state.step == 1);
  CHECK(state.m == std::vector<double>(3, 0.0));
  CHECK(state.v == std::vector<double>(3, 0.0));
}

TEST_CASE("adam takes a learning-rate sized first step") {
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  AdamState state;
  const AdamConfig cfg;
  adam_step<double>(p, g, state, cfg);
  // m_hat = v_hat = 1 after bias correction.
  CHECK(p[0] == doctest::Approx(-cfg.lr / (1.0 + cfg.eps)).epsilon(1e-14));
  // Same magnitude for any gradient scale.
  std::vector<double> q{0.0};
  AdamState s2;
  adam_step<double>(q, std::vector<double>{-250.0}, s2, cfg);
  CHECK(q[0] == doctest::Approx(cfg.lr).epsilon(1e-10));
}

TEST_CASE("adam rejects mismatched shapes") {
  std::vector<float> p(3, 0.f);
  const std::vector<float> g(4, 0.f);
  AdamState state;
  CHECK_THROWS_AS(adam_step<float>(p, g, state, AdamConfig{}), ContractError);
  const std::vector<float> g3(3, 0.f);
  adam_step<float>(p, g3, state, AdamConfig{});
  std::vector<float> p5(5, 0.f);
  const std::vector<float> g5(5, 0.f);
  CHECK_THROWS_AS(adam_step<float>(p5, g5, state, AdamConfig{}), ContractError);
}

TEST_CASE("training is reproducible and keeps the best checkpoint") {
  const TrainConfig cfg = tiny_config();
  const TrainResult a = train(cfg, 1);
  const TrainResult b = train(cfg, 1);
  const TrainResult c = train(cfg, 4);

  CHECK(a.losses == b.losses);
  CHECK(a.best.params == b.best.params);
  CHECK(a.losses == c.losses);
  CHECK(a.best.params == c.best.params);

  REQUIRE(a.log.size() == 100);
  CHECK(a.log.front().iteration == 2);
  CHECK(a.log.back().iteration == 200);
  const auto best = std::min_element(a.log.begin(), a.log.end(), [](auto& x, auto& y) {
    return x.val_error < y.val_error;
  });
  CHECK(a.best_val_error == best->val_error);
  CHECK(a.best_iteration == best->iteration);

  const ValidationData data = make_validation_data(cfg, 1);
  CHECK(validation_error(a.best, data, 1) == a.best_val_error);
  CHECK(validation_error(a.best, data, 3) == a.best_val_error);

  const auto path = std::filesystem::temp_directory_path() / "odmd_test_trainer.ckpt";
  save_checkpoint(a.best, path.string());
  CHECK(validation_error(load_checkpoint(path.string()), data, 1) == a.best_val_error);
  std::filesystem::remove(path);

  TrainConfig other = cfg;
  other.seed = 6;
  CHECK_FALSE(train(other, 1).losses == a.losses);
}

TEST_CASE("explicit check interval") {
  TrainConfig cfg = tiny_config();
  cfg.iterations = 30;
  cfg.checkpoint_every = 7;
  std::vector<std::size_t> seen;
  const TrainResult r = train(cfg, 1, [&](const TrainLogRecord& rec) {
    seen.push_back(rec.iteration);
  });
  CHECK(seen == std::vector<std::size_t>{7, 14, 21, 28});
  CHECK(r.log.size() == 4);
  CHECK(r.losses.size() == 30);
}

TEST_CASE("a diverging run aborts") {
  TrainConfig cfg = tiny_config();
  cfg.adam.lr = 1e30;
  cfg.iterations = 20;
  CHECK_THROWS_AS(train(cfg, 1), NumericError);
}

TEST_CASE("invalid training configs") {
  TrainConfig cfg = tiny_config();
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.adam.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.shape.n = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.validation_sets = {"no-such-set"};
  CHECK_THROWS_AS(train(cfg, 1), ConfigError);
}

TEST_CASE("loss falls during z-axis training") {
  // Full-size network on clean z-axis data; compare the batch loss at
  // iteration 1000 against iteration 10, median over five seeds.
  std::vector<double> early, late;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg = train_preset("dbox-ns-z");
    cfg.iterations = 1000;
    cfg.batch_size = 128;
    cfg.seed = seed;
    cfg.validation_sets = {"normal-z"};
    cfg.validation_size = 20;
    const TrainResult r = train(cfg, 0);
    MESSAGE("seed " << seed << ": loss@10 " << r.losses[9] << ", loss@1000 "
                    << r.losses[999]);
    early.push_back(r.losses[9]);
    late.push_back(r.losses[999]);
  }
  std::nth_element(early.begin(), early.begin() + 2, early.end());
  std::nth_element(late.begin(), late.begin() + 2, late.end());
  CHECK(late[2] < early[2]);
}

TEST_CASE("named presets") {
  const auto check = [](const char* name, const char* gen, LossMode mode,
                        std::size_t iterations) {
    CAPTURE(std::string(name));
    const TrainConfig cfg = train_preset(name);
    CHECK(cfg.loss_mode == mode);
    CHECK(cfg.iterations == iterations);
    CHECK(cfg.batch_size == 512);
    CHECK(cfg.adam.lr == 1e-3);
    CHECK(cfg.adam.beta1 == 0.9);
    CHECK(cfg.adam.beta2 == 0.999);
    CHECK(cfg.adam.eps == 1e-8);
    CHECK(cfg.shape == NetworkShape{10, 128, 256, 6});
    CHECK(cfg.check_interval() == iterations / 100);
    CHECK(cfg.validation_size == 2400);
    CHECK_NOTHROW(cfg.validate());
    GenerationConfig g = cfg.gen;
    g.seed = 0;
    CHECK(g == generation_preset(gen));
  };
  check("dbox-p", "perturb-all", LossMode::kRel, 10'000'000);
  check("dbox-ns", "normal", LossMode::kRel, 10'000'000);
  check("dbox-abs", "perturb-all", LossMode::kAbs, 10'000'000);
  check("dbox-p-1m", "perturb-all", LossMode::kRel, 1'000'000);
  check("dbox-p-100k", "perturb-all", LossMode::kRel, 100'000);
  check("dbox-p-z", "perturb-all-z", LossMode::kRel, 10'000);
  check("dbox-ns-z", "normal-z", LossMode::kRel, 10'000);
  check("dbox-abs-z", "perturb-all-z", LossMode::kAbs, 10'000);

  const TrainConfig z = train_preset("dbox-ns-z");
  CHECK(z.gen.dp_max == CameraPosition{0, 0, 0.4625});
  CHECK(z.gen.k.fx == 240.5);
  CHECK(z.gen.k.fy == 240.5);
  CHECK(z.validation_sets ==
        std::vector<std::string>{"normal-z", "perturb-camera-z", "perturb-detect-z"});

  const TrainConfig desk = train_preset("dbox-p-z-desk");
  CHECK(desk.batch_size == 128);
  CHECK(desk.iterations == 2000);
  CHECK(desk.gen == train_preset("dbox-p-z").gen);
  CHECK(train_preset("dbox-p-desk").iterations == 10'000);
  CHECK(train_preset_names().size() == 16);
  CHECK_THROWS_AS(train_preset("dbox-q"), ConfigError);
}

}
