#include "odmd/presets.hpp"

#include <array>
#include <string_view>

#include "odmd/benchmark.hpp"
#include "odmd/errors.hpp"

namespace odmd {
namespace {

constexpr double kCameraSigma = 1e-2;
constexpr double kBoxSigma = 1e-3;
constexpr double kReplaceProb = 0.1;

// Optical-axis-only motion with the wider field of view. The smallest
// initial depth moves up from 0.55 m because the y range of initial centers
// is empty at exactly 0.55 m for these intrinsics.
GenerationConfig z_axis(GenerationConfig cfg) {
  cfg.dp_min = {0.0, 0.0, 0.05};
  cfg.dp_max = {0.0, 0.0, 0.4625};
  cfg.k.fx = 240.5;
  cfg.k.fy = 240.5;
  cfg.z1_min = 0.5502;
  return cfg;
}

struct SetEntry {
  std::string_view name;
  std::uint64_t validation_seed;
  std::uint64_t test_seed;
};

constexpr std::array<SetEntry, 8> kSets{{
    {"normal", 1101, 2101},
    {"perturb-camera", 1102, 2102},
    {"perturb-detect", 1103, 2103},
    {"perturb-all", 1104, 2104},
    {"normal-z", 1201, 2201},
    {"perturb-camera-z", 1202, 2202},
    {"perturb-detect-z", 1203, 2203},
    {"perturb-all-z", 1204, 2204},
}};

const SetEntry& find_set(const std::string& name) {
  for (const auto& e : kSets) {
    if (e.name == name) return e;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace

GenerationConfig generation_preset(const std::string& name) {
  find_set(name);
  const bool z = name.ends_with("-z");
  const std::string base = z ? name.substr(0, name.size() - 2) : name;

  GenerationConfig cfg;
  if (base == "perturb-camera" || base == "perturb-all") {
    cfg.perturb.sigma_cam = kCameraSigma;
  }
  if (base == "perturb-detect" || base == "perturb-all") {
    cfg.perturb.sigma_box = kBoxSigma;
    cfg.perturb.replace_prob = kReplaceProb;
  }
  return z ? z_axis(cfg) : cfg;
}

std::vector<std::string> generation_preset_names() {
  std::vector<std::string> out;
  for (const auto& e : kSets) out.emplace_back(e.name);
  return out;
}

std::uint64_t benchmark_seed(const std::string& name, Split split) {
  const SetEntry& e = find_set(name);
  return split == Split::kValidation ? e.validation_seed : e.test_seed;
}

namespace {

struct TrainEntry {
  std::string_view name;
  std::string_view gen;
  LossMode mode;
  std::size_t iterations;
  std::uint64_t seed;
};

constexpr std::array<TrainEntry, 8> kTrain{{
    {"dbox-p", "perturb-all", LossMode::kRel, 10'000'000, 11},
    {"dbox-ns", "normal", LossMode::kRel, 10'000'000, 12},
    {"dbox-abs", "perturb-all", LossMode::kAbs, 10'000'000, 13},
    {"dbox-p-1m", "perturb-all", LossMode::kRel, 1'000'000, 14},
    {"dbox-p-100k", "perturb-all", LossMode::kRel, 100'000, 15},
    {"dbox-p-z", "perturb-all-z", LossMode::kRel, 10'000, 21},
    {"dbox-ns-z", "normal-z", LossMode::kRel, 10'000, 22},
    {"dbox-abs-z", "perturb-all-z", LossMode::kAbs, 10'000, 23},
}};

constexpr std::size_t kDeskBatch = 128;
constexpr std::size_t kDeskFullMotionIterations = 10'000;
constexpr std::size_t kDeskZIterations = 2'000;

}  // namespace

TrainConfig train_preset(const std::string& name) {
  const bool desk = name.ends_with("-desk");
  const std::string base = desk ? name.substr(0, name.size() - 5) : name;
  for (const auto& e : kTrain) {
    if (e.name != base) continue;
    TrainConfig cfg;
    cfg.name = name;
    cfg.gen = generation_preset(std::string(e.gen));
    cfg.gen.seed = e.seed;
    cfg.loss_mode = e.mode;
    cfg.iterations = e.iterations;
    cfg.batch_size = 512;
    cfg.seed = e.seed;
    const bool z = e.gen.ends_with("-z");
    cfg.validation_sets = z ? std::vector<std::string>{"normal-z", "perturb-camera-z",
                                                       "perturb-detect-z"}
                            : std::vector<std::string>{"normal", "perturb-camera",
                                                       "perturb-detect"};
    if (desk) {
      cfg.batch_size = kDeskBatch;
      cfg.iterations = z ? kDeskZIterations : kDeskFullMotionIterations;
    }
    return cfg;
  }
  throw ConfigError("unknown training preset '" + name + "'");
}

std::vector<std::string> train_preset_names() {
  std::vector<std::string> out;
  for (const auto& e : kTrain) out.emplace_back(e.name);
  for (const auto& e : kTrain) out.push_back(std::string(e.name) + "-desk");
  return out;
}

}  // namespace odmd
