#pragma once

#include <string>
#include <vector>

#include "odmd/generator.hpp"
#include "odmd/trainer.hpp"

namespace odmd {

// Identifies the generation algorithm; stored as provenance with datasets.
inline constexpr const char* kGeneratorVersion = "odmd-gen-1";

// Built-in generation configs: normal, perturb-camera, perturb-detect,
// perturb-all (all three perturbations, used for training) and their
// "-z" counterparts restricted to optical-axis motion. Throws ConfigError
// for an unknown name.
GenerationConfig generation_preset(const std::string& name);
std::vector<std::string> generation_preset_names();

// Built-in training configs (dbox-p, dbox-ns, dbox-abs, dbox-p-1m,
// dbox-p-100k, dbox-p-z, dbox-ns-z, dbox-abs-z) and a "-desk" variant of
// each with batch 128 and at most 1e4 iterations.
TrainConfig train_preset(const std::string& name);
std::vector<std::string> train_preset_names();

}  // namespace odmd
