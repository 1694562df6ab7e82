#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "odmd/generator.hpp"
#include "odmd/network.hpp"

namespace odmd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update. Moments are kept in double. An empty
// state is sized on first use; any other size mismatch is a ContractError.
template <typename S>
void adam_step(std::span<S> params, std::span<const S> grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
  std::string name = "custom";
  GenerationConfig gen;
  LossMode loss_mode = LossMode::kRel;
  NetworkShape shape;
  std::size_t iterations = 10000;
  std::size_t batch_size = 512;
  AdamConfig adam;
  // Iterations between validation checks; 0 means iterations / 100.
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 1;
  // Benchmark set names whose validation splits select the best checkpoint.
  std::vector<std::string> validation_sets{"normal", "perturb-camera",
                                           "perturb-detect"};
  std::size_t validation_size = 2400;

  std::size_t check_interval() const;
  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainLogRecord {
  std::size_t iteration = 0;
  double loss = 0.0;       // training loss of the batch at this iteration
  double val_error = 0.0;  // mean over validation sets of mean percent error
};

struct TrainResult {
  Model best;
  std::size_t best_iteration = 0;
  double best_val_error = 0.0;
  std::vector<TrainLogRecord> log;
  std::vector<double> losses;  // every iteration's batch loss
};

// Validation examples for cfg, regenerated from the fixed set seeds.
struct ValidationData {
  std::vector<std::string> names;
  std::vector<std::vector<DepthExample>> sets;
};
ValidationData make_validation_data(const TrainConfig& cfg, int threads = 0);

// Mean over sets of the mean percent error of model on each set.
double validation_error(const Model& model, const ValidationData& data,
                        int threads = 1);

// Adam on freshly generated batches: the batch of iteration t is
// generate_batch(gen, batch_size, derive_seed(seed, t)). Every
// check_interval() iterations the model is scored on the validation data and
// the best one kept (earliest on ties). Throws NumericError when a loss or
// gradient is not finite. threads never changes the result.
TrainResult train(const TrainConfig& cfg, int threads = 0,
                  const std::function<void(const TrainLogRecord&)>& on_check = {});

}  // namespace odmd
