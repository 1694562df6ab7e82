#include "odmd/trainer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "odmd/benchmark.hpp"
#include "odmd/errors.hpp"
#include "odmd/rng.hpp"

namespace odmd {

template <typename S>
void adam_step(std::span<S> params, std::span<const S> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ContractError("adam: parameter and gradient sizes differ");
  }
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam: optimizer state does not match the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<S>(static_cast<double>(params[i]) -
                               cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>,
                               AdamState&, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>,
                                AdamState&, const AdamConfig&);

std::size_t TrainConfig::check_interval() const {
  if (checkpoint_every > 0) return checkpoint_every;
  return std::max<std::size_t>(1, iterations / 100);
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("training config: " + what);
  };
  require(iterations >= 1, "iterations must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(std::isfinite(adam.lr) && adam.lr > 0.0, "lr must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam_beta1 must be in [0, 1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam_beta2 must be in [0, 1)");
  require(std::isfinite(adam.eps) && adam.eps > 0.0, "adam_eps must be positive");
  require(shape.n == gen.n, "network n must equal the generated n");
  require(shape.hidden >= 1 && shape.fc_width >= 1 && shape.fc_layers >= 1,
          "network dimensions must be positive");
  require(!validation_sets.empty(), "at least one validation set is required");
  require(validation_size >= 1, "validation_size must be at least 1");
  gen.validate();
}

ValidationData make_validation_data(const TrainConfig& cfg, int threads) {
  ValidationData data;
  for (const auto& name : cfg.validation_sets) {
    auto set = make_benchmark_set(name, Split::kValidation, threads,
                                  cfg.validation_size);
    if (set.config.n != cfg.gen.n) {
      throw CompatibilityError("validation set " + name + " has n = " +
                               std::to_string(set.config.n) + ", config has " +
                               std::to_string(cfg.gen.n));
    }
    data.names.push_back(name);
    data.sets.push_back(std::move(set.examples));
  }
  return data;
}

double validation_error(const Model& model, const ValidationData& data,
                        int threads) {
  const auto method = make_model_method(model);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.sets.size(); ++i) {
    const SetReport r = evaluate(*method, data.names[i], data.sets[i], threads);
    // An all-failed set yields NaN, which never wins the selection.
    sum += r.percent.mean;
  }
  return sum / static_cast<double>(data.sets.size());
}

TrainResult train(const TrainConfig& cfg, int threads,
                  const std::function<void(const TrainLogRecord&)>& on_check) {
  cfg.validate();
  const ValidationData validation = make_validation_data(cfg, threads);
  const std::size_t interval = cfg.check_interval();

  Model model{init_params<float>(cfg.shape, cfg.seed), cfg.loss_mode};
  AdamState state;
  TrainResult result;
  result.best = model;
  result.best_val_error = std::numeric_limits<double>::infinity();
  result.losses.reserve(cfg.iterations);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const auto examples = generate_batch(cfg.gen, cfg.batch_size,
                                         derive_seed(cfg.seed, it), threads);
    const auto batch = make_batch<float>(examples, cfg.loss_mode, cfg.shape.n);
    if (batch.size() == 0) {
      throw NumericError("iteration " + std::to_string(it) +
                         ": every example in the batch was degenerate");
    }
    float batch_loss = 0.0f;
    const auto grads = backward(model.params, batch, threads, &batch_loss);
    bool finite = std::isfinite(batch_loss);
    for (float g : grads.flat()) finite = finite && std::isfinite(g);
    if (!finite) {
      std::ostringstream msg;
      msg << "non-finite loss or gradient at iteration " << it
          << " (loss = " << batch_loss << ")";
      throw NumericError(msg.str());
    }
    result.losses.push_back(batch_loss);
    adam_step<float>(model.params.flat(), grads.flat(), state, cfg.adam);

    if (it % interval == 0) {
      TrainLogRecord rec;
      rec.iteration = it;
      rec.loss = batch_loss;
      rec.val_error = validation_error(model, validation, threads);
      result.log.push_back(rec);
      if (rec.val_error < result.best_val_error) {
        result.best_val_error = rec.val_error;
        result.best_iteration = it;
        result.best = model;
      }
      if (on_check) on_check(rec);
    }
  }
  if (result.best_iteration == 0) {
    // Validation never produced a finite score; keep the final weights.
    result.best = model;
    result.best_iteration = cfg.iterations;
    result.best_val_error = result.log.empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : result.log.back().val_error;
  }
  return result;
}

}  // namespace odmd
