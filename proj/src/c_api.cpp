#include "odmd/odmd.h"

#include <fstream>
#include <memory>
#include <optional>
#include <new>
#include <string>
#include <vector>

#include "odmd/benchmark.hpp"
#include "odmd/errors.hpp"
#include "odmd/io.hpp"
#include "odmd/network.hpp"
#include "odmd/presets.hpp"
#include "odmd/solvers.hpp"
#include "odmd/trainer.hpp"

struct odmd_gen_config {
  odmd::GenerationConfig cfg;
};
struct odmd_dataset {
  std::vector<odmd::DepthExample> examples;
};
struct odmd_model {
  odmd::Model model;
};
struct odmd_train_config {
  odmd::TrainConfig cfg;
};
struct odmd_report {
  odmd::EvalReport report;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
odmd_status guard(F&& f) noexcept {
  try {
    f();
    g_last_error.clear();
    return ODMD_OK;
  } catch (const odmd::DomainError& e) {
    g_last_error = e.what();
    return ODMD_ERR_DOMAIN;
  } catch (const odmd::DegenerateGeometry& e) {
    g_last_error = e.what();
    return ODMD_ERR_DEGENERATE;
  } catch (const odmd::ConfigError& e) {
    g_last_error = e.what();
    return ODMD_ERR_CONFIG;
  } catch (const odmd::ParseError& e) {
    g_last_error = e.what();
    return ODMD_ERR_PARSE;
  } catch (const odmd::VersionError& e) {
    g_last_error = e.what();
    return ODMD_ERR_VERSION;
  } catch (const odmd::InputError& e) {
    g_last_error = e.what();
    return ODMD_ERR_INPUT;
  } catch (const odmd::ContractError& e) {
    g_last_error = e.what();
    return ODMD_ERR_CONTRACT;
  } catch (const odmd::NumericError& e) {
    g_last_error = e.what();
    return ODMD_ERR_NUMERIC;
  } catch (const odmd::IoError& e) {
    g_last_error = e.what();
    return ODMD_ERR_IO;
  } catch (const odmd::CompatibilityError& e) {
    g_last_error = e.what();
    return ODMD_ERR_COMPAT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ODMD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ODMD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ODMD_ERR_INTERNAL;
  }
}

template <typename T>
void need(const T* p, const char* what) {
  if (p == nullptr) throw odmd::ContractError(std::string(what) + " is NULL");
}

odmd::Observation convert(const odmd_observation& o) {
  return {{o.x, o.y, o.w, o.h}, {o.cam_x, o.cam_y, o.cam_z}};
}

odmd::ObservationSet convert(const odmd_observation* obs, size_t n) {
  need(obs, "obs");
  std::vector<odmd::Observation> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(convert(obs[i]));
  return odmd::ObservationSet(std::move(out));
}

odmd::CameraIntrinsics convert(const odmd_intrinsics& k) {
  return {k.fx, k.fy, k.cx, k.cy, k.width, k.height};
}

odmd::ScaleSource convert(odmd_scale_source s) {
  if (s == ODMD_SCALE_WIDTH) return odmd::ScaleSource::kWidth;
  if (s == ODMD_SCALE_HEIGHT) return odmd::ScaleSource::kHeight;
  throw odmd::ContractError("unknown scale source");
}

std::vector<odmd::NamedExamples> named_sets(const odmd_dataset* const* sets,
                                            const char* const* names,
                                            size_t count) {
  if (count > 0) {
    need(sets, "sets");
    need(names, "names");
  }
  std::vector<odmd::NamedExamples> out;
  for (size_t i = 0; i < count; ++i) {
    need(sets[i], "sets[i]");
    need(names[i], "names[i]");
    out.push_back({names[i], sets[i]->examples});
  }
  return out;
}

}  // namespace

extern "C" {

const char* odmd_last_error(void) { return g_last_error.c_str(); }

const char* odmd_status_name(odmd_status status) {
  switch (status) {
    case ODMD_OK: return "ok";
    case ODMD_ERR_DOMAIN: return "domain error";
    case ODMD_ERR_DEGENERATE: return "degenerate geometry";
    case ODMD_ERR_CONFIG: return "config error";
    case ODMD_ERR_PARSE: return "parse error";
    case ODMD_ERR_VERSION: return "version error";
    case ODMD_ERR_INPUT: return "input error";
    case ODMD_ERR_CONTRACT: return "contract error";
    case ODMD_ERR_NUMERIC: return "numeric error";
    case ODMD_ERR_IO: return "i/o error";
    case ODMD_ERR_COMPAT: return "compatibility error";
    case ODMD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* odmd_version(void) { return "0.1.0"; }

odmd_status odmd_solve_box_ls(const odmd_observation* obs, size_t n,
                              size_t query, double* depth, double* condition) {
  return guard([&] {
    need(depth, "depth");
    const auto sol = odmd::depth_box_ls(convert(obs, n), query);
    *depth = sol.z;
    if (condition) *condition = sol.condition;
  });
}

odmd_status odmd_solve_expansion(const odmd_observation* obs_i,
                                 const odmd_observation* obs_j,
                                 odmd_scale_source source, double* depth) {
  return guard([&] {
    need(obs_i, "obs_i");
    need(obs_j, "obs_j");
    need(depth, "depth");
    *depth = odmd::depth_optical_expansion(convert(*obs_i), convert(*obs_j),
                                           convert(source)).z;
  });
}

odmd_status odmd_solve_parallax(const odmd_observation* obs_i,
                                const odmd_observation* obs_j,
                                const odmd_intrinsics* k, odmd_axis axis,
                                odmd_scale_source source, double* depth) {
  return guard([&] {
    need(obs_i, "obs_i");
    need(obs_j, "obs_j");
    need(k, "k");
    need(depth, "depth");
    if (axis != ODMD_AXIS_X && axis != ODMD_AXIS_Y) {
      throw odmd::ContractError("unknown parallax axis");
    }
    *depth = odmd::depth_motion_parallax(
                 convert(*obs_i), convert(*obs_j), convert(*k),
                 axis == ODMD_AXIS_X ? odmd::ParallaxAxis::kX
                                     : odmd::ParallaxAxis::kY,
                 convert(source)).z;
  });
}

odmd_status odmd_solve_endpoint(const odmd_observation* obs, size_t n,
                                odmd_cue cue, const odmd_intrinsics* k,
                                double* depth) {
  return guard([&] {
    need(depth, "depth");
    if (cue != ODMD_CUE_EXPANSION && cue != ODMD_CUE_PARALLAX) {
      throw odmd::ContractError("unknown depth cue");
    }
    std::optional<odmd::CameraIntrinsics> kk;
    if (k) kk = convert(*k);
    *depth = odmd::depth_endpoint_average(
                 convert(obs, n),
                 cue == ODMD_CUE_EXPANSION ? odmd::DepthCue::kExpansion
                                           : odmd::DepthCue::kParallax,
                 kk).z;
  });
}

odmd_status odmd_mask_to_box(const uint8_t* pixels, size_t width, size_t height,
                             const double* anchor, double box_out[4]) {
  return guard([&] {
    need(pixels, "pixels");
    need(box_out, "box_out");
    odmd::BinaryMask mask;
    mask.width = width;
    mask.height = height;
    mask.pixels.assign(pixels, pixels + width * height);
    std::optional<odmd::Point2> a;
    if (anchor) a = odmd::Point2{anchor[0], anchor[1]};
    const auto box = odmd::mask_to_box(mask, a);
    box_out[0] = box.x;
    box_out[1] = box.y;
    box_out[2] = box.w;
    box_out[3] = box.h;
  });
}

odmd_status odmd_mask_file_to_box(const char* path, double box_out[4]) {
  return guard([&] {
    need(path, "path");
    need(box_out, "box_out");
    const auto box = odmd::mask_to_box(odmd::load_mask_pnm(path));
    box_out[0] = box.x;
    box_out[1] = box.y;
    box_out[2] = box.w;
    box_out[3] = box.h;
  });
}

odmd_status odmd_gen_config_preset(const char* name, odmd_gen_config** out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    *out = new odmd_gen_config{odmd::generation_preset(name)};
  });
}

odmd_status odmd_gen_config_load(const char* path, odmd_gen_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new odmd_gen_config{
        odmd::generation_config_from_json(odmd::read_text_file(path))};
  });
}

size_t odmd_gen_config_n(const odmd_gen_config* cfg) {
  return cfg ? cfg->cfg.n : 0;
}

void odmd_gen_config_free(odmd_gen_config* cfg) { delete cfg; }

odmd_status odmd_dataset_generate(const odmd_gen_config* cfg, size_t count,
                                  uint64_t seed, int threads,
                                  odmd_dataset** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    auto ds = std::make_unique<odmd_dataset>();
    ds->examples = odmd::generate_batch(cfg->cfg, count, seed, threads);
    *out = ds.release();
  });
}

odmd_status odmd_dataset_benchmark(const char* name, const char* split,
                                   int threads, odmd_dataset** out) {
  return guard([&] {
    need(name, "name");
    need(split, "split");
    need(out, "out");
    auto set = odmd::make_benchmark_set(name, odmd::parse_split(split), threads);
    *out = new odmd_dataset{std::move(set.examples)};
  });
}

odmd_status odmd_dataset_load(const char* path, odmd_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new odmd_dataset{odmd::load_dataset(path)};
  });
}

odmd_status odmd_dataset_save(const odmd_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "ds");
    need(path, "path");
    odmd::save_dataset(path, ds->examples);
  });
}

size_t odmd_dataset_size(const odmd_dataset* ds) {
  return ds ? ds->examples.size() : 0;
}

odmd_status odmd_dataset_example(const odmd_dataset* ds, size_t i,
                                 odmd_intrinsics* k, odmd_observation* obs,
                                 size_t capacity, size_t* n_out,
                                 double* label_depth) {
  return guard([&] {
    need(ds, "ds");
    if (i >= ds->examples.size()) {
      throw odmd::ContractError("example index out of range");
    }
    const auto& ex = ds->examples[i];
    if (n_out) *n_out = ex.obs.size();
    if (k) *k = {ex.k.fx, ex.k.fy, ex.k.cx, ex.k.cy, ex.k.width, ex.k.height};
    if (label_depth) *label_depth = ex.label_z;
    if (obs) {
      if (capacity < ex.obs.size()) {
        throw odmd::ContractError("observation buffer is too small");
      }
      for (size_t j = 0; j < ex.obs.size(); ++j) {
        const auto& o = ex.obs[j];
        obs[j] = {o.box.x, o.box.y, o.box.w, o.box.h,
                  o.position.x, o.position.y, o.position.z};
      }
    }
  });
}

void odmd_dataset_free(odmd_dataset* ds) { delete ds; }

odmd_status odmd_model_load(const char* path, odmd_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new odmd_model{odmd::load_checkpoint(path)};
  });
}

odmd_status odmd_model_save(const odmd_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    odmd::save_checkpoint(model->model, path);
  });
}

odmd_status odmd_model_info(const odmd_model* model, size_t* n,
                            odmd_loss_mode* mode) {
  return guard([&] {
    need(model, "model");
    if (n) *n = model->model.params.shape().n;
    if (mode) {
      *mode = model->model.mode == odmd::LossMode::kRel ? ODMD_LOSS_REL
                                                        : ODMD_LOSS_ABS;
    }
  });
}

odmd_status odmd_model_predict(const odmd_model* model,
                               const odmd_observation* obs, size_t n,
                               const odmd_intrinsics* k, double* depth) {
  return guard([&] {
    need(model, "model");
    need(k, "k");
    need(depth, "depth");
    if (n != model->model.params.shape().n) {
      throw odmd::CompatibilityError(
          "model expects " + std::to_string(model->model.params.shape().n) +
          " observations, got " + std::to_string(n));
    }
    *depth = odmd::predict_depth(model->model, convert(obs, n), convert(*k));
  });
}

void odmd_model_free(odmd_model* model) { delete model; }

odmd_status odmd_train_config_preset(const char* name, odmd_train_config** out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    *out = new odmd_train_config{odmd::train_preset(name)};
  });
}

odmd_status odmd_train_config_load(const char* path, odmd_train_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new odmd_train_config{odmd::load_train_config(path)};
  });
}

odmd_status odmd_train_config_set_seed(odmd_train_config* cfg, uint64_t seed) {
  return guard([&] {
    need(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

odmd_status odmd_train_config_set_iterations(odmd_train_config* cfg,
                                             size_t iterations) {
  return guard([&] {
    need(cfg, "cfg");
    if (iterations == 0) throw odmd::ConfigError("iterations must be at least 1");
    cfg->cfg.iterations = iterations;
  });
}

size_t odmd_train_config_iterations(const odmd_train_config* cfg) {
  return cfg ? cfg->cfg.iterations : 0;
}

size_t odmd_train_config_batch_size(const odmd_train_config* cfg) {
  return cfg ? cfg->cfg.batch_size : 0;
}

const char* odmd_train_config_name(const odmd_train_config* cfg) {
  return cfg ? cfg->cfg.name.c_str() : "";
}

void odmd_train_config_free(odmd_train_config* cfg) { delete cfg; }

odmd_status odmd_train(const odmd_train_config* cfg, int threads,
                       const char* log_path, odmd_train_callback callback,
                       void* user, odmd_model** best, double* best_val_error,
                       size_t* best_iteration) {
  return guard([&] {
    need(cfg, "cfg");
    need(best, "best");
    std::ofstream log;
    if (log_path) {
      log.open(log_path, std::ios::trunc);
      if (!log) throw odmd::IoError(std::string("cannot open '") + log_path + "'");
    }
    auto result = odmd::train(cfg->cfg, threads,
                              [&](const odmd::TrainLogRecord& rec) {
      if (log_path) {
        log << odmd::train_log_line(rec) << '\n';
        log.flush();
      }
      if (callback) {
        const odmd_train_record r{rec.iteration, rec.loss, rec.val_error};
        callback(&r, user);
      }
    });
    if (log_path && !log) throw odmd::IoError("failed writing the training log");
    if (best_val_error) *best_val_error = result.best_val_error;
    if (best_iteration) *best_iteration = result.best_iteration;
    *best = new odmd_model{std::move(result.best)};
  });
}

odmd_status odmd_evaluate_solver(const char* method,
                                 const odmd_dataset* const* sets,
                                 const char* const* names, size_t count,
                                 int threads, odmd_report** out) {
  return guard([&] {
    need(method, "method");
    need(out, "out");
    const auto m = odmd::make_solver_method(method);
    const auto named = named_sets(sets, names, count);
    *out = new odmd_report{odmd::evaluate(*m, named, threads)};
  });
}

odmd_status odmd_evaluate_model(const odmd_model* model,
                                const odmd_dataset* const* sets,
                                const char* const* names, size_t count,
                                int threads, odmd_report** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    const auto named = named_sets(sets, names, count);
    const size_t n = model->model.params.shape().n;
    for (const auto& s : named) {
      for (const auto& ex : s.examples) {
        if (ex.obs.size() != n) {
          throw odmd::CompatibilityError(
              "set '" + s.name + "' has " + std::to_string(ex.obs.size()) +
              "-observation examples but the model expects " + std::to_string(n));
        }
      }
    }
    const auto m = odmd::make_model_method(model->model);
    *out = new odmd_report{odmd::evaluate(*m, named, threads)};
  });
}

size_t odmd_report_set_count(const odmd_report* report) {
  return report ? report->report.sets.size() : 0;
}

odmd_status odmd_report_set(const odmd_report* report, size_t i,
                            odmd_set_summary* out) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    if (i >= report->report.sets.size()) {
      throw odmd::ContractError("set index out of range");
    }
    const auto& s = report->report.sets[i];
    auto stats = [](const odmd::ErrorStats& e) {
      return odmd_error_stats{e.count, e.mean, e.median, e.min, e.max, e.std};
    };
    *out = {s.name.c_str(), s.records.size(), s.failures, stats(s.percent),
            stats(s.absolute)};
  });
}

double odmd_report_all_sets_mean(const odmd_report* report) {
  return report ? report->report.all_sets_mean : 0.0;
}

odmd_status odmd_report_write_json(const odmd_report* report, const char* path) {
  return guard([&] {
    need(report, "report");
    need(path, "path");
    odmd::write_text_file(path, odmd::report_to_json(report->report));
  });
}

odmd_status odmd_report_write_csv(const odmd_report* report, const char* path) {
  return guard([&] {
    need(report, "report");
    need(path, "path");
    odmd::write_text_file(path, odmd::report_to_csv(report->report));
  });
}

void odmd_report_free(odmd_report* report) { delete report; }

odmd_status odmd_ensemble_solver(const char* method, const odmd_observation* obs,
                                 size_t n, const odmd_intrinsics* k,
                                 size_t trials, uint64_t seed, double* depth) {
  return guard([&] {
    need(method, "method");
    need(k, "k");
    need(depth, "depth");
    odmd::DepthExample ex;
    ex.obs = convert(obs, n);
    ex.k = convert(*k);
    const auto m = odmd::make_solver_method(method);
    odmd::Rng rng(seed, 0);
    *depth = odmd::ensemble_predict(*m, ex, trials, rng);
  });
}

}  // extern "C"
