// Command-line front end. Talks to the library only through odmd.h.
#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "odmd/odmd.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCompat = 4;

// Above this many iterations a CPU run is measured in days.
constexpr std::size_t kMultiDayIterations = 1'000'000;

// Carries a library failure up to main with its exit code.
struct Failure {
  int code;
  std::string message;
};

int exit_code(odmd_status s) {
  switch (s) {
    case ODMD_OK: return kExitOk;
    case ODMD_ERR_NUMERIC: return kExitNumeric;
    case ODMD_ERR_COMPAT:
    case ODMD_ERR_VERSION: return kExitCompat;
    case ODMD_ERR_INTERNAL: return kExitInternal;
    default: return kExitInput;
  }
}

void check(odmd_status s, const std::string& context) {
  if (s != ODMD_OK) {
    throw Failure{exit_code(s), context + ": " + odmd_status_name(s) + ": " +
                                    odmd_last_error()};
  }
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<odmd_dataset, Deleter<odmd_dataset, odmd_dataset_free>>;
using GenPtr = std::unique_ptr<odmd_gen_config, Deleter<odmd_gen_config, odmd_gen_config_free>>;
using ModelPtr = std::unique_ptr<odmd_model, Deleter<odmd_model, odmd_model_free>>;
using TrainPtr = std::unique_ptr<odmd_train_config, Deleter<odmd_train_config, odmd_train_config_free>>;
using ReportPtr = std::unique_ptr<odmd_report, Deleter<odmd_report, odmd_report_free>>;

void require_readable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitInput, "cannot read '" + path + "'"};
}

void require_writable_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw Failure{kExitInput, "output directory '" + parent.string() +
                                  "' does not exist"};
  }
}

int default_threads() {
  if (const char* env = std::getenv("ODMD_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      std::fprintf(stderr, "warning: ignoring invalid ODMD_THREADS='%s'\n", env);
    }
  }
  return 0;
}

void print_report(const odmd_report* report, const std::string& method) {
  std::printf("%-28s %-16s %6s %5s %10s %10s %10s %10s %10s\n", "set", "method",
              "n", "fail", "mean", "median", "min", "max", "std");
  const size_t count = odmd_report_set_count(report);
  for (size_t i = 0; i < count; ++i) {
    odmd_set_summary s;
    check(odmd_report_set(report, i, &s), "report");
    std::printf("%-28s %-16s %6zu %5zu %10.4f %10.4f %10.4f %10.4f %10.4f\n",
                s.name, method.c_str(), s.examples, s.failures, s.percent.mean,
                s.percent.median, s.percent.min, s.percent.max, s.percent.std);
  }
  if (count > 1) {
    std::printf("%-28s %-16s %6s %5s %10.4f\n", "all sets (mean of means)",
                method.c_str(), "", "", odmd_report_all_sets_mean(report));
  }
}

struct Datasets {
  std::vector<DatasetPtr> owned;
  std::vector<std::string> names;

  std::vector<const odmd_dataset*> handles() const {
    std::vector<const odmd_dataset*> out;
    for (const auto& d : owned) out.push_back(d.get());
    return out;
  }
  std::vector<const char*> labels() const {
    std::vector<const char*> out;
    for (const auto& n : names) out.push_back(n.c_str());
    return out;
  }
};

// Files are labeled by their name; "preset[:split]" entries of `sets`
// regenerate a benchmark set (split defaults to test).
Datasets load_datasets(const std::vector<std::string>& files,
                       const std::vector<std::string>& sets, int threads) {
  Datasets out;
  for (const auto& f : files) require_readable(f);
  for (const auto& f : files) {
    odmd_dataset* ds = nullptr;
    check(odmd_dataset_load(f.c_str(), &ds), f);
    out.owned.emplace_back(ds);
    out.names.push_back(fs::path(f).filename().string());
  }
  for (const auto& entry : sets) {
    const auto colon = entry.find(':');
    const std::string name = entry.substr(0, colon);
    const std::string split =
        colon == std::string::npos ? "test" : entry.substr(colon + 1);
    odmd_dataset* ds = nullptr;
    check(odmd_dataset_benchmark(name.c_str(), split.c_str(), threads, &ds),
          "benchmark set " + entry);
    out.owned.emplace_back(ds);
    out.names.push_back(name + ":" + split);
  }
  if (out.owned.empty()) {
    throw Failure{kExitInput, "no datasets given (pass files or --set)"};
  }
  return out;
}

void write_outputs(const odmd_report* report, const std::string& json_path,
                   const std::string& csv_path) {
  if (!json_path.empty()) {
    check(odmd_report_write_json(report, json_path.c_str()), json_path);
  }
  if (!csv_path.empty()) {
    check(odmd_report_write_csv(report, csv_path.c_str()), csv_path);
  }
}

struct GenerateArgs {
  std::string preset;
  std::string config;
  std::size_t count = 0;
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_generate(const GenerateArgs& a, int threads) {
  require_writable_parent(a.out);
  if (!a.config.empty()) require_readable(a.config);
  odmd_gen_config* raw = nullptr;
  if (!a.config.empty()) {
    check(odmd_gen_config_load(a.config.c_str(), &raw), a.config);
  } else {
    check(odmd_gen_config_preset(a.preset.c_str(), &raw), "preset");
  }
  GenPtr cfg(raw);

  const auto start = std::chrono::steady_clock::now();
  odmd_dataset* ds_raw = nullptr;
  check(odmd_dataset_generate(cfg.get(), a.count, a.seed, threads, &ds_raw),
        "generate");
  DatasetPtr ds(ds_raw);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check(odmd_dataset_save(ds.get(), a.out.c_str()), a.out);
  std::printf("generated %zu examples (n = %zu) in %.3f s (%.0f examples/s) -> %s\n",
              a.count, odmd_gen_config_n(cfg.get()), secs,
              secs > 0 ? static_cast<double>(a.count) / secs : 0.0, a.out.c_str());
}

struct SolveArgs {
  std::string method;
  std::vector<std::string> files;
  std::vector<std::string> sets;
  std::string report = "report.json";
  std::string plot = "plotdata.csv";
};

void cmd_solve(const SolveArgs& a, int threads) {
  require_writable_parent(a.report);
  require_writable_parent(a.plot);
  const Datasets data = load_datasets(a.files, a.sets, threads);
  const auto handles = data.handles();
  const auto labels = data.labels();
  odmd_report* raw = nullptr;
  check(odmd_evaluate_solver(a.method.c_str(), handles.data(), labels.data(),
                             handles.size(), threads, &raw),
        "solve");
  ReportPtr report(raw);
  write_outputs(report.get(), a.report, a.plot);
  print_report(report.get(), a.method);
}

struct TrainArgs {
  std::string preset;
  std::string config;
  std::string out;
  std::string log;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  bool quiet = false;
};

void on_check(const odmd_train_record* r, void* user) {
  const auto* total = static_cast<const std::size_t*>(user);
  std::fprintf(stderr, "iteration %zu/%zu  loss %.6g  val %.4f%%\n",
               r->iteration, *total, r->loss, r->val_error);
}

void cmd_train(const TrainArgs& a, const CLI::App& sub, int threads) {
  require_writable_parent(a.out);
  const std::string log = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  require_writable_parent(log);
  if (!a.config.empty()) require_readable(a.config);

  odmd_train_config* raw = nullptr;
  if (!a.config.empty()) {
    check(odmd_train_config_load(a.config.c_str(), &raw), a.config);
  } else {
    check(odmd_train_config_preset(a.preset.c_str(), &raw), "preset");
  }
  TrainPtr cfg(raw);
  const std::size_t configured = odmd_train_config_iterations(cfg.get());
  if (configured >= kMultiDayIterations) {
    std::fprintf(stderr,
                 "warning: '%s' is configured for %zu iterations of batch %zu; "
                 "full-scale training takes multiple days on a CPU. The "
                 "'-desk' presets are sized for a workstation.\n",
                 odmd_train_config_name(cfg.get()), configured,
                 odmd_train_config_batch_size(cfg.get()));
  }
  if (sub.count("--seed")) check(odmd_train_config_set_seed(cfg.get(), a.seed), "seed");
  if (sub.count("--iterations")) {
    check(odmd_train_config_set_iterations(cfg.get(), a.iterations), "iterations");
  }
  std::size_t total = odmd_train_config_iterations(cfg.get());

  odmd_model* best_raw = nullptr;
  double best_val = 0.0;
  std::size_t best_it = 0;
  check(odmd_train(cfg.get(), threads, log.c_str(), a.quiet ? nullptr : on_check,
                   &total, &best_raw, &best_val, &best_it),
        "train");
  ModelPtr best(best_raw);
  check(odmd_model_save(best.get(), a.out.c_str()), a.out);
  std::printf("best validation error %.6f%% at iteration %zu -> %s (log %s)\n",
              best_val, best_it, a.out.c_str(), log.c_str());
}

struct EvalArgs {
  std::string checkpoint;
  std::vector<std::string> files;
  std::vector<std::string> sets;
  std::string report = "report.json";
  std::string plot = "plotdata.csv";
};

void cmd_eval(const EvalArgs& a, int threads) {
  require_readable(a.checkpoint);
  require_writable_parent(a.report);
  require_writable_parent(a.plot);
  odmd_model* raw = nullptr;
  check(odmd_model_load(a.checkpoint.c_str(), &raw), a.checkpoint);
  ModelPtr model(raw);
  const Datasets data = load_datasets(a.files, a.sets, threads);
  const auto handles = data.handles();
  const auto labels = data.labels();
  odmd_report* rep = nullptr;
  check(odmd_evaluate_model(model.get(), handles.data(), labels.data(),
                            handles.size(), threads, &rep),
        "eval");
  ReportPtr report(rep);
  write_outputs(report.get(), a.report, a.plot);
  print_report(report.get(), fs::path(a.checkpoint).filename().string());
}

void cmd_mask(const std::string& path) {
  require_readable(path);
  double box[4];
  check(odmd_mask_file_to_box(path.c_str(), box), path);
  std::printf("x=%.17g y=%.17g w=%.17g h=%.17g\n", box[0], box[1], box[2], box[3]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object depth from camera motion and bounding boxes"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  int threads = default_threads();
  app.add_option("--threads", threads,
                 "Worker threads; 0 uses every core (default: $ODMD_THREADS or 0)")
      ->check(CLI::NonNegativeNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a generated dataset");
  auto* g_src = g->add_option_group("source");
  g_src->add_option("--preset", gen.preset,
                    "normal, perturb-camera, perturb-detect, perturb-all (+ '-z')");
  g_src->add_option("--config", gen.config, "Generation config JSON file");
  g_src->require_option(1);
  g->add_option("--count", gen.count, "Number of examples")->required();
  g->add_option("--seed", gen.seed, "Base seed (default 1)");
  g->add_option("-o,--out", gen.out, "Output .odmd.jsonl or .odmd.bin")->required();

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Evaluate an analytic solver");
  s->add_option("--method", solve.method, "box-ls, expansion-2obs or parallax-2obs")
      ->required()
      ->check(CLI::IsMember({"box-ls", "expansion-2obs", "parallax-2obs"}));
  s->add_option("datasets", solve.files, "Dataset files");
  s->add_option("--set", solve.sets, "Benchmark set as name[:validation|test]");
  s->add_option("-o,--report", solve.report, "Report JSON path");
  s->add_option("--plot", solve.plot, "Plot data CSV path");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a network");
  auto* t_src = t->add_option_group("source");
  t_src->add_option("--preset", train.preset,
                    "dbox-p, dbox-ns, dbox-abs, dbox-p-1m, dbox-p-100k, dbox-p-z, "
                    "dbox-ns-z, dbox-abs-z (+ '-desk')");
  t_src->add_option("--config", train.config, "Training config JSON file");
  t_src->require_option(1);
  t->add_option("-o,--out", train.out, "Checkpoint path for the best model")->required();
  t->add_option("--log", train.log, "Training log path (default <out>.log.jsonl)");
  t->add_option("--seed", train.seed, "Override the training seed");
  t->add_option("--iterations", train.iterations, "Override the iteration count")
      ->check(CLI::PositiveNumber);
  t->add_flag("-q,--quiet", train.quiet, "No progress output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("datasets", ev.files, "Dataset files");
  e->add_option("--set", ev.sets, "Benchmark set as name[:validation|test]");
  e->add_option("-o,--report", ev.report, "Report JSON path");
  e->add_option("--plot", ev.plot, "Plot data CSV path");

  std::string mask_path;
  auto* m = app.add_subcommand("mask-box", "Bounding box of a PBM/PGM segmentation mask");
  m->add_option("mask", mask_path, "Mask image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInput;
  }

  try {
    if (*g) cmd_generate(gen, threads);
    else if (*s) cmd_solve(solve, threads);
    else if (*t) cmd_train(train, *t, threads);
    else if (*e) cmd_eval(ev, threads);
    else if (*m) cmd_mask(mask_path);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitInternal;
  }
  return kExitOk;
}
