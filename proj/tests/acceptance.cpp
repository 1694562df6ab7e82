// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `acceptance 1 2 7`; `--log FILE` also
// writes the verdict lines to FILE.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "odmd/benchmark.hpp"
#include "odmd/parallel.hpp"
#include "odmd/presets.hpp"
#include "odmd/solvers.hpp"
#include "odmd/trainer.hpp"
#include "support/reference_net.hpp"

using namespace odmd;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int g_failures = 0;
std::FILE* g_log = nullptr;  // copy of the verdict lines, see --log

void emit(const std::string& line) {
  for (std::FILE* f : {stdout, g_log}) {
    if (!f) continue;
    std::fputs(line.c_str(), f);
    std::fflush(f);
  }
}

void verdict(int id, bool pass, const std::string& what) {
  emit(fmt("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", what.c_str()));
  if (!pass) ++g_failures;
}


double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

double solver_mean(const std::string& method, std::span<const DepthExample> ex) {
  return evaluate(*make_solver_method(method), method, ex, 0).percent.mean;
}

void criterion1() {
  const auto start = Clock::now();
  const auto set = make_benchmark_set("normal", Split::kTest, 0);
  const SetReport r = evaluate(*make_solver_method("box-ls"), "normal", set.examples, 0);
  const double secs = since(start);
  verdict(1, r.percent.mean <= 1e-6 && r.failures == 0 && secs < 5.0,
          fmt("Box_LS on the regenerated normal test set (%zu examples): mean %.3g%% "
              "(limit 1e-6), %zu failures, %.2f s including generation (limit 5 s)",
              set.examples.size(), r.percent.mean, r.failures, secs));
}

void criterion2() {
  const auto set = make_benchmark_set("normal", Split::kTest, 0);
  const double ex = solver_mean("expansion-2obs", set.examples);
  const double px = solver_mean("parallax-2obs", set.examples);
  verdict(2, ex <= 1e-6 && px <= 1e-6,
          fmt("endpoint cues on the normal test set: optical expansion %.3g%%, "
              "motion parallax %.3g%% (limit 1e-6 each)", ex, px));
}

void criterion3() {
  bool ok = true;
  std::string detail;
  for (const auto& [name, target, tol] :
       {std::tuple{"perturb-camera", 4.5, 1.5}, std::tuple{"perturb-detect", 21.6, 5.0}}) {
    std::vector<double> means;
    for (std::uint64_t k = 0; k < 5; ++k) {
      // The first seed is the published one.
      const std::uint64_t base = benchmark_seed(name, Split::kTest);
      const std::uint64_t seed = k == 0 ? base : derive_seed(base, k);
      const auto set = make_benchmark_set(name, Split::kTest, 0, std::nullopt, seed);
      const double m = solver_mean("box-ls", set.examples);
      means.push_back(m);
      ok = ok && std::abs(m - target) <= tol;
    }
    detail += fmt("%s %.2f/%.2f/%.2f/%.2f/%.2f%% (target %.1f +- %.1f); ", name, means[0],
                  means[1], means[2], means[3], means[4], target, tol);
  }
  detail.resize(detail.size() - 2);
  verdict(3, ok, "Box_LS over 5 seeds x 3000 examples: " + detail);
}

void criterion4() {
  const int hw = default_thread_count();
  const int threads = std::min(8, hw);
  const GenerationConfig cfg = generation_preset("normal");
  constexpr std::size_t kCount = 1'000'000;
  generate_batch(cfg, 10000, 1, threads);  // warm-up
  const auto start = Clock::now();
  const auto big = generate_batch(cfg, kCount, 2, threads);
  const double rate = kCount / since(start);
  const auto one = generate_batch(cfg, 10000, 3, 1);
  const auto eight = generate_batch(cfg, 10000, 3, 8);
  const bool same = one == eight && one == generate_batch(cfg, 10000, 3, hw);
  verdict(4, rate >= 1e5 && same,
          fmt("generated %.0f examples/s with %d thread(s) on %d hardware thread(s) "
              "(limit 1e5); 1e4 examples identical for 1, 8 and %d threads: %s",
              rate, threads, hw, hw, same ? "yes" : "no"));
}

void criterion5() {
  const TrainConfig cfg = train_preset("dbox-ns-z");
  const auto start = Clock::now();
  const TrainResult r = train(cfg, 0, [&](const TrainLogRecord& rec) {
    if (rec.iteration % (cfg.iterations / 10) == 0) {
      std::fprintf(stderr, "  [5] iteration %zu loss %.4g val %.3f%% (%.0f s)\n",
                   rec.iteration, rec.loss, rec.val_error, since(start));
    }
  });
  const double secs = since(start);
  const char* out = std::getenv("ODMD_ACCEPTANCE_CHECKPOINT");
  if (out) save_checkpoint(r.best, out);
  const auto test = make_benchmark_set("normal-z", Split::kTest, 0);
  const double err =
      evaluate(*make_model_method(r.best), "normal-z", test.examples, 0).percent.mean;
  verdict(5, secs <= 1800 && err <= 15.0,
          fmt("dbox-ns-z (%zu iterations, batch %zu): %.1f min (limit 30), best "
              "checkpoint at iteration %zu scores %.2f%% on the normal-z test set "
              "(limit 15%%)", cfg.iterations, cfg.batch_size, secs / 60,
              r.best_iteration, err));
}

void criterion6() {
  const auto test = make_benchmark_set("perturb-detect-z", Split::kTest, 0);
  std::vector<double> perturbed, clean;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const char* preset : {"dbox-p-z", "dbox-ns-z"}) {
      TrainConfig cfg = train_preset(preset);
      cfg.seed = seed;
      const auto start = Clock::now();
      const TrainResult r = train(cfg, 0);
      const double err =
          evaluate(*make_model_method(r.best), preset, test.examples, 0).percent.mean;
      std::fprintf(stderr, "  [6] %s seed %llu: %.3f%% (%.0f s)\n", preset,
                   static_cast<unsigned long long>(seed), err, since(start));
      (std::string(preset) == "dbox-p-z" ? perturbed : clean).push_back(err);
    }
  }
  const double mp = median(perturbed), mc = median(clean);
  verdict(6, mp < mc,
          fmt("perturb-detect-z test set, 3 seeds each: perturbation-trained "
              "%.2f/%.2f/%.2f%% (median %.2f) vs clean-trained %.2f/%.2f/%.2f%% "
              "(median %.2f)", perturbed[0], perturbed[1], perturbed[2], mp, clean[0],
              clean[1], clean[2], mc));
}

void criterion7() {
  const auto start = Clock::now();
  Rng rng(2024, 0);
  double worst = 0, mismatch = 0;
  std::size_t checked = 0, skipped = 0;
  for (int net = 0; net < 10; ++net) {
    NetworkShape shape;
    shape.n = 2 + rng.index(4);
    shape.hidden = 3 + rng.index(3);
    shape.fc_width = 6 + rng.index(4);
    shape.fc_layers = 1 + rng.index(6);
    for (LossMode mode : {LossMode::kRel, LossMode::kAbs}) {
      const auto g = odmd_test::gradient_check(shape, mode, 500 + net);
      worst = std::max(worst, g.worst_relative);
      mismatch = std::max(mismatch, g.loss_mismatch);
      checked += g.checked;
      skipped += g.skipped_kinks;
    }
  }
  const double secs = since(start);
  verdict(7, worst < 1e-4 && secs < 60,
          fmt("finite differences on 10 random networks x 2 loss modes: worst relative "
              "error %.2g (limit 1e-4) over %zu parameters, %zu skipped at ReLU kinks, "
              "loss agreement %.1g, %.1f s (limit 60 s)",
              worst, checked, skipped, mismatch, secs));
}

void criterion8() {
  NetworkShape shape;
  Model model{init_params<float>(shape, 88), LossMode::kRel};
  Rng rng(88, 1);
  for (const auto& t : model.params.tensors()) {
    if (t.cols != 1) continue;
    for (std::size_t i = 0; i < t.size(); ++i) {
      model.params.flat()[t.offset + i] += static_cast<float>(rng.uniform(-0.3, 0.3));
    }
  }
  GenerationConfig cfg = generation_preset("perturb-all");
  const auto data = generate_batch(cfg, 1000, 8, 0);
  const auto base_batch = make_batch<float>(data, LossMode::kRel, shape.n);
  const auto base_f = forward(model.params, base_batch.inputs, false);
  const auto base_z = predict_depths(model, data, 0);
  std::size_t f_diff = 0, z_exact = 0, total = 0;
  double worst_ulps = 0;
  for (double s : {0.1, 3.0, 42.0}) {
    auto scaled = data;
    for (auto& ex : scaled) {
      for (auto& o : ex.obs) o.position = s * o.position;
    }
    const auto batch = make_batch<float>(scaled, LossMode::kRel, shape.n);
    const auto f = forward(model.params, batch.inputs, false);
    const auto z = predict_depths(model, scaled, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      ++total;
      f_diff += f(static_cast<Eigen::Index>(i), 0) != base_f(static_cast<Eigen::Index>(i), 0);
      const double want = s * *base_z[i];
      z_exact += *z[i] == want;
      const double ulp = std::nextafter(std::abs(want), INFINITY) - std::abs(want);
      worst_ulps = std::max(worst_ulps, std::abs(*z[i] - want) / ulp);
    }
  }
  // 0.1 and the scaled positions are themselves rounded, so depth equality
  // is judged at the resolution of double arithmetic.
  verdict(8, f_diff == 0 && worst_ulps <= 4,
          fmt("1000 examples x s in {0.1, 3, 42}: f_n differs in %zu of %zu cases "
              "(must be 0); depth equals s * depth bit-for-bit in %zu of %zu, worst "
              "deviation %.0f ulp (limit 4)", f_diff, total, z_exact, total, worst_ulps));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--log" && i + 1 < argc) {
      g_log = std::fopen(argv[++i], "w");
      if (!g_log) {
        std::fprintf(stderr, "cannot write %s\n", argv[i]);
        return 2;
      }
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  const std::map<int, std::function<void()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
  for (const auto& [id, run] : criteria) {
    if (only.empty() || only.count(id)) run();
  }
  if (only.empty() || only.count(9)) {
    emit("criterion 9: N/A   full-scale dbox-p / dbox-abs training (1e7 iterations) "
         "and the real-data rows are not reproducible on a workstation; "
         "covered by criteria 5-8 and the module suites\n");
  }
  if (g_log) std::fclose(g_log);
  return g_failures == 0 ? 0 : 1;
}
