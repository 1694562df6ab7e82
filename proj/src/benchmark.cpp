#include "odmd/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "odmd/errors.hpp"
#include "odmd/parallel.hpp"
#include "odmd/presets.hpp"
#include "odmd/solvers.hpp"

namespace odmd {

double percent_error(double truth, double prediction) {
  if (!(truth > 0.0)) {
    throw DomainError("percent error needs a positive true depth");
  }
  return std::abs(truth - prediction) / truth * 100.0;
}

double absolute_error(double truth, double prediction) {
  return std::abs(truth - prediction);
}

ObservationSet fill_missing_detections(std::span<const PartialObservation> obs) {
  std::vector<std::size_t> detected;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].box) detected.push_back(i);
  }
  if (detected.empty()) throw InputError("no detections to fill from");

  std::vector<Observation> out;
  out.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    std::size_t best = detected.front();
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    // detected is ascending, so the strict comparison keeps the earlier index
    // on ties.
    for (std::size_t d : detected) {
      const std::size_t gap = d > i ? d - i : i - d;
      if (gap < best_gap) {
        best_gap = gap;
        best = d;
      }
    }
    out.push_back({*obs[best].box, obs[i].position});
  }
  return ObservationSet(std::move(out));
}

namespace {

// Next whitespace-separated token of a netpbm header, skipping comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  if (token.empty()) throw ParseError("truncated netpbm header");
  return token;
}

std::size_t pnm_number(std::istream& in) {
  const std::string token = pnm_token(in);
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(token, &used);
    if (used != token.size()) throw ParseError("bad netpbm number: " + token);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad netpbm number: " + token);
  }
}

}  // namespace

BinaryMask load_mask_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask " + path);
  const std::string magic = pnm_token(in);
  if (magic != "P1" && magic != "P2" && magic != "P4" && magic != "P5") {
    throw ParseError("unsupported netpbm type " + magic);
  }
  const std::size_t w = pnm_number(in);
  const std::size_t h = pnm_number(in);
  if (w == 0 || h == 0) throw InputError("mask has no pixels");
  BinaryMask mask(w, h);
  const bool bitmap = magic == "P1" || magic == "P4";
  std::size_t maxval = 1;
  if (!bitmap) maxval = pnm_number(in);

  if (magic == "P1" || magic == "P2") {
    for (std::size_t i = 0; i < w * h; ++i) {
      mask.pixels[i] = pnm_number(in) != 0 ? 1 : 0;
    }
  } else if (magic == "P4") {
    const std::size_t row_bytes = (w + 7) / 8;
    std::vector<char> row(row_bytes);
    for (std::size_t y = 0; y < h; ++y) {
      if (!in.read(row.data(), static_cast<std::streamsize>(row_bytes))) {
        throw ParseError("truncated bitmap data");
      }
      for (std::size_t x = 0; x < w; ++x) {
        const auto byte = static_cast<unsigned char>(row[x / 8]);
        mask.set(x, y, (byte >> (7 - x % 8)) & 1);
      }
    }
  } else {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<char> data(w * h * bytes);
    if (!in.read(data.data(), static_cast<std::streamsize>(data.size()))) {
      throw ParseError("truncated graymap data");
    }
    for (std::size_t i = 0; i < w * h; ++i) {
      bool on = data[i * bytes] != 0;
      if (bytes == 2) on = on || data[i * bytes + 1] != 0;
      mask.pixels[i] = on ? 1 : 0;
    }
  }
  return mask;
}

BoundingBox mask_to_box(const BinaryMask& mask, std::optional<Point2> anchor) {
  if (mask.pixels.size() != mask.width * mask.height) {
    throw ContractError("mask pixel buffer does not match its size");
  }
  const Point2 center = anchor.value_or(
      Point2{(static_cast<double>(mask.width) - 1.0) / 2.0,
             (static_cast<double>(mask.height) - 1.0) / 2.0});

  std::vector<std::uint8_t> seen(mask.pixels.size(), 0);
  std::vector<std::size_t> stack;
  double best_score = std::numeric_limits<double>::infinity();
  BoundingBox best;
  bool found = false;

  for (std::size_t start = 0; start < mask.pixels.size(); ++start) {
    if (!mask.pixels[start] || seen[start]) continue;
    std::size_t min_x = mask.width, max_x = 0, min_y = mask.height, max_y = 0;
    double sum_x = 0.0, sum_y = 0.0;
    std::size_t count = 0;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t x = p % mask.width;
      const std::size_t y = p / mask.width;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      sum_x += static_cast<double>(x);
      sum_y += static_cast<double>(y);
      ++count;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(mask.width) ||
              ny >= static_cast<std::ptrdiff_t>(mask.height)) {
            continue;
          }
          const std::size_t q = static_cast<std::size_t>(ny) * mask.width +
                                static_cast<std::size_t>(nx);
          if (mask.pixels[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    const double n = static_cast<double>(count);
    const double offset =
        std::hypot(sum_x / n - center.x, sum_y / n - center.y);
    const double score = offset / n;
    if (score < best_score) {
      best_score = score;
      found = true;
      best.x = (static_cast<double>(min_x) + static_cast<double>(max_x)) / 2.0;
      best.y = (static_cast<double>(min_y) + static_cast<double>(max_y)) / 2.0;
      best.w = static_cast<double>(max_x - min_x + 1);
      best.h = static_cast<double>(max_y - min_y + 1);
    }
  }
  if (!found) throw InputError("mask has no foreground pixels");
  return best;
}

const char* to_string(Split split) {
  return split == Split::kValidation ? "validation" : "test";
}

Split parse_split(const std::string& text) {
  if (text == "validation" || text == "val") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw ConfigError("unknown split '" + text + "' (expected validation or test)");
}

BenchmarkSet make_benchmark_set(const std::string& name, Split split,
                                int threads, std::optional<std::size_t> size,
                                std::optional<std::uint64_t> seed) {
  BenchmarkSet set;
  set.name = name;
  set.split = split;
  set.config = generation_preset(name);
  set.seed = seed.value_or(benchmark_seed(name, split));
  set.config.seed = set.seed;
  set.generator_version = kGeneratorVersion;
  const std::size_t count = size.value_or(
      split == Split::kValidation ? kValidationSetSize : kTestSetSize);
  set.examples = generate_batch(set.config, count, set.seed, threads);
  return set;
}

// ---------------------------------------------------------------------------

namespace {

class SolverMethod final : public DepthMethod {
 public:
  explicit SolverMethod(std::string name) : name_(std::move(name)) {
    if (name_ != "box-ls" && name_ != "expansion-2obs" &&
        name_ != "parallax-2obs") {
      throw ConfigError("unknown solver method '" + name_ + "'");
    }
  }

  std::string name() const override { return name_; }

  std::vector<Prediction> predict(std::span<const DepthExample> examples,
                                  int threads) const override {
    std::vector<Prediction> out(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) out[i] = solve(examples[i]);
    });
    return out;
  }

 private:
  Prediction solve(const DepthExample& ex) const {
    Prediction p;
    try {
      double z;
      if (name_ == "box-ls") {
        z = depth_box_ls(ex.obs).z;
      } else if (name_ == "expansion-2obs") {
        z = depth_endpoint_average(ex.obs, DepthCue::kExpansion).z;
      } else {
        z = depth_endpoint_average(ex.obs, DepthCue::kParallax, ex.k).z;
      }
      if (std::isfinite(z)) {
        p.depth = z;
      } else {
        p.failure = "non-finite estimate";
      }
    } catch (const DegenerateGeometry& e) {
      p.failure = e.what();
    } catch (const DomainError& e) {
      p.failure = e.what();
    }
    return p;
  }

  std::string name_;
};

class ModelMethod final : public DepthMethod {
 public:
  ModelMethod(Model model, std::string name)
      : model_(std::move(model)), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  std::optional<std::size_t> fixed_length() const override {
    return model_.params.shape().n;
  }

  std::vector<Prediction> predict(std::span<const DepthExample> examples,
                                  int threads) const override {
    const auto depths = predict_depths(model_, examples, threads);
    std::vector<Prediction> out(depths.size());
    for (std::size_t i = 0; i < depths.size(); ++i) {
      if (depths[i] && std::isfinite(*depths[i])) {
        out[i].depth = depths[i];
      } else {
        out[i].failure = depths[i] ? "non-finite estimate"
                                   : "camera movement below the minimum range";
      }
    }
    return out;
  }

 private:
  Model model_;
  std::string name_;
};

}  // namespace

std::unique_ptr<DepthMethod> make_solver_method(const std::string& name) {
  return std::make_unique<SolverMethod>(name);
}

std::vector<std::string> solver_method_names() {
  return {"box-ls", "expansion-2obs", "parallax-2obs"};
}

std::unique_ptr<DepthMethod> make_model_method(Model model, std::string name) {
  return std::make_unique<ModelMethod>(std::move(model), std::move(name));
}

ErrorStats summarize(std::span<const double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = s.median = s.min = s.max = s.std = nan;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

SetReport evaluate(const DepthMethod& method, const std::string& set_name,
                   std::span<const DepthExample> examples, int threads) {
  const auto predictions = method.predict(examples, threads);
  SetReport report;
  report.name = set_name;
  report.records.resize(examples.size());
  std::vector<double> pct, abs;
  pct.reserve(examples.size());
  abs.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    ExampleRecord& r = report.records[i];
    r.index = i;
    r.label = examples[i].label_z;
    r.prediction = predictions[i].depth;
    if (r.prediction) {
      r.abs_error = absolute_error(r.label, *r.prediction);
      r.pct_error = percent_error(r.label, *r.prediction);
      pct.push_back(r.pct_error);
      abs.push_back(r.abs_error);
    } else {
      r.failure = predictions[i].failure;
      ++report.failures;
    }
  }
  report.percent = summarize(pct);
  report.absolute = summarize(abs);
  return report;
}

EvalReport evaluate(const DepthMethod& method,
                    std::span<const NamedExamples> sets, int threads) {
  EvalReport report;
  report.method = method.name();
  double sum = 0.0;
  for (const auto& set : sets) {
    report.sets.push_back(evaluate(method, set.name, set.examples, threads));
    sum += report.sets.back().percent.mean;
  }
  report.all_sets_mean = sets.empty()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : sum / static_cast<double>(sets.size());
  return report;
}

double ensemble_predict(const DepthMethod& method, const DepthExample& example,
                        std::size_t trials, Rng& rng) {
  if (trials == 0) throw ContractError("ensemble needs at least one trial");
  const std::size_t n = example.obs.size();
  const auto fixed = method.fixed_length();

  std::vector<DepthExample> subsets;
  subsets.reserve(trials);
  subsets.push_back(example);
  std::vector<std::size_t> pool(n - 1);
  for (std::size_t t = 1; t < trials; ++t) {
    std::vector<std::size_t> picked;
    if (fixed) {
      for (std::size_t k = 0; k + 1 < *fixed; ++k) picked.push_back(rng.index(n - 1));
    } else {
      const std::size_t m = 2 + rng.index(n - 1);  // length in [2, n]
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k + 1 < m; ++k) {
        std::swap(pool[k], pool[k + rng.index(n - 1 - k)]);
      }
      picked.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m - 1));
    }
    std::sort(picked.begin(), picked.end());
    picked.push_back(n - 1);
    std::vector<Observation> obs;
    obs.reserve(picked.size());
    for (std::size_t idx : picked) obs.push_back(example.obs[idx]);
    DepthExample sub = example;
    sub.obs = ObservationSet(std::move(obs));
    subsets.push_back(std::move(sub));
  }

  const auto predictions = method.predict(subsets, 1);
  std::vector<double> depths;
  for (const auto& p : predictions) {
    if (p.depth) depths.push_back(*p.depth);
  }
  if (depths.empty()) {
    throw DegenerateGeometry("every ensemble trial was degenerate");
  }
  std::sort(depths.begin(), depths.end());
  const std::size_t mid = depths.size() / 2;
  return depths.size() % 2 ? depths[mid] : (depths[mid - 1] + depths[mid]) / 2.0;
}

}  // namespace odmd
