#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odmd/generator.hpp"
#include "odmd/geometry.hpp"
#include "odmd/network.hpp"
#include "odmd/rng.hpp"

namespace odmd {

// |Z - Z_hat| / Z * 100. Throws DomainError when Z <= 0.
double percent_error(double truth, double prediction);
double absolute_error(double truth, double prediction);

// An observation whose detector may have missed the object.
struct PartialObservation {
  std::optional<BoundingBox> box;
  CameraPosition position;
};

// Every missing box takes the box of the nearest detected index; ties go to
// the earlier index. Throws InputError without any detection.
ObservationSet fill_missing_detections(std::span<const PartialObservation> obs);

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, nonzero = foreground

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0) {}
  bool at(std::size_t x, std::size_t y) const { return pixels[y * width + x] != 0; }
  void set(std::size_t x, std::size_t y, bool on = true) {
    pixels[y * width + x] = on ? 1 : 0;
  }
};

// Reads a binary (P1/P4) or grayscale (P2/P5) netpbm image; nonzero pixels
// are foreground.
BinaryMask load_mask_pnm(const std::string& path);

// Box around one 8-connected component of the mask: the component with the
// smallest (centroid distance from anchor) / (pixel count). The anchor
// defaults to the image center ((W-1)/2, (H-1)/2). Spans are inclusive:
// w = max_x - min_x + 1, x = (min_x + max_x) / 2. Throws InputError for an
// empty mask.
BoundingBox mask_to_box(const BinaryMask& mask,
                        std::optional<Point2> anchor = std::nullopt);

// ---------------------------------------------------------------------------
// Benchmark sets

enum class Split { kValidation, kTest };

const char* to_string(Split split);
Split parse_split(const std::string& text);

inline constexpr std::size_t kValidationSetSize = 2400;
inline constexpr std::size_t kTestSetSize = 3000;

struct BenchmarkSet {
  std::string name;
  Split split = Split::kTest;
  std::vector<DepthExample> examples;
  GenerationConfig config;
  std::uint64_t seed = 0;
  std::string generator_version;
};

// Fixed seed of a named set (see presets.cpp).
std::uint64_t benchmark_seed(const std::string& name, Split split);

// Regenerates a named set. size and seed default to the published values.
BenchmarkSet make_benchmark_set(const std::string& name, Split split,
                                int threads = 0,
                                std::optional<std::size_t> size = std::nullopt,
                                std::optional<std::uint64_t> seed = std::nullopt);

// ---------------------------------------------------------------------------
// Methods and evaluation

struct Prediction {
  std::optional<double> depth;  // empty on failure
  std::string failure;
};

class DepthMethod {
 public:
  virtual ~DepthMethod() = default;
  virtual std::string name() const = 0;
  // Number of observations the method requires, if fixed.
  virtual std::optional<std::size_t> fixed_length() const { return std::nullopt; }
  // Depth at the final observation of each example.
  virtual std::vector<Prediction> predict(std::span<const DepthExample> examples,
                                          int threads = 1) const = 0;
};

// "box-ls", "expansion-2obs", "parallax-2obs".
std::unique_ptr<DepthMethod> make_solver_method(const std::string& name);
std::vector<std::string> solver_method_names();

std::unique_ptr<DepthMethod> make_model_method(Model model,
                                               std::string name = "dbox");

struct ErrorStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;  // population standard deviation
};

ErrorStats summarize(std::span<const double> values);

struct ExampleRecord {
  std::size_t index = 0;
  double label = 0.0;
  std::optional<double> prediction;
  double abs_error = 0.0;
  double pct_error = 0.0;
  std::string failure;
};

struct SetReport {
  std::string name;
  ErrorStats percent;
  ErrorStats absolute;
  std::size_t failures = 0;
  std::vector<ExampleRecord> records;
};

struct EvalReport {
  std::string method;
  std::vector<SetReport> sets;
  // Unweighted mean of the per-set mean percent errors.
  double all_sets_mean = 0.0;
};

SetReport evaluate(const DepthMethod& method, const std::string& set_name,
                   std::span<const DepthExample> examples, int threads = 1);

struct NamedExamples {
  std::string name;
  std::span<const DepthExample> examples;
};

EvalReport evaluate(const DepthMethod& method,
                    std::span<const NamedExamples> sets, int threads = 1);

// Median over `trials` predictions on random order-preserving subsequences
// that always keep the final observation. The first trial uses the full
// sequence. Fixed-length methods get length-n subsequences drawn with
// replacement. Throws DegenerateGeometry if every trial fails.
double ensemble_predict(const DepthMethod& method, const DepthExample& example,
                        std::size_t trials, Rng& rng);

}  // namespace odmd
