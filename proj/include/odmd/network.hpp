#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odmd/generator.hpp"
#include "odmd/geometry.hpp"

namespace odmd {

enum class LossMode : std::uint32_t { kRel = 0, kAbs = 1 };

const char* to_string(LossMode mode);
// Accepts "rel" / "abs" (case-insensitive); throws ConfigError otherwise.
LossMode parse_loss_mode(const std::string& text);

inline constexpr std::size_t kObservationDim = 7;
// Minimum overall camera movement for the dimensionless formulation.
inline constexpr double kMinMovementRange = 1e-6;

// Network input: n rows of (x/W, y/H, w/W, h/H, p0, p1, p2), stored
// observation-major. Rel mode uses incremental moves divided by the overall
// movement range (first row zero); Abs mode uses positions relative to the
// final one, in meters. Values are rounded once to float from extended
// precision, so positions that differ only by a common scale factor give
// identical rows.
struct NormalizedObservationSet {
  std::size_t n = 0;
  std::vector<float> values;  // n * 7
  double scale = 1.0;         // ||p_n - p_1|| in Rel mode, 1 in Abs mode

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * kObservationDim,
                                                  kObservationDim);
  }
};

// Throws DegenerateGeometry in Rel mode when ||p_n - p_1|| < 1e-6 m.
NormalizedObservationSet normalize(const ObservationSet& obs,
                                   const CameraIntrinsics& k, LossMode mode);

struct NetworkShape {
  std::size_t n = 10;
  std::size_t hidden = 128;
  std::size_t fc_width = 256;
  std::size_t fc_layers = 6;

  std::size_t context() const { return kObservationDim * n; }
  std::size_t fc_input(std::size_t layer) const {
    return (layer == 0 ? hidden : fc_width) + context();
  }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

// All trainable weights in one contiguous buffer. Tensors are column-major
// and laid out in this order:
//   lstm.w_input     4H x 7     gate rows: input, forget, cell, output
//   lstm.w_recurrent 4H x H
//   lstm.bias        4H
//   lstm.peep_input, lstm.peep_forget, lstm.peep_output   H each
//   fc{l}.weight     F x (in_l + 7n)   columns: previous activation, then X
//   fc{l}.bias       F
//   out.weight       F
//   out.bias         1
template <typename S>
class NetworkParams {
 public:
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  struct Tensor {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
    friend bool operator==(const Tensor&, const Tensor&) = default;
  };

  // Zero-initialized.
  explicit NetworkParams(const NetworkShape& shape = {});

  const NetworkShape& shape() const { return shape_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return data_.size(); }
  std::span<S> flat() { return data_; }
  std::span<const S> flat() const { return data_; }

  MatrixMap matrix(std::size_t tensor);
  ConstMatrixMap matrix(std::size_t tensor) const;

  MatrixMap w_input() { return matrix(0); }
  ConstMatrixMap w_input() const { return matrix(0); }
  MatrixMap w_recurrent() { return matrix(1); }
  ConstMatrixMap w_recurrent() const { return matrix(1); }
  VectorMap bias() { return vec(2); }
  ConstVectorMap bias() const { return vec(2); }
  VectorMap peep_input() { return vec(3); }
  ConstVectorMap peep_input() const { return vec(3); }
  VectorMap peep_forget() { return vec(4); }
  ConstVectorMap peep_forget() const { return vec(4); }
  VectorMap peep_output() { return vec(5); }
  ConstVectorMap peep_output() const { return vec(5); }
  MatrixMap fc_weight(std::size_t l) { return matrix(6 + 2 * l); }
  ConstMatrixMap fc_weight(std::size_t l) const { return matrix(6 + 2 * l); }
  VectorMap fc_bias(std::size_t l) { return vec(7 + 2 * l); }
  ConstVectorMap fc_bias(std::size_t l) const { return vec(7 + 2 * l); }
  VectorMap out_weight() { return vec(tensors_.size() - 2); }
  ConstVectorMap out_weight() const { return vec(tensors_.size() - 2); }
  S& out_bias() { return data_.back(); }
  S out_bias() const { return data_.back(); }

  template <typename T>
  NetworkParams<T> cast() const {
    NetworkParams<T> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out.flat()[i] = static_cast<T>(data_[i]);
    }
    return out;
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  VectorMap vec(std::size_t tensor);
  ConstVectorMap vec(std::size_t tensor) const;

  NetworkShape shape_;
  std::vector<Tensor> tensors_;
  std::vector<S> data_;
};

// Uniform +-sqrt(6 / (fan_in + fan_out)) per weight matrix, forget-gate
// bias 1, every other bias and the peepholes 0.
template <typename S>
NetworkParams<S> init_params(const NetworkShape& shape, std::uint64_t seed);

// Rows of inputs are flattened normalized sets (7n values each). Returns a
// B x n matrix of per-step outputs f_1..f_n, or B x 1 holding f_n only when
// all_steps is false. Throws ContractError on shape mismatch.
template <typename S>
typename NetworkParams<S>::Matrix forward(
    const NetworkParams<S>& params,
    const typename NetworkParams<S>::Matrix& inputs, bool all_steps = true);

// Inputs and regression targets of a batch of examples. Rel-mode examples
// without camera movement are skipped and listed in `skipped`.
template <typename S>
struct TrainingBatch {
  typename NetworkParams<S>::Matrix inputs;   // B x 7n
  typename NetworkParams<S>::Vector targets;  // Z_n, or Z_n / range
  std::vector<double> scales;
  std::vector<std::size_t> source_index;      // example index per row
  std::vector<std::size_t> skipped;

  std::size_t size() const { return scales.size(); }
};

template <typename S>
TrainingBatch<S> make_batch(std::span<const DepthExample> examples,
                            LossMode mode, std::size_t n);

// Rows handled per work unit. Partial sums are combined in chunk order, so
// losses and gradients do not depend on the worker count.
inline constexpr std::size_t kChunkRows = 64;

template <typename S>
struct LossResult {
  S loss = 0;                  // mean squared residual
  std::vector<S> residuals;    // target - f_n per row
};

template <typename S>
LossResult<S> loss(const NetworkParams<S>& params, const TrainingBatch<S>& batch,
                   int threads = 1);

// d loss / d params by backpropagation through time. loss_out, when given,
// receives the same value loss() would return.
template <typename S>
NetworkParams<S> backward(const NetworkParams<S>& params,
                          const TrainingBatch<S>& batch, int threads = 1,
                          S* loss_out = nullptr);

// A trained float network together with the formulation it was trained for.
struct Model {
  NetworkParams<float> params;
  LossMode mode = LossMode::kRel;
};

// Depth at the final observation: f_n * ||p_n - p_1|| (Rel) or f_n (Abs).
double predict_depth(const Model& model, const ObservationSet& obs,
                     const CameraIntrinsics& k);

// Batched predict_depth; nullopt for examples whose input is degenerate.
// Rows are processed in fixed kChunkRows chunks.
std::vector<std::optional<double>> predict_depths(
    const Model& model, std::span<const DepthExample> examples,
    int threads = 1);

// Little-endian checkpoint:
//   char[8]  "ODMDCKPT"
//   u32      format version (1)
//   u32      n, hidden, fc_width, fc_layers
//   u32      loss mode (0 rel, 1 abs)
//   u32      context order (0 = observation-major)
//   u32      tensor count T
//   T x { u32 name length, name bytes, u32 rows, u32 cols }
//   u64      parameter count P
//   P x f32  parameters in tensor order
//   u64      FNV-1a hash of the parameter bytes
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);
std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace odmd
