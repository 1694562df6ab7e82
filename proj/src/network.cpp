#include "odmd/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "odmd/errors.hpp"
#include "odmd/parallel.hpp"
#include "odmd/rng.hpp"

namespace odmd {

const char* to_string(LossMode mode) {
  return mode == LossMode::kRel ? "rel" : "abs";
}

LossMode parse_loss_mode(const std::string& text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "rel") return LossMode::kRel;
  if (lower == "abs") return LossMode::kAbs;
  throw ConfigError("unknown loss mode '" + text + "' (expected rel or abs)");
}

NormalizedObservationSet normalize(const ObservationSet& obs,
                                   const CameraIntrinsics& k, LossMode mode) {
  using Wide = long double;
  const std::size_t n = obs.size();
  NormalizedObservationSet out;
  out.n = n;
  out.values.resize(n * kObservationDim);

  const CameraPosition& first = obs[0].position;
  const CameraPosition& last = obs.back().position;
  Wide range = 1.0L;
  if (mode == LossMode::kRel) {
    Wide sq = 0.0L;
    for (int a = 0; a < 3; ++a) {
      const Wide d = static_cast<Wide>(last[a]) - static_cast<Wide>(first[a]);
      sq += d * d;
    }
    range = std::sqrt(sq);
    if (!(range >= kMinMovementRange)) {
      throw DegenerateGeometry("camera movement range is too small for the "
                               "dimensionless formulation",
                               static_cast<double>(range));
    }
  }
  out.scale = static_cast<double>(range);

  const Wide iw = k.width;
  const Wide ih = k.height;
  for (std::size_t i = 0; i < n; ++i) {
    float* row = out.values.data() + i * kObservationDim;
    const BoundingBox& b = obs[i].box;
    row[0] = static_cast<float>(static_cast<Wide>(b.x) / iw);
    row[1] = static_cast<float>(static_cast<Wide>(b.y) / ih);
    row[2] = static_cast<float>(static_cast<Wide>(b.w) / iw);
    row[3] = static_cast<float>(static_cast<Wide>(b.h) / ih);
    const CameraPosition& p = obs[i].position;
    for (int a = 0; a < 3; ++a) {
      Wide v;
      if (mode == LossMode::kRel) {
        v = i == 0 ? 0.0L
                   : (static_cast<Wide>(p[a]) -
                      static_cast<Wide>(obs[i - 1].position[a])) /
                         range;
      } else {
        v = static_cast<Wide>(p[a]) - static_cast<Wide>(last[a]);
      }
      row[4 + a] = static_cast<float>(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
NetworkParams<S>::NetworkParams(const NetworkShape& shape) : shape_(shape) {
  if (shape.n < 2 || shape.hidden == 0 || shape.fc_width == 0 ||
      shape.fc_layers == 0) {
    throw ContractError("network shape needs n >= 2 and nonzero sizes");
  }
  const std::size_t h = shape.hidden;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    tensors_.push_back({std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  add("lstm.w_input", 4 * h, kObservationDim);
  add("lstm.w_recurrent", 4 * h, h);
  add("lstm.bias", 4 * h, 1);
  add("lstm.peep_input", h, 1);
  add("lstm.peep_forget", h, 1);
  add("lstm.peep_output", h, 1);
  for (std::size_t l = 0; l < shape.fc_layers; ++l) {
    add("fc" + std::to_string(l) + ".weight", shape.fc_width, shape.fc_input(l));
    add("fc" + std::to_string(l) + ".bias", shape.fc_width, 1);
  }
  add("out.weight", shape.fc_width, 1);
  add("out.bias", 1, 1);
  data_.assign(offset, S(0));
}

template <typename S>
typename NetworkParams<S>::MatrixMap NetworkParams<S>::matrix(std::size_t t) {
  const Tensor& info = tensors_[t];
  return MatrixMap(data_.data() + info.offset, info.rows, info.cols);
}

template <typename S>
typename NetworkParams<S>::ConstMatrixMap NetworkParams<S>::matrix(
    std::size_t t) const {
  const Tensor& info = tensors_[t];
  return ConstMatrixMap(data_.data() + info.offset, info.rows, info.cols);
}

template <typename S>
typename NetworkParams<S>::VectorMap NetworkParams<S>::vec(std::size_t t) {
  const Tensor& info = tensors_[t];
  return VectorMap(data_.data() + info.offset, info.size());
}

template <typename S>
typename NetworkParams<S>::ConstVectorMap NetworkParams<S>::vec(
    std::size_t t) const {
  const Tensor& info = tensors_[t];
  return ConstVectorMap(data_.data() + info.offset, info.size());
}

template <typename S>
NetworkParams<S> init_params(const NetworkShape& shape, std::uint64_t seed) {
  NetworkParams<S> p(shape);
  const auto& tensors = p.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const auto& info = tensors[t];
    if (info.cols == 1) continue;  // biases and peepholes
    const double limit =
        std::sqrt(6.0 / static_cast<double>(info.rows + info.cols));
    Rng rng(seed, t);
    S* data = p.flat().data() + info.offset;
    for (std::size_t i = 0; i < info.size(); ++i) {
      data[i] = static_cast<S>(rng.uniform(-limit, limit));
    }
  }
  // out.weight is stored as a vector but is a 1 x F matrix.
  {
    const std::size_t t = tensors.size() - 2;
    const double limit =
        std::sqrt(6.0 / static_cast<double>(shape.fc_width + 1));
    Rng rng(seed, t);
    auto w = p.out_weight();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = static_cast<S>(rng.uniform(-limit, limit));
    }
  }
  const auto h = static_cast<Eigen::Index>(shape.hidden);
  p.bias().segment(h, h).setConstant(S(1));
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename S>
using Mat = typename NetworkParams<S>::Matrix;
template <typename S>
using Vec = typename NetworkParams<S>::Vector;

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse().eval();
}

// Activations kept for backpropagation through one chunk.
template <typename S>
struct Tape {
  std::vector<Mat<S>> gates;   // per step: [i f g o] after activation
  std::vector<Mat<S>> cell;    // c_t
  std::vector<Mat<S>> tanh_cell;
  std::vector<Mat<S>> hidden;  // h_t
  std::vector<Mat<S>> fc;      // head activations at the final step
};

template <typename S>
void check_inputs(const NetworkParams<S>& params, const Mat<S>& inputs) {
  const auto expected = static_cast<Eigen::Index>(params.shape().context());
  if (inputs.cols() != expected) {
    throw ContractError("network expects " + std::to_string(expected) +
                        " input columns, got " + std::to_string(inputs.cols()));
  }
}

// FC stack on one step's hidden state; returns f as a column.
template <typename S>
Vec<S> run_head(const NetworkParams<S>& p, const Mat<S>& h, const Mat<S>& x,
                std::vector<Mat<S>>* acts) {
  const auto ctx = static_cast<Eigen::Index>(p.shape().context());
  Mat<S> current = h;
  for (std::size_t l = 0; l < p.shape().fc_layers; ++l) {
    const auto w = p.fc_weight(l);
    const Eigen::Index in = w.cols() - ctx;
    Mat<S> pre = current * w.leftCols(in).transpose();
    pre.noalias() += x * w.rightCols(ctx).transpose();
    pre.rowwise() += p.fc_bias(l).transpose();
    current = pre.cwiseMax(S(0));
    if (acts) acts->push_back(current);
  }
  Vec<S> f = current * p.out_weight();
  f.array() += p.out_bias();
  return f;
}

// Runs the LSTM over all steps. Calls on_step(t, h_t) after every step.
template <typename S, typename OnStep>
void run_lstm(const NetworkParams<S>& p, const Mat<S>& x, Tape<S>* tape,
              OnStep&& on_step) {
  const auto rows = x.rows();
  const auto hs = static_cast<Eigen::Index>(p.shape().hidden);
  const auto d = static_cast<Eigen::Index>(kObservationDim);
  Mat<S> h = Mat<S>::Zero(rows, hs);
  Mat<S> c = Mat<S>::Zero(rows, hs);
  const auto wx = p.w_input();
  const auto wh = p.w_recurrent();
  const auto pi = p.peep_input().transpose().array();
  const auto pf = p.peep_forget().transpose().array();
  const auto po = p.peep_output().transpose().array();

  for (std::size_t t = 0; t < p.shape().n; ++t) {
    Mat<S> a = x.middleCols(static_cast<Eigen::Index>(t) * d, d) * wx.transpose();
    a.noalias() += h * wh.transpose();
    a.rowwise() += p.bias().transpose();

    Mat<S> gates(rows, 4 * hs);
    gates.leftCols(hs) =
        sigmoid((a.leftCols(hs).array() + c.array().rowwise() * pi).eval());
    gates.middleCols(hs, hs) = sigmoid(
        (a.middleCols(hs, hs).array() + c.array().rowwise() * pf).eval());
    gates.middleCols(2 * hs, hs) = a.middleCols(2 * hs, hs).array().tanh();
    c = (gates.middleCols(hs, hs).array() * c.array() +
         gates.leftCols(hs).array() * gates.middleCols(2 * hs, hs).array())
            .matrix();
    gates.rightCols(hs) =
        sigmoid((a.rightCols(hs).array() + c.array().rowwise() * po).eval());
    Mat<S> tc = c.array().tanh().matrix();
    h = (gates.rightCols(hs).array() * tc.array()).matrix();

    if (tape) {
      tape->gates.push_back(std::move(gates));
      tape->cell.push_back(c);
      tape->tanh_cell.push_back(std::move(tc));
      tape->hidden.push_back(h);
    }
    on_step(t, h);
  }
}

// Sum of squared residuals of one chunk; accumulates the gradient of
// sum(r^2) * grad_scale into grad when given.
template <typename S>
S chunk_pass(const NetworkParams<S>& p, const Mat<S>& x, const Vec<S>& targets,
             S grad_scale, NetworkParams<S>* grad, S* residuals) {
  const std::size_t n = p.shape().n;
  Tape<S> tape;
  Vec<S> f;
  run_lstm(p, x, grad ? &tape : nullptr, [&](std::size_t t, const Mat<S>& h) {
    if (t + 1 == n) f = run_head(p, h, x, grad ? &tape.fc : nullptr);
  });
  const Vec<S> r = targets - f;
  for (Eigen::Index i = 0; i < r.size(); ++i) residuals[i] = r(i);
  const S sse = r.squaredNorm();
  if (!grad) return sse;

  const auto ctx = static_cast<Eigen::Index>(p.shape().context());
  const auto hs = static_cast<Eigen::Index>(p.shape().hidden);
  const auto d = static_cast<Eigen::Index>(kObservationDim);
  const auto layers = p.shape().fc_layers;

  // d(sum r^2)/df = -2 r
  const Vec<S> df = (S(-2) * grad_scale) * r;
  grad->out_weight().noalias() += tape.fc.back().transpose() * df;
  grad->out_bias() += df.sum();
  Mat<S> du = df * p.out_weight().transpose();
  for (std::size_t l = layers; l-- > 0;) {
    const Mat<S>& act = tape.fc[l];
    const Mat<S>& prev = l == 0 ? tape.hidden.back() : tape.fc[l - 1];
    const Mat<S> dpre =
        (act.array() > S(0)).select(du.array(), S(0)).matrix();
    auto gw = grad->fc_weight(l);
    const Eigen::Index in = gw.cols() - ctx;
    gw.leftCols(in).noalias() += dpre.transpose() * prev;
    gw.rightCols(ctx).noalias() += dpre.transpose() * x;
    grad->fc_bias(l).noalias() += dpre.colwise().sum().transpose();
    du = dpre * p.fc_weight(l).leftCols(in);
  }

  const auto pi = p.peep_input().transpose().array();
  const auto pf = p.peep_forget().transpose().array();
  const auto po = p.peep_output().transpose().array();
  const auto rows = x.rows();
  Mat<S> dh = std::move(du);
  Mat<S> dc = Mat<S>::Zero(rows, hs);
  const Mat<S> zeros = Mat<S>::Zero(rows, hs);
  Mat<S> da(rows, 4 * hs);
  for (std::size_t t = n; t-- > 0;) {
    const Mat<S>& gates = tape.gates[t];
    const auto ig = gates.leftCols(hs).array();
    const auto fg = gates.middleCols(hs, hs).array();
    const auto gg = gates.middleCols(2 * hs, hs).array();
    const auto og = gates.rightCols(hs).array();
    const auto c = tape.cell[t].array();
    const auto tc = tape.tanh_cell[t].array();
    const auto c_prev = (t == 0 ? zeros : tape.cell[t - 1]).array();
    const Mat<S>& h_prev = t == 0 ? zeros : tape.hidden[t - 1];

    const Mat<S> dao = (dh.array() * tc * og * (S(1) - og)).matrix();
    dc.array() += dh.array() * og * (S(1) - tc.square()) +
                  dao.array().rowwise() * po;
    grad->peep_output().noalias() +=
        (dao.array() * c).matrix().colwise().sum().transpose();

    da.middleCols(hs, hs) = (dc.array() * c_prev * fg * (S(1) - fg)).matrix();
    da.leftCols(hs) = (dc.array() * gg * ig * (S(1) - ig)).matrix();
    da.middleCols(2 * hs, hs) = (dc.array() * ig * (S(1) - gg.square())).matrix();
    da.rightCols(hs) = dao;

    grad->peep_input().noalias() +=
        (da.leftCols(hs).array() * c_prev).matrix().colwise().sum().transpose();
    grad->peep_forget().noalias() +=
        (da.middleCols(hs, hs).array() * c_prev).matrix().colwise().sum().transpose();

    dc = (dc.array() * fg + da.leftCols(hs).array().rowwise() * pi +
          da.middleCols(hs, hs).array().rowwise() * pf)
             .matrix();

    grad->w_input().noalias() +=
        da.transpose() * x.middleCols(static_cast<Eigen::Index>(t) * d, d);
    grad->w_recurrent().noalias() += da.transpose() * h_prev;
    grad->bias().noalias() += da.colwise().sum().transpose();
    dh = da * p.w_recurrent();
  }
  return sse;
}

std::size_t chunk_count(std::size_t rows) {
  return (rows + kChunkRows - 1) / kChunkRows;
}

template <typename S>
S run_chunks(const NetworkParams<S>& params, const TrainingBatch<S>& batch,
             int threads, NetworkParams<S>* grad, std::vector<S>& residuals) {
  check_inputs(params, batch.inputs);
  const std::size_t rows = batch.size();
  if (rows == 0) throw InputError("loss: batch has no usable examples");
  const std::size_t chunks = chunk_count(rows);
  residuals.assign(rows, S(0));
  std::vector<S> sse(chunks, S(0));
  std::vector<NetworkParams<S>> grads;
  if (grad) grads.assign(chunks, NetworkParams<S>(params.shape()));
  const S scale = S(1) / static_cast<S>(rows);

  parallel_for(chunks, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto r0 = static_cast<Eigen::Index>(c * kChunkRows);
      const auto len = static_cast<Eigen::Index>(
          std::min(kChunkRows, rows - c * kChunkRows));
      const Mat<S> x = batch.inputs.middleRows(r0, len);
      const Vec<S> y = batch.targets.segment(r0, len);
      sse[c] = chunk_pass(params, x, y, scale, grad ? &grads[c] : nullptr,
                          residuals.data() + r0);
    }
  });

  S total = 0;
  for (S v : sse) total += v;
  if (grad) {
    *grad = NetworkParams<S>(params.shape());
    auto out = grad->flat();
    for (const auto& g : grads) {
      const auto in = g.flat();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
    }
  }
  return total * scale;
}

}  // namespace

template <typename S>
typename NetworkParams<S>::Matrix forward(
    const NetworkParams<S>& params,
    const typename NetworkParams<S>::Matrix& inputs, bool all_steps) {
  check_inputs(params, inputs);
  const std::size_t n = params.shape().n;
  Mat<S> out(inputs.rows(), all_steps ? static_cast<Eigen::Index>(n) : 1);
  run_lstm<S>(params, inputs, nullptr, [&](std::size_t t, const Mat<S>& h) {
    if (all_steps) {
      out.col(static_cast<Eigen::Index>(t)) = run_head(params, h, inputs, nullptr);
    } else if (t + 1 == n) {
      out.col(0) = run_head(params, h, inputs, nullptr);
    }
  });
  return out;
}

template <typename S>
TrainingBatch<S> make_batch(std::span<const DepthExample> examples,
                            LossMode mode, std::size_t n) {
  TrainingBatch<S> batch;
  const std::size_t ctx = n * kObservationDim;
  std::vector<NormalizedObservationSet> rows;
  rows.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const DepthExample& ex = examples[i];
    if (ex.obs.size() != n) {
      throw CompatibilityError("example has " + std::to_string(ex.obs.size()) +
                               " observations, network expects " +
                               std::to_string(n));
    }
    try {
      rows.push_back(normalize(ex.obs, ex.k, mode));
      batch.source_index.push_back(i);
    } catch (const DegenerateGeometry&) {
      batch.skipped.push_back(i);
    }
  }
  const auto b = static_cast<Eigen::Index>(rows.size());
  batch.inputs.resize(b, static_cast<Eigen::Index>(ctx));
  batch.targets.resize(b);
  batch.scales.resize(rows.size());
  for (Eigen::Index r = 0; r < b; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < ctx; ++j) {
      batch.inputs(r, static_cast<Eigen::Index>(j)) = static_cast<S>(row.values[j]);
    }
    const double label = examples[batch.source_index[static_cast<std::size_t>(r)]].label_z;
    batch.targets(r) = static_cast<S>(label / row.scale);
    batch.scales[static_cast<std::size_t>(r)] = row.scale;
  }
  return batch;
}

template <typename S>
LossResult<S> loss(const NetworkParams<S>& params, const TrainingBatch<S>& batch,
                   int threads) {
  LossResult<S> out;
  out.loss = run_chunks<S>(params, batch, threads, nullptr, out.residuals);
  return out;
}

template <typename S>
NetworkParams<S> backward(const NetworkParams<S>& params,
                          const TrainingBatch<S>& batch, int threads,
                          S* loss_out) {
  NetworkParams<S> grad(params.shape());
  std::vector<S> residuals;
  const S value = run_chunks<S>(params, batch, threads, &grad, residuals);
  if (loss_out) *loss_out = value;
  return grad;
}

double predict_depth(const Model& model, const ObservationSet& obs,
                     const CameraIntrinsics& k) {
  const NetworkShape& shape = model.params.shape();
  if (obs.size() != shape.n) {
    throw CompatibilityError("observation set has " + std::to_string(obs.size()) +
                             " observations, network expects " +
                             std::to_string(shape.n));
  }
  const NormalizedObservationSet x = normalize(obs, k, model.mode);
  Mat<float> row(1, static_cast<Eigen::Index>(shape.context()));
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    row(0, static_cast<Eigen::Index>(j)) = x.values[j];
  }
  const double f = forward(model.params, row, false)(0, 0);
  return f * x.scale;
}

std::vector<std::optional<double>> predict_depths(
    const Model& model, std::span<const DepthExample> examples, int threads) {
  const std::size_t n = model.params.shape().n;
  const TrainingBatch<float> batch = make_batch<float>(examples, model.mode, n);
  std::vector<std::optional<double>> out(examples.size());
  const std::size_t rows = batch.size();
  parallel_for(chunk_count(rows), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto r0 = static_cast<Eigen::Index>(c * kChunkRows);
      const auto len = static_cast<Eigen::Index>(
          std::min(kChunkRows, rows - c * kChunkRows));
      const Mat<float> x = batch.inputs.middleRows(r0, len);
      const Mat<float> f = forward(model.params, x, false);
      for (Eigen::Index i = 0; i < len; ++i) {
        const auto row = static_cast<std::size_t>(r0 + i);
        out[batch.source_index[row]] =
            static_cast<double>(f(i, 0)) * batch.scales[row];
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'O', 'D', 'M', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out.push_back(static_cast<std::uint8_t>(
          static_cast<std::make_unsigned_t<T>>(v) >> (8 * i)));
    }
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    le(u);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float f32() {
    const auto u = le<std::uint32_t>();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw VersionError("checkpoint is truncated at byte " + std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  const auto& p = model.params;
  const NetworkShape& s = p.shape();
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.n));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.hidden));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.fc_width));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(s.fc_layers));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.mode));
  w.le<std::uint32_t>(0);  // observation-major context
  w.le<std::uint32_t>(static_cast<std::uint32_t>(p.tensors().size()));
  for (const auto& t : p.tensors()) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.rows));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.cols));
  }
  w.le<std::uint64_t>(p.size());
  const std::size_t payload = w.out.size();
  for (float v : p.flat()) w.f32(v);
  w.le<std::uint64_t>(fnv1a(w.out.data() + payload, w.out.size() - payload));
  return std::move(w.out);
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw VersionError("not a checkpoint file (bad magic)");
  }
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkShape shape;
  shape.n = r.le<std::uint32_t>();
  shape.hidden = r.le<std::uint32_t>();
  shape.fc_width = r.le<std::uint32_t>();
  shape.fc_layers = r.le<std::uint32_t>();
  const auto mode = r.le<std::uint32_t>();
  const auto order = r.le<std::uint32_t>();
  if (mode > 1 || order != 0 || shape.n < 2 || shape.n > 4096 ||
      shape.hidden == 0 || shape.hidden > 65536 || shape.fc_width == 0 ||
      shape.fc_width > 65536 || shape.fc_layers == 0 || shape.fc_layers > 256) {
    throw VersionError("checkpoint header is corrupted");
  }
  Model model{NetworkParams<float>(shape), static_cast<LossMode>(mode)};
  const auto count = r.le<std::uint32_t>();
  if (count != model.params.tensors().size()) {
    throw VersionError("checkpoint tensor manifest does not match its header");
  }
  for (const auto& t : model.params.tensors()) {
    const auto len = r.le<std::uint32_t>();
    if (len > 256) throw VersionError("checkpoint tensor name is corrupted");
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    const auto rows = r.le<std::uint32_t>();
    const auto cols = r.le<std::uint32_t>();
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw VersionError("checkpoint tensor '" + name + "' has unexpected shape");
    }
  }
  const auto params = r.le<std::uint64_t>();
  if (params != model.params.size()) {
    throw VersionError("checkpoint parameter count does not match its manifest");
  }
  const std::size_t payload = r.pos();
  for (float& v : model.params.flat()) v = r.f32();
  const std::uint64_t expected = fnv1a(bytes.data() + payload, r.pos() - payload);
  if (r.le<std::uint64_t>() != expected) {
    throw VersionError("checkpoint checksum mismatch (corrupted file)");
  }
  if (r.remaining() != 0) throw VersionError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template class NetworkParams<float>;
template class NetworkParams<double>;
template NetworkParams<float> init_params<float>(const NetworkShape&, std::uint64_t);
template NetworkParams<double> init_params<double>(const NetworkShape&, std::uint64_t);
template Mat<float> forward<float>(const NetworkParams<float>&, const Mat<float>&, bool);
template Mat<double> forward<double>(const NetworkParams<double>&, const Mat<double>&, bool);
template TrainingBatch<float> make_batch<float>(std::span<const DepthExample>, LossMode, std::size_t);
template TrainingBatch<double> make_batch<double>(std::span<const DepthExample>, LossMode, std::size_t);
template LossResult<float> loss<float>(const NetworkParams<float>&, const TrainingBatch<float>&, int);
template LossResult<double> loss<double>(const NetworkParams<double>&, const TrainingBatch<double>&, int);
template NetworkParams<float> backward<float>(const NetworkParams<float>&, const TrainingBatch<float>&, int, float*);
template NetworkParams<double> backward<double>(const NetworkParams<double>&, const TrainingBatch<double>&, int, double*);

}  // namespace odmd
