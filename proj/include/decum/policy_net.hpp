#pragma once

// Feed-forward consumption policy 4 -> K1 -> K2 -> K3 -> 1 with ReLU hidden
// units and a sigmoid head scaled by the spendable amount W + A.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "decum/ad.hpp"
#include "decum/error.hpp"

namespace decum::policy {

struct MlpShape {
  int k1 = 20, k2 = 20, k3 = 20;
  static constexpr int inputs = 4;

  bool operator==(const MlpShape&) const = default;
};

// Weights and biases in one flat buffer: w0 (k1 x 4), b0, w1 (k2 x k1), b1,
// w2 (k3 x k2), b2, w3 (1 x k3), b3. Matrices are row-major (out x in).
class MlpParams {
 public:
  struct Layer {
    int rows, cols;
    std::size_t weight_offset, bias_offset;
  };

  MlpParams() : MlpParams(MlpShape{}) {}
  explicit MlpParams(const MlpShape& shape) : shape_(shape) {
    if (shape.k1 < 1 || shape.k2 < 1 || shape.k3 < 1) throw ConfigError("network widths must be >= 1");
    const std::array<int, 5> dims = {MlpShape::inputs, shape.k1, shape.k2, shape.k3, 1};
    std::size_t offset = 0;
    for (int l = 0; l < 4; ++l) {
      layers_[l] = Layer{dims[l + 1], dims[l], offset, offset + static_cast<std::size_t>(dims[l + 1] * dims[l])};
      offset = layers_[l].bias_offset + static_cast<std::size_t>(dims[l + 1]);
    }
    values_.assign(offset, 0.0);
  }

  const MlpShape& shape() const { return shape_; }
  const Layer& layer(int l) const { return layers_[l]; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& weight(int l, int row, int col) { return values_[layers_[l].weight_offset + row * layers_[l].cols + col]; }
  double weight(int l, int row, int col) const {
    return values_[layers_[l].weight_offset + row * layers_[l].cols + col];
  }
  double& bias(int l, int row) { return values_[layers_[l].bias_offset + row]; }
  double bias(int l, int row) const { return values_[layers_[l].bias_offset + row]; }

  const double* weights_ptr(int l) const { return values_.data() + layers_[l].weight_offset; }
  const double* biases_ptr(int l) const { return values_.data() + layers_[l].bias_offset; }
  double* weights_ptr(int l) { return values_.data() + layers_[l].weight_offset; }
  double* biases_ptr(int l) { return values_.data() + layers_[l].bias_offset; }

  void set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

  bool finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const MlpParams& o) const { return shape_ == o.shape_ && values_ == o.values_; }

 private:
  MlpShape shape_;
  std::array<Layer, 4> layers_{};
  std::vector<double> values_;
};

// He initialisation: weights ~ N(0, 2 / fan_in), biases zero.
inline MlpParams he_init(const MlpShape& shape, std::uint64_t seed) {
  MlpParams p(shape);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < 4; ++l) {
    const auto& L = p.layer(l);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / L.cols));
    for (int r = 0; r < L.rows; ++r)
      for (int c = 0; c < L.cols; ++c) p.weight(l, r, c) = normal(rng);
  }
  return p;
}

// Feature scaling: t / time_scale, W / wealth_scale, R and Q as they are.
struct Normalization {
  double time_scale = 41.0;
  double wealth_scale = 500000.0;

  void validate() const {
    if (!(time_scale > 0 && wealth_scale > 0)) throw ConfigError("normalization constants must be positive");
  }
  bool operator==(const Normalization&) const = default;
};

template <class S>
struct PolicyInput {
  double t = 0;  // years since retirement
  S W{};         // nominal wealth
  S R{};         // previous-period portfolio return
  S Q{};         // deflator
};

namespace detail {

using Rows = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// out(j, :) = b_j + sum_k W(j, k) in(k, :), summed in fixed k order for any batch width.
inline Rows dense(const MlpParams& p, int l, const Rows& in) {
  const auto& L = p.layer(l);
  const double* w = p.weights_ptr(l);
  const double* b = p.biases_ptr(l);
  Rows out(L.rows, in.cols());
  for (int j = 0; j < L.rows; ++j) {
    out.row(j).setConstant(b[j]);
    for (int k = 0; k < L.cols; ++k) out.row(j) += w[j * L.cols + k] * in.row(k);
  }
  return out;
}

inline void relu_inplace(Rows& x) { x = (x > 0.0).select(x, 0.0); }

// Whole network as one tape node: caches activations and, on the reverse
// sweep, accumulates parameter gradients into `sink` (if any) and feature
// adjoints into the parents.
class MlpOp final : public ad::CustomOp {
 public:
  MlpOp(const MlpParams& params, MlpParams* sink, Rows x, Rows h0, Rows h1, Rows h2)
      : params_(params), sink_(sink), x_(std::move(x)), h_{std::move(h0), std::move(h1), std::move(h2)} {}

  void backward(const ad::Array& adjoint, std::span<ad::Array*> parents) override {
    const Eigen::Index B = adjoint.size();
    Rows delta = adjoint.transpose();  // 1 x B
    for (int l = 3; l >= 0; --l) {
      const auto& L = params_.layer(l);
      const Rows& in = l == 0 ? x_ : h_[l - 1];
      const double* w = params_.weights_ptr(l);
      if (sink_ != nullptr) {
        double* gw = sink_->weights_ptr(l);
        double* gb = sink_->biases_ptr(l);
        for (int j = 0; j < L.rows; ++j) {
          gb[j] += delta.row(j).sum();
          for (int k = 0; k < L.cols; ++k) gw[j * L.cols + k] += (delta.row(j) * in.row(k)).sum();
        }
      }
      Rows back = Rows::Zero(L.cols, B);
      for (int j = 0; j < L.rows; ++j)
        for (int k = 0; k < L.cols; ++k) back.row(k) += w[j * L.cols + k] * delta.row(j);
      if (l > 0) back = (in > 0.0).select(back, 0.0);
      delta = std::move(back);
    }
    for (int i = 0; i < MlpShape::inputs; ++i) *parents[i] += delta.row(i).transpose();
  }

 private:
  const MlpParams& params_;
  MlpParams* sink_;
  Rows x_;
  std::array<Rows, 3> h_;
};

}  // namespace detail

// Raw network output z for the four (already scaled) features.
inline ad::Var network_output(const MlpParams& params, const std::array<ad::Var, 4>& features,
                              MlpParams* grad_sink) {
  if (!params.finite()) throw NumericError("policy network has non-finite parameters");
  ad::Tape& tape = *features[0].tape();
  const Eigen::Index B = tape.width();
  detail::Rows x(MlpShape::inputs, B);
  std::vector<int> parents;
  for (int i = 0; i < MlpShape::inputs; ++i) {
    if (features[i].tape() != &tape) throw NumericError("policy features live on different tapes");
    x.row(i) = features[i].value().transpose();
    parents.push_back(features[i].id());
  }
  auto h0 = detail::dense(params, 0, x);
  detail::relu_inplace(h0);
  auto h1 = detail::dense(params, 1, h0);
  detail::relu_inplace(h1);
  auto h2 = detail::dense(params, 2, h1);
  detail::relu_inplace(h2);
  const auto z = detail::dense(params, 3, h2);
  ad::Array value = z.row(0).transpose();
  return tape.custom(std::move(parents), std::move(value),
                     std::make_unique<detail::MlpOp>(params, grad_sink, std::move(x), std::move(h0),
                                                     std::move(h1), std::move(h2)));
}

// A tape together with the parameter-gradient buffer its network nodes feed.
class PolicyTape {
 public:
  PolicyTape(Eigen::Index width, const MlpShape& shape) : tape(width), grad(shape) {}
  PolicyTape(const PolicyTape&) = delete;
  PolicyTape& operator=(const PolicyTape&) = delete;

  ad::Tape tape;
  MlpParams grad;
};

// c = (W + A) * sigmoid(z(t, W, R, Q)).
inline ad::Var forward(const MlpParams& params, const Normalization& norm, const PolicyInput<ad::Var>& in,
                       const ad::Var& W_plus_A, PolicyTape& pt) {
  if (ad::lane_min(W_plus_A) < 0) throw NumericError("policy forward: negative spendable amount");
  ad::Tape& tape = pt.tape;
  const std::array<ad::Var, 4> features = {tape.input(in.t / norm.time_scale), in.W / norm.wealth_scale, in.R, in.Q};
  return W_plus_A * ad::sigmoid(network_output(params, features, &pt.grad));
}

// Single-state convenience evaluation.
inline double forward(const MlpParams& params, const Normalization& norm, const PolicyInput<double>& in,
                      double W_plus_A) {
  PolicyTape pt(1, params.shape());
  auto& tape = pt.tape;
  const PolicyInput<ad::Var> v{in.t, tape.input(in.W), tape.input(in.R), tape.input(in.Q)};
  return forward(params, norm, v, tape.input(W_plus_A), pt).value(0);
}

// Reverse sweep from `output`; returns d(seed . output)/d(params).
inline const MlpParams& backward(PolicyTape& pt, const ad::Var& output, const ad::Array& seed) {
  if (output.tape() != &pt.tape) throw NumericError("backward: output does not belong to this policy tape");
  pt.grad.set_zero();
  pt.tape.backward(output, seed);
  return pt.grad;
}

inline const MlpParams& backward(PolicyTape& pt, const ad::Var& output) {
  return backward(pt, output, ad::Array::Ones(pt.tape.width()));
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text, doubles in hexadecimal so reload is bit-exact.

struct Checkpoint {
  MlpParams params;
  Normalization norm;
  std::uint64_t config_hash = 0;
  std::size_t iteration = 0;
};

inline constexpr int kCheckpointVersion = 1;

inline std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  const auto& s = c.params.shape();
  out << "decum-policy-checkpoint " << kCheckpointVersion << '\n'
      << "widths " << s.k1 << ' ' << s.k2 << ' ' << s.k3 << '\n'
      << "time_scale " << hex(c.norm.time_scale) << '\n'
      << "wealth_scale " << hex(c.norm.wealth_scale) << '\n'
      << "config_hash " << std::hex << std::setw(16) << std::setfill('0') << c.config_hash << std::dec << '\n'
      << "iteration " << c.iteration << '\n'
      << "values " << c.params.size() << '\n';
  for (double v : c.params.values()) out << hex(v) << '\n';
  if (!out) throw IoError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& name = "checkpoint") {
  auto fail = [&](const std::string& what) { return DataError(name + ": " + what); };
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) throw fail(std::string("expected '") + key + "'");
  };
  auto read_double = [&]() {
    std::string tok;
    if (!(in >> tok)) throw fail("truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw fail("bad number '" + tok + "'");
    return v;
  };
  expect("decum-policy-checkpoint");
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion)
    throw fail("unsupported checkpoint version " + std::to_string(version));
  expect("widths");
  MlpShape shape;
  if (!(in >> shape.k1 >> shape.k2 >> shape.k3)) throw fail("bad widths");
  Checkpoint c{MlpParams(shape), {}, 0, 0};
  expect("time_scale");
  c.norm.time_scale = read_double();
  expect("wealth_scale");
  c.norm.wealth_scale = read_double();
  expect("config_hash");
  if (!(in >> std::hex >> c.config_hash >> std::dec)) throw fail("bad config hash");
  expect("iteration");
  if (!(in >> c.iteration)) throw fail("bad iteration");
  expect("values");
  std::size_t n = 0;
  if (!(in >> n) || n != c.params.size()) throw fail("parameter count does not match widths");
  for (auto& v : c.params.values()) v = read_double();
  c.norm.validate();
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_checkpoint(out, c);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_checkpoint(in, path);
}

}  // namespace decum::policy
