#pragma once

// Minimal define-by-run reverse-mode autodiff over dense row-major matrices
// of doubles. Every op returns a new Value; nothing mutates its inputs.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace engrave::ad {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix&) const = default;
};

// xoshiro256** seeded through splitmix64: the integer stream is identical on
// every platform for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);  // [0, n)

 private:
  std::uint64_t s_[4];
};

struct Node;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first accumulation
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  bool requires_grad = false;

  Matrix& grad_buffer();
};

class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Value constant(Matrix m);
  static Value parameter(Matrix m);

  const Matrix& data() const { return node_->value; }
  Matrix& mutable_data() { return node_->value; }
  // Empty matrix until a gradient has reached this node.
  const Matrix& grad() const { return node_->grad; }
  int rows() const { return node_->value.rows; }
  int cols() const { return node_->value.cols; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }

  void zero_grad();
  // Seeds d(this)/d(this) = 1 for a 1x1 value and propagates to every
  // reachable node that requires a gradient.
  void backward();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds a custom op. Parents that do not require gradients are kept only
// while recording is enabled and at least one parent needs a gradient.
Value make_op(Matrix value, std::vector<Value> parents, BackwardFn backward);

// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool recording_enabled();

// Primitives.
Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);  // b may be a 1 x cols row bias
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value concat_cols(const std::vector<Value>& parts);
Value slice_cols(const Value& a, int begin, int end);
Value concat_rows(const std::vector<Value>& parts);
Value row_gather(const Value& a, std::span<const int> index);
Value scatter_sum(const Value& a, std::span<const int> index, int out_rows);
Value relu(const Value& a);
Value sigmoid(const Value& a);
Value tanh(const Value& a);
Value softmax_rows(const Value& a);
Value log(const Value& a);
Value dropout(const Value& a, double p, Rng& rng, bool train);
Value layer_norm(const Value& a, const Value& gain, const Value& bias, double eps = 1e-5);
Value sum(const Value& a);
Value mean(const Value& a);

// Mean over rows of -log softmax(logits)[target]; numerically stable.
Value cross_entropy(const Value& logits, std::span<const int> targets);
// Mean binary cross-entropy of an N x 1 logit column against 0/1 targets.
Value bce_with_logits(const Value& logits, std::span<const double> targets);

struct NamedParameter {
  std::string name;
  Value value;
};
using ParameterList = std::vector<NamedParameter>;

void zero_grads(const ParameterList& params);

// Glorot-uniform fill.
Matrix glorot(int rows, int cols, Rng& rng);

}  // namespace engrave::ad
